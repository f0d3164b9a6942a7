use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{wrap_to_pi, Pose2D};

use super::world::World;

/// Waypoint tour flown by the simulated vehicle: turn in place toward the
/// next waypoint at the yaw-rate limit, then fly straight to it. The tour
/// repeats until `duration` has elapsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    /// Positions in meters; the heading of the first sets the start heading.
    pub waypoints: Vec<Pose2D<f64>>,
    /// Forward speed, m/s.
    pub speed: f64,
    /// Yaw rate limit, rad/s.
    pub yaw_rate: f64,
    /// Sample rate, Hz.
    pub rate_hz: f64,
    /// Sequence length, seconds.
    pub duration: f64,
    /// Minimum distance to walls along the tour, meters.
    #[serde(default = "default_clearance")]
    pub clearance: f64,
    /// Counter-clockwise turn in place before leaving the first waypoint,
    /// radians.
    #[serde(default)]
    pub spin: f64,
}

fn default_clearance() -> f64 {
    0.15
}

impl TrajectorySpec {
    pub fn validate(&self, world: &World) -> Result<()> {
        if self.waypoints.len() < 2 {
            return Err(Error::InvalidSpec(
                "a trajectory needs at least two waypoints".into(),
            ));
        }
        for (name, v) in [
            ("speed", self.speed),
            ("yaw_rate", self.yaw_rate),
            ("rate_hz", self.rate_hz),
            ("duration", self.duration),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.clearance >= 0.0) {
            return Err(Error::InvalidSpec("clearance must be non-negative".into()));
        }
        if !(self.spin >= 0.0) || !self.spin.is_finite() {
            return Err(Error::InvalidSpec("spin must be non-negative".into()));
        }
        let n = self.waypoints.len();
        for i in 0..n {
            let a = &self.waypoints[i];
            let b = &self.waypoints[(i + 1) % n];
            if !world.path_clear([a.x, a.y], [b.x, b.y], self.clearance) {
                return Err(Error::InvalidSpec(format!(
                    "waypoint {} ({:.2}, {:.2}) cannot reach waypoint {} ({:.2}, {:.2}) through free space",
                    i,
                    a.x,
                    a.y,
                    (i + 1) % n,
                    b.x,
                    b.y
                )));
            }
        }
        Ok(())
    }

    pub fn ticks(&self) -> usize {
        (self.duration * self.rate_hz).round() as usize
    }

    /// Ground-truth pose at every tick.
    pub fn generate(&self, world: &World) -> Result<Vec<Pose2D<f64>>> {
        self.validate(world)?;
        let dt = 1.0 / self.rate_hz;
        let max_turn = self.yaw_rate * dt;
        let max_step = self.speed * dt;
        let mut pose = self.waypoints[0];
        let mut target = 1;
        let mut out = Vec::with_capacity(self.ticks());
        out.push(pose);
        let mut spin = self.spin;
        while spin > 0.0 && out.len() < self.ticks() {
            let d = spin.min(max_turn);
            spin -= d;
            pose = Pose2D::new(pose.x, pose.y, pose.theta + d);
            out.push(pose);
        }
        while out.len() < self.ticks() {
            let goal = self.waypoints[target];
            let (gx, gy) = (goal.x - pose.x, goal.y - pose.y);
            let dist = gx.hypot(gy);
            if dist < 1e-9 {
                target = (target + 1) % self.waypoints.len();
                continue;
            }
            let turn = wrap_to_pi(gy.atan2(gx) - pose.theta);
            if turn.abs() > 1e-9 {
                pose = Pose2D::new(pose.x, pose.y, pose.theta + turn.clamp(-max_turn, max_turn));
            } else if dist <= max_step {
                pose = Pose2D::new(goal.x, goal.y, pose.theta);
                target = (target + 1) % self.waypoints.len();
            } else {
                let (s, c) = pose.theta.sin_cos();
                pose = Pose2D::new(pose.x + c * max_step, pose.y + s * max_step, pose.theta);
            }
            out.push(pose);
        }
        Ok(out)
    }
}
