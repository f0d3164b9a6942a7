use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Pose2D, SensorId, SensorRig, ToFScan, Zone};

use super::world::World;

/// Range noise model of the simulated multizone sensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoise {
    /// Gaussian range noise, meters.
    pub range_sigma: f64,
    /// Probability that a zone reports an error flag.
    pub dropout: f64,
    /// Longest measurable range, meters.
    pub max_range: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self {
            range_sigma: 0.02,
            dropout: 0.05,
            max_range: 1.5,
        }
    }
}

impl SensorNoise {
    pub fn noiseless(max_range: f64) -> Self {
        Self {
            range_sigma: 0.0,
            dropout: 0.0,
            max_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range_sigma >= 0.0)
            || !(0.0..1.0).contains(&self.dropout)
            || !(self.max_range > 0.0)
        {
            return Err(Error::InvalidSpec(format!(
                "sensor noise needs range_sigma >= 0, dropout in [0, 1), max_range > 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// One frame of `sensor` at `pose`. Every zone of a column looks along the
/// column's azimuth and gets independent noise and dropout; zones without a
/// wall within `max_range` are flagged invalid.
pub fn simulate_scan<R: Rng + ?Sized>(
    world: &World,
    pose: &Pose2D<f64>,
    sensor: SensorId,
    rig: &SensorRig,
    noise: &SensorNoise,
    timestamp: f64,
    rng: &mut R,
) -> Result<ToFScan> {
    noise.validate()?;
    let geom = rig.geometry(sensor);
    let side = rig.layout.side();
    let hits: Vec<_> = geom
        .azimuths()
        .iter()
        .map(|a| {
            world.raycast(
                [pose.x, pose.y],
                pose.theta + geom.mount_yaw() + a,
                noise.max_range,
            )
        })
        .collect();
    let mut zones = Vec::with_capacity(side * side);
    for _row in 0..side {
        for hit in &hits {
            let dropped = rng.random::<f64>() < noise.dropout;
            let e: f64 = StandardNormal.sample(rng);
            zones.push(if dropped || !hit.hit {
                Zone::invalid()
            } else {
                Zone::valid((hit.range + noise.range_sigma * e).max(0.0))
            });
        }
    }
    ToFScan::new(timestamp, sensor, zones)
}
