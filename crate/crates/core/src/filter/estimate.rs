use crate::models::{normalize_angle, Pose2D};
use crate::scalar::StorageScalar;

use super::pool::Particle;

/// Weighted partial sums of one reduction block.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct PoseMoments {
    pub w: f64,
    pub wx: f64,
    pub wy: f64,
    pub wsin: f64,
    pub wcos: f64,
}

impl PoseMoments {
    #[inline]
    pub fn of_block<S: StorageScalar>(particles: &[Particle<S>]) -> Self {
        let mut m = Self::default();
        for p in particles {
            let w = p.weight();
            let (s, c) = p.theta.load().sin_cos();
            m.w += w;
            m.wx += w * p.x.load();
            m.wy += w * p.y.load();
            m.wsin += w * s;
            m.wcos += w * c;
        }
        m
    }

    pub fn add(&mut self, o: &Self) {
        self.w += o.w;
        self.wx += o.wx;
        self.wy += o.wy;
        self.wsin += o.wsin;
        self.wcos += o.wcos;
    }
}

/// Minimum resultant length for a meaningful circular mean.
pub const MIN_RESULTANT: f64 = 1e-9;

/// Weighted mean position and circular mean heading from combined moments.
/// Falls back to the heading of the heaviest particle when the headings
/// cancel out.
pub(crate) fn pose_from_moments<S: StorageScalar>(
    m: &PoseMoments,
    particles: &[Particle<S>],
) -> Pose2D<f64> {
    let w = if m.w > 0.0 { m.w } else { 1.0 };
    let theta = if m.wsin.hypot(m.wcos) / w < MIN_RESULTANT {
        particles
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.weight().total_cmp(&b.1.weight()).then(b.0.cmp(&a.0)))
            .map(|(_, p)| p.theta.load())
            .unwrap_or(0.0)
    } else {
        m.wsin.atan2(m.wcos)
    };
    Pose2D {
        x: m.wx / w,
        y: m.wy / w,
        theta: normalize_angle(theta),
    }
}

/// Sequential weighted pose estimate of a particle set.
pub fn estimate_pose<S: StorageScalar>(particles: &[Particle<S>]) -> Pose2D<f64> {
    let mut m = PoseMoments::default();
    for block in particles.chunks(super::parallel::REDUCTION_BLOCK) {
        m.add(&PoseMoments::of_block(block));
    }
    pose_from_moments(&m, particles)
}
