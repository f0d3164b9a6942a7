use std::f64::consts::TAU;

use crate::models::Pose2D;
use crate::scalar::StorageScalar;

/// A pose hypothesis with its importance weight, stored at precision `S`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[repr(C)]
pub struct Particle<S> {
    pub x: S,
    pub y: S,
    pub theta: S,
    pub weight: S,
}

impl<S: StorageScalar> Particle<S> {
    /// Rounds a pose into storage. A heading that rounds up to 2π is stored
    /// as 0 so the stored heading stays in `[0, 2π)`.
    #[inline]
    pub fn from_pose(pose: &Pose2D<f64>, weight: f64) -> Self {
        let mut theta = S::store(pose.theta);
        if theta.load() >= TAU {
            theta = S::store(0.0);
        }
        Self {
            x: S::store(pose.x),
            y: S::store(pose.y),
            theta,
            weight: S::store(weight),
        }
    }

    #[inline]
    pub fn pose(&self) -> Pose2D<f64> {
        Pose2D {
            x: self.x.load(),
            y: self.y.load(),
            theta: self.theta.load(),
        }
    }

    #[inline]
    pub fn weight(&self) -> f64 {
        self.weight.load()
    }
}

/// Two particle buffers: the active set and a spare that resampling writes.
#[derive(Debug, Clone)]
pub struct ParticlePool<S> {
    buffers: [Vec<Particle<S>>; 2],
    active: usize,
}

impl<S: StorageScalar> ParticlePool<S> {
    pub fn new(particles: Vec<Particle<S>>) -> Self {
        let spare = vec![Particle::default(); particles.len()];
        Self {
            buffers: [particles, spare],
            active: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.buffers[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn particles(&self) -> &[Particle<S>] {
        &self.buffers[self.active]
    }

    pub fn particles_mut(&mut self) -> &mut [Particle<S>] {
        &mut self.buffers[self.active]
    }

    /// `(active, spare)`.
    pub fn split(&mut self) -> (&[Particle<S>], &mut [Particle<S>]) {
        let (a, b) = self.buffers.split_at_mut(1);
        if self.active == 0 {
            (&a[0], &mut b[0])
        } else {
            (&b[0], &mut a[0])
        }
    }

    /// Makes the spare buffer active.
    pub fn swap(&mut self) {
        self.active ^= 1;
    }

    pub fn active_index(&self) -> usize {
        self.active
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles().iter().map(|p| p.weight()).sum()
    }

    /// Bytes held by both buffers.
    pub fn storage_bytes(&self) -> usize {
        2 * self.len() * std::mem::size_of::<Particle<S>>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use half::f16;

    #[test]
    fn particle_sizes() {
        assert_eq!(std::mem::size_of::<Particle<f32>>(), 16);
        assert_eq!(std::mem::size_of::<Particle<f16>>(), 8);
        let pool = ParticlePool::<f32>::new(vec![Particle::default(); 10]);
        assert_eq!(pool.storage_bytes(), 320);
        let pool = ParticlePool::<f16>::new(vec![Particle::default(); 10]);
        assert_eq!(pool.storage_bytes(), 160);
    }

    #[test]
    fn heading_rounding_stays_below_tau() {
        let p = Particle::<f16>::from_pose(&Pose2D::new(0.0, 0.0, TAU - 1e-4), 1.0);
        assert!(p.theta.load() < TAU);
    }

    #[test]
    fn buffers_are_distinct() {
        let mut pool = ParticlePool::<f32>::new(vec![
            Particle {
                x: 1.0,
                ..Default::default()
            };
            3
        ]);
        {
            let (a, b) = pool.split();
            assert_eq!(a[0].x, 1.0);
            b[0].x = 5.0;
        }
        assert_eq!(pool.particles()[0].x, 1.0);
        pool.swap();
        assert_eq!(pool.particles()[0].x, 5.0);
        assert_eq!(pool.active_index(), 1);
    }
}
