//! Monte Carlo localization filter.
//!
//! Odometry drives the motion update whenever it arrives; range scans are
//! only folded in once the vehicle has moved more than `d_xy` or turned more
//! than `d_theta` since the last correction. A correction reweights the
//! particles, resamples them systematically and recomputes the pose estimate.
//!
//! All per-particle work is split into static contiguous chunks, one per
//! worker. Random numbers come from per-particle counter-based streams and
//! floating point reductions are combined in a fixed block order, so a run is
//! bit-identical for any worker count.

mod checkpoint;
mod estimate;
mod parallel;
mod pool;
mod resample;

pub use checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use estimate::{estimate_pose, MIN_RESULTANT};
pub use parallel::{even_split, REDUCTION_BLOCK};
pub use pool::{Particle, ParticlePool};
pub use resample::{
    copy_counts, resample_partition, systematic_indices, to_fixed, ResamplePlan, WorkerShare,
};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_map::{DistanceField, NumericPolicy, OccupancyGrid};
use crate::models::{
    sample_motion, wrap_to_pi, NoiseParams, Observation, OdometryDelta, Pose2D, SensorRig, ToFScan,
};
use crate::rng::{derive_seed, RandomStream};
use crate::scalar::StorageScalar;

use estimate::{pose_from_moments, PoseMoments};
use parallel::{block_split, split_ranges, Workers};

const DOMAIN_INIT: u64 = 1;
const DOMAIN_MOTION: u64 = 2;
const DOMAIN_RESAMPLE: u64 = 3;

/// Allowed deviation of the weight sum from 1 before resampling.
pub const RESAMPLE_SUM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Number of particles.
    pub particles: usize,
    /// Odometry noise `(x m, y m, θ rad)` per motion update.
    pub sigma_odom: [f64; 3],
    /// Observation model spread, in `sigma_obs_unit`.
    pub sigma_obs: f64,
    pub sigma_obs_unit: LengthUnit,
    /// Distance field truncation, meters.
    pub r_max: f64,
    /// Translation that triggers a correction, meters.
    pub d_xy: f64,
    /// Rotation that triggers a correction, radians.
    pub d_theta: f64,
    pub policy: NumericPolicy,
    pub seed: u64,
    pub workers: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            particles: 4096,
            sigma_odom: [0.1, 0.1, 0.1],
            sigma_obs: 2.0,
            sigma_obs_unit: LengthUnit::Cells,
            r_max: 1.5,
            d_xy: 0.1,
            d_theta: 0.1,
            policy: NumericPolicy::Fp32,
            seed: 0,
            workers: 1,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles == 0 {
            return Err(Error::input("particles must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::input("workers must be at least 1"));
        }
        if !(self.d_xy > 0.0) || !(self.d_theta > 0.0) {
            return Err(Error::input("d_xy and d_theta must be positive"));
        }
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return Err(Error::input("r_max must be positive"));
        }
        NoiseParams::new(self.sigma_odom, self.sigma_obs)?;
        Ok(())
    }
}

/// Unit of a length given in the filter configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    /// Grid cells of the map the filter runs on.
    #[default]
    Cells,
    Meters,
}

impl LengthUnit {
    pub fn to_meters(self, value: f64, resolution: f64) -> f64 {
        match self {
            LengthUnit::Cells => value * resolution,
            LengthUnit::Meters => value,
        }
    }
}

impl FilterConfig {
    /// `sigma_obs` in meters on a map of cell size `resolution`.
    pub fn sigma_obs_m(&self, resolution: f64) -> f64 {
        self.sigma_obs_unit.to_meters(self.sigma_obs, resolution)
    }
}

/// True once accumulated motion exceeds either correction threshold.
pub fn should_correct(motion: &OdometryDelta<f64>, config: &FilterConfig) -> bool {
    motion.translation() > config.d_xy || wrap_to_pi(motion.dtheta).abs() > config.d_theta
}

/// Particles spread uniformly over the free cells with uniform headings.
pub fn init_uniform<S: StorageScalar>(
    config: &FilterConfig,
    grid: &OccupancyGrid,
) -> Result<ParticlePool<S>> {
    config.validate()?;
    let free = grid.free_cells();
    if free.is_empty() {
        return Err(Error::InvalidMap("map has no free cell".into()));
    }
    let key = derive_seed(config.seed, DOMAIN_INIT, 0);
    let res = grid.resolution();
    let w = 1.0 / config.particles as f64;
    let particles = (0..config.particles)
        .map(|i| {
            let mut rng = RandomStream::new(key, i as u64);
            let cell = free[((rng.uniform() * free.len() as f64) as usize).min(free.len() - 1)];
            let c = grid.cell_center(cell % grid.width(), cell / grid.width());
            let x = c[0] + (rng.uniform() - 0.5) * res;
            let y = c[1] + (rng.uniform() - 0.5) * res;
            let theta = rng.uniform() * std::f64::consts::TAU;
            Particle::from_pose(&Pose2D::new(x, y, theta), w)
        })
        .collect();
    Ok(ParticlePool::new(particles))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrectOutcome {
    Applied {
        beams: usize,
    },
    /// Every zone was invalid; weights are unchanged.
    NoValidBeams,
}

/// Wall-clock nanoseconds spent in each stage of one step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTimings {
    pub observation_ns: u64,
    pub motion_ns: u64,
    pub resampling_ns: u64,
    pub pose_ns: u64,
    pub total_ns: u64,
}

impl StageTimings {
    pub fn stages_ns(&self) -> u64 {
        self.observation_ns + self.motion_ns + self.resampling_ns + self.pose_ns
    }

    /// Time outside the four stages: scan preprocessing and bookkeeping.
    pub fn overhead_ns(&self) -> u64 {
        self.total_ns.saturating_sub(self.stages_ns())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub estimate: Pose2D<f64>,
    pub predicted: bool,
    pub corrected: bool,
    pub timings: StageTimings,
}

#[inline]
fn elapsed_ns(t: Instant) -> u64 {
    t.elapsed().as_nanos() as u64
}

/// The localization filter, storing particles at precision `S`.
#[derive(Debug)]
pub struct ParticleFilter<S: StorageScalar> {
    config: FilterConfig,
    rig: SensorRig,
    workers: Workers,
    pool: ParticlePool<S>,
    motion_epoch: u64,
    resample_epoch: u64,
    since_correction: OdometryDelta<f64>,
    estimate: Pose2D<f64>,
    log_w: Vec<f64>,
    block_sums: Vec<f64>,
    fixed: Vec<u64>,
}

impl<S: StorageScalar> ParticleFilter<S> {
    /// Filter for global localization: particles uniform over the free space.
    pub fn new(config: FilterConfig, rig: SensorRig, grid: &OccupancyGrid) -> Result<Self> {
        let pool = init_uniform(&config, grid)?;
        Self::with_pool(config, rig, pool)
    }

    /// Filter starting from given poses with uniform weights.
    pub fn from_poses(
        mut config: FilterConfig,
        rig: SensorRig,
        poses: &[Pose2D<f64>],
    ) -> Result<Self> {
        config.particles = poses.len();
        let w = 1.0 / poses.len().max(1) as f64;
        let pool = ParticlePool::new(poses.iter().map(|p| Particle::from_pose(p, w)).collect());
        Self::with_pool(config, rig, pool)
    }

    fn with_pool(config: FilterConfig, rig: SensorRig, pool: ParticlePool<S>) -> Result<Self> {
        config.validate()?;
        if config.policy.half_particles() != (S::BYTES == 2) {
            return Err(Error::input(format!(
                "policy {} cannot store particles as {}",
                config.policy,
                S::NAME
            )));
        }
        let workers = Workers::new(config.workers)?;
        let mut filter = Self {
            config,
            rig,
            workers,
            pool,
            motion_epoch: 0,
            resample_epoch: 0,
            since_correction: OdometryDelta::zero(),
            estimate: Pose2D::default(),
            log_w: Vec::new(),
            block_sums: Vec::new(),
            fixed: Vec::new(),
        };
        filter.estimate = filter.estimate_pose();
        Ok(filter)
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn rig(&self) -> &SensorRig {
        &self.rig
    }

    pub fn len(&self) -> usize {
        self.pool.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pool.is_empty()
    }

    pub fn particles(&self) -> &[Particle<S>] {
        self.pool.particles()
    }

    pub fn pool(&self) -> &ParticlePool<S> {
        &self.pool
    }

    pub fn estimate(&self) -> Pose2D<f64> {
        self.estimate
    }

    /// Motion accumulated since the last applied correction.
    pub fn motion_since_correction(&self) -> OdometryDelta<f64> {
        self.since_correction
    }

    /// Overwrites the weights, e.g. to set up a test scenario.
    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.len() {
            return Err(Error::input("one weight per particle required"));
        }
        for (p, &w) in self.pool.particles_mut().iter_mut().zip(weights) {
            p.weight = S::store(w);
        }
        Ok(())
    }

    /// Changes the worker count. Results do not depend on it.
    pub fn set_workers(&mut self, workers: usize) -> Result<()> {
        self.workers = Workers::new(workers)?;
        self.config.workers = workers;
        Ok(())
    }

    fn check_field(&self, field: &DistanceField) -> Result<()> {
        if field.policy().quantized_map() != self.config.policy.quantized_map() {
            return Err(Error::input(format!(
                "field stored as {} but filter policy is {}",
                field.policy(),
                self.config.policy
            )));
        }
        if (field.r_max() - self.config.r_max).abs() > 1e-6 {
            return Err(Error::input(format!(
                "field truncated at {} m but filter expects {} m",
                field.r_max(),
                self.config.r_max
            )));
        }
        Ok(())
    }

    /// Motion update: every particle samples the odometry proposal from its
    /// own random stream. Weights are untouched.
    pub fn predict(&mut self, u: &OdometryDelta<f64>) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::input("odometry increment is not finite"));
        }
        let key = derive_seed(self.config.seed, DOMAIN_MOTION, self.motion_epoch);
        let sigma = self.config.sigma_odom;
        let ranges = even_split(self.pool.len(), self.workers.count(), REDUCTION_BLOCK);
        let starts: Vec<usize> = ranges.iter().map(|r| r.start).collect();
        let chunks = split_ranges(self.pool.particles_mut(), &ranges);
        self.workers.run(
            starts.into_iter().zip(chunks).collect(),
            |(start, chunk)| {
                for (k, p) in chunk.iter_mut().enumerate() {
                    let mut rng = RandomStream::new(key, (start + k) as u64);
                    let moved = sample_motion(&p.pose(), u, &sigma, &mut rng);
                    *p = Particle {
                        weight: p.weight,
                        ..Particle::from_pose(&moved, 0.0)
                    };
                }
            },
        );
        self.motion_epoch += 1;
        self.since_correction = self.since_correction.then(u);
        Ok(())
    }

    /// Measurement update: multiplies every weight by the observation
    /// likelihood and renormalizes, shifting log weights by their maximum
    /// before exponentiating.
    pub fn correct(&mut self, obs: &Observation, field: &DistanceField) -> Result<CorrectOutcome> {
        self.check_field(field)?;
        if obs.is_empty() {
            return Ok(CorrectOutcome::NoValidBeams);
        }
        let n = self.pool.len();
        let w = self.workers.count();
        let sigma = self.config.sigma_obs_m(field.resolution());
        let (items, blocks) = block_split(n, w);
        self.log_w.resize(n, 0.0);
        self.block_sums.resize(n.div_ceil(REDUCTION_BLOCK), 0.0);

        let mut maxima = vec![f64::NEG_INFINITY; w];
        {
            let particles = self.pool.particles();
            let logs = split_ranges(&mut self.log_w, &items);
            let tasks: Vec<_> = items
                .iter()
                .cloned()
                .zip(logs)
                .zip(maxima.iter_mut())
                .collect();
            self.workers.run(tasks, |((range, logs), max)| {
                for (lw, p) in logs.iter_mut().zip(&particles[range]) {
                    *lw = p.weight().ln()
                        + obs.log_likelihood(p.x.load(), p.y.load(), p.theta.load(), field, sigma);
                    if *lw > *max {
                        *max = *lw;
                    }
                }
            });
        }
        let max = maxima.into_iter().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Consistency(format!("maximum log weight is {max}")));
        }

        {
            let logs = split_ranges(&mut self.log_w, &items);
            let sums = split_ranges(&mut self.block_sums, &blocks);
            self.workers
                .run(logs.into_iter().zip(sums).collect(), |(logs, sums)| {
                    for (chunk, sum) in logs.chunks_mut(REDUCTION_BLOCK).zip(sums.iter_mut()) {
                        let mut acc = 0.0;
                        for lw in chunk.iter_mut() {
                            *lw = (*lw - max).exp();
                            acc += *lw;
                        }
                        *sum = acc;
                    }
                });
        }
        let total: f64 = self.block_sums.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Consistency(format!("weight total is {total}")));
        }

        let inv = 1.0 / total;
        let log_w = &self.log_w;
        let chunks = split_ranges(self.pool.particles_mut(), &items);
        self.workers.run(
            items.iter().cloned().zip(chunks).collect(),
            |(range, chunk)| {
                for (p, e) in chunk.iter_mut().zip(&log_w[range]) {
                    p.weight = S::store(e * inv);
                }
            },
        );
        Ok(CorrectOutcome::Applied { beams: obs.len() })
    }

    /// Systematic resampling with a fresh offset from the resampling stream.
    pub fn resample(&mut self) -> Result<()> {
        let key = derive_seed(self.config.seed, DOMAIN_RESAMPLE, self.resample_epoch);
        let u = RandomStream::new(key, 0).uniform();
        self.resample_epoch += 1;
        self.resample_with_draw(u)
    }

    /// Systematic resampling with first arrow at `u / N`, `u ∈ [0, 1)`.
    ///
    /// Each worker sums the fixed-point weights of its input share; those
    /// partial sums tell every worker which output slots it fills. Output
    /// goes to the spare buffer, which then becomes active.
    pub fn resample_with_draw(&mut self, u: f64) -> Result<()> {
        let n = self.pool.len();
        let w = self.workers.count();
        let inputs = even_split(n, w, 1);
        self.fixed.resize(n, 0);

        let mut partial = vec![(0u128, 0f64); w];
        {
            let particles = self.pool.particles();
            let fixed = split_ranges(&mut self.fixed, &inputs);
            let tasks: Vec<_> = inputs
                .iter()
                .cloned()
                .zip(fixed)
                .zip(partial.iter_mut())
                .collect();
            self.workers.run(tasks, |((range, fixed), out)| {
                let (mut q_sum, mut f_sum) = (0u128, 0f64);
                for (q, p) in fixed.iter_mut().zip(&particles[range]) {
                    let wi = p.weight();
                    *q = to_fixed(wi);
                    q_sum += *q as u128;
                    f_sum += wi;
                }
                *out = (q_sum, f_sum);
            });
        }
        let sum: f64 = partial.iter().map(|p| p.1).sum();
        if !((sum - 1.0).abs() <= RESAMPLE_SUM_TOLERANCE) {
            return Err(Error::Consistency(format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        let sums: Vec<u128> = partial.iter().map(|p| p.0).collect();
        let plan = ResamplePlan::from_partial_sums(n, inputs, &sums, u);

        let uniform = S::store(1.0 / n as f64);
        let fixed = &self.fixed;
        let plan_ref = &plan;
        let (active, spare) = self.pool.split();
        let outputs: Vec<_> = plan.shares.iter().map(|s| s.output.clone()).collect();
        let slots = split_ranges(spare, &outputs);
        self.workers
            .run(plan.shares.iter().zip(slots).collect(), |(share, slots)| {
                let base = share.output.start;
                plan_ref.walk(share, &fixed[share.input.clone()], |k, i| {
                    slots[k - base] = Particle {
                        weight: uniform,
                        ..active[i]
                    };
                });
            });
        self.pool.swap();
        Ok(())
    }

    /// Weighted mean position and circular mean heading of the pool.
    pub fn estimate_pose(&mut self) -> Pose2D<f64> {
        let n = self.pool.len();
        let (items, blocks) = block_split(n, self.workers.count());
        let mut moments = vec![PoseMoments::default(); n.div_ceil(REDUCTION_BLOCK)];
        {
            let particles = self.pool.particles();
            let outs = split_ranges(&mut moments, &blocks);
            self.workers
                .run(items.into_iter().zip(outs).collect(), |(range, outs)| {
                    for (block, m) in particles[range]
                        .chunks(REDUCTION_BLOCK)
                        .zip(outs.iter_mut())
                    {
                        *m = PoseMoments::of_block(block);
                    }
                });
        }
        let mut total = PoseMoments::default();
        moments.iter().for_each(|m| total.add(m));
        pose_from_moments(&total, self.pool.particles())
    }

    /// One filter cycle for whatever inputs arrived: motion update on
    /// odometry; correction, resampling and pose computation when scans are
    /// present and the vehicle moved enough. The pose estimate is refreshed
    /// whenever the particles changed.
    pub fn step(
        &mut self,
        odometry: Option<&OdometryDelta<f64>>,
        scans: &[ToFScan],
        field: &DistanceField,
    ) -> Result<StepOutcome> {
        let start = Instant::now();
        let mut timings = StageTimings::default();
        let mut predicted = false;
        let mut corrected = false;

        if let Some(u) = odometry {
            let t = Instant::now();
            self.predict(u)?;
            timings.motion_ns = elapsed_ns(t);
            predicted = true;
        }
        if !scans.is_empty() && should_correct(&self.since_correction, &self.config) {
            let obs = Observation::from_scans(scans, &self.rig)?;
            let t = Instant::now();
            let outcome = self.correct(&obs, field)?;
            timings.observation_ns = elapsed_ns(t);
            if let CorrectOutcome::Applied { .. } = outcome {
                let t = Instant::now();
                self.resample()?;
                timings.resampling_ns = elapsed_ns(t);
                self.since_correction = OdometryDelta::zero();
                corrected = true;
            }
        }
        if predicted || corrected {
            let t = Instant::now();
            self.estimate = self.estimate_pose();
            timings.pose_ns = elapsed_ns(t);
        }
        timings.total_ns = elapsed_ns(start);
        Ok(StepOutcome {
            estimate: self.estimate,
            predicted,
            corrected,
            timings,
        })
    }
}
