//! Step latency, multi-worker speedup and memory tables.
//!
//! Every benchmark cell runs the same deterministic scenario, so cells that
//! differ only in worker count do identical work and end in the same state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::quantile;
use crate::filter::{FilterConfig, ParticleFilter, StageTimings};
use crate::grid_map::{memory_footprint, DistanceField, NumericPolicy};
use crate::models::{OdometryDelta, Pose2D, SensorId, SensorRig, ToFScan};
use crate::rng::{derive_seed, RandomStream};
use crate::run::prepare_field;
use crate::scalar::StorageScalar;
use crate::sim::{builtin_world, simulate_scan, SensorNoise, World, EXTENDED_WORLD, PRIMARY_MAZE};

pub const MIN_WARMUP: usize = 3;
pub const MIN_REPETITIONS: usize = 30;

/// Particle counts of the timing table.
pub const PARTICLE_COUNTS: [usize; 5] = [64, 256, 1024, 4096, 16384];
pub const WORKER_COUNTS: [usize; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub particles: Vec<usize>,
    pub workers: Vec<usize>,
    pub warmup: usize,
    pub repetitions: usize,
    pub policy: NumericPolicy,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            particles: PARTICLE_COUNTS.to_vec(),
            workers: WORKER_COUNTS.to_vec(),
            warmup: MIN_WARMUP,
            repetitions: MIN_REPETITIONS,
            policy: NumericPolicy::Fp32,
            seed: 0,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup < MIN_WARMUP || self.repetitions < MIN_REPETITIONS {
            return Err(Error::input(format!(
                "benchmarks need at least {MIN_WARMUP} warmup steps and {MIN_REPETITIONS} repetitions"
            )));
        }
        if self.particles.is_empty() || self.particles.contains(&0) {
            return Err(Error::input("particle counts must be non-empty and positive"));
        }
        if self.workers.is_empty() || self.workers.contains(&0) {
            return Err(Error::input("worker counts must be non-empty and positive"));
        }
        Ok(())
    }
}

/// A timed part of the filter step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Observation,
    Motion,
    Resampling,
    Pose,
    Overhead,
    Total,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Observation,
        Stage::Motion,
        Stage::Resampling,
        Stage::Pose,
        Stage::Overhead,
        Stage::Total,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Observation => "observation",
            Stage::Motion => "motion",
            Stage::Resampling => "resampling",
            Stage::Pose => "pose",
            Stage::Overhead => "overhead",
            Stage::Total => "total",
        }
    }

    fn of(self, t: &StageTimings) -> u64 {
        match self {
            Stage::Observation => t.observation_ns,
            Stage::Motion => t.motion_ns,
            Stage::Resampling => t.resampling_ns,
            Stage::Pose => t.pose_ns,
            Stage::Overhead => t.overhead_ns(),
            Stage::Total => t.total_ns,
        }
    }
}

/// p10/p50/p90 of one stage over the repetitions, ns per step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        Some(Self { p10: quantile(values, 0.1)?, p50: quantile(values, 0.5)?, p90: quantile(values, 0.9)? })
    }
}

/// Timings of one (particle count, worker count) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub particles: usize,
    pub workers: usize,
    /// Median ns per particle of each of the four stages.
    pub observation_ns: f64,
    pub motion_ns: f64,
    pub resampling_ns: f64,
    pub pose_ns: f64,
    /// Median step time minus the four stage medians, ns per step.
    pub overhead_ns: f64,
    /// Per-step quantiles of every stage, in [`Stage::ALL`] order.
    pub quantiles: Vec<(Stage, Quantiles)>,
    /// Estimate after the last repetition.
    pub final_estimate: Pose2D<f64>,
}

impl TimingBreakdown {
    fn from_samples(particles: usize, workers: usize, samples: &[StageTimings], estimate: Pose2D<f64>) -> Self {
        let quantiles: Vec<(Stage, Quantiles)> = Stage::ALL
            .iter()
            .map(|&s| {
                let v: Vec<f64> = samples.iter().map(|t| s.of(t) as f64).collect();
                (s, Quantiles::of(&v).unwrap_or_default())
            })
            .collect();
        let p50 = |s: Stage| quantiles.iter().find(|q| q.0 == s).map_or(0.0, |q| q.1.p50);
        let n = particles as f64;
        let stages = p50(Stage::Observation) + p50(Stage::Motion) + p50(Stage::Resampling) + p50(Stage::Pose);
        Self {
            particles,
            workers,
            observation_ns: p50(Stage::Observation) / n,
            motion_ns: p50(Stage::Motion) / n,
            resampling_ns: p50(Stage::Resampling) / n,
            pose_ns: p50(Stage::Pose) / n,
            overhead_ns: p50(Stage::Total) - stages,
            quantiles,
            final_estimate: estimate,
        }
    }

    pub fn quantiles(&self, stage: Stage) -> Quantiles {
        self.quantiles.iter().find(|q| q.0 == stage).map(|q| q.1).unwrap_or_default()
    }

    /// Median ns per step of a stage.
    pub fn median_ns(&self, stage: Stage) -> f64 {
        match stage {
            Stage::Observation => self.observation_ns * self.particles as f64,
            Stage::Motion => self.motion_ns * self.particles as f64,
            Stage::Resampling => self.resampling_ns * self.particles as f64,
            Stage::Pose => self.pose_ns * self.particles as f64,
            Stage::Overhead => self.overhead_ns,
            Stage::Total => self.total_ns(),
        }
    }

    /// Sum of the four stages and the overhead, ns per step.
    pub fn total_ns(&self) -> f64 {
        (self.observation_ns + self.motion_ns + self.resampling_ns + self.pose_ns) * self.particles as f64
            + self.overhead_ns
    }
}

/// One row of the long-format step CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: String,
    pub particles: usize,
    pub workers: usize,
    pub p10_ns: f64,
    pub p50_ns: f64,
    pub p90_ns: f64,
    pub ns_per_particle: f64,
}

/// Long-format rows keyed by (step, particles, workers).
pub fn step_rows(table: &[TimingBreakdown]) -> Vec<StepRow> {
    let mut rows = Vec::new();
    for b in table {
        for &(stage, q) in &b.quantiles {
            rows.push(StepRow {
                step: stage.as_str().into(),
                particles: b.particles,
                workers: b.workers,
                p10_ns: q.p10,
                p50_ns: q.p50,
                p90_ns: q.p90,
                ns_per_particle: q.p50 / b.particles as f64,
            });
        }
    }
    rows
}

/// Median time with one worker over median time with `workers`, for a stage
/// at a particle count.
pub fn speedup(table: &[TimingBreakdown], stage: Stage, particles: usize, workers: usize) -> Option<f64> {
    let cell = |w: usize| table.iter().find(|b| b.particles == particles && b.workers == w);
    let base = cell(1)?.quantiles(stage).p50;
    let par = cell(workers)?.quantiles(stage).p50;
    (par > 0.0).then(|| base / par)
}

/// Fixed benchmark input: a pose in the primary maze, its two scans, and an
/// odometry increment that triggers a correction on every step.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub world: World,
    pub rig: SensorRig,
    pub scans: Vec<ToFScan>,
    pub forward: OdometryDelta<f64>,
}

impl Scenario {
    pub fn builtin(seed: u64) -> Result<Self> {
        let world = builtin_world(EXTENDED_WORLD)?;
        let maze = world.maze(PRIMARY_MAZE).ok_or_else(|| Error::input("primary maze missing"))?;
        let res = world.grid().resolution();
        let c = world.grid().cell_center(maze.col + maze.width / 2, maze.row + maze.height / 2);
        let pose = Pose2D::new(c[0], c[1] + 2.0 * res, 0.3);
        let rig = SensorRig::default();
        let noise = SensorNoise::default();
        let mut rng = RandomStream::new(derive_seed(seed, 0x42, 0), 0);
        let scans = [SensorId::Front, SensorId::Rear]
            .into_iter()
            .map(|s| simulate_scan(&world, &pose, s, &rig, &noise, 0.0, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { world, rig, scans, forward: OdometryDelta::new(0.11, 0.0, 0.0) })
    }

    /// Odometry of step `k`: alternately forward and back so particles stay
    /// inside the map.
    fn odometry(&self, k: usize) -> OdometryDelta<f64> {
        if k % 2 == 0 {
            self.forward
        } else {
            self.forward.inverse()
        }
    }
}

fn bench_cell<S: StorageScalar>(
    scenario: &Scenario,
    field: &DistanceField,
    config: &FilterConfig,
    warmup: usize,
    repetitions: usize,
) -> Result<(Vec<StageTimings>, Pose2D<f64>)> {
    let mut filter = ParticleFilter::<S>::new(config.clone(), scenario.rig.clone(), scenario.world.grid())?;
    let mut samples = Vec::with_capacity(repetitions);
    let mut estimate = Pose2D::default();
    for k in 0..warmup + repetitions {
        let out = filter.step(Some(&scenario.odometry(k)), &scenario.scans, field)?;
        if !out.corrected {
            return Err(Error::Consistency(format!("benchmark step {k} skipped its correction")));
        }
        estimate = out.estimate;
        if k >= warmup {
            samples.push(out.timings);
        }
    }
    Ok((samples, estimate))
}

/// Times full filter steps for every particle count × worker count.
pub fn bench_step(config: &BenchConfig) -> Result<Vec<TimingBreakdown>> {
    config.validate()?;
    let scenario = Scenario::builtin(config.seed)?;
    let filter_config = FilterConfig { policy: config.policy, seed: config.seed, ..FilterConfig::default() };
    let field = prepare_field(scenario.world.grid(), &filter_config)?;
    let mut table = Vec::new();
    for &n in &config.particles {
        for &w in &config.workers {
            let cfg = FilterConfig { particles: n, workers: w, ..filter_config.clone() };
            let (samples, estimate) = if config.policy.half_particles() {
                bench_cell::<half::f16>(&scenario, &field, &cfg, config.warmup, config.repetitions)?
            } else {
                bench_cell::<f32>(&scenario, &field, &cfg, config.warmup, config.repetitions)?
            };
            table.push(TimingBreakdown::from_samples(n, w, &samples, estimate));
        }
    }
    Ok(table)
}

/// Memory of one policy at a particle count and map area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRow {
    pub policy: NumericPolicy,
    pub particles: u64,
    pub area_m2: f64,
    pub map_cells: u64,
    pub map_bytes: u64,
    pub particle_bytes: u64,
    pub total_bytes: u64,
}

/// Footprints over every policy × particle count × map area.
pub fn bench_memory(
    policies: &[NumericPolicy],
    particles: &[u64],
    areas_m2: &[f64],
    resolution: f64,
) -> Result<Vec<MemoryRow>> {
    if !(resolution > 0.0) {
        return Err(Error::input("resolution must be positive"));
    }
    let mut rows = Vec::new();
    for &policy in policies {
        for &n in particles {
            for &area in areas_m2 {
                let cells = (area / (resolution * resolution)).round() as u64;
                let f = memory_footprint(cells, n, policy);
                rows.push(MemoryRow {
                    policy,
                    particles: n,
                    area_m2: area,
                    map_cells: cells,
                    map_bytes: f.map_bytes,
                    particle_bytes: f.particle_bytes,
                    total_bytes: f.total(),
                });
            }
        }
    }
    Ok(rows)
}

/// One point of the particles-versus-area trade-off at a memory budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub policy: NumericPolicy,
    pub budget_bytes: u64,
    pub particles: u64,
    pub max_area_m2: f64,
}

/// Largest map area that fits next to each particle count in `budget_bytes`.
/// Particle counts that alone exceed the budget are skipped.
pub fn memory_tradeoff(
    policies: &[NumericPolicy],
    budget_bytes: u64,
    particles: &[u64],
    resolution: f64,
) -> Vec<TradeoffRow> {
    let mut rows = Vec::new();
    for &policy in policies {
        for &n in particles {
            let used = memory_footprint(0, n, policy).particle_bytes;
            if used > budget_bytes {
                continue;
            }
            let cells = (budget_bytes - used) / policy.bytes_per_cell();
            rows.push(TradeoffRow {
                policy,
                budget_bytes,
                particles: n,
                max_area_m2: cells as f64 * resolution * resolution,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(particles: Vec<usize>, workers: Vec<usize>) -> BenchConfig {
        BenchConfig { particles, workers, ..BenchConfig::default() }
    }

    #[test]
    fn config_enforces_minimums() {
        let mut c = BenchConfig::default();
        assert!(c.validate().is_ok());
        c.warmup = 2;
        assert!(c.validate().is_err());
        c = BenchConfig { repetitions: 29, ..BenchConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn totals_are_parts_plus_overhead() {
        let table = bench_step(&quick(vec![256], vec![1])).unwrap();
        let b = &table[0];
        let parts = b.median_ns(Stage::Observation)
            + b.median_ns(Stage::Motion)
            + b.median_ns(Stage::Resampling)
            + b.median_ns(Stage::Pose);
        assert!((b.total_ns() - (parts + b.overhead_ns)).abs() < 1e-6);
        assert!((b.total_ns() - b.quantiles(Stage::Total).p50).abs() < 1e-3);
    }

    #[test]
    fn worker_counts_end_in_the_same_state() {
        let table = bench_step(&quick(vec![512], vec![1, 2, 3])).unwrap();
        assert_eq!(table[0].final_estimate, table[1].final_estimate);
        assert_eq!(table[0].final_estimate, table[2].final_estimate);
    }

    #[test]
    fn timing_does_not_change_results() {
        let scenario = Scenario::builtin(0).unwrap();
        let cfg = FilterConfig { particles: 300, ..FilterConfig::default() };
        let field = prepare_field(scenario.world.grid(), &cfg).unwrap();
        let (_, est) = bench_cell::<f32>(&scenario, &field, &cfg, 3, 30).unwrap();
        let mut f = ParticleFilter::<f32>::new(cfg, scenario.rig.clone(), scenario.world.grid()).unwrap();
        let mut last = Pose2D::default();
        for k in 0..33 {
            last = f.step(Some(&scenario.odometry(k)), &scenario.scans, &field).unwrap().estimate;
        }
        assert_eq!(est, last);
    }

    #[test]
    fn long_rows_cover_every_stage() {
        let table = bench_step(&quick(vec![64, 128], vec![1, 2])).unwrap();
        let rows = step_rows(&table);
        assert_eq!(rows.len(), 4 * Stage::ALL.len());
        assert!(rows.iter().all(|r| r.p10_ns <= r.p50_ns && r.p50_ns <= r.p90_ns));
        assert!(speedup(&table, Stage::Total, 64, 2).is_some());
        assert!(speedup(&table, Stage::Total, 64, 8).is_none());
    }

    #[test]
    fn memory_rows_match_byte_counts() {
        let rows = bench_memory(&NumericPolicy::ALL, &[0, 1000], &[31.2], 0.05).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert_eq!(r.map_cells, 12480);
            assert_eq!(r.map_bytes, 12480 * r.policy.bytes_per_cell());
            assert_eq!(r.total_bytes, r.map_bytes + r.particle_bytes);
        }
        let zero = rows.iter().find(|r| r.particles == 0).unwrap();
        assert_eq!(zero.total_bytes, zero.map_bytes);
    }

    #[test]
    fn half_precision_doubles_particles_at_a_fixed_map() {
        // At an equal map area, the particle budget left over is compared.
        let budget = 1_500_000u64;
        let cells = 12480u64;
        let fit = |p: NumericPolicy| (budget - cells * p.bytes_per_cell()) / p.bytes_per_particle();
        assert!(fit(NumericPolicy::Fp16Qm) > 2 * fit(NumericPolicy::Fp32));
    }

    #[test]
    fn quantized_map_stores_two_and_a_half_times_the_area() {
        let rows = memory_tradeoff(&[NumericPolicy::Fp32, NumericPolicy::Fp32Qm], 1_000_000, &[0], 0.05);
        assert!((rows[1].max_area_m2 / rows[0].max_area_m2 - 2.5).abs() < 1e-9);
    }
}
