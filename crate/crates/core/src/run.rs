//! Running the filter over a recorded or simulated sequence.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{RunResult, TickResult};
use crate::filter::{FilterConfig, ParticleFilter};
use crate::grid_map::{compute_edt, DistanceField, OccupancyGrid, UnknownRule};
use crate::scalar::StorageScalar;
use crate::sim::{simulate_builtin, SequenceRecord};

/// Which range sensors feed the correction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorSet {
    #[default]
    Both,
    Front,
}

impl SensorSet {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorSet::Both => "both",
            SensorSet::Front => "front",
        }
    }
}

impl fmt::Display for SensorSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensorSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(SensorSet::Both),
            "front" => Ok(SensorSet::Front),
            _ => Err(Error::input(format!(
                "unknown sensor set `{s}` (expected both or front)"
            ))),
        }
    }
}

/// Distance field of `grid` as `config` needs it: truncated at `r_max` and
/// quantized if the policy asks for it.
pub fn prepare_field(grid: &OccupancyGrid, config: &FilterConfig) -> Result<DistanceField> {
    let field = compute_edt(grid, config.r_max, UnknownRule::default())?;
    Ok(field.with_policy(config.policy))
}

/// Global localization over `record`, storing particles as `S`.
pub fn run_sequence<S: StorageScalar>(
    record: &SequenceRecord,
    grid: &OccupancyGrid,
    field: &DistanceField,
    config: &FilterConfig,
    sensors: SensorSet,
) -> Result<RunResult> {
    record.validate()?;
    let mut filter = ParticleFilter::<S>::new(config.clone(), record.header.rig(), grid)?;
    let mut ticks = Vec::with_capacity(record.len());
    for tick in &record.ticks {
        let scans = tick.scans(sensors == SensorSet::Front);
        let out = filter.step(tick.odometry.as_ref(), &scans, field)?;
        ticks.push(TickResult {
            estimate: out.estimate,
            truth: tick.truth,
            timings: out.timings,
        });
    }
    Ok(RunResult::new(ticks, record.header.rate_hz))
}

/// [`run_sequence`] with the particle storage chosen by the policy.
pub fn run_with_policy(
    record: &SequenceRecord,
    grid: &OccupancyGrid,
    field: &DistanceField,
    config: &FilterConfig,
    sensors: SensorSet,
) -> Result<RunResult> {
    if config.policy.half_particles() {
        run_sequence::<half::f16>(record, grid, field, config, sensors)
    } else {
        run_sequence::<f32>(record, grid, field, config, sensors)
    }
}

/// Every built-in sequence in `names` simulated with every seed, sequence
/// major.
pub fn simulate_batch(names: &[String], seeds: &[u64]) -> Result<Vec<SequenceRecord>> {
    names
        .iter()
        .flat_map(|n| seeds.iter().map(move |&s| (n, s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(name, seed)| simulate_builtin(name, seed))
        .collect()
}

/// Runs `config` over every record, seeding each filter with the seed the
/// record was simulated with. Runs execute in parallel; results keep the
/// order of `records`.
pub fn run_batch(
    records: &[SequenceRecord],
    grid: &OccupancyGrid,
    field: &DistanceField,
    config: &FilterConfig,
    sensors: SensorSet,
) -> Result<Vec<RunResult>> {
    records
        .par_iter()
        .map(|r| {
            let c = FilterConfig {
                seed: r.header.seed,
                ..config.clone()
            };
            run_with_policy(r, grid, field, &c, sensors)
        })
        .collect()
}
