//! Declarative experiment configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tof_mcl::bench::BenchConfig;
use tof_mcl::run::SensorSet;
use tof_mcl::sim::{builtin_sequences, SimConfig, EXTENDED_WORLD, WORLD_RESOLUTION};
use tof_mcl::{FilterConfig, NumericPolicy};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldSection {
    /// Built-in world the sequences are simulated in.
    pub name: String,
    /// Map resolution, meters per cell.
    pub resolution: f64,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self {
            name: EXTENDED_WORLD.into(),
            resolution: WORLD_RESOLUTION,
        }
    }
}

/// What a batch covers. Empty `particles` or `policies` fall back to the
/// single values of `[filter]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub sequences: Vec<String>,
    pub seeds: Vec<u64>,
    pub sensors: Vec<SensorSet>,
    pub particles: Vec<usize>,
    pub policies: Vec<NumericPolicy>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            sequences: builtin_sequences().into_iter().map(|s| s.name).collect(),
            seeds: (0..6).collect(),
            sensors: vec![SensorSet::Both],
            particles: Vec::new(),
            policies: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub world: WorldSection,
    pub experiment: ExperimentSection,
    pub simulation: SimConfig,
    pub filter: FilterConfig,
    pub bench: BenchConfig,
}

/// Byte offset to 1-based line and column.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let config: Config = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => {
                    let (line, col) = line_col(text, span.start);
                    CliError::Config(format!("{origin}:{line}:{col}: {msg}"))
                }
                None => CliError::Config(format!("{origin}: {msg}")),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, msg: String| CliError::Config(format!("{field}: {msg}"));
        let world = tof_mcl::sim::builtin_world(&self.world.name)
            .map_err(|e| bad("world.name", e.to_string()))?;
        if world.grid().resolution() != self.world.resolution {
            return Err(bad(
                "world.resolution",
                format!(
                    "world `{}` is built at {} m per cell, not {}",
                    self.world.name,
                    world.grid().resolution(),
                    self.world.resolution
                ),
            ));
        }
        for name in &self.experiment.sequences {
            tof_mcl::sim::builtin_sequence(name)
                .map_err(|e| bad("experiment.sequences", e.to_string()))?;
        }
        if self.experiment.seeds.is_empty() {
            return Err(bad("experiment.seeds", "no seeds given".into()));
        }
        if self.experiment.sensors.is_empty() {
            return Err(bad("experiment.sensors", "no sensor set given".into()));
        }
        self.filter
            .validate()
            .map_err(|e| bad("filter", e.to_string()))?;
        if self.experiment.particles.contains(&0) {
            return Err(bad("experiment.particles", "particle counts must be positive".into()));
        }
        self.bench.validate().map_err(|e| bad("bench", e.to_string()))?;
        Ok(())
    }

    pub fn particle_counts(&self) -> Vec<usize> {
        if self.experiment.particles.is_empty() {
            vec![self.filter.particles]
        } else {
            self.experiment.particles.clone()
        }
    }

    pub fn policies(&self) -> Vec<NumericPolicy> {
        if self.experiment.policies.is_empty() {
            vec![self.filter.policy]
        } else {
            self.experiment.policies.clone()
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::manifest::sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}
