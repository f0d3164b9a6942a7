use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{
    OdometryDelta, Pose2D, SensorId, SensorRig, ToFScan, ZoneLayout, DEFAULT_FOV_DEG,
};
use crate::rng::{derive_seed, RandomStream};

use super::sensor::{simulate_scan, SensorNoise};
use super::trajectory::TrajectorySpec;
use super::world::{builtin_world, Room, World, EXTENDED_WORLD, PRIMARY_LAYOUT, PRIMARY_MAZE};

/// Version of the sequence file schema.
pub const SCHEMA_VERSION: u32 = 1;
/// Schema name written to sequence headers.
pub const SCHEMA_NAME: &str = "tofmcl-sequence";

const DOMAIN_ODOMETRY: u64 = 0x51;
const DOMAIN_FRONT: u64 = 0x52;
const DOMAIN_REAR: u64 = 0x53;

/// Self-describing header of a recorded or simulated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceHeader {
    pub schema: String,
    pub version: u32,
    pub name: String,
    pub world: String,
    pub seed: u64,
    pub rate_hz: f64,
    pub layout: ZoneLayout,
    pub fov_deg: f64,
    pub ticks: usize,
}

impl SequenceHeader {
    pub fn rig(&self) -> SensorRig {
        SensorRig::new(self.layout, self.fov_deg)
    }
}

/// Everything available at one tick. Odometry is the body-frame increment
/// since the previous tick and is absent at tick 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub time: f64,
    pub truth: Pose2D<f64>,
    pub odometry: Option<OdometryDelta<f64>>,
    pub front: Option<ToFScan>,
    pub rear: Option<ToFScan>,
}

impl Tick {
    /// Scans of this tick, restricted to the front sensor if `front_only`.
    pub fn scans(&self, front_only: bool) -> Vec<ToFScan> {
        let rear = if front_only { None } else { self.rear.clone() };
        self.front.iter().cloned().chain(rear).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRecord {
    pub header: SequenceHeader,
    pub ticks: Vec<Tick>,
}

impl SequenceRecord {
    pub fn len(&self) -> usize {
        self.ticks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ticks.is_empty()
    }

    pub fn truth(&self) -> Vec<Pose2D<f64>> {
        self.ticks.iter().map(|t| t.truth).collect()
    }

    /// Dead-reckoned poses from the first ground-truth pose.
    pub fn integrated_odometry(&self) -> Vec<Pose2D<f64>> {
        let mut pose = self.ticks.first().map(|t| t.truth).unwrap_or_default();
        self.ticks
            .iter()
            .map(|t| {
                if let Some(u) = &t.odometry {
                    pose = pose.compose(u);
                }
                pose
            })
            .collect()
    }

    /// Checks header and ticks agree.
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.schema != SCHEMA_NAME || h.version != SCHEMA_VERSION {
            return Err(Error::format(format!(
                "sequence schema {} v{} is not supported (expected {} v{})",
                h.schema, h.version, SCHEMA_NAME, SCHEMA_VERSION
            )));
        }
        if h.ticks != self.ticks.len() {
            return Err(Error::format(format!(
                "header announces {} ticks, found {}",
                h.ticks,
                self.ticks.len()
            )));
        }
        for (k, t) in self.ticks.iter().enumerate() {
            for (scan, id) in [(&t.front, SensorId::Front), (&t.rear, SensorId::Rear)] {
                if let Some(s) = scan {
                    if s.sensor != id || s.layout() != h.layout {
                        return Err(Error::format(format!(
                            "tick {k}: scan does not match the header geometry"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Noise and sensor settings of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Per-tick Gaussian drift added to the odometry `(x m, y m, θ rad)`.
    pub odometry_sigma: [f64; 3],
    pub sensor: SensorNoise,
    pub layout: ZoneLayout,
    pub fov_deg: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            odometry_sigma: [0.005, 0.005, 0.005],
            sensor: SensorNoise::default(),
            layout: ZoneLayout::Grid8x8,
            fov_deg: DEFAULT_FOV_DEG,
        }
    }
}

/// Simulates a sequence along `spec`. Deterministic in `seed`.
pub fn simulate_sequence(
    world: &World,
    name: &str,
    spec: &TrajectorySpec,
    config: &SimConfig,
    seed: u64,
) -> Result<SequenceRecord> {
    if config.odometry_sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidSpec(
            "odometry_sigma must be non-negative".into(),
        ));
    }
    config.sensor.validate()?;
    let truth = spec.generate(world)?;
    let rig = SensorRig::new(config.layout, config.fov_deg);
    let odo_key = derive_seed(seed, DOMAIN_ODOMETRY, 0);
    let front_key = derive_seed(seed, DOMAIN_FRONT, 0);
    let rear_key = derive_seed(seed, DOMAIN_REAR, 0);
    let mut ticks = Vec::with_capacity(truth.len());
    for (k, pose) in truth.iter().enumerate() {
        let time = k as f64 / spec.rate_hz;
        let odometry = (k > 0).then(|| {
            let d = truth[k - 1].delta_to(pose);
            let mut rng = RandomStream::new(odo_key, k as u64);
            let mut e = [0.0; 3];
            for (e, s) in e.iter_mut().zip(config.odometry_sigma) {
                let z: f64 = StandardNormal.sample(&mut rng);
                *e = s * z;
            }
            OdometryDelta::new(d.dx + e[0], d.dy + e[1], d.dtheta + e[2])
        });
        let mut front_rng = RandomStream::new(front_key, k as u64);
        let mut rear_rng = RandomStream::new(rear_key, k as u64);
        let front = simulate_scan(
            world,
            pose,
            SensorId::Front,
            &rig,
            &config.sensor,
            time,
            &mut front_rng,
        )?;
        let rear = simulate_scan(
            world,
            pose,
            SensorId::Rear,
            &rig,
            &config.sensor,
            time,
            &mut rear_rng,
        )?;
        ticks.push(Tick {
            time,
            truth: *pose,
            odometry,
            front: Some(front),
            rear: Some(rear),
        });
    }
    let header = SequenceHeader {
        schema: SCHEMA_NAME.into(),
        version: SCHEMA_VERSION,
        name: name.into(),
        world: world.name().into(),
        seed,
        rate_hz: spec.rate_hz,
        layout: config.layout,
        fov_deg: config.fov_deg,
        ticks: ticks.len(),
    };
    Ok(SequenceRecord { header, ticks })
}

/// A named trajectory in a built-in world.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub name: String,
    pub world: String,
    pub trajectory: TrajectorySpec,
}

/// Sample rate of the built-in sequences, Hz.
pub const BUILTIN_RATE_HZ: f64 = 15.0;
/// Length of the built-in sequences, seconds.
pub const BUILTIN_DURATION: f64 = 60.0;

/// Start heading and rooms of the primary maze visited, in order. Each tour
/// loops, so the last room adjoins the first.
const TOURS: [(&str, f64, &[Room]); 6] = [
    (
        "seq01",
        1.6,
        &[
            (0, 0),
            (1, 0),
            (1, 1),
            (2, 1),
            (2, 2),
            (1, 2),
            (0, 2),
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 2),
            (2, 1),
            (1, 1),
            (1, 0),
        ],
    ),
    (
        "seq02",
        4.0,
        &[
            (4, 2),
            (4, 1),
            (3, 1),
            (3, 0),
            (2, 0),
            (2, 1),
            (2, 2),
            (3, 2),
            (3, 1),
            (4, 1),
        ],
    ),
    (
        "seq03",
        0.0,
        &[
            (2, 1),
            (2, 0),
            (3, 0),
            (4, 0),
            (3, 0),
            (3, 1),
            (3, 2),
            (2, 2),
        ],
    ),
    (
        "seq04",
        4.7,
        &[
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 2),
            (2, 1),
            (1, 1),
            (1, 0),
            (0, 0),
            (1, 0),
            (1, 1),
            (2, 1),
            (2, 2),
            (1, 2),
            (0, 2),
        ],
    ),
    (
        "seq05",
        2.5,
        &[
            (3, 2),
            (3, 1),
            (4, 1),
            (4, 2),
            (4, 1),
            (3, 1),
            (3, 0),
            (4, 0),
            (3, 0),
            (2, 0),
            (2, 1),
            (2, 2),
        ],
    ),
    (
        "seq06",
        1.0,
        &[
            (1, 1),
            (2, 1),
            (2, 0),
            (3, 0),
            (3, 1),
            (3, 2),
            (2, 2),
            (1, 2),
            (0, 2),
            (0, 1),
            (0, 2),
            (1, 2),
            (2, 2),
            (2, 1),
        ],
    ),
];

/// The six built-in sequences, all flown in the primary maze of the
/// extended world.
pub fn builtin_sequences() -> Vec<SequenceSpec> {
    let world = builtin_world(EXTENDED_WORLD).expect("built-in world exists");
    let maze = world
        .maze(PRIMARY_MAZE)
        .expect("primary maze exists")
        .clone();
    let res = world.grid().resolution();
    let origin = world.grid().cell_center(maze.col, maze.row);
    TOURS
        .iter()
        .map(|(name, heading, rooms)| {
            let waypoints = PRIMARY_LAYOUT
                .route(rooms)
                .expect("built-in tours follow connected rooms")
                .into_iter()
                .enumerate()
                .map(|(i, [c, r])| {
                    Pose2D::new(
                        origin[0] + c * res,
                        origin[1] + r * res,
                        if i == 0 { *heading } else { 0.0 },
                    )
                })
                .collect();
            SequenceSpec {
                name: name.to_string(),
                world: EXTENDED_WORLD.into(),
                trajectory: TrajectorySpec {
                    waypoints,
                    speed: 0.4,
                    yaw_rate: 1.0,
                    rate_hz: BUILTIN_RATE_HZ,
                    duration: BUILTIN_DURATION,
                    clearance: 0.15,
                    spin: 0.0,
                },
            }
        })
        .collect()
}

pub fn builtin_sequence(name: &str) -> Result<SequenceSpec> {
    builtin_sequences()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::InvalidSpec(format!("unknown sequence `{name}`")))
}

/// Simulates built-in sequence `name` with the default noise settings.
pub fn simulate_builtin(name: &str, seed: u64) -> Result<SequenceRecord> {
    let spec = builtin_sequence(name)?;
    let world = builtin_world(&spec.world)?;
    simulate_sequence(
        &world,
        &spec.name,
        &spec.trajectory,
        &SimConfig::default(),
        seed,
    )
}
