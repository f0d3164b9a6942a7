//! Parallel Monte Carlo localization for sparse multizone time-of-flight
//! range sensors on occupancy-grid maps.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid_map`]: occupancy grids, the truncated Euclidean distance field
//!   and its storage policies, map and field file formats.
//! * [`models`]: poses, scans, beam geometry, the beam end-point likelihood
//!   and the odometry motion model.
//! * [`filter`]: the particle filter with a double-buffered pool and a
//!   partial-sum parallel systematic resampler.
//! * [`sim`]: deterministic maze worlds, trajectories and sensor simulation.
//! * [`eval`] and [`bench`]: accuracy metrics and performance harnesses.
//!
//! Geometry and model code is generic over [`Scalar`] (`f32`/`f64`);
//! particle storage is generic over [`StorageScalar`] so the same filter runs
//! with single or half precision particles.

pub mod bench;
pub mod error;
pub mod eval;
pub mod filter;
pub mod grid_map;
pub mod models;
pub mod rng;
pub mod run;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use filter::{FilterConfig, LengthUnit, ParticleFilter};
pub use grid_map::{CellState, DistanceField, NumericPolicy, OccupancyGrid, UnknownRule};
pub use models::{BeamGeometry, OdometryDelta, Point2, Pose2D, SensorId, SensorRig, ToFScan};
pub use rng::RandomStream;
pub use scalar::{Scalar, StorageScalar};

/// Half precision storage scalar (IEEE 754 binary16).
pub use half::f16;

/// Poses in double precision, the working precision of the filter.
pub type Pose = Pose2D<f64>;
/// Odometry increments in double precision.
pub type Odometry = OdometryDelta<f64>;
/// Beam geometry in double precision.
pub type Geometry = BeamGeometry<f64>;
/// Filter storing particle pose and weight as `f32` (fp32 / fp32qm policies).
pub type Fp32Filter = ParticleFilter<f32>;
/// Filter storing particle pose and weight as binary16 (fp16qm policy).
pub type Fp16Filter = ParticleFilter<f16>;
