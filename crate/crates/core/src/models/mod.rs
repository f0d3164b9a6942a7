//! Sensor and motion models.

mod likelihood;
mod motion;
mod pose;
mod scan;

pub use likelihood::{beam_endpoints, log_likelihood, log_normalizer, Observation};
pub use motion::{sample_motion, NoiseParams};
pub use pose::{normalize_angle, wrap_to_pi, OdometryDelta, Point2, Pose2D};
pub use scan::{BeamGeometry, SensorId, SensorRig, ToFScan, Zone, ZoneLayout, DEFAULT_FOV_DEG};
