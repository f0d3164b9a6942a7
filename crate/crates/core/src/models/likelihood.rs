//! Beam end-point observation model.
//!
//! Each valid beam is scored by the distance field at its end point:
//! `p(z_k | x, m) = exp(-d(ẑ_k)² / (2σ²)) / sqrt(2πσ)`. Beams are independent,
//! so the scan log-likelihood is the sum over beams.

use crate::error::{Error, Result};
use crate::grid_map::DistanceField;
use crate::scalar::Scalar;

use super::{BeamGeometry, Point2, Pose2D, SensorRig, ToFScan};

/// Per-beam normalizer `ln(sqrt(2π σ))`, with σ under the radical.
#[inline]
pub fn log_normalizer<T: Scalar>(sigma_obs: T) -> T {
    T::of(0.5) * (T::TAU() * sigma_obs).ln()
}

/// World end points of the valid readings, in beam order.
pub fn beam_endpoints<T: Scalar>(
    pose: &Pose2D<T>,
    readings: &[Option<T>],
    geom: &BeamGeometry<T>,
) -> Result<Vec<Point2<T>>> {
    if readings.len() != geom.len() {
        return Err(Error::input(format!(
            "{} readings for a geometry of {} beams",
            readings.len(),
            geom.len()
        )));
    }
    Ok(readings
        .iter()
        .zip(geom.azimuths())
        .filter_map(|(r, &az)| r.map(|r| (r, az)))
        .map(|(r, az)| {
            let a = pose.theta + geom.mount_yaw() + az;
            Point2::new(pose.x + r * a.cos(), pose.y + r * a.sin())
        })
        .collect())
}

/// Log-likelihood of one sensor's readings at `pose`.
///
/// With no valid reading the result is 0, which leaves weights unchanged.
pub fn log_likelihood<T: Scalar>(
    pose: &Pose2D<T>,
    readings: &[Option<T>],
    field: &DistanceField,
    geom: &BeamGeometry<T>,
    sigma_obs: T,
) -> Result<T> {
    if !(sigma_obs > T::zero()) {
        return Err(Error::input("sigma_obs must be positive"));
    }
    let ends = beam_endpoints(pose, readings, geom)?;
    if ends.is_empty() {
        return Ok(T::zero());
    }
    let two_var = T::of(2.0) * sigma_obs * sigma_obs;
    let norm = log_normalizer(sigma_obs);
    Ok(ends.iter().fold(T::zero(), |acc, p| {
        let d = field.lookup_point(p.x, p.y);
        acc - d * d / two_var - norm
    }))
}

/// Valid beams of one correction, pre-rotated into body-frame end-point
/// offsets so a particle costs one `sin_cos` and a lookup per beam.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Observation {
    offsets: Vec<[f64; 2]>,
}

impl Observation {
    pub fn from_readings(readings: &[Option<f64>], geom: &BeamGeometry<f64>) -> Result<Self> {
        let ends = beam_endpoints(&Pose2D::default(), readings, geom)?;
        Ok(Self {
            offsets: ends.into_iter().map(|p| [p.x, p.y]).collect(),
        })
    }

    /// All scans of one correction, each mapped through its sensor's geometry.
    pub fn from_scans<'a>(
        scans: impl IntoIterator<Item = &'a ToFScan>,
        rig: &SensorRig,
    ) -> Result<Self> {
        let mut offsets = Vec::new();
        for scan in scans {
            let obs = Self::from_readings(&scan.column_readings(), rig.geometry(scan.sensor))?;
            offsets.extend(obs.offsets);
        }
        Ok(Self { offsets })
    }

    /// Number of valid beams.
    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Sum of squared end-point distances at a pose.
    #[inline]
    pub fn squared_distance_sum(&self, x: f64, y: f64, theta: f64, field: &DistanceField) -> f64 {
        let (s, c) = theta.sin_cos();
        let mut acc = 0.0;
        for &[bx, by] in &self.offsets {
            let d = field.lookup(x + c * bx - s * by, y + s * bx + c * by);
            acc += d * d;
        }
        acc
    }

    /// Log-likelihood at a pose; 0 for an empty observation.
    #[inline]
    pub fn log_likelihood(
        &self,
        x: f64,
        y: f64,
        theta: f64,
        field: &DistanceField,
        sigma_obs: f64,
    ) -> f64 {
        if self.offsets.is_empty() {
            return 0.0;
        }
        -self.squared_distance_sum(x, y, theta, field) / (2.0 * sigma_obs * sigma_obs)
            - self.offsets.len() as f64 * log_normalizer(sigma_obs)
    }
}
