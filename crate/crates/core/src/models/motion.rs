use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{OdometryDelta, Pose2D};

/// Motion and observation noise of the filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams<T> {
    /// Per-component standard deviation of the odometry increment
    /// `(x m, y m, θ rad)`. Zero disables noise on that component.
    pub sigma_odom: [T; 3],
    /// Spread of the beam end-point model, meters.
    pub sigma_obs: T,
}

impl<T: Scalar> NoiseParams<T> {
    pub fn new(sigma_odom: [T; 3], sigma_obs: T) -> Result<Self> {
        if sigma_odom
            .iter()
            .any(|s| !(*s >= T::zero()) || !s.is_finite())
        {
            return Err(Error::input(
                "odometry noise must be finite and non-negative",
            ));
        }
        if !(sigma_obs > T::zero()) || !sigma_obs.is_finite() {
            return Err(Error::input("sigma_obs must be finite and positive"));
        }
        Ok(Self {
            sigma_odom,
            sigma_obs,
        })
    }
}

impl Default for NoiseParams<f64> {
    fn default() -> Self {
        Self {
            sigma_odom: [0.1, 0.1, 0.1],
            sigma_obs: 2.0,
        }
    }
}

/// Draws a successor pose from the odometry proposal.
///
/// The body-frame increment is perturbed component-wise with zero-mean
/// Gaussian noise, then composed onto `pose`. Exactly three normal deviates
/// are consumed per call.
#[inline]
pub fn sample_motion<T: Scalar, R: Rng + ?Sized>(
    pose: &Pose2D<T>,
    u: &OdometryDelta<T>,
    sigma_odom: &[T; 3],
    rng: &mut R,
) -> Pose2D<T> {
    let mut noise = || T::of(rng.sample::<f64, _>(StandardNormal));
    let noisy = OdometryDelta {
        dx: u.dx + noise() * sigma_odom[0],
        dy: u.dy + noise() * sigma_odom[1],
        dtheta: u.dtheta + noise() * sigma_odom[2],
    };
    pose.compose(&noisy)
}
