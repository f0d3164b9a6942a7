use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Maps an angle into `[0, 2π)`.
#[inline]
pub fn normalize_angle<T: Scalar>(a: T) -> T {
    let tau = T::TAU();
    let mut r = a % tau;
    if r < T::zero() {
        r = r + tau;
    }
    // `-tiny + 2π` rounds to 2π.
    if r >= tau {
        r = T::zero();
    }
    r
}

/// Maps an angle into `(-π, π]`.
#[inline]
pub fn wrap_to_pi<T: Scalar>(a: T) -> T {
    let r = normalize_angle(a);
    if r > T::PI() {
        r - T::TAU()
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Planar pose with heading normalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose2D<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Scalar> Pose2D<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn position(&self) -> Point2<T> {
        Point2::new(self.x, self.y)
    }

    /// Applies a body-frame increment.
    pub fn compose(&self, u: &OdometryDelta<T>) -> Self {
        let (s, c) = self.theta.sin_cos();
        Self::new(
            self.x + c * u.dx - s * u.dy,
            self.y + s * u.dx + c * u.dy,
            self.theta + u.dtheta,
        )
    }

    /// Increment `u` such that `self.compose(&u) == other`.
    pub fn delta_to(&self, other: &Self) -> OdometryDelta<T> {
        let (s, c) = self.theta.sin_cos();
        let (gx, gy) = (other.x - self.x, other.y - self.y);
        OdometryDelta {
            dx: c * gx + s * gy,
            dy: -s * gx + c * gy,
            dtheta: wrap_to_pi(other.theta - self.theta),
        }
    }

    pub fn distance(&self, other: &Self) -> T {
        self.position().distance(&other.position())
    }

    /// Absolute heading difference in `[0, π]`.
    pub fn heading_error(&self, other: &Self) -> T {
        wrap_to_pi(self.theta - other.theta).abs()
    }

    pub fn cast<U: Scalar>(&self) -> Pose2D<U> {
        Pose2D::new(
            U::of(self.x.as_f64()),
            U::of(self.y.as_f64()),
            U::of(self.theta.as_f64()),
        )
    }
}

/// Relative motion in the body frame of the previous pose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OdometryDelta<T> {
    pub dx: T,
    pub dy: T,
    pub dtheta: T,
}

impl<T: Scalar> OdometryDelta<T> {
    pub fn new(dx: T, dy: T, dtheta: T) -> Self {
        Self { dx, dy, dtheta }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dtheta.is_finite()
    }

    /// The increment that undoes `self`.
    pub fn inverse(&self) -> Self {
        let (s, c) = self.dtheta.sin_cos();
        Self {
            dx: -(c * self.dx + s * self.dy),
            dy: -(-s * self.dx + c * self.dy),
            dtheta: -self.dtheta,
        }
    }

    /// `self` followed by `next`, both body-frame.
    pub fn then(&self, next: &Self) -> Self {
        let (s, c) = self.dtheta.sin_cos();
        Self {
            dx: self.dx + c * next.dx - s * next.dy,
            dy: self.dy + s * next.dx + c * next.dy,
            dtheta: self.dtheta + next.dtheta,
        }
    }

    pub fn translation(&self) -> T {
        self.dx.hypot(self.dy)
    }
}
