//! Numeric abstractions.
//!
//! [`Scalar`] is the arithmetic type of geometry and model code. It is kept
//! to the real floating point types; half precision never participates in
//! arithmetic here. [`StorageScalar`] is the at-rest type of particle fields,
//! which may be narrower than the arithmetic type.

use std::fmt::{Debug, Display};

use half::f16;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point arithmetic type: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal or parameter into this type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to every Scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Storage type of a particle component.
///
/// `store` rounds to nearest (ties to even) and `load` is exact, so
/// `store(load(s)) == s` for every finite stored value.
pub trait StorageScalar: Copy + Default + Debug + PartialEq + Send + Sync + 'static {
    const BYTES: usize;
    const NAME: &'static str;

    fn store(v: f64) -> Self;
    fn load(self) -> f64;
}

impl StorageScalar for f64 {
    const BYTES: usize = 8;
    const NAME: &'static str = "f64";

    #[inline]
    fn store(v: f64) -> Self {
        v
    }

    #[inline]
    fn load(self) -> f64 {
        self
    }
}

impl StorageScalar for f32 {
    const BYTES: usize = 4;
    const NAME: &'static str = "f32";

    #[inline]
    fn store(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn load(self) -> f64 {
        self as f64
    }
}

impl StorageScalar for f16 {
    const BYTES: usize = 2;
    const NAME: &'static str = "f16";

    #[inline]
    fn store(v: f64) -> Self {
        f16::from_f64(v)
    }

    #[inline]
    fn load(self) -> f64 {
        self.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_store_rounds_to_nearest_even() {
        // 2049 lies exactly between the binary16 neighbours 2048 and 2050.
        assert_eq!(f16::store(2049.0).load(), 2048.0);
        assert_eq!(f16::store(2051.0).load(), 2052.0);
        assert_eq!(f16::store(0.1).load(), 0.0999755859375);
    }

    #[test]
    fn store_load_is_identity_on_stored_values() {
        for v in [0.0, 1.0, 0.1, 3.14159, 1e-5, 6.2831] {
            let s = f16::store(v);
            assert_eq!(f16::store(s.load()), s);
            let s = f32::store(v);
            assert_eq!(f32::store(s.load()), s);
        }
    }

    #[test]
    fn scalar_literals() {
        assert_eq!(f32::of(0.5), 0.5f32);
        assert_eq!(<f64 as Scalar>::as_f64(2.25), 2.25);
    }
}
