//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Special functions (erf, log-gamma) are evaluated in `f64` and cast back,
/// so `f32` instantiations trade accuracy for footprint only in the
/// piecewise algebra.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for values unrepresentable as
    /// the target type, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn of_i64(n: i64) -> Self {
        <Self as FromPrimitive>::from_i64(n).expect("integer representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("integer representable")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `expm1(z) / z`, with a second-order expansion near zero.
#[inline]
pub(crate) fn expm1_over<T: Scalar>(z: T) -> T {
    if z.abs() < T::lit(1e-8) {
        T::one() + z * T::half()
    } else {
        z.exp_m1() / z
    }
}

/// Rounds an integral-valued scalar to `i64`.
#[inline]
pub(crate) fn to_i64<T: Scalar>(x: T) -> i64 {
    x.round().to_i64().expect("integral value in i64 range")
}
