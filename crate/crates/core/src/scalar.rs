use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point type usable by every algorithm in the crate: `f32` or `f64`.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Machine epsilon.
    fn machine_eps() -> Self;

    /// Default relative threshold for numerical rank decisions.
    ///
    /// `1e-10` in double precision; single precision cannot resolve that
    /// level so it gets `1e-5`.
    fn default_rank_tol() -> Self;
}

impl Scalar for f64 {
    fn machine_eps() -> Self {
        f64::EPSILON
    }

    fn default_rank_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    fn machine_eps() -> Self {
        f32::EPSILON
    }

    fn default_rank_tol() -> Self {
        1e-5
    }
}

/// Converts an `f64` literal into `T`.
#[inline]
pub(crate) fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 literal representable in scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}
