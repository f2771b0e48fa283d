//! Floating point scalar abstraction.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the image grids, solvers and losses are generic over.
///
/// Implemented for `f32` and `f64`. The `f64` instantiation is the default
/// everywhere (see the crate-root aliases) since solver tolerances in the
/// 1e-8 range are out of reach in single precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Clamp margin applied to scores before taking logarithms.
    const EPSILON_LOG: Self;

    /// Rounds to nearest for `f32`.
    fn from_f64_lossy(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    const EPSILON_LOG: Self = 1e-7;

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const EPSILON_LOG: Self = 1e-7;

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
