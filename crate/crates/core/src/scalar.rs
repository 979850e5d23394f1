//! Real-number abstraction shared by the metric and scoring code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type usable for similarity scores, confidences and
/// assignment weights.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossless for `f64`, rounding for `f32`.
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 converts to any Float")
    }

    fn from_usize_lossy(v: usize) -> Self {
        <Self as FromPrimitive>::from_usize(v).expect("usize converts to any Float")
    }

    /// Ratio of two counts computed in `f64` and then narrowed, so that
    /// `f32` callers see the correctly rounded quotient.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_f64_lossy(num as f64 / den as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
