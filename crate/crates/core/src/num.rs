//! Scalar abstraction shared by the aggregation and metrics code.

use std::fmt::{Debug, Display};
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, NumCast};

/// Real scalar the score and statistics code is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + NumCast + AddAssign + Default + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(value: f64) -> Self {
        <Self as NumCast>::from(value).expect("literal representable in scalar type")
    }

    /// Lossy conversion from a count.
    fn count(value: usize) -> Self {
        <Self as NumCast>::from(value).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
