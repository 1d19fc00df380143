use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point type the numeric engine runs on: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Sum + Debug + Display + FromStr + Send + Sync + 'static
{
    fn from_count(n: u64) -> Self {
        <Self as NumCast>::from(n).expect("integer fits in a float")
    }

    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
