//! Numeric trait constraints shared by every analysis.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating-point scalar the analyses are generic over (`f32`, `f64`).
pub trait Scalar: RealField + Copy + ToPrimitive + FromPrimitive {
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Lossy conversion to `f64` for reporting and RNG interop.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Pairwise summation; result depends only on the order of `values`.
pub fn pairwise_sum<T: Scalar>(values: &[T]) -> T {
    const BLOCK: usize = 16;
    if values.len() <= BLOCK {
        values.iter().fold(T::zero(), |acc, &v| acc + v)
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

pub(crate) fn max_abs<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values
        .into_iter()
        .fold(T::zero(), |acc, v| if v.abs() > acc { v.abs() } else { acc })
}
