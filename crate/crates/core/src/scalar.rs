//! Numeric traits the matching math is written against.
//!
//! Metrics are ratios of counts, so they are generic over [`Scalar`], which
//! admits both floats and exact rationals (`num_rational::Ratio<i64>`).
//! Embedding math needs square roots and is generic over [`Real`] instead.

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num};

/// A number type that count-derived metrics can be expressed in.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {
    /// Lifts a count into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable in scalar type")
    }

    /// `num / den`, or zero when the denominator is zero.
    fn ratio(num: usize, den: usize) -> Self {
        if den == 0 {
            Self::zero()
        } else {
            Self::from_count(num) / Self::from_count(den)
        }
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug + Send + Sync + 'static {}

/// A floating-point scalar for embedding vectors and similarity scores.
pub trait Real: Scalar + Float + Default {
    fn from_f64_lossy(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where T: Scalar + Float + Default {}
