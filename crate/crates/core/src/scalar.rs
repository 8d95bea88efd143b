//! Numeric abstraction shared by the distance, clustering, tree and ranking code.
//!
//! Everything downstream of the chart model is generic over [`Scalar`], so the
//! same algorithms run over `f64`, `f32` or exact rationals. Exact rationals are
//! what the property suites use when they need equalities to hold bit-for-bit.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{FromPrimitive, Num, ToPrimitive};

/// A totally-ordered-enough number type usable as a distance or weight.
pub trait Scalar:
    Num + Copy + PartialOrd + Debug + Send + Sync + FromPrimitive + ToPrimitive + Sum + 'static
{
    /// Converts a count. Panics only if the type cannot represent small integers.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("scalar type cannot represent a count")
    }

    /// Converts a configuration constant such as `0.7`.
    fn from_real(x: f64) -> Self {
        Self::from_f64(x).expect("scalar type cannot represent a real constant")
    }

    /// Lossy view used for reporting and serialization into documents.
    fn to_real(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `true` for values `>= 0`. NaN is rejected.
    fn is_nonnegative(self) -> bool {
        self >= Self::zero()
    }
}

impl<T> Scalar for T where
    T: Num + Copy + PartialOrd + Debug + Send + Sync + FromPrimitive + ToPrimitive + Sum + 'static
{
}

/// Exact rational scalar.
pub type Exact = num_rational::Rational64;
