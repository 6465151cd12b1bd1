//! Number types the exact engine can sum over.

use std::fmt::Debug;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// A commutative ring element built from `f64` inputs.
///
/// `f64` and [`Complex64`] are the floating modes. [`BigRational`] is the exact
/// mode: every `f64` parameter is converted to the dyadic rational it denotes, so
/// sums and products are carried out without rounding.
pub trait Scalar:
    Clone + Debug + PartialEq + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self>
{
    fn from_f64(x: f64) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
}

impl Scalar for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite weight")
    }
}

/// Exact rational value of an `f64`.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_f64(x)
}
