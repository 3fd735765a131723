//! Coefficient rings for Hecke algebra elements.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};

/// A commutative coefficient ring. Rationals give exact arithmetic; `f64`
/// and `Complex64` are compared with [`Scalar::magnitude`] and a tolerance.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Send
    + Sync
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn from_i64(n: i64) -> Self;

    /// Absolute value as a float, for tolerance comparisons and reports.
    fn magnitude(&self) -> f64;

    /// Whether arithmetic in this ring is exact.
    const EXACT: bool;

    fn powu(&self, n: u32) -> Self {
        num_traits::pow(self.clone(), n as usize)
    }
}

impl Scalar for Ratio<i64> {
    const EXACT: bool = true;

    fn from_i64(n: i64) -> Self {
        Ratio::from_integer(n)
    }

    fn magnitude(&self) -> f64 {
        (*self.numer() as f64 / *self.denom() as f64).abs()
    }
}

impl Scalar for Ratio<i128> {
    const EXACT: bool = true;

    fn from_i64(n: i64) -> Self {
        Ratio::from_integer(n as i128)
    }

    fn magnitude(&self) -> f64 {
        (*self.numer() as f64 / *self.denom() as f64).abs()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_i64(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn magnitude(&self) -> f64 {
        use num_traits::{Signed, ToPrimitive};
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_i64(n: i64) -> Self {
        n as f64
    }

    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    const EXACT: bool = false;

    fn from_i64(n: i64) -> Self {
        Complex64::new(n as f64, 0.0)
    }

    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Comparison tolerance for floating coefficients.
pub const FLOAT_TOLERANCE: f64 = 1e-12;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers() {
        let half = Ratio::<i64>::new(3, 2);
        assert_eq!(half.powu(3), Ratio::new(27, 8));
        assert_eq!(2.0f64.powu(10), 1024.0);
        assert_eq!(BigRational::from_i64(3).powu(0), BigRational::one());
        assert!(Ratio::<i128>::EXACT && !f64::EXACT);
    }
}
