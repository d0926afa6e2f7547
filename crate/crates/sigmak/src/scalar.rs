//! Scalar abstraction over `f64` and double-double arithmetic.
//!
//! Assembly of `B` and `N` is written once against [`Real`] so that the same
//! code evaluates residuals in `f64` during Newton iterations and in
//! double-double precision ([`DoubleDouble`]) when certifying solutions
//! whose σ_k value is the difference of much larger terms.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use twofloat::TwoFloat;

/// Field operations needed by the assembly routines.
pub trait Real:
    Copy
    + Debug
    + Send
    + Sync
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    /// Embeds an `f64` exactly.
    fn from_f64(x: f64) -> Self;
    /// Rounds to the nearest `f64`.
    fn to_f64(self) -> f64;
    /// Integer power.
    fn powi(self, n: i32) -> Self;
    /// Absolute value.
    fn abs(self) -> Self;

    /// Additive identity.
    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    /// Multiplicative identity.
    fn one() -> Self {
        Self::from_f64(1.0)
    }

    /// Positive rational power `x^(num/den)` for `x > 0`.
    ///
    /// The `f64` value seeds Newton steps on `y^den = x^num`; each step doubles
    /// the number of correct digits, so two steps reach double-double accuracy.
    fn pow_ratio(self, num: i64, den: i64) -> Self {
        debug_assert!(den > 0);
        if den == 1 {
            return self.powi(num as i32);
        }
        let seed = self.to_f64().powf(num as f64 / den as f64);
        let mut y = Self::from_f64(seed);
        let target = self.powi(num as i32);
        let d = Self::from_f64(den as f64);
        for _ in 0..3 {
            let ym1 = y.powi(den as i32 - 1);
            y -= (ym1 * y - target) / (d * ym1);
        }
        y
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn pow_ratio(self, num: i64, den: i64) -> Self {
        if den == 1 {
            f64::powi(self, num as i32)
        } else {
            self.powf(num as f64 / den as f64)
        }
    }
}

/// Double-double scalar used for residual refinement and certificates.
///
/// Addition and multiplication delegate to [`TwoFloat`]. Division is
/// computed as a quotient by the leading word followed by one residual
/// correction, and integer powers use binary exponentiation on top of it, so
/// both stay accurate to roughly `1e-32` relative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct DoubleDouble(pub TwoFloat);

impl DoubleDouble {
    /// High word.
    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    /// Low word.
    pub fn lo(self) -> f64 {
        self.0.lo()
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self(self.0 + o.0)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self(self.0 - o.0)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self(self.0 * o.0)
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q0 = self.0 / o.0.hi();
        let r = self.0 - o.0 * q0;
        Self(q0 + r / o.0.hi())
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Real for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        Self(TwoFloat::from(x))
    }
    fn to_f64(self) -> f64 {
        self.0.hi() + self.0.lo()
    }
    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        if n < 0 {
            Self::one() / acc
        } else {
            acc
        }
    }
    fn abs(self) -> Self {
        Self(self.0.abs())
    }
}

/// Splits a double-double value into its `(hi, lo)` components.
pub fn split(x: DoubleDouble) -> (f64, f64) {
    (x.hi(), x.lo())
}

/// Builds a double-double value from a high part and a correction.
pub fn join(hi: f64, lo: f64) -> DoubleDouble {
    DoubleDouble(TwoFloat::from(hi) + TwoFloat::from(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_ratio_matches_f64_for_f64() {
        let x = 2.7_f64;
        assert!((x.pow_ratio(-1, 3) - x.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(x.pow_ratio(24, 1), x.powi(24));
    }

    #[test]
    fn pow_ratio_double_double_is_accurate() {
        let x = DoubleDouble::from_f64(2.0);
        let y = x.pow_ratio(1, 3);
        let err = (y.powi(3) - x).abs();
        assert!(err.to_f64() < 1e-30, "cube root error {err:?}");
        let x = DoubleDouble::from_f64(0.3);
        let z = x.pow_ratio(-2, 3);
        let back = z.powi(-3) - x * x;
        assert!(back.abs().to_f64() < 1e-30);
    }

    #[test]
    fn division_is_double_double_accurate() {
        let x = DoubleDouble::from_f64(0.3);
        let z = x * x;
        let r = DoubleDouble::one() / z;
        let err = (DoubleDouble::one() / r - z).abs().to_f64();
        assert!(err < 1e-32, "round trip error {err:e}");
        let q = x / DoubleDouble::from_f64(7.0);
        assert!((q * DoubleDouble::from_f64(7.0) - x).abs().to_f64() < 1e-32);
    }

    #[test]
    fn split_and_join_round_trip() {
        let x = join(1.0, 1e-20);
        let (hi, lo) = split(x);
        assert_eq!(hi, 1.0);
        assert_eq!(lo, 1e-20);
    }
}
