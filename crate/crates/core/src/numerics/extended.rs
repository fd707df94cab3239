use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real number stored as a sign and the natural log of its magnitude.
///
/// Covers magnitudes far outside `f64` range, e.g. sequences growing like `t^t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedScalar {
    sign: i8,
    logmag: f64,
}

impl ExtendedScalar {
    pub const ZERO: Self = Self {
        sign: 0,
        logmag: f64::NEG_INFINITY,
    };
    pub const ONE: Self = Self {
        sign: 1,
        logmag: 0.0,
    };

    /// Converts a finite real.
    pub fn from_f64(v: f64) -> Result<Self> {
        if !v.is_finite() {
            return Err(Error::Range(format!("cannot represent non-finite value {v}")));
        }
        if v == 0.0 {
            return Ok(Self::ZERO);
        }
        Ok(Self {
            sign: if v > 0.0 { 1 } else { -1 },
            logmag: v.abs().ln(),
        })
    }

    /// Builds `sign · exp(logmag)`.
    pub fn from_log(sign: i8, logmag: f64) -> Result<Self> {
        match sign {
            0 => Ok(Self::ZERO),
            1 | -1 if logmag.is_finite() => Ok(Self { sign, logmag }),
            1 | -1 => Err(Error::Range(format!("log-magnitude {logmag} is not finite"))),
            _ => Err(Error::Domain(format!("sign must be -1, 0 or 1, got {sign}"))),
        }
    }

    pub fn sign(self) -> i8 {
        self.sign
    }

    /// Natural log of `|self|`; `-inf` for zero.
    pub fn logmag(self) -> f64 {
        self.logmag
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    /// Nearest `f64`; saturates to `±inf` or `0` outside the double range.
    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.logmag.exp(),
        }
    }

    /// `Some(v)` when the value is representable as a finite, normal-range `f64`.
    pub fn to_finite_f64(self) -> Option<f64> {
        let v = self.to_f64();
        (v.is_finite() && (v == 0.0) == self.is_zero()).then_some(v)
    }

    pub fn neg(self) -> Self {
        Self {
            sign: -self.sign,
            logmag: self.logmag,
        }
    }

    pub fn abs(self) -> Self {
        Self {
            sign: self.sign.abs(),
            logmag: self.logmag,
        }
    }

    pub fn mul(self, other: Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::ZERO;
        }
        Self {
            sign: self.sign * other.sign,
            logmag: self.logmag + other.logmag,
        }
    }

    pub fn div(self, other: Self) -> Result<Self> {
        if other.is_zero() {
            return Err(Error::Domain("division by zero".into()));
        }
        if self.is_zero() {
            return Ok(Self::ZERO);
        }
        Ok(Self {
            sign: self.sign * other.sign,
            logmag: self.logmag - other.logmag,
        })
    }

    pub fn pow_int(self, n: i32) -> Result<Self> {
        if n == 0 {
            return Ok(Self::ONE);
        }
        if self.is_zero() {
            return if n > 0 {
                Ok(Self::ZERO)
            } else {
                Err(Error::Domain("zero raised to a negative power".into()))
            };
        }
        let sign = if n % 2 == 0 { 1 } else { self.sign };
        Ok(Self {
            sign,
            logmag: f64::from(n) * self.logmag,
        })
    }

    pub fn sqrt(self) -> Result<Self> {
        match self.sign {
            -1 => Err(Error::Domain("square root of a negative value".into())),
            0 => Ok(Self::ZERO),
            _ => Ok(Self {
                sign: 1,
                logmag: 0.5 * self.logmag,
            }),
        }
    }

    /// Natural log of a positive value, as a plain real.
    pub fn ln(self) -> Result<f64> {
        if self.sign == 1 {
            Ok(self.logmag)
        } else {
            Err(Error::Domain("logarithm of a non-positive value".into()))
        }
    }

    /// Sum of two values of equal sign (zero is allowed on either side), via log-sum-exp.
    pub fn add_same_sign(self, other: Self) -> Result<Self> {
        if self.is_zero() {
            return Ok(other);
        }
        if other.is_zero() {
            return Ok(self);
        }
        if self.sign != other.sign {
            return Err(Error::Unsupported(
                "addition of opposite-sign extended scalars".into(),
            ));
        }
        let (hi, lo) = if self.logmag >= other.logmag {
            (self.logmag, other.logmag)
        } else {
            (other.logmag, self.logmag)
        };
        Ok(Self {
            sign: self.sign,
            logmag: hi + (lo - hi).exp().ln_1p(),
        })
    }

    /// Total order consistent with the real line.
    pub fn compare(self, other: Self) -> Ordering {
        match self.sign.cmp(&other.sign) {
            Ordering::Equal => match self.sign {
                0 => Ordering::Equal,
                1 => self.logmag.total_cmp(&other.logmag),
                _ => other.logmag.total_cmp(&self.logmag),
            },
            ord => ord,
        }
    }
}

impl PartialOrd for ExtendedScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.compare(*other))
    }
}

impl fmt::Display for ExtendedScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_finite_f64() {
            Some(v) => write!(f, "{v:e}"),
            None => {
                let log10 = self.logmag / std::f64::consts::LN_10;
                let exp = log10.floor();
                let mant = 10f64.powf(log10 - exp);
                let sign = if self.sign < 0 { "-" } else { "" };
                write!(f, "{sign}{mant:.6}e{exp}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xs(v: f64) -> ExtendedScalar {
        ExtendedScalar::from_f64(v).unwrap()
    }

    #[test]
    fn mul_adds_logs() {
        let p = xs(2.0).mul(xs(3.0));
        assert_eq!(p.logmag(), 2f64.ln() + 3f64.ln());
        assert!((p.to_f64() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn pow_int_scales_log() {
        let p = xs(10.0).pow_int(3).unwrap();
        assert_eq!(p.logmag(), 3.0 * 10f64.ln());
        assert_eq!(xs(-2.0).pow_int(3).unwrap().sign(), -1);
        assert_eq!(xs(-2.0).pow_int(2).unwrap().sign(), 1);
    }

    #[test]
    fn division_by_zero_is_domain_error() {
        assert!(matches!(
            xs(1.0).div(ExtendedScalar::ZERO),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn opposite_sign_addition_rejected() {
        assert!(matches!(
            xs(1.0).add_same_sign(xs(-1.0)),
            Err(Error::Unsupported(_))
        ));
        assert_eq!(xs(0.0).add_same_sign(xs(-1.0)).unwrap(), xs(-1.0));
    }

    #[test]
    fn compare_orders_like_reals() {
        assert_eq!(xs(1265.6).compare(xs(1.0)), Ordering::Greater);
        assert_eq!(xs(-3.0).compare(xs(-2.0)), Ordering::Less);
        assert_eq!(xs(-3.0).compare(ExtendedScalar::ZERO), Ordering::Less);
        assert_eq!(ExtendedScalar::ZERO.compare(ExtendedScalar::ZERO), Ordering::Equal);
    }

    #[test]
    fn huge_values_stay_finite_in_log_domain() {
        let big = ExtendedScalar::from_log(1, 5000.0).unwrap();
        let sum = big.add_same_sign(big).unwrap();
        assert!((sum.logmag() - (5000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(big.to_f64(), f64::INFINITY);
        assert!(big.to_finite_f64().is_none());
        assert!(format!("{big}").contains('e'));
    }
}
