use core::cmp::Ordering;
use core::fmt;
use core::ops::{Div, Mul, Neg};

use crate::float::{exp, expm1, ln, ln1p};
use crate::{Error, Result};

/// Sign of a [`LogValue`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

/// A real number stored as `sign · exp(log_magnitude)`.
///
/// Counts such as `e^{(v−w)t}` with `(v−w)t ~ 1e10` stay representable.
/// Zero is `(Sign::Zero, −∞)`; constructors normalise to that sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    log_magnitude: f64,
    sign: Sign,
}

impl LogValue {
    pub const ZERO: Self = Self {
        log_magnitude: f64::NEG_INFINITY,
        sign: Sign::Zero,
    };
    pub const ONE: Self = Self {
        log_magnitude: 0.0,
        sign: Sign::Positive,
    };

    /// `e^ln`; `ln = −∞` gives zero.
    pub fn from_ln(ln: f64) -> Self {
        Self::signed(Sign::Positive, ln)
    }

    pub fn signed(sign: Sign, log_magnitude: f64) -> Self {
        if sign == Sign::Zero || log_magnitude == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self {
                log_magnitude,
                sign,
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        match x.partial_cmp(&0.0) {
            Some(Ordering::Greater) => Self::signed(Sign::Positive, ln(x)),
            Some(Ordering::Less) => Self::signed(Sign::Negative, ln(-x)),
            Some(Ordering::Equal) => Self::ZERO,
            None => Self {
                log_magnitude: f64::NAN,
                sign: Sign::Positive,
            },
        }
    }

    /// Natural log of the magnitude.
    pub fn ln(self) -> f64 {
        self.log_magnitude
    }

    pub fn log10(self) -> f64 {
        self.log_magnitude * core::f64::consts::LOG10_E
    }

    pub fn sign(self) -> Sign {
        self.sign
    }

    pub fn is_zero(self) -> bool {
        self.sign == Sign::Zero
    }

    pub fn is_positive(self) -> bool {
        self.sign == Sign::Positive
    }

    pub fn is_finite(self) -> bool {
        self.is_zero() || self.log_magnitude.is_finite()
    }

    /// Back to `f64`; overflows to ±∞ and underflows to 0 as `exp` does.
    pub fn to_f64(self) -> f64 {
        match self.sign {
            Sign::Zero => 0.0,
            Sign::Positive => exp(self.log_magnitude),
            Sign::Negative => -exp(self.log_magnitude),
        }
    }

    /// Multiply by `e^delta`.
    pub fn scale_ln(self, delta: f64) -> Self {
        Self::signed(self.sign, self.log_magnitude + delta)
    }

    pub fn abs(self) -> Self {
        Self::signed(
            if self.is_zero() {
                Sign::Zero
            } else {
                Sign::Positive
            },
            self.log_magnitude,
        )
    }

    /// Signed comparison of the represented reals.
    pub fn cmp_value(self, other: Self) -> Option<Ordering> {
        let rank = |s: Sign| match s {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        };
        match rank(self.sign).cmp(&rank(other.sign)) {
            Ordering::Equal => match self.sign {
                Sign::Zero => Some(Ordering::Equal),
                Sign::Positive => self.log_magnitude.partial_cmp(&other.log_magnitude),
                Sign::Negative => other.log_magnitude.partial_cmp(&self.log_magnitude),
            },
            ord => Some(ord),
        }
    }

    /// Relative difference `|a − b| / |b|` of two positive values, computed in
    /// log space.
    pub fn rel_diff(self, reference: Self) -> f64 {
        let d = self.log_magnitude - reference.log_magnitude;
        expm1(d).abs()
    }
}

impl Default for LogValue {
    fn default() -> Self {
        Self::ZERO
    }
}

impl Neg for LogValue {
    type Output = Self;
    fn neg(self) -> Self {
        let sign = match self.sign {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        };
        Self::signed(sign, self.log_magnitude)
    }
}

impl Mul for LogValue {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return Self::ZERO;
        }
        let sign = if self.sign == rhs.sign {
            Sign::Positive
        } else {
            Sign::Negative
        };
        Self::signed(sign, self.log_magnitude + rhs.log_magnitude)
    }
}

impl Div for LogValue {
    type Output = Self;
    /// Division by zero yields an infinite magnitude.
    fn div(self, rhs: Self) -> Self {
        if self.is_zero() {
            return Self::ZERO;
        }
        let sign = if rhs.is_zero() || self.sign == rhs.sign {
            if rhs.is_zero() {
                self.sign
            } else {
                Sign::Positive
            }
        } else {
            Sign::Negative
        };
        Self::signed(sign, self.log_magnitude - rhs.log_magnitude)
    }
}

impl core::ops::Add for LogValue {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        log_sum_exp(&[self, rhs])
    }
}

impl core::ops::Sub for LogValue {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl fmt::Display for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => f.write_str("0"),
            Sign::Positive => write!(f, "exp({})", self.log_magnitude),
            Sign::Negative => write!(f, "-exp({})", self.log_magnitude),
        }
    }
}

/// `ln(1 − e^d)` for `d ≤ 0`.
pub fn ln1m_exp(d: f64) -> f64 {
    if d > -core::f64::consts::LN_2 {
        ln(-expm1(d))
    } else {
        ln1p(-exp(d))
    }
}

/// `ln Σ e^{xᵢ}` over nonnegative magnitudes, max factored out.
fn sum_magnitudes(logs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = logs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_infinite() {
        return max;
    }
    let s: f64 = logs.map(|l| exp(l - max)).sum();
    max + ln(s)
}

/// Signed sum of log-space terms.
pub fn log_sum_exp(terms: &[LogValue]) -> LogValue {
    let of = |s: Sign| {
        terms
            .iter()
            .filter(move |t| t.sign == s)
            .map(|t| t.log_magnitude)
    };
    let pos = sum_magnitudes(of(Sign::Positive));
    let neg = sum_magnitudes(of(Sign::Negative));
    if pos.is_nan() || neg.is_nan() {
        return LogValue {
            log_magnitude: f64::NAN,
            sign: Sign::Positive,
        };
    }
    match pos.partial_cmp(&neg) {
        Some(Ordering::Greater) => LogValue::from_ln(pos + ln1m_exp(neg - pos)),
        Some(Ordering::Less) => LogValue::signed(Sign::Negative, neg + ln1m_exp(pos - neg)),
        _ => LogValue::ZERO,
    }
}

/// `a − b`, requiring `a ≥ b`.
pub fn log_diff_exp(a: LogValue, b: LogValue) -> Result<LogValue> {
    match a.cmp_value(b) {
        Some(Ordering::Less) | None => Err(Error::NegativeDifference),
        _ => Ok(a - b),
    }
}
