//! Nonnegative reals carried as logarithms.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul};

/// A nonnegative real `e^ln`, or exact zero.
///
/// Products and ratios of survival functionals span hundreds of orders of
/// magnitude at realistic walk lengths, so they never leave the log domain
/// until a final estimate is formed.
#[derive(Clone, Copy, PartialEq)]
pub struct LogValue {
    ln: f64,
    zero: bool,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { ln: f64::NEG_INFINITY, zero: true };
    pub const ONE: LogValue = LogValue { ln: 0.0, zero: false };

    /// From a logarithm. `-inf` maps to [`LogValue::ZERO`]; NaN is rejected by a debug assertion.
    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan(), "LogValue from NaN");
        if ln == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            LogValue { ln, zero: false }
        }
    }

    /// From a linear-scale value; negative inputs are a caller bug.
    pub fn from_f64(x: f64) -> Self {
        debug_assert!(x >= 0.0, "LogValue from negative {x}");
        if x == 0.0 {
            Self::ZERO
        } else {
            LogValue { ln: x.ln(), zero: false }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Natural log of the value (`-inf` for zero).
    pub fn ln(&self) -> f64 {
        if self.zero {
            f64::NEG_INFINITY
        } else {
            self.ln
        }
    }

    pub fn to_f64(&self) -> f64 {
        if self.zero {
            0.0
        } else {
            self.ln.exp()
        }
    }

    /// `self - other` for `self >= other`; the result is clamped at zero.
    pub fn sub_saturating(self, other: LogValue) -> LogValue {
        if other.zero {
            return self;
        }
        if self.zero || other.ln >= self.ln {
            return Self::ZERO;
        }
        // ln(a - b) = ln a + ln(1 - e^{ln b - ln a})
        LogValue::from_ln(self.ln + ln_one_minus_exp(other.ln - self.ln))
    }

    pub fn powi(self, k: i32) -> LogValue {
        if self.zero {
            if k == 0 {
                Self::ONE
            } else {
                Self::ZERO
            }
        } else {
            LogValue::from_ln(self.ln * k as f64)
        }
    }
}

/// `ln(e^a + e^b)` by max-shifted summation.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln(1 - e^d)` for `d <= 0`, accurate at both ends.
#[inline]
pub fn ln_one_minus_exp(d: f64) -> f64 {
    debug_assert!(d <= 0.0);
    if d > -std::f64::consts::LN_2 {
        (-d.exp_m1()).ln()
    } else {
        (-d.exp()).ln_1p()
    }
}

/// `ln(1 - e^{-x})` for `x = e^{ln_x} > 0`, without forming `x` when it is tiny or huge.
#[inline]
pub fn ln_one_minus_exp_neg(ln_x: f64) -> f64 {
    if ln_x < -700.0 {
        return ln_x;
    }
    let x = ln_x.exp();
    if x == f64::INFINITY {
        return 0.0;
    }
    ln_one_minus_exp(-x)
}

/// Max-shifted `ln Σ e^{v}`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        if self.zero || rhs.zero {
            Self::ZERO
        } else {
            LogValue::from_ln(self.ln + rhs.ln)
        }
    }
}

impl Div for LogValue {
    type Output = LogValue;
    /// Division by zero is a caller bug; it yields `+inf` in the log.
    fn div(self, rhs: LogValue) -> LogValue {
        if self.zero {
            Self::ZERO
        } else {
            LogValue::from_ln(self.ln - rhs.ln())
        }
    }
}

impl Add for LogValue {
    type Output = LogValue;
    fn add(self, rhs: LogValue) -> LogValue {
        LogValue::from_ln(log_add_exp(self.ln(), rhs.ln()))
    }
}

impl PartialOrd for LogValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln().partial_cmp(&other.ln())
    }
}

impl fmt::Debug for LogValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero {
            write!(f, "LogValue(0)")
        } else {
            write!(f, "LogValue(e^{})", self.ln)
        }
    }
}
