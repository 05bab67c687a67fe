//! Probabilities and probability bounds kept as natural logarithms.
//!
//! Bounds such as `exp(-1500)` are far below the smallest positive `f64`,
//! so every product, union and complement is done on log values and a
//! linear value is produced only on request.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear values below this are reported as underflow.
pub const LINEAR_FLOOR: f64 = 1e-300;

/// A probability in `[0, 1]` stored as `ln p`, with an explicit zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LogProbability {
    Zero,
    Ln(f64),
}

impl LogProbability {
    pub const ONE: LogProbability = LogProbability::Ln(0.0);

    /// From a log value; must be `<= 0` and not NaN. `-inf` maps to [`Zero`](Self::Zero).
    pub fn from_ln(ln: f64) -> Result<Self> {
        if ln.is_nan() || ln > 0.0 {
            return Err(Error::param("log_value", format!("{ln} is not the log of a probability")));
        }
        Ok(if ln == f64::NEG_INFINITY { Self::Zero } else { Self::Ln(ln) })
    }

    pub fn from_linear(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("probability", format!("{p} outside [0,1]")));
        }
        Ok(if p == 0.0 { Self::Zero } else { Self::Ln(p.ln()) })
    }

    /// `ln p`, `-inf` for zero.
    pub fn ln(self) -> f64 {
        match self {
            Self::Zero => f64::NEG_INFINITY,
            Self::Ln(x) => x,
        }
    }

    pub fn log10(self) -> f64 {
        self.ln() / std::f64::consts::LN_10
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Linear value, or `None` when it would fall below [`LINEAR_FLOOR`].
    pub fn linear(self) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::Ln(x) => {
                let p = x.exp();
                (p > LINEAR_FLOOR).then_some(p)
            }
        }
    }

    /// Probability of the intersection of independent events.
    pub fn and(self, other: Self) -> Self {
        match (self, other) {
            (Self::Ln(a), Self::Ln(b)) => Self::Ln(a + b),
            _ => Self::Zero,
        }
    }

    /// `ln(1 - p)` computed without cancellation.
    pub fn complement(self) -> Self {
        match self {
            Self::Zero => Self::ONE,
            Self::Ln(0.0) => Self::Zero,
            Self::Ln(x) if x < -std::f64::consts::LN_2 => Self::Ln((-x.exp()).ln_1p()),
            Self::Ln(x) => Self::Ln((-x.exp_m1()).ln()),
        }
    }

    /// Probability of a union of disjoint events; saturates at one.
    pub fn or_disjoint(self, other: Self) -> Self {
        let s = log_sum_exp(self.ln(), other.ln());
        if s == f64::NEG_INFINITY {
            Self::Zero
        } else {
            Self::Ln(s.min(0.0))
        }
    }
}

impl fmt::Display for LogProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.linear() {
            Some(p) => write!(f, "{p:e}"),
            None => write!(f, "exp({})", self.ln()),
        }
    }
}

/// `ln(e^a + e^b)` without overflow or underflow.
pub fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// An upper bound on a probability, stored as its log.
///
/// Union bounds routinely exceed one; such a bound is kept as computed and
/// flagged as vacuous instead of being clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    log_value: f64,
}

impl Bound {
    pub fn from_ln(log_value: f64) -> Self {
        debug_assert!(!log_value.is_nan());
        Self { log_value }
    }

    pub fn log_value(self) -> f64 {
        self.log_value
    }

    pub fn log10(self) -> f64 {
        self.log_value / std::f64::consts::LN_10
    }

    /// A bound `>= 1` says nothing.
    pub fn is_vacuous(self) -> bool {
        self.log_value >= 0.0
    }

    /// Linear value of the bound (possibly above one), or `None` on underflow.
    pub fn linear(self) -> Option<f64> {
        let v = self.log_value.exp();
        (v > LINEAR_FLOOR).then_some(v)
    }

    /// Multiply the bound by a positive factor (union over `factor` events).
    pub fn times(self, factor: f64) -> Self {
        debug_assert!(factor > 0.0);
        Self { log_value: self.log_value + factor.ln() }
    }

    /// The bound as a probability, capped at one.
    pub fn as_probability(self) -> LogProbability {
        LogProbability::Ln(self.log_value.min(0.0))
    }

    /// Whether an observed frequency is consistent with the bound.
    pub fn admits(self, p: f64) -> bool {
        p <= 0.0 || p.ln() <= self.log_value
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.linear() {
            Some(v) => write!(f, "{v:e}")?,
            None => write!(f, "exp({})", self.log_value)?,
        }
        if self.is_vacuous() {
            write!(f, " (vacuous)")?;
        }
        Ok(())
    }
}
