//! Scalar log-domain primitives.
//!
//! Probabilities live in the log domain throughout the crate; `-inf` is an exact
//! zero and every function here must accept it without producing NaN.

use crate::error::{Error, Result};

/// Natural log of a probability. `f64::NEG_INFINITY` is probability zero.
pub type LogReal = f64;

pub const LOG_ZERO: LogReal = f64::NEG_INFINITY;

/// `0.5 * ln(2π)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

pub const DEFAULT_VARIANCE_FLOOR: f64 = 0.001;

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: LogReal, b: LogReal) -> LogReal {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == LOG_ZERO {
        return LOG_ZERO;
    }
    if lo == LOG_ZERO {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(termᵢ)`, shifted by the maximum so large magnitudes do not overflow.
pub fn log_sum_exp(terms: &[LogReal]) -> Result<LogReal> {
    if terms.is_empty() {
        return Err(Error::Contract("log_sum_exp of an empty list".into()));
    }
    Ok(log_sum_exp_unchecked(terms))
}

pub(crate) fn log_sum_exp_unchecked(terms: &[LogReal]) -> LogReal {
    let max = terms.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return LOG_ZERO;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = terms.iter().filter(|&&v| v != LOG_ZERO).map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln(1 + exp(y))` without overflow for large `y`.
#[inline]
pub fn softplus(y: f64) -> f64 {
    if y > 0.0 {
        y + (-y).exp().ln_1p()
    } else {
        y.exp().ln_1p()
    }
}

#[inline]
pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(y) = -softplus(-y)`.
#[inline]
pub fn log_sigmoid(y: f64) -> f64 {
    -softplus(-y)
}

/// `ln(1 - σ(y)) = ln σ(-y) = -softplus(y)`.
#[inline]
pub fn log_one_minus_sigmoid(y: f64) -> f64 {
    -softplus(y)
}

/// Inverse of the logistic function; `p` must lie in (0, 1).
#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Inverse of `softplus`, for `x > 0`.
#[inline]
pub fn softplus_inverse(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `max(softplus(y), floor)`.
pub fn floored_softplus(y: f64, floor: f64) -> Result<f64> {
    check_floor(floor)?;
    Ok(softplus(y).max(floor))
}

pub(crate) fn check_floor(floor: f64) -> Result<()> {
    if floor > 0.0 && floor.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "variance floor must be a positive finite number, got {floor}"
        )))
    }
}

/// Log density of a diagonal-covariance Gaussian; `sigma` holds standard deviations.
pub fn gaussian_diag_logpdf(x: &[f64], mu: &[f64], sigma: &[f64]) -> Result<LogReal> {
    if x.len() != mu.len() || x.len() != sigma.len() {
        return Err(Error::Contract(format!(
            "gaussian_diag_logpdf dimension mismatch: x={}, mu={}, sigma={}",
            x.len(),
            mu.len(),
            sigma.len()
        )));
    }
    Ok(x.iter()
        .zip(mu)
        .zip(sigma)
        .map(|((&x, &m), &s)| {
            let z = (x - m) / s;
            -HALF_LN_2PI - s.ln() - 0.5 * z * z
        })
        .sum())
}

/// `ln C(n, k)` via log-gamma-free summation; exact enough for the sizes used here.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return LOG_ZERO;
    }
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}
