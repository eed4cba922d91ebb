//! Paired-sample statistics.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Two-sided exact sign test on paired differences. Exact zeros are dropped.
pub fn sign_test(diffs: &[f64]) -> Result<f64> {
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::InvalidArgument("NaN difference"));
    }
    let n = diffs.iter().filter(|&&d| d != 0.0).count();
    if n == 0 {
        return Err(Error::AllTies);
    }
    let k = diffs.iter().filter(|&&d| d > 0.0).count();
    let lower = binomial_half_cdf(n, k);
    let upper = binomial_half_cdf(n, n - k);
    Ok((2.0 * lower.min(upper)).min(1.0))
}

/// `P(X ≤ k)` for `X ~ Binomial(n, ½)`, summed in log space.
fn binomial_half_cdf(n: usize, k: usize) -> f64 {
    let ln_half_n = n as f64 * -core::f64::consts::LN_2;
    let ln_fact_n = libm::lgamma(n as f64 + 1.0);
    let terms: Vec<f64> =
        (0..=k).map(|i| ln_fact_n - libm::lgamma(i as f64 + 1.0) - libm::lgamma((n - i) as f64 + 1.0) + ln_half_n).collect();
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| libm::exp(t - max)).sum();
    libm::exp(max + libm::log(sum)).min(1.0)
}

/// Median of a non-empty sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { 0.5 * (v[m - 1] + v[m]) } else { v[m] })
}
