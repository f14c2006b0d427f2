//! Goodness-of-fit checks on transformed waiting times, which are i.i.d.
//! `Exp(1)` under a correctly specified model.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Kolmogorov–Smirnov test against `Exp(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided KS distance to `1 − e^{−x}`.
///
/// The p-value uses the asymptotic Kolmogorov distribution evaluated at
/// Stephens' scaled statistic `(√n + 0.12 + 0.11/√n)·D`.
pub fn ks_exp1(values: &[f64]) -> Result<KsTest> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(alloc::format!(
            "KS test needs at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN in KS input".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = if x <= 0.0 { 0.0 } else { -libm::expm1(-x) };
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let root = libm::sqrt(n);
    Ok(KsTest {
        statistic: d,
        p_value: kolmogorov_survival((root + 0.12 + 0.11 / root) * d),
        n: sorted.len(),
    })
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`, clamped to `[0, 1]`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        // the alternating series converges slowly here; Q is 1 to machine precision
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = libm::exp(-2.0 * k * k * lambda * lambda);
        total += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-17 * total.abs() {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// Hazen plotting position `(i − 0.5)/n` for the 1-based rank `i`.
pub fn plotting_position(i: usize, n: usize) -> f64 {
    (i as f64 - 0.5) / n as f64
}

/// `(empirical quantile, Exp(1) quantile)` pairs in increasing order.
pub fn qq_pairs(values: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v, -libm::log1p(-plotting_position(i + 1, n))))
        .collect()
}

/// Sample autocorrelations for lags `0..=max_lag` with the white-noise
/// band `±1.96/√n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    pub values: Vec<f64>,
    pub band: f64,
}

impl Autocorrelation {
    /// Lags `1..` whose correlation leaves the band.
    pub fn outside_band(&self) -> usize {
        self.values.iter().skip(1).filter(|r| r.abs() > self.band).count()
    }
}

pub fn acf(values: &[f64], max_lag: usize) -> Result<Autocorrelation> {
    let n = values.len();
    if max_lag >= n {
        return Err(Error::InsufficientData(alloc::format!("max lag {max_lag} needs more than {n} values")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let gamma0: f64 = centred.iter().map(|c| c * c).sum();
    if !(gamma0 > 0.0) {
        return Err(Error::Numeric("autocorrelation of a constant series is undefined".into()));
    }
    let values = (0..=max_lag)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let gk: f64 = centred[k..].iter().zip(&centred).map(|(a, b)| a * b).sum();
            gk / gamma0
        })
        .collect();
    Ok(Autocorrelation {
        values,
        band: 1.96 / libm::sqrt(n as f64),
    })
}

/// Squares of the values, for the ACF of `v̂ᵢ²`.
pub fn squares(values: &[f64]) -> Vec<f64> {
    values.iter().map(|v| v * v).collect()
}
