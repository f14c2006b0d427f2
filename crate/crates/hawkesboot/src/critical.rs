//! Reference distribution quantiles.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided standard normal critical value `z_{(1+level)/2}`.
pub fn normal_two_sided(level: f64) -> f64 {
    Normal::standard().inverse_cdf(0.5 * (1.0 + level))
}

/// `χ²_d` quantile at `level`.
pub fn chi_squared(level: f64, dof: usize) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(level)
}
