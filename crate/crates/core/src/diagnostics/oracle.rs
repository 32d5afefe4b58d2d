//! Closed-form Gaussian references for selection on a noisy metric.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
#[error("invalid oracle parameter: {0}")]
pub struct OracleError(pub String);

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Inverse Mills ratio `phi(z) / (1 - Phi(z))`.
///
/// Past z = 8 the upper tail mass is evaluated through the continued fraction
/// `z + 1/(z + 2/(z + 3/(z + ...)))`, which stays accurate where the direct
/// ratio of two tiny numbers does not.
pub fn inverse_mills(z: f64) -> f64 {
    if z > 8.0 {
        continued_fraction(z)
    } else {
        std_normal_pdf(z) / (0.5 * erfc(z * FRAC_1_SQRT_2))
    }
}

fn continued_fraction(z: f64) -> f64 {
    let mut t = z;
    for k in (1..=64).rev() {
        t = z + f64::from(k) / t;
    }
    t
}

/// `E[X | X >= c]` for `X ~ Normal(mu, sigma^2)`.
pub fn truncated_normal_mean(mu: f64, sigma: f64, c: f64) -> Result<f64, OracleError> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(OracleError(format!("sigma must be positive, got {sigma}")));
    }
    if !mu.is_finite() || c.is_nan() {
        return Err(OracleError("non-finite location or threshold".to_string()));
    }
    Ok(mu + sigma * inverse_mills((c - mu) / sigma))
}

/// Conditional means under `G ~ Normal(0, sigma_g^2)`, `M = G + Normal(mu_e, sigma_e^2)`
/// and selection `M >= c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionalOracle {
    /// `E[M | M >= c]`
    pub mean_metric: f64,
    /// `E[G | M >= c]`
    pub mean_goal: f64,
    /// `E[M - G | M >= c] - E[M - G]`
    pub proxy_gap: f64,
}

pub fn regressional_oracle(
    sigma_g: f64,
    sigma_e: f64,
    mu_e: f64,
    c: f64,
) -> Result<RegressionalOracle, OracleError> {
    if !sigma_g.is_finite() || sigma_g <= 0.0 {
        return Err(OracleError(format!("sigma_g must be positive, got {sigma_g}")));
    }
    if !sigma_e.is_finite() || sigma_e < 0.0 {
        return Err(OracleError(format!(
            "sigma_e must be non-negative, got {sigma_e}"
        )));
    }
    let var_m = sigma_g * sigma_g + sigma_e * sigma_e;
    let mean_metric = truncated_normal_mean(mu_e, var_m.sqrt(), c)?;
    let mean_goal = (sigma_g * sigma_g / var_m) * (mean_metric - mu_e);
    Ok(RegressionalOracle {
        mean_metric,
        mean_goal,
        proxy_gap: mean_metric - mean_goal - mu_e,
    })
}
