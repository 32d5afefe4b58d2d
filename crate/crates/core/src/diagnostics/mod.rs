//! Goodhart diagnostics: summary statistics, the three gap measures, threshold
//! sweeps, and Gaussian oracles.
//!
//! - `proxy_gap`: how much more the metric exceeds the goal after selection than
//!   before, `E[M - G | final] - E[M - G | base]`.
//! - `model_gap`: mean error of the reference fit (goal regressed on metric,
//!   learned on the base batch or its observed region) over the final batch,
//!   `E[fit(M) - G | final]`.
//! - `corr_collapse`: `pearson_base(M, G) - pearson_final(M, G)`, absent when
//!   either correlation is undefined.

mod oracle;
mod report;
mod sweep;

use serde::Serialize;
use thiserror::Error;

use crate::pipeline::PipelineError;
use crate::scm::{NodeId, SampleBatch};

pub use oracle::{
    inverse_mills, regressional_oracle, truncated_normal_mean, OracleError, RegressionalOracle,
};
pub use report::{build_report, reference_fit, run_report, EffectReport, StageSummary};
pub use sweep::{sweep, SweepCurve, SweepPoint};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("unknown column {0}")]
    UnknownColumn(NodeId),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("regressor has zero variance")]
    DegenerateRegressor,
    #[error("empty batch")]
    EmptyBatch,
    #[error("cannot sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Normal-approximation standard error of the mean.
pub fn std_error(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    std_dev(xs) / (xs.len() as f64).sqrt()
}

/// Pearson correlation, or `None` when undefined (fewer than two values or a
/// constant column). A constant column is never reported as zero correlation.
pub fn pearson_slices(x: &[f64], y: &[f64]) -> Option<f64> {
    assert_eq!(x.len(), y.len(), "columns differ in length");
    if x.len() < 2 {
        return None;
    }
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn column<'a>(batch: &'a SampleBatch, name: &str) -> Result<&'a [f64], DiagnosticsError> {
    batch
        .column(name)
        .ok_or_else(|| DiagnosticsError::UnknownColumn(NodeId::new(name)))
}

pub fn pearson(batch: &SampleBatch, a: &str, b: &str) -> Result<Option<f64>, DiagnosticsError> {
    let (x, y) = (column(batch, a)?, column(batch, b)?);
    if batch.len() < 2 {
        return Err(DiagnosticsError::TooFewRows {
            needed: 2,
            got: batch.len(),
        });
    }
    Ok(pearson_slices(x, y))
}

/// Least-squares line `y = slope * x + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    #[serde(rename = "region")]
    pub fit_region_label: String,
    pub n_fit: usize,
    #[serde(skip)]
    pub x_mean: f64,
    /// Sum of squared regressor deviations.
    #[serde(skip)]
    pub sxx: f64,
    /// Residual variance with n - 2 degrees of freedom (0 when n_fit = 2).
    #[serde(skip)]
    pub residual_var: f64,
}

impl Fit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

pub fn ols_fit_slices(x: &[f64], y: &[f64], region: &str) -> Result<Fit, DiagnosticsError> {
    assert_eq!(x.len(), y.len(), "columns differ in length");
    let n = x.len();
    if n < 2 {
        return Err(DiagnosticsError::TooFewRows { needed: 2, got: n });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return Err(DiagnosticsError::DegenerateRegressor);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_var = if n > 2 {
        x.iter()
            .zip(y)
            .map(|(a, b)| (b - (slope * a + intercept)).powi(2))
            .sum::<f64>()
            / (n - 2) as f64
    } else {
        0.0
    };
    Ok(Fit {
        slope,
        intercept,
        fit_region_label: region.to_string(),
        n_fit: n,
        x_mean: mx,
        sxx,
        residual_var,
    })
}

/// Regresses column `y` on column `x` over the whole batch.
pub fn ols_fit(batch: &SampleBatch, x: &str, y: &str) -> Result<Fit, DiagnosticsError> {
    ols_fit_slices(column(batch, x)?, column(batch, y)?, "all")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaps {
    pub proxy_gap: f64,
    pub model_gap: f64,
    pub corr_collapse: Option<f64>,
}

fn excess(batch: &SampleBatch, goal: &str, metric: &str) -> Result<Vec<f64>, DiagnosticsError> {
    let (g, m) = (column(batch, goal)?, column(batch, metric)?);
    Ok(m.iter().zip(g).map(|(m, g)| m - g).collect())
}

fn fit_errors(
    batch: &SampleBatch,
    fit: &Fit,
    goal: &str,
    metric: &str,
) -> Result<Vec<f64>, DiagnosticsError> {
    let (g, m) = (column(batch, goal)?, column(batch, metric)?);
    Ok(m.iter().zip(g).map(|(m, g)| fit.predict(*m) - g).collect())
}

fn correlation(batch: &SampleBatch, goal: &str, metric: &str) -> Result<Option<f64>, DiagnosticsError> {
    Ok(pearson_slices(column(batch, metric)?, column(batch, goal)?))
}

pub fn gaps(
    base: &SampleBatch,
    final_batch: &SampleBatch,
    fit: &Fit,
    goal: &str,
    metric: &str,
) -> Result<Gaps, DiagnosticsError> {
    if base.is_empty() || final_batch.is_empty() {
        return Err(DiagnosticsError::EmptyBatch);
    }
    let proxy_gap = mean(&excess(final_batch, goal, metric)?) - mean(&excess(base, goal, metric)?);
    let model_gap = mean(&fit_errors(final_batch, fit, goal, metric)?);
    let corr_collapse = match (
        correlation(base, goal, metric)?,
        correlation(final_batch, goal, metric)?,
    ) {
        (Some(b), Some(f)) => Some(b - f),
        _ => None,
    };
    Ok(Gaps {
        proxy_gap,
        model_gap,
        corr_collapse,
    })
}

/// Normal-approximation standard errors of the two gap means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapErrors {
    pub proxy_gap: f64,
    pub model_gap: f64,
}

/// The proxy-gap error combines the selected and base means in quadrature. The
/// model-gap error adds the reference fit's own uncertainty at the selected
/// mean of the metric to the spread of the fit errors.
pub fn gap_standard_errors(
    base: &SampleBatch,
    final_batch: &SampleBatch,
    fit: &Fit,
    goal: &str,
    metric: &str,
) -> Result<GapErrors, DiagnosticsError> {
    if base.is_empty() || final_batch.is_empty() {
        return Err(DiagnosticsError::EmptyBatch);
    }
    let se_final = std_error(&excess(final_batch, goal, metric)?);
    let se_base = std_error(&excess(base, goal, metric)?);
    let m_final = mean(column(final_batch, metric)?);
    let fit_var = fit.residual_var * (1.0 / fit.n_fit as f64 + (m_final - fit.x_mean).powi(2) / fit.sxx);
    let se_errors = std_error(&fit_errors(final_batch, fit, goal, metric)?);
    Ok(GapErrors {
        proxy_gap: (se_final * se_final + se_base * se_base).sqrt(),
        model_gap: (se_errors * se_errors + fit_var).sqrt(),
    })
}
