use serde::Serialize;

use super::{column, gaps, mean, ols_fit_slices, pearson_slices, std_dev, DiagnosticsError, Fit};
use crate::dsl::ScenarioDoc;
use crate::pipeline::{run_pipeline, PipelineResult};
use crate::scm::SampleBatch;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageSummary {
    pub label: String,
    pub count: usize,
    pub goal_mean: f64,
    pub goal_std: f64,
    pub metric_mean: f64,
    pub metric_std: f64,
    /// `None` when either column is constant.
    pub pearson: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectReport {
    pub scenario_name: String,
    pub n: usize,
    pub seed: u64,
    pub stages: Vec<StageSummary>,
    pub reference_fit: Fit,
    pub proxy_gap: f64,
    pub model_gap: f64,
    pub corr_collapse: Option<f64>,
}

pub fn build_report(
    doc: &ScenarioDoc,
    result: &PipelineResult,
    n: usize,
    seed: u64,
) -> Result<EffectReport, DiagnosticsError> {
    let goal = doc.model.goal.as_str();
    let metric = doc.model.metric.as_str();

    let mut stages = Vec::with_capacity(result.stage_batches.len());
    for (label, batch) in &result.stage_batches {
        let (g, m) = (column(batch, goal)?, column(batch, metric)?);
        stages.push(StageSummary {
            label: label.clone(),
            count: batch.len(),
            goal_mean: mean(g),
            goal_std: std_dev(g),
            metric_mean: mean(m),
            metric_std: std_dev(m),
            pearson: pearson_slices(m, g),
        });
    }

    let base = result.base();
    let fit = reference_fit(doc, base)?;
    let gaps = gaps(base, result.final_batch(), &fit, goal, metric)?;

    Ok(EffectReport {
        scenario_name: doc.source_name.clone(),
        n,
        seed,
        stages,
        reference_fit: fit,
        proxy_gap: gaps.proxy_gap,
        model_gap: gaps.model_gap,
        corr_collapse: gaps.corr_collapse,
    })
}

/// Goal regressed on metric over the base batch, restricted to the fit region
/// when the scenario declares one.
pub fn reference_fit(doc: &ScenarioDoc, base: &SampleBatch) -> Result<Fit, DiagnosticsError> {
    let m = column(base, doc.model.metric.as_str())?;
    let g = column(base, doc.model.goal.as_str())?;
    match &doc.fit_region {
        None => ols_fit_slices(m, g, "all"),
        Some(region) => {
            let rows = region.positions(base);
            let xs: Vec<f64> = rows.iter().map(|&i| m[i]).collect();
            let ys: Vec<f64> = rows.iter().map(|&i| g[i]).collect();
            ols_fit_slices(&xs, &ys, &region.label())
        }
    }
}

/// Runs the scenario and summarises it.
pub fn run_report(doc: &ScenarioDoc, n: usize, seed: u64) -> Result<EffectReport, DiagnosticsError> {
    let result = run_pipeline(doc, n, seed)?;
    build_report(doc, &result, n, seed)
}
