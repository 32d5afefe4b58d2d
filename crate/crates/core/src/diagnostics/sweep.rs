use serde::Serialize;

use super::{column, mean, std_error, DiagnosticsError};
use crate::dsl::ScenarioDoc;
use crate::pipeline::{run_stages, select, PipelineError, Stage};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub c: f64,
    pub n_selected: usize,
    pub mean_goal: f64,
    pub mean_metric: f64,
    pub proxy_gap: f64,
    pub se_goal: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    /// Thresholds at which no row survived.
    pub omitted: Vec<f64>,
}

/// Re-runs the final threshold stage of `doc` at every value in `thresholds`.
/// All points share one base sample and one pass through the earlier stages.
pub fn sweep(
    doc: &ScenarioDoc,
    thresholds: &[f64],
    n: usize,
    seed: u64,
) -> Result<SweepCurve, DiagnosticsError> {
    let Some((Stage::Threshold { node, cmp, .. }, prefix)) = doc.stages.split_last() else {
        return Err(DiagnosticsError::InvalidSweep(
            "the last stage must be a threshold selection".to_string(),
        ));
    };
    if !cmp.is_upward() {
        return Err(DiagnosticsError::InvalidSweep(format!(
            "threshold {} is not an upper-tail selection",
            cmp.symbol()
        )));
    }
    if thresholds.iter().any(|c| !c.is_finite()) {
        return Err(DiagnosticsError::InvalidSweep("non-finite threshold".to_string()));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(DiagnosticsError::InvalidSweep(
            "thresholds must be strictly increasing".to_string(),
        ));
    }

    let result = run_stages(doc, prefix, n, seed)?;
    let goal = doc.model.goal.as_str();
    let metric = doc.model.metric.as_str();
    let base = result.base();
    let base_excess = mean(&excess(column(base, metric)?, column(base, goal)?));
    let before = result.final_batch();

    let mut curve = SweepCurve::default();
    for &c in thresholds {
        let stage = Stage::Threshold {
            node: node.clone(),
            cmp: *cmp,
            c,
        };
        let chosen = match select(before, &stage) {
            Ok(b) => b,
            Err(PipelineError::EmptySelection) => {
                curve.omitted.push(c);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let (g, m) = (column(&chosen, goal)?, column(&chosen, metric)?);
        curve.points.push(SweepPoint {
            c,
            n_selected: chosen.len(),
            mean_goal: mean(g),
            mean_metric: mean(m),
            proxy_gap: mean(&excess(m, g)) - base_excess,
            se_goal: std_error(g),
        });
    }
    Ok(curve)
}

fn excess(m: &[f64], g: &[f64]) -> Vec<f64> {
    m.iter().zip(g).map(|(m, g)| m - g).collect()
}
