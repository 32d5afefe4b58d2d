//! Scenario execution: sample a base batch, then apply selections and
//! interventions in order, keeping every intermediate batch.
//!
//! Rows keep their original index through every stage. A `do` stage rewrites
//! the model and re-evaluates only the intervened node and its descendants for
//! the surviving rows, reusing the same keyed noise, so every other column is
//! carried over bit for bit.

use thiserror::Error;

use crate::dsl::{render_stage, DocError, ScenarioDoc};
use crate::scm::{
    apply_intervention, draw_noise, evaluate_rows, sample, Comparator, CompiledExpr, EvalFault, Expr,
    Intervention, ModelError, NodeId, NoiseSlots, SampleBatch, SampleError, StructuralModel,
};

#[derive(Clone, Debug, PartialEq)]
pub enum Stage {
    /// Keep rows where `node cmp c`.
    Threshold {
        node: NodeId,
        cmp: Comparator,
        c: f64,
    },
    /// Keep the `ceil(q * n)` rows with the highest score; ties go to the lower row.
    TopFraction {
        score: Expr,
        q: f64,
    },
    Do(Intervention),
    /// Stages carried out by the agent rather than the regulator.
    Agent(Vec<Stage>),
}

impl Stage {
    pub fn threshold(node: &str, cmp: Comparator, c: f64) -> Stage {
        Stage::Threshold {
            node: NodeId::new(node),
            cmp,
            c,
        }
    }

    pub fn top(score: Expr, q: f64) -> Stage {
        Stage::TopFraction { score, q }
    }

    pub fn intervene(target: &str, value: f64) -> Stage {
        Stage::Do(Intervention::new(target, value))
    }

    pub fn is_selection(&self) -> bool {
        matches!(self, Stage::Threshold { .. } | Stage::TopFraction { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid scenario: {}", join(.0))]
    Invalid(Vec<DocError>),
    #[error("no rows survive selection")]
    EmptySelection,
    #[error("top fraction {0} outside (0, 1]")]
    FractionOutOfRange(f64),
    #[error("unknown column {0}")]
    UnknownColumn(NodeId),
    #[error("{fault} in selection score at row {row}")]
    Score { row: u64, fault: EvalFault },
    #[error("not a selection stage")]
    NotASelection,
    #[error("agent blocks cannot be nested")]
    NestedAgent,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    /// `index` is 0-based among top-level stages; messages print it 1-based.
    #[error("stage {} ({label}): {source}", .index + 1)]
    AtStage {
        index: usize,
        label: String,
        source: Box<PipelineError>,
    },
}

fn join(errors: &[DocError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl PipelineError {
    /// The innermost error, with stage context removed.
    pub fn root(&self) -> &PipelineError {
        match self {
            PipelineError::AtStage { source, .. } => source.root(),
            other => other,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineResult {
    /// `("base", batch)` first, then one entry per executed leaf stage.
    pub stage_batches: Vec<(String, SampleBatch)>,
    /// The model after every intervention has been applied.
    pub final_model: StructuralModel,
}

impl PipelineResult {
    pub fn base(&self) -> &SampleBatch {
        &self.stage_batches[0].1
    }

    pub fn final_batch(&self) -> &SampleBatch {
        &self.stage_batches.last().expect("base entry always present").1
    }
}

/// Number of rows a top-fraction selection keeps out of `n`.
///
/// `q * n` within 1e-9 of an integer counts as that integer, so that e.g.
/// `0.07 * 100` keeps 7 rows rather than 8.
pub fn top_count(q: f64, n: usize) -> usize {
    let raw = q * n as f64;
    let nearest = raw.round();
    let k = if (raw - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        raw.ceil()
    };
    (k as usize).clamp(1, n)
}

/// Applies a threshold or top-fraction selection.
pub fn select(batch: &SampleBatch, stage: &Stage) -> Result<SampleBatch, PipelineError> {
    if batch.is_empty() {
        return Err(PipelineError::EmptySelection);
    }
    let keep: Vec<usize> = match stage {
        Stage::Threshold { node, cmp, c } => {
            let col = batch
                .column(node.as_str())
                .ok_or_else(|| PipelineError::UnknownColumn(node.clone()))?;
            (0..col.len()).filter(|&i| cmp.holds(col[i], *c)).collect()
        }
        Stage::TopFraction { score, q } => {
            if !(*q > 0.0 && *q <= 1.0) {
                return Err(PipelineError::FractionOutOfRange(*q));
            }
            let scores = score_rows(batch, score)?;
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            order.truncate(top_count(*q, batch.len()));
            order.sort_unstable();
            order
        }
        _ => return Err(PipelineError::NotASelection),
    };
    if keep.is_empty() {
        return Err(PipelineError::EmptySelection);
    }
    Ok(batch.subset(&keep))
}

/// Evaluates a score expression on every row. Noise leaves in the score are
/// drawn keyed by the row's original index and the leaf's site.
fn score_rows(batch: &SampleBatch, score: &Expr) -> Result<Vec<f64>, PipelineError> {
    let mut slots = NoiseSlots::default();
    let prog = CompiledExpr::compile(score, &|name| batch.column_index(name), &mut slots)
        .map_err(PipelineError::UnknownColumn)?;
    let noise = draw_noise(batch.seed(), &slots, batch.rows());
    let width = slots.slots.len();
    let cols = batch.columns();
    let mut values = vec![0.0; cols.len()];
    let mut out = Vec::with_capacity(batch.len());
    for (r, &row) in batch.rows().iter().enumerate() {
        for (v, col) in values.iter_mut().zip(cols) {
            *v = col[r];
        }
        let s = prog
            .eval(&values, &noise[r * width..(r + 1) * width])
            .map_err(|fault| PipelineError::Score { row, fault })?;
        out.push(s);
    }
    Ok(out)
}

/// Applies one stage, returning the (possibly rewritten) model and the new batch.
pub fn apply_stage(
    model: &StructuralModel,
    batch: &SampleBatch,
    stage: &Stage,
) -> Result<(StructuralModel, SampleBatch), PipelineError> {
    apply_inner(model, batch, stage, false)
}

fn apply_inner(
    model: &StructuralModel,
    batch: &SampleBatch,
    stage: &Stage,
    in_agent: bool,
) -> Result<(StructuralModel, SampleBatch), PipelineError> {
    let label = render_stage(stage);
    match stage {
        Stage::Threshold { .. } | Stage::TopFraction { .. } => {
            Ok((model.clone(), select(batch, stage)?.with_label(label)))
        }
        Stage::Do(iv) => {
            let rewritten = apply_intervention(model, iv)?;
            let mask = rewritten
                .descendants(iv.target.as_str())
                .expect("target checked by apply_intervention");
            let columns = evaluate_rows(&rewritten, batch.seed(), batch.rows(), Some((batch, &mask)))?;
            let out = SampleBatch::from_parts(
                rewritten.node_ids().cloned().collect(),
                columns,
                batch.rows().to_vec(),
                batch.seed(),
                label,
            );
            Ok((rewritten, out))
        }
        Stage::Agent(inner) => {
            if in_agent {
                return Err(PipelineError::NestedAgent);
            }
            let mut state = (model.clone(), batch.clone());
            for s in inner {
                state = apply_inner(&state.0, &state.1, s, true)?;
            }
            Ok(state)
        }
    }
}

/// Runs the whole scenario. Deterministic in `(doc, n, seed)`.
pub fn run_pipeline(doc: &ScenarioDoc, n: usize, seed: u64) -> Result<PipelineResult, PipelineError> {
    run_stages(doc, &doc.stages, n, seed)
}

pub(crate) fn run_stages(
    doc: &ScenarioDoc,
    stages: &[Stage],
    n: usize,
    seed: u64,
) -> Result<PipelineResult, PipelineError> {
    doc.validate().map_err(PipelineError::Invalid)?;
    let base = sample(&doc.model, n, seed)?;
    let mut model = doc.model.clone();
    let mut current = base.clone();
    let mut stage_batches = vec![("base".to_string(), base)];

    for (index, stage) in stages.iter().enumerate() {
        let steps: Vec<(&Stage, &str)> = match stage {
            Stage::Agent(inner) => inner.iter().map(|s| (s, "agent")).collect(),
            other => vec![(other, "regulator")],
        };
        for (step, actor) in steps {
            let label = format!("{actor}: {}", render_stage(step));
            let (m, b) = apply_stage(&model, &current, step).map_err(|e| PipelineError::AtStage {
                index,
                label: label.clone(),
                source: Box::new(e),
            })?;
            model = m;
            current = b.with_label(label.clone());
            stage_batches.push((label, current.clone()));
        }
    }

    Ok(PipelineResult {
        stage_batches,
        final_model: model,
    })
}
