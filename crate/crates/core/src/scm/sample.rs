use rayon::prelude::*;
use thiserror::Error;

use super::noise::NoiseStream;
use super::{validate, Comparator, Expr, ModelError, NodeId, Noise, StructuralModel};

const CHUNK_ROWS: usize = 16 * 1024;

/// `n` sampled worlds, stored column-major in model declaration order.
///
/// `rows` holds each world's original row index; selections keep it, so a row
/// can be traced (and its noise re-drawn) across pipeline stages.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    names: Vec<NodeId>,
    columns: Vec<Vec<f64>>,
    rows: Vec<u64>,
    seed: u64,
    stage_label: String,
}

impl SampleBatch {
    pub(crate) fn from_parts(
        names: Vec<NodeId>,
        columns: Vec<Vec<f64>>,
        rows: Vec<u64>,
        seed: u64,
        stage_label: String,
    ) -> SampleBatch {
        debug_assert_eq!(names.len(), columns.len());
        debug_assert!(columns.iter().all(|c| c.len() == rows.len()));
        SampleBatch {
            names,
            columns,
            rows,
            seed,
            stage_label,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn names(&self) -> &[NodeId] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.column_index(name).map(|i| self.columns[i].as_slice())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n.as_str() == name)
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stage_label(&self) -> &str {
        &self.stage_label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> SampleBatch {
        self.stage_label = label.into();
        self
    }

    /// Keeps the rows at `positions` (ascending), preserving order.
    pub fn subset(&self, positions: &[usize]) -> SampleBatch {
        let columns = self
            .columns
            .iter()
            .map(|c| positions.iter().map(|&p| c[p]).collect())
            .collect();
        SampleBatch {
            names: self.names.clone(),
            columns,
            rows: positions.iter().map(|&p| self.rows[p]).collect(),
            seed: self.seed,
            stage_label: self.stage_label.clone(),
        }
    }

    /// Equality down to the bit pattern of every value.
    pub fn bit_identical(&self, other: &SampleBatch) -> bool {
        self.names == other.names
            && self.rows == other.rows
            && self.seed == other.seed
            && self.columns.len() == other.columns.len()
            && self
                .columns
                .iter()
                .zip(&other.columns)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalFault {
    DivisionByZero,
    NonFinite,
}

impl std::fmt::Display for EvalFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EvalFault::DivisionByZero => "division by zero",
            EvalFault::NonFinite => "non-finite value",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SampleError {
    #[error("invalid model: {}", join(.0))]
    Invalid(Vec<ModelError>),
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("{fault} in node {node} at row {row}")]
    Evaluation {
        node: NodeId,
        row: u64,
        fault: EvalFault,
    },
}

fn join(errors: &[ModelError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Expression with node references resolved to column indices and noise leaves
/// resolved to slots in a per-row noise buffer.
#[derive(Clone, Debug)]
pub(crate) enum CompiledExpr {
    Const(f64),
    Column(usize),
    Noise(usize),
    Add(Box<CompiledExpr>, Box<CompiledExpr>),
    Sub(Box<CompiledExpr>, Box<CompiledExpr>),
    Mul(Box<CompiledExpr>, Box<CompiledExpr>),
    Div(Box<CompiledExpr>, Box<CompiledExpr>),
    Neg(Box<CompiledExpr>),
    PowI(Box<CompiledExpr>, i32),
    PowF(Box<CompiledExpr>, f64),
    Piecewise {
        lhs: Box<CompiledExpr>,
        cmp: Comparator,
        rhs: Box<CompiledExpr>,
        then: Box<CompiledExpr>,
        otherwise: Box<CompiledExpr>,
    },
}

/// Noise leaves collected during compilation, in slot order.
#[derive(Default)]
pub(crate) struct NoiseSlots {
    pub(crate) slots: Vec<(u32, Noise)>,
}

impl CompiledExpr {
    /// Fails with the first name `resolve` cannot place.
    pub(crate) fn compile(
        expr: &Expr,
        resolve: &impl Fn(&str) -> Option<usize>,
        noise: &mut NoiseSlots,
    ) -> Result<CompiledExpr, NodeId> {
        let mut go = |e: &Expr| CompiledExpr::compile(e, resolve, noise).map(Box::new);
        Ok(match expr {
            Expr::Const(v) => CompiledExpr::Const(*v),
            Expr::Node(id) => CompiledExpr::Column(resolve(id.as_str()).ok_or_else(|| id.clone())?),
            Expr::Noise(spec) => {
                noise.slots.push((spec.site, spec.noise));
                CompiledExpr::Noise(noise.slots.len() - 1)
            }
            Expr::Add(a, b) => CompiledExpr::Add(go(a)?, go(b)?),
            Expr::Sub(a, b) => CompiledExpr::Sub(go(a)?, go(b)?),
            Expr::Mul(a, b) => CompiledExpr::Mul(go(a)?, go(b)?),
            Expr::Div(a, b) => CompiledExpr::Div(go(a)?, go(b)?),
            Expr::Neg(a) => CompiledExpr::Neg(go(a)?),
            Expr::Pow(a, e) => {
                if e.fract() == 0.0 && e.abs() <= f64::from(i32::MAX) {
                    CompiledExpr::PowI(go(a)?, *e as i32)
                } else {
                    CompiledExpr::PowF(go(a)?, *e)
                }
            }
            Expr::Piecewise {
                lhs,
                cmp,
                rhs,
                then,
                otherwise,
            } => CompiledExpr::Piecewise {
                lhs: go(lhs)?,
                cmp: *cmp,
                rhs: go(rhs)?,
                then: go(then)?,
                otherwise: go(otherwise)?,
            },
        })
    }

    pub(crate) fn eval(&self, values: &[f64], noise: &[f64]) -> Result<f64, EvalFault> {
        let v = match self {
            CompiledExpr::Const(v) => *v,
            CompiledExpr::Column(i) => values[*i],
            CompiledExpr::Noise(s) => noise[*s],
            CompiledExpr::Add(a, b) => a.eval(values, noise)? + b.eval(values, noise)?,
            CompiledExpr::Sub(a, b) => a.eval(values, noise)? - b.eval(values, noise)?,
            CompiledExpr::Mul(a, b) => a.eval(values, noise)? * b.eval(values, noise)?,
            CompiledExpr::Div(a, b) => {
                let num = a.eval(values, noise)?;
                let den = b.eval(values, noise)?;
                if den == 0.0 {
                    return Err(EvalFault::DivisionByZero);
                }
                num / den
            }
            CompiledExpr::Neg(a) => -a.eval(values, noise)?,
            CompiledExpr::PowI(a, e) => a.eval(values, noise)?.powi(*e),
            CompiledExpr::PowF(a, e) => a.eval(values, noise)?.powf(*e),
            CompiledExpr::Piecewise {
                lhs,
                cmp,
                rhs,
                then,
                otherwise,
            } => {
                if cmp.holds(lhs.eval(values, noise)?, rhs.eval(values, noise)?) {
                    then.eval(values, noise)?
                } else {
                    otherwise.eval(values, noise)?
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalFault::NonFinite)
        }
    }
}

/// Draws the noise slots for a contiguous run of rows, row-major.
pub(crate) fn draw_noise(seed: u64, slots: &NoiseSlots, rows: &[u64]) -> Vec<f64> {
    let width = slots.slots.len();
    let mut buf = vec![0.0; rows.len() * width];
    for (s, (site, noise)) in slots.slots.iter().enumerate() {
        let mut stream = NoiseStream::new(seed, *site);
        for (r, &row) in rows.iter().enumerate() {
            buf[r * width + s] = stream.draw(row, noise);
        }
    }
    buf
}

/// Evaluates the model at the given original row indices.
///
/// With `keep = Some((batch, recompute))`, nodes whose mask entry is false are
/// copied from `batch` (which must hold the same rows) instead of re-evaluated.
pub(crate) fn evaluate_rows(
    model: &StructuralModel,
    seed: u64,
    rows: &[u64],
    keep: Option<(&SampleBatch, &[bool])>,
) -> Result<Vec<Vec<f64>>, SampleError> {
    let width = model.nodes.len();
    let mut slots = NoiseSlots::default();
    let mut programs = Vec::with_capacity(width);
    let mut copy_from = Vec::with_capacity(width);
    for (i, node) in model.nodes.iter().enumerate() {
        let recompute = keep.is_none_or(|(_, mask)| mask[i]);
        if recompute {
            let resolve = |name: &str| model.nodes[..i].iter().position(|n| n.id.as_str() == name);
            let prog = CompiledExpr::compile(&node.expr, &resolve, &mut slots).map_err(|r| {
                SampleError::Invalid(vec![ModelError::UndefinedReference {
                    index: i,
                    node: node.id.clone(),
                    reference: r,
                }])
            })?;
            programs.push(Some(prog));
            copy_from.push(None);
        } else {
            let (batch, _) = keep.expect("mask implies a base batch");
            let col = batch.column_index(node.id.as_str()).ok_or_else(|| {
                SampleError::Invalid(vec![ModelError::UnknownNode {
                    name: node.id.clone(),
                }])
            })?;
            programs.push(None);
            copy_from.push(Some(col));
        }
    }

    let chunks: Vec<Result<Vec<Vec<f64>>, SampleError>> = rows
        .par_chunks(CHUNK_ROWS)
        .enumerate()
        .map(|(ci, chunk)| {
            let offset = ci * CHUNK_ROWS;
            let noise = draw_noise(seed, &slots, chunk);
            let nslots = slots.slots.len();
            let mut out: Vec<Vec<f64>> = (0..width).map(|_| Vec::with_capacity(chunk.len())).collect();
            let mut values = vec![0.0; width];
            for (r, &row) in chunk.iter().enumerate() {
                let row_noise = &noise[r * nslots..(r + 1) * nslots];
                for i in 0..width {
                    let v = match (&programs[i], copy_from[i]) {
                        (Some(prog), _) => {
                            prog.eval(&values, row_noise)
                                .map_err(|fault| SampleError::Evaluation {
                                    node: model.nodes[i].id.clone(),
                                    row,
                                    fault,
                                })?
                        }
                        (None, Some(col)) => keep.expect("copy needs batch").0.columns[col][offset + r],
                        (None, None) => unreachable!("every node is either evaluated or copied"),
                    };
                    values[i] = v;
                    out[i].push(v);
                }
            }
            Ok(out)
        })
        .collect();

    let mut columns: Vec<Vec<f64>> = (0..width).map(|_| Vec::with_capacity(rows.len())).collect();
    for chunk in chunks {
        for (col, part) in columns.iter_mut().zip(chunk?) {
            col.extend(part);
        }
    }
    Ok(columns)
}

/// Samples `n` worlds. Row `i` draws its noise keyed by `(seed, i, site)`, so the
/// result is a pure function of `(model, n, seed)`.
pub fn sample(model: &StructuralModel, n: usize, seed: u64) -> Result<SampleBatch, SampleError> {
    validate(model).map_err(SampleError::Invalid)?;
    if n == 0 {
        return Err(SampleError::EmptySample);
    }
    let rows: Vec<u64> = (0..n as u64).collect();
    let columns = evaluate_rows(model, seed, &rows, None)?;
    Ok(SampleBatch::from_parts(
        model.node_ids().cloned().collect(),
        columns,
        rows,
        seed,
        "base".to_string(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{apply_intervention, Intervention, Node};

    fn model(nodes: Vec<(&str, Expr)>) -> StructuralModel {
        let mut site = 0;
        let goal = NodeId::new(nodes[0].0);
        let metric = NodeId::new(nodes[nodes.len() - 1].0);
        let nodes = nodes
            .into_iter()
            .map(|(n, mut e)| {
                e.for_each_noise_mut(&mut |s| {
                    s.site = site;
                    site += 1;
                });
                Node {
                    id: NodeId::new(n),
                    expr: e,
                }
            })
            .collect();
        StructuralModel { nodes, goal, metric }
    }

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn constant_column() {
        let m = model(vec![("G", Expr::Const(3.0))]);
        let b = sample(&m, 5, 123).unwrap();
        assert_eq!(b.column("G").unwrap(), [3.0; 5]);
        assert_eq!(b.rows(), [0, 1, 2, 3, 4]);
        assert_eq!(b.stage_label(), "base");
    }

    #[test]
    fn zero_rows_rejected() {
        let m = model(vec![("G", Expr::Const(3.0))]);
        assert_eq!(sample(&m, 0, 1), Err(SampleError::EmptySample));
    }

    #[test]
    fn invalid_model_rejected() {
        let m = model(vec![("G", Expr::node("Q"))]);
        assert!(matches!(sample(&m, 3, 1), Err(SampleError::Invalid(_))));
    }

    #[test]
    fn repeated_calls_are_bit_identical() {
        let m = model(vec![
            ("G", Expr::normal(0.0, 1.0)),
            ("M", Expr::node("G") + Expr::uniform(-1.0, 1.0)),
        ]);
        let a = sample(&m, 40_000, 42).unwrap();
        let b = sample(&m, 40_000, 42).unwrap();
        assert!(a.bit_identical(&b));
        let c = sample(&m, 40_000, 43).unwrap();
        assert!(!a.bit_identical(&c));
    }

    #[test]
    fn prefix_rows_do_not_depend_on_n() {
        let m = model(vec![("G", Expr::normal(0.0, 1.0))]);
        let small = sample(&m, 100, 7).unwrap();
        let large = sample(&m, 50_000, 7).unwrap();
        assert_eq!(small.column("G").unwrap(), &large.column("G").unwrap()[..100]);
    }

    #[test]
    fn division_by_zero_names_node_and_row() {
        let m = model(vec![("A", Expr::Const(1.0)), ("B", Expr::node("A") / 0.0)]);
        let err = sample(&m, 3, 0).unwrap_err();
        assert_eq!(
            err,
            SampleError::Evaluation {
                node: "B".into(),
                row: 0,
                fault: EvalFault::DivisionByZero
            }
        );
        assert_eq!(err.to_string(), "division by zero in node B at row 0");
    }

    #[test]
    fn non_finite_is_an_error() {
        // pow of a negative base to a fractional exponent is NaN
        let m = model(vec![("A", Expr::Const(-2.0)), ("B", Expr::node("A").pow(0.5))]);
        assert!(matches!(
            sample(&m, 2, 0),
            Err(SampleError::Evaluation {
                fault: EvalFault::NonFinite,
                ..
            })
        ));
    }

    #[test]
    fn piecewise_selects_branch() {
        let m = model(vec![
            ("M", Expr::uniform(0.0, 4.0)),
            (
                "G",
                Expr::piecewise(
                    Expr::node("M"),
                    Comparator::Le,
                    Expr::Const(2.0),
                    Expr::node("M") + 0.0,
                    Expr::node("M") - 5.0,
                ),
            ),
        ]);
        let b = sample(&m, 1000, 3).unwrap();
        for (m, g) in b.column("M").unwrap().iter().zip(b.column("G").unwrap()) {
            if *m <= 2.0 {
                assert_eq!(g, m);
            } else {
                assert_eq!(m - g, 5.0);
            }
        }
    }

    #[test]
    fn normal_mean_converges_under_two_seeds() {
        let m = model(vec![("G", Expr::normal(0.0, 1.0))]);
        let n = 1_000_000;
        for seed in [1, 2] {
            let b = sample(&m, n, seed).unwrap();
            assert!(mean(b.column("G").unwrap()).abs() < 4.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn recompute_mask_keeps_other_columns() {
        let m = model(vec![
            ("X", Expr::normal(0.0, 1.0)),
            ("M", Expr::node("X") + Expr::normal(0.0, 1.0)),
            ("G", Expr::node("X") + Expr::normal(0.0, 1.0)),
        ]);
        let base = sample(&m, 1000, 11).unwrap();
        let done = apply_intervention(&m, &Intervention::new("M", 7.0)).unwrap();
        let mask = done.descendants("M").unwrap();
        let cols = evaluate_rows(&done, 11, base.rows(), Some((&base, &mask))).unwrap();
        assert!(cols[1].iter().all(|&v| v == 7.0));
        assert_eq!(cols[0], base.column("X").unwrap());
        assert_eq!(cols[2], base.column("G").unwrap());
    }
}
