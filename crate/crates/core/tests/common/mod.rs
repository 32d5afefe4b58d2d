#![allow(dead_code)]

use std::collections::HashSet;

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use goodhart_core::pipeline::{apply_stage, run_pipeline, select, PipelineError};
use goodhart_core::{
    apply_intervention, sample, Comparator, Expr, Node, NodeId, SampleBatch, ScenarioDoc, Stage,
    StructuralModel,
};

#[derive(Clone, Debug)]
pub enum NoisePlan {
    None,
    Normal(f64, f64),
    Uniform(f64, f64),
}

#[derive(Clone, Debug)]
pub struct NodePlan {
    parents: Vec<(usize, f64)>,
    noise: NoisePlan,
    shape: u8,
    offset: f64,
}

fn noise_plan() -> impl Strategy<Value = NoisePlan> {
    prop_oneof![
        1 => Just(NoisePlan::None),
        3 => (-1.0..1.0f64, 0.0..2.0f64).prop_map(|(m, s)| NoisePlan::Normal(m, s)),
        2 => (-2.0..1.0f64, 0.0..3.0f64).prop_map(|(lo, w)| NoisePlan::Uniform(lo, lo + w)),
    ]
}

fn node_plan() -> impl Strategy<Value = NodePlan> {
    (
        prop::collection::vec((any::<usize>(), -2.0..2.0f64), 0..3),
        noise_plan(),
        0u8..4,
        -1.0..1.0f64,
    )
        .prop_map(|(parents, noise, shape, offset)| NodePlan {
            parents,
            noise,
            shape,
            offset,
        })
}

fn name(i: usize) -> String {
    format!("N{i}")
}

fn build_expr(i: usize, plan: &NodePlan) -> Expr {
    let mut e = Expr::Const(plan.offset);
    let parents: Vec<(usize, f64)> = if i == 0 {
        Vec::new()
    } else {
        plan.parents.iter().map(|&(p, c)| (p % i, c)).collect()
    };
    for &(p, c) in &parents {
        e = e + c * Expr::node(&name(p));
    }
    match plan.noise {
        NoisePlan::None => {}
        NoisePlan::Normal(m, s) => e = e + Expr::normal(m, s),
        NoisePlan::Uniform(lo, hi) => e = e + Expr::uniform(lo, hi),
    }
    match (plan.shape, parents.first()) {
        (1, Some(&(p, _))) => {
            let other = 0.5 * e.clone() - 1.0;
            Expr::piecewise(Expr::node(&name(p)), Comparator::Gt, Expr::Const(0.0), e, other)
        }
        (2, Some(&(p, _))) => e + 0.1 * Expr::node(&name(p)).pow(2.0),
        (3, _) => -e,
        _ => e,
    }
}

/// A random acyclic model over nodes `N0..Nk`.
pub fn model() -> impl Strategy<Value = StructuralModel> {
    (2usize..=6)
        .prop_flat_map(|k| (prop::collection::vec(node_plan(), k), 0..k, 0..k))
        .prop_map(|(plans, goal, metric)| {
            let model = StructuralModel {
                nodes: plans
                    .iter()
                    .enumerate()
                    .map(|(i, p)| Node {
                        id: NodeId::new(name(i)),
                        expr: build_expr(i, p),
                    })
                    .collect(),
                goal: NodeId::new(name(goal)),
                metric: NodeId::new(name(metric)),
            };
            doc(model, Vec::new()).model
        })
}

pub fn doc(model: StructuralModel, stages: Vec<Stage>) -> ScenarioDoc {
    let mut d = ScenarioDoc::new(model, stages, "generated");
    d.renumber_noise_sites();
    d
}

fn cmp() -> impl Strategy<Value = Comparator> {
    prop_oneof![
        Just(Comparator::Ge),
        Just(Comparator::Gt),
        Just(Comparator::Le),
        Just(Comparator::Lt)
    ]
}

#[derive(Clone, Debug)]
pub struct Case {
    pub model: StructuralModel,
    pub n: usize,
    pub seed: u64,
}

pub fn case() -> impl Strategy<Value = Case> {
    (model(), 1usize..300, any::<u64>()).prop_map(|(model, n, seed)| Case { model, n, seed })
}

fn pick(model: &StructuralModel, i: usize) -> String {
    model.nodes[i % model.nodes.len()].id.to_string()
}

fn row_set(b: &SampleBatch) -> HashSet<u64> {
    b.rows().iter().copied().collect()
}

fn is_subset(a: &SampleBatch, b: &SampleBatch) -> bool {
    let sup = row_set(b);
    a.rows().iter().all(|r| sup.contains(r))
}

/// Selecting twice with the same threshold equals selecting once.
pub fn threshold_idempotence() -> impl Strategy<Value = (Case, usize, Comparator, f64)> {
    (case(), any::<usize>(), cmp(), -1.5..1.5f64)
}

pub fn check_idempotence((case, node, cmp, c): (Case, usize, Comparator, f64)) -> Result<(), TestCaseError> {
    let batch = sample(&case.model, case.n, case.seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let stage = Stage::threshold(&pick(&case.model, node), cmp, c);
    match select(&batch, &stage) {
        Err(PipelineError::EmptySelection) => Ok(()),
        Err(e) => Err(TestCaseError::fail(e.to_string())),
        Ok(once) => {
            let twice = select(&once, &stage).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert!(once.bit_identical(&twice));
            Ok(())
        }
    }
}

/// Raising an upper threshold (or lowering a lower one) only removes rows,
/// and every stage of a random pipeline keeps a subset of its predecessor's rows.
pub type ChainCase = (Case, usize, Comparator, f64, f64, Vec<(u8, usize, f64)>);

pub fn monotone_chain() -> impl Strategy<Value = ChainCase> {
    (
        case(),
        any::<usize>(),
        cmp(),
        -1.5..1.5f64,
        0.0..1.5f64,
        prop::collection::vec((0u8..3, any::<usize>(), -1.0..1.0f64), 0..4),
    )
}

pub fn check_monotone((case, node, cmp, c1, dc, extra): ChainCase) -> Result<(), TestCaseError> {
    let batch = sample(&case.model, case.n, case.seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let node = pick(&case.model, node);
    let c2 = if cmp.is_upward() { c1 + dc } else { c1 - dc };
    let rows = |c: f64| match select(&batch, &Stage::threshold(&node, cmp, c)) {
        Ok(b) => Ok(row_set(&b)),
        Err(PipelineError::EmptySelection) => Ok(HashSet::new()),
        Err(e) => Err(TestCaseError::fail(e.to_string())),
    };
    let (loose, strict) = (rows(c1)?, rows(c2)?);
    prop_assert!(strict.is_subset(&loose), "c1 {c1} c2 {c2}");

    let stages: Vec<Stage> = extra
        .iter()
        .map(|&(kind, i, v)| match kind {
            0 => Stage::threshold(&pick(&case.model, i), Comparator::Ge, v - 0.5),
            1 => Stage::top(Expr::node(&pick(&case.model, i)), 0.2 + 0.8 * v.abs()),
            _ => Stage::intervene(&pick(&case.model, i), v),
        })
        .collect();
    let d = doc(case.model.clone(), stages);
    match run_pipeline(&d, case.n, case.seed) {
        Err(e) if matches!(e.root(), PipelineError::EmptySelection) => Ok(()),
        Err(e) => Err(TestCaseError::fail(e.to_string())),
        Ok(result) => {
            for pair in result.stage_batches.windows(2) {
                prop_assert!(
                    is_subset(&pair[1].1, &pair[0].1),
                    "{} not within {}",
                    pair[1].0,
                    pair[0].0
                );
                if pair[1].0.contains(": do ") {
                    prop_assert_eq!(pair[1].1.rows(), pair[0].1.rows());
                }
            }
            Ok(())
        }
    }
}

/// A scenario without stages returns its base sample unchanged.
pub fn check_empty_pipeline(case: Case) -> Result<(), TestCaseError> {
    let d = doc(case.model.clone(), Vec::new());
    let result = run_pipeline(&d, case.n, case.seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let direct = sample(&d.model, case.n, case.seed).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(result.stage_batches.len(), 1);
    prop_assert!(result.final_batch().bit_identical(result.base()));
    prop_assert!(result.base().bit_identical(&direct));
    prop_assert_eq!(result.final_batch().len(), case.n);
    Ok(())
}

/// A `do` stage, optionally after a selection, leaves every non-descendant of
/// the target bit for bit unchanged, pins the target, and recomputes the
/// descendants exactly as a fresh sample of the intervened model would.
pub fn coupling() -> impl Strategy<Value = (Case, usize, f64, Option<(usize, f64)>)> {
    (
        case(),
        any::<usize>(),
        -3.0..3.0f64,
        proptest::option::of((any::<usize>(), -1.0..0.5f64)),
    )
}

pub fn check_coupling(
    (case, target, value, pre): (Case, usize, f64, Option<(usize, f64)>),
) -> Result<(), TestCaseError> {
    let fail = |e: &dyn std::fmt::Display| TestCaseError::fail(e.to_string());
    let target = pick(&case.model, target);
    let base = sample(&case.model, case.n, case.seed).map_err(|e| fail(&e))?;
    let before = match pre {
        None => base,
        Some((node, c)) => match select(
            &base,
            &Stage::threshold(&pick(&case.model, node), Comparator::Ge, c),
        ) {
            Ok(b) => b,
            Err(PipelineError::EmptySelection) => return Ok(()),
            Err(e) => return Err(fail(&e)),
        },
    };
    let (rewritten, after) = match apply_stage(&case.model, &before, &Stage::intervene(&target, value)) {
        Ok(x) => x,
        // the rewritten model may divide by zero or overflow; the law is about
        // successful runs
        Err(PipelineError::Sample(_)) => return Ok(()),
        Err(e) => return Err(fail(&e)),
    };
    prop_assert_eq!(after.rows(), before.rows());
    let descendants = case.model.descendants(&target).expect("target exists");
    let fresh = sample(
        &apply_intervention(&case.model, &goodhart_core::Intervention::new(&target, value))
            .map_err(|e| fail(&e))?,
        case.n,
        case.seed,
    );
    for (i, node) in case.model.nodes.iter().enumerate() {
        let id = node.id.as_str();
        let (old, new) = (before.column(id).unwrap(), after.column(id).unwrap());
        if id == target {
            prop_assert!(new.iter().all(|&v| v == value));
        } else if !descendants[i] {
            prop_assert!(
                old.iter().zip(new).all(|(a, b)| a.to_bits() == b.to_bits()),
                "non-descendant {} changed",
                id
            );
        }
        if let Ok(fresh) = &fresh {
            let col = fresh.column(id).unwrap();
            for (k, &row) in after.rows().iter().enumerate() {
                prop_assert_eq!(col[row as usize].to_bits(), new[k].to_bits());
            }
        }
    }
    prop_assert_eq!(
        &rewritten.nodes[rewritten.index_of(&target).unwrap()].expr,
        &Expr::Const(value)
    );
    Ok(())
}
