//! Scenario description language (`.ghl` files).
//!
//! ```text
//! # regressional selection
//! node G = normal(0, 1)
//! node M = G + normal(0, 1)
//! goal G
//! metric M
//! stage select threshold M >= 1
//! ```
//!
//! One statement per line; `#` starts a comment. Besides `node`, `goal`,
//! `metric` and `stage`, a `fit` statement (`fit s >= -1 and s <= 1`) marks the
//! observed region the reference fit is learned on, and `constant(v)` is a noise
//! leaf that always draws `v`. Noise sites are numbered in source order, so the
//! same text always samples the same worlds.

mod lexer;
mod parser;
mod render;

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::pipeline::Stage;
use crate::scm::{self, Comparator, ModelError, NodeId, SampleBatch, StructuralModel};

pub use render::{format_number, render, render_expr, render_region, render_stage};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    /// The offending source line.
    pub snippet: String,
}

impl ParseError {
    fn new(src: &str, line: usize, column: usize, message: String) -> ParseError {
        let snippet = src
            .split('\n')
            .nth(line - 1)
            .unwrap_or("")
            .trim_end_matches('\r')
            .to_string();
        ParseError {
            line,
            column,
            message,
            snippet,
        }
    }
}

/// One comparison in an observed region.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub node: NodeId,
    pub cmp: Comparator,
    pub value: f64,
}

/// Conjunction of conditions selecting the rows a reference fit is learned on.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub conditions: Vec<Condition>,
}

impl Region {
    pub fn new(conditions: Vec<Condition>) -> Region {
        Region { conditions }
    }

    pub fn single(node: &str, cmp: Comparator, value: f64) -> Region {
        Region::new(vec![Condition {
            node: NodeId::new(node),
            cmp,
            value,
        }])
    }

    pub fn label(&self) -> String {
        render_region(self)
    }

    /// Positions of the rows inside the region. Unknown columns select nothing.
    pub fn positions(&self, batch: &SampleBatch) -> Vec<usize> {
        let cols: Option<Vec<&[f64]>> = self
            .conditions
            .iter()
            .map(|c| batch.column(c.node.as_str()))
            .collect();
        let Some(cols) = cols else {
            return Vec::new();
        };
        (0..batch.len())
            .filter(|&i| {
                self.conditions
                    .iter()
                    .zip(&cols)
                    .all(|(c, col)| c.cmp.holds(col[i], c.value))
            })
            .collect()
    }
}

/// A complete scenario: model, ordered stages and optional fit region.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioDoc {
    pub model: StructuralModel,
    pub stages: Vec<Stage>,
    pub fit_region: Option<Region>,
    pub source_name: String,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DocError {
    #[error("{0}")]
    Model(ModelError),
    /// `stage` is the 0-based index among top-level stages.
    #[error("stage {}: {problem}", .stage + 1)]
    Stage { stage: usize, problem: StageProblem },
    #[error("fit region: {0}")]
    Region(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum StageProblem {
    UnknownNode(NodeId),
    FractionOutOfRange(f64),
    NestedAgent,
    NonFiniteValue,
    InvalidNoise(String),
    DuplicateNoiseSite(u32),
}

impl fmt::Display for StageProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageProblem::UnknownNode(n) => write!(f, "unknown node {n}"),
            StageProblem::FractionOutOfRange(q) => {
                write!(f, "top fraction {q} outside (0, 1]")
            }
            StageProblem::NestedAgent => f.write_str("agent blocks cannot be nested"),
            StageProblem::NonFiniteValue => f.write_str("non-finite value"),
            StageProblem::InvalidNoise(p) => f.write_str(p),
            StageProblem::DuplicateNoiseSite(s) => write!(f, "duplicate noise site {s}"),
        }
    }
}

impl ScenarioDoc {
    pub fn new(model: StructuralModel, stages: Vec<Stage>, source_name: impl Into<String>) -> ScenarioDoc {
        ScenarioDoc {
            model,
            stages,
            fit_region: None,
            source_name: source_name.into(),
        }
    }

    pub fn with_fit_region(mut self, region: Region) -> ScenarioDoc {
        self.fit_region = Some(region);
        self
    }

    /// Numbers every noise leaf 0, 1, 2, ... in source order (nodes, then stages).
    pub fn renumber_noise_sites(&mut self) {
        let mut next = 0u32;
        let mut assign = |spec: &mut scm::NoiseSpec| {
            spec.site = next;
            next += 1;
        };
        for node in &mut self.model.nodes {
            node.expr.for_each_noise_mut(&mut assign);
        }
        fn visit(stage: &mut Stage, assign: &mut impl FnMut(&mut scm::NoiseSpec)) {
            match stage {
                Stage::TopFraction { score, .. } => score.for_each_noise_mut(assign),
                Stage::Agent(inner) => inner.iter_mut().for_each(|s| visit(s, assign)),
                Stage::Threshold { .. } | Stage::Do(_) => {}
            }
        }
        for stage in &mut self.stages {
            visit(stage, &mut assign);
        }
    }

    pub fn validate(&self) -> Result<(), Vec<DocError>> {
        let mut errors: Vec<DocError> = match scm::validate(&self.model) {
            Ok(()) => Vec::new(),
            Err(es) => es.into_iter().map(DocError::Model).collect(),
        };
        let names: HashSet<&str> = self.model.node_ids().map(|n| n.as_str()).collect();
        let mut sites: HashSet<u32> = self
            .model
            .nodes
            .iter()
            .flat_map(|n| n.expr.noise_specs())
            .map(|s| s.site)
            .collect();

        for (index, stage) in self.stages.iter().enumerate() {
            let mut problems = Vec::new();
            check_stage(stage, false, &names, &mut sites, &mut problems);
            errors.extend(problems.into_iter().map(|problem| DocError::Stage {
                stage: index,
                problem,
            }));
        }

        if let Some(region) = &self.fit_region {
            if region.conditions.is_empty() {
                errors.push(DocError::Region("no conditions".to_string()));
            }
            for c in &region.conditions {
                if !names.contains(c.node.as_str()) {
                    errors.push(DocError::Region(format!("unknown node {}", c.node)));
                }
                if !c.value.is_finite() {
                    errors.push(DocError::Region("non-finite value".to_string()));
                }
            }
        }

        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

fn check_stage(
    stage: &Stage,
    in_agent: bool,
    names: &HashSet<&str>,
    sites: &mut HashSet<u32>,
    problems: &mut Vec<StageProblem>,
) {
    let known = |n: &NodeId, problems: &mut Vec<StageProblem>| {
        if !names.contains(n.as_str()) {
            problems.push(StageProblem::UnknownNode(n.clone()));
        }
    };
    match stage {
        Stage::Threshold { node, c, .. } => {
            known(node, problems);
            if !c.is_finite() {
                problems.push(StageProblem::NonFiniteValue);
            }
        }
        Stage::TopFraction { score, q } => {
            for r in score.references() {
                known(r, problems);
            }
            if !(*q > 0.0 && *q <= 1.0) {
                problems.push(StageProblem::FractionOutOfRange(*q));
            }
            if score.has_non_finite_literal() {
                problems.push(StageProblem::NonFiniteValue);
            }
            for spec in score.noise_specs() {
                if let Some(p) = spec.noise.domain_problem() {
                    problems.push(StageProblem::InvalidNoise(p));
                }
                if !sites.insert(spec.site) {
                    problems.push(StageProblem::DuplicateNoiseSite(spec.site));
                }
            }
        }
        Stage::Do(iv) => {
            known(&iv.target, problems);
            if !iv.value.is_finite() {
                problems.push(StageProblem::NonFiniteValue);
            }
        }
        Stage::Agent(inner) => {
            if in_agent {
                problems.push(StageProblem::NestedAgent);
            }
            for s in inner {
                check_stage(s, true, names, sites, problems);
            }
        }
    }
}

/// Parses a scenario, naming it `scenario`.
pub fn parse(text: &str) -> Result<ScenarioDoc, ParseError> {
    parse_named(text, "scenario")
}

/// Parses and validates; on failure reports the first problem in reading order.
pub fn parse_named(text: &str, source_name: &str) -> Result<ScenarioDoc, ParseError> {
    let mut errors = check(text, source_name)?;
    if errors.0.is_empty() {
        Ok(errors.1.take().expect("valid documents are returned"))
    } else {
        Err(errors.0.swap_remove(0))
    }
}

/// Every problem in the text, sorted by position. Syntax errors stop at the
/// first one; semantic errors are all collected.
pub fn check_all(text: &str) -> Vec<ParseError> {
    match check(text, "scenario") {
        Ok((errors, _)) => errors,
        Err(e) => vec![e],
    }
}

type Checked = (Vec<ParseError>, Option<ScenarioDoc>);

fn check(text: &str, source_name: &str) -> Result<Checked, ParseError> {
    let parsed = parser::parse_syntax(text)?;
    let err_at = |line: usize, column: usize, message: String| ParseError::new(text, line, column, message);

    // position of `name` among a statement's references, else the statement itself
    let locate = |stmt: &parser::Stmt, name: Option<&str>| -> (usize, usize) {
        name.and_then(|n| stmt.refs.iter().find(|(r, _, _)| r == n))
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or((stmt.line, stmt.column))
    };

    let mut doc = ScenarioDoc {
        model: StructuralModel {
            nodes: parsed.nodes.iter().map(|(n, _)| n.clone()).collect(),
            goal: parsed
                .goal
                .as_ref()
                .map(|(g, _)| g.clone())
                .unwrap_or_else(|| NodeId::new("")),
            metric: parsed
                .metric
                .as_ref()
                .map(|(m, _)| m.clone())
                .unwrap_or_else(|| NodeId::new("")),
        },
        stages: parsed.stages.iter().map(|(s, _)| s.clone()).collect(),
        fit_region: parsed.fit.as_ref().map(|(r, _)| r.clone()),
        source_name: source_name.to_string(),
    };
    doc.renumber_noise_sites();

    let mut errors = parsed.redeclared.clone();
    if let Err(doc_errors) = doc.validate() {
        for e in doc_errors {
            let (line, column) = match &e {
                DocError::Model(m) => match m {
                    ModelError::InvalidName { index, .. } | ModelError::DuplicateNode { index, .. } => {
                        locate(&parsed.nodes[*index].1, None)
                    }
                    ModelError::UndefinedReference { index, reference, .. }
                    | ModelError::ForwardReference { index, reference, .. } => {
                        locate(&parsed.nodes[*index].1, Some(reference.as_str()))
                    }
                    ModelError::InvalidNoise { index, .. }
                    | ModelError::DuplicateNoiseSite { index, .. }
                    | ModelError::NonFiniteLiteral { index, .. } => locate(&parsed.nodes[*index].1, None),
                    ModelError::GoalNotDeclared { .. } => parsed
                        .goal
                        .as_ref()
                        .map(|(g, s)| locate(s, Some(g.as_str())))
                        .unwrap_or(parsed.end),
                    ModelError::MetricNotDeclared { .. } => parsed
                        .metric
                        .as_ref()
                        .map(|(m, s)| locate(s, Some(m.as_str())))
                        .unwrap_or(parsed.end),
                    ModelError::UnknownNode { .. } | ModelError::NonFiniteIntervention { .. } => parsed.end,
                },
                DocError::Stage { stage, problem } => {
                    let name = match problem {
                        StageProblem::UnknownNode(n) => Some(n.as_str()),
                        _ => None,
                    };
                    locate(&parsed.stages[*stage].1, name)
                }
                DocError::Region(_) => parsed
                    .fit
                    .as_ref()
                    .map(|(_, s)| (s.line, s.column))
                    .unwrap_or(parsed.end),
            };
            errors.push(err_at(line, column, e.to_string()));
        }
    }
    errors.sort_by_key(|e| (e.line, e.column));
    let doc = errors.is_empty().then_some(doc);
    Ok((errors, doc))
}
