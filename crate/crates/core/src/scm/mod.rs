//! Structural causal models: named nodes defined by expressions over earlier
//! nodes and exogenous noise, sampled row by row in declaration order.
//!
//! Declaration order is the topological order, so a well-formed model is
//! acyclic by construction. A do-intervention replaces a node's expression with
//! a constant and leaves every other expression (and every noise site) alone,
//! which keeps non-descendant columns bit-identical under a shared seed.

mod expr;
mod noise;
mod sample;

use std::borrow::Borrow;
use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

pub use expr::{Comparator, Expr, Noise, NoiseSpec};
pub use noise::noise_draw;
pub use sample::{sample, EvalFault, SampleBatch, SampleError};

pub(crate) use sample::{draw_noise, evaluate_rows, CompiledExpr, NoiseSlots};

/// Node name. Valid names are a letter followed by letters, digits or `_`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> NodeId {
        NodeId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_valid(&self) -> bool {
        let mut chars = self.0.chars();
        match chars.next() {
            Some(c) if c.is_ascii_alphabetic() => chars.all(|c| c.is_ascii_alphanumeric() || c == '_'),
            _ => false,
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> NodeId {
        NodeId::new(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuralModel {
    pub nodes: Vec<Node>,
    pub goal: NodeId,
    pub metric: NodeId,
}

/// A do-intervention: `target` is pinned to `value` and its incoming edges cut.
#[derive(Clone, Debug, PartialEq)]
pub struct Intervention {
    pub target: NodeId,
    pub value: f64,
}

impl Intervention {
    pub fn new(target: &str, value: f64) -> Intervention {
        Intervention {
            target: NodeId::new(target),
            value,
        }
    }
}

/// A structural problem with a model. Node-scoped variants carry the index of
/// the offending node in declaration order.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid node name '{name}'")]
    InvalidName { index: usize, name: NodeId },
    #[error("duplicate node {name}")]
    DuplicateNode { index: usize, name: NodeId },
    #[error("undefined reference {reference} in {node}")]
    UndefinedReference {
        index: usize,
        node: NodeId,
        reference: NodeId,
    },
    #[error("forward reference {reference} in {node}")]
    ForwardReference {
        index: usize,
        node: NodeId,
        reference: NodeId,
    },
    #[error("{problem} in node {node}")]
    InvalidNoise {
        index: usize,
        node: NodeId,
        problem: String,
    },
    #[error("duplicate noise site {site} in node {node}")]
    DuplicateNoiseSite { index: usize, node: NodeId, site: u32 },
    #[error("non-finite literal in node {node}")]
    NonFiniteLiteral { index: usize, node: NodeId },
    #[error("{}", missing("goal", name))]
    GoalNotDeclared { name: NodeId },
    #[error("{}", missing("metric", name))]
    MetricNotDeclared { name: NodeId },
    #[error("unknown node {name}")]
    UnknownNode { name: NodeId },
    #[error("non-finite intervention value for {target}")]
    NonFiniteIntervention { target: NodeId },
}

fn missing(role: &str, name: &NodeId) -> String {
    if name.as_str().is_empty() {
        format!("missing {role} declaration")
    } else {
        format!("{role} node {name} not declared")
    }
}

impl StructuralModel {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id.as_str() == name)
    }

    pub fn node(&self, name: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id.as_str() == name)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter().map(|n| &n.id)
    }

    /// Mask over declaration order marking `name` and every node with a
    /// directed path from it.
    pub fn descendants(&self, name: &str) -> Option<Vec<bool>> {
        let start = self.index_of(name)?;
        let mut mask = vec![false; self.nodes.len()];
        mask[start] = true;
        let mut reached: HashSet<&str> = HashSet::from([name]);
        for (i, node) in self.nodes.iter().enumerate().skip(start + 1) {
            if node
                .expr
                .references()
                .iter()
                .any(|r| reached.contains(r.as_str()))
            {
                mask[i] = true;
                reached.insert(node.id.as_str());
            }
        }
        Some(mask)
    }
}

/// Returns every structural violation in the model, in declaration order.
pub fn validate(model: &StructuralModel) -> Result<(), Vec<ModelError>> {
    let mut errors = Vec::new();
    let all: HashMap<&str, usize> = model
        .nodes
        .iter()
        .enumerate()
        .rev()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let mut declared: HashSet<&str> = HashSet::new();
    let mut sites: HashSet<u32> = HashSet::new();

    for (index, node) in model.nodes.iter().enumerate() {
        let name = &node.id;
        if !name.is_valid() {
            errors.push(ModelError::InvalidName {
                index,
                name: name.clone(),
            });
        }
        for reference in node.expr.references() {
            if declared.contains(reference.as_str()) {
                continue;
            }
            let err = if all.contains_key(reference.as_str()) {
                ModelError::ForwardReference {
                    index,
                    node: name.clone(),
                    reference: reference.clone(),
                }
            } else {
                ModelError::UndefinedReference {
                    index,
                    node: name.clone(),
                    reference: reference.clone(),
                }
            };
            if !errors.contains(&err) {
                errors.push(err);
            }
        }
        for spec in node.expr.noise_specs() {
            if let Some(problem) = spec.noise.domain_problem() {
                errors.push(ModelError::InvalidNoise {
                    index,
                    node: name.clone(),
                    problem,
                });
            }
            if !sites.insert(spec.site) {
                errors.push(ModelError::DuplicateNoiseSite {
                    index,
                    node: name.clone(),
                    site: spec.site,
                });
            }
        }
        if node.expr.has_non_finite_literal() {
            errors.push(ModelError::NonFiniteLiteral {
                index,
                node: name.clone(),
            });
        }
        if !declared.insert(name.as_str()) {
            errors.push(ModelError::DuplicateNode {
                index,
                name: name.clone(),
            });
        }
    }

    if !all.contains_key(model.goal.as_str()) {
        errors.push(ModelError::GoalNotDeclared {
            name: model.goal.clone(),
        });
    }
    if !all.contains_key(model.metric.as_str()) {
        errors.push(ModelError::MetricNotDeclared {
            name: model.metric.clone(),
        });
    }

    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// do(target = value): the target's expression becomes a constant. Nothing else
/// changes, including noise site ids.
pub fn apply_intervention(model: &StructuralModel, iv: &Intervention) -> Result<StructuralModel, ModelError> {
    if !iv.value.is_finite() {
        return Err(ModelError::NonFiniteIntervention {
            target: iv.target.clone(),
        });
    }
    let index = model
        .index_of(iv.target.as_str())
        .ok_or_else(|| ModelError::UnknownNode {
            name: iv.target.clone(),
        })?;
    let mut out = model.clone();
    out.nodes[index].expr = Expr::Const(iv.value);
    Ok(out)
}
