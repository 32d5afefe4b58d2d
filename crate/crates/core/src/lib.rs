//! Goodhart effects as executable structural causal models.
//!
//! A scenario is a small acyclic model with designated goal and metric nodes
//! plus an ordered list of selection and intervention stages. Running it
//! samples a base batch with counter-keyed noise, applies each stage, and
//! measures how far the metric drifts from the goal.
//!
//! ```
//! use goodhart_core::{dsl, diagnostics};
//!
//! let doc = dsl::parse(
//!     "node G = normal(0, 1)\nnode M = G + normal(0, 1)\ngoal G\nmetric M\nstage select threshold M >= 0",
//! )
//! .unwrap();
//! let report = diagnostics::run_report(&doc, 10_000, 7).unwrap();
//! assert!(report.proxy_gap > 0.0);
//! ```

pub mod diagnostics;
pub mod dsl;
pub mod pipeline;
pub mod scenarios;
pub mod scm;

pub use diagnostics::{run_report, sweep, DiagnosticsError, EffectReport, Fit, SweepCurve, SweepPoint};
pub use dsl::{parse, render, ParseError, Region, ScenarioDoc};
pub use pipeline::{run_pipeline, PipelineError, PipelineResult, Stage};
pub use scenarios::{canonical, ScenarioError, CANONICAL_NAMES};
pub use scm::{
    apply_intervention, sample, validate, Comparator, Expr, Intervention, ModelError, Node, NodeId, Noise,
    NoiseSpec, SampleBatch, SampleError, StructuralModel,
};
