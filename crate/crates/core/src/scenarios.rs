//! Builders for every canonical Goodhart scenario.
//!
//! All exogenous noise is Gaussian or constant; that choice is ours, since
//! the underlying state distribution is left open. Noise widths are standard
//! deviations.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::dsl::{DocError, Region, ScenarioDoc};
use crate::pipeline::Stage;
use crate::scm::{Comparator, Expr, Node, NodeId, StructuralModel};

pub const CANONICAL_NAMES: [&str; 13] = [
    "regressional",
    "extremal-insufficiency",
    "extremal-regime",
    "causal-shared",
    "causal-intermediary",
    "causal-metric",
    "ignored-shared",
    "ignored-intermediary",
    "ignored-additional",
    "adversarial-misalignment",
    "campbell",
    "cobra-normal",
    "cobra-noncausal",
];

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}'; valid names: {names}", names = CANONICAL_NAMES.join(", "))]
    UnknownScenario(String),
    #[error("unknown parameter '{key}' for {scenario}; valid parameters: {}", .valid.join(", "))]
    UnknownParameter {
        scenario: String,
        key: String,
        valid: Vec<&'static str>,
    },
    #[error("bad value '{value}' for {key}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Domain(String),
    #[error("builder produced an invalid scenario: {}", join(.0))]
    Invalid(Vec<DocError>),
}

fn join(errors: &[DocError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn positive(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Domain(format!("{name} must be positive, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Domain(format!(
            "{name} must be non-negative, got {v}"
        )))
    }
}

fn finite(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ScenarioError::Domain(format!("{name} must be finite, got {v}")))
    }
}

fn fraction(name: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(ScenarioError::Domain(format!(
            "{name} must lie in (0, 1], got {v}"
        )))
    }
}

fn model(nodes: Vec<(&str, Expr)>, goal: &str, metric: &str) -> StructuralModel {
    StructuralModel {
        nodes: nodes
            .into_iter()
            .map(|(id, expr)| Node {
                id: NodeId::new(id),
                expr,
            })
            .collect(),
        goal: NodeId::new(goal),
        metric: NodeId::new(metric),
    }
}

fn finish(mut doc: ScenarioDoc) -> Result<ScenarioDoc, ScenarioError> {
    doc.renumber_noise_sites();
    doc.validate().map_err(ScenarioError::Invalid)?;
    Ok(doc)
}

fn n(name: &str) -> Expr {
    Expr::node(name)
}

/// `x + normal(0, sigma)`, or just `x` when sigma is zero.
fn plus_noise(x: Expr, mu: f64, sigma: f64) -> Expr {
    if sigma == 0.0 && mu == 0.0 {
        x
    } else {
        x + Expr::normal(mu, sigma)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegressionalParams {
    pub mu_e: f64,
    pub sigma_e: f64,
    pub sigma_g: f64,
    pub c: f64,
}

impl Default for RegressionalParams {
    fn default() -> Self {
        RegressionalParams {
            mu_e: 0.0,
            sigma_e: 1.0,
            sigma_g: 1.0,
            c: 0.0,
        }
    }
}

/// `G ~ N(0, sigma_g)`, `M = G + N(mu_e, sigma_e)`, regulator keeps `M >= c`.
pub fn build_regressional(p: &RegressionalParams) -> Result<ScenarioDoc, ScenarioError> {
    positive("sigma_g", p.sigma_g)?;
    non_negative("sigma_e", p.sigma_e)?;
    finite("mu_e", p.mu_e)?;
    finite("c", p.c)?;
    let m = model(
        vec![
            ("G", Expr::normal(0.0, p.sigma_g)),
            ("M", n("G") + Expr::normal(p.mu_e, p.sigma_e)),
        ],
        "G",
        "M",
    );
    finish(ScenarioDoc::new(
        m,
        vec![Stage::threshold("M", Comparator::Ge, p.c)],
        "regressional",
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtremalVariant {
    /// `G = s`, `M = G + beta * s^3`; the fit sees only `|s| <= 1` and the
    /// regulator keeps the top `q` by `M`.
    Insufficiency { beta: f64, q: f64 },
    /// `M ~ N(0, sigma)`, `G = M + x` below `a` and `M + y` above it; the fit
    /// sees `M <= a` and the regulator keeps `M > a`.
    RegimeChange { a: f64, x: f64, y: f64, sigma: f64 },
}

impl ExtremalVariant {
    pub fn insufficiency() -> Self {
        ExtremalVariant::Insufficiency { beta: 0.1, q: 0.01 }
    }

    pub fn regime_change() -> Self {
        ExtremalVariant::RegimeChange {
            a: 2.0,
            x: 0.0,
            y: -5.0,
            sigma: 2.0,
        }
    }
}

pub fn build_extremal(variant: &ExtremalVariant) -> Result<ScenarioDoc, ScenarioError> {
    match *variant {
        ExtremalVariant::Insufficiency { beta, q } => {
            finite("beta", beta)?;
            fraction("q", q)?;
            let m = model(
                vec![
                    ("s", Expr::normal(0.0, 1.0)),
                    ("G", n("s")),
                    ("M", n("G") + beta * n("s").pow(3.0)),
                ],
                "G",
                "M",
            );
            let region = Region::new(vec![
                crate::dsl::Condition {
                    node: NodeId::new("s"),
                    cmp: Comparator::Ge,
                    value: -1.0,
                },
                crate::dsl::Condition {
                    node: NodeId::new("s"),
                    cmp: Comparator::Le,
                    value: 1.0,
                },
            ]);
            finish(
                ScenarioDoc::new(m, vec![Stage::top(n("M"), q)], "extremal-insufficiency")
                    .with_fit_region(region),
            )
        }
        ExtremalVariant::RegimeChange { a, x, y, sigma } => {
            finite("a", a)?;
            finite("x", x)?;
            finite("y", y)?;
            positive("sigma", sigma)?;
            let g = Expr::piecewise(n("M"), Comparator::Le, Expr::Const(a), n("M") + x, n("M") + y);
            let m = model(vec![("M", Expr::normal(0.0, sigma)), ("G", g)], "G", "M");
            finish(
                ScenarioDoc::new(
                    m,
                    vec![Stage::threshold("M", Comparator::Gt, a)],
                    "extremal-regime",
                )
                .with_fit_region(Region::single("M", Comparator::Le, a)),
            )
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CausalVariant {
    SharedCause,
    Intermediary,
    MetricManipulation,
}

impl CausalVariant {
    pub fn default_value(self) -> f64 {
        match self {
            CausalVariant::SharedCause => 2.0,
            CausalVariant::Intermediary => 0.0,
            CausalVariant::MetricManipulation => 7.0,
        }
    }
}

/// Noise widths on the non-root edges. `sigma_m` is always the hop into `M`;
/// `sigma_g` is the hop `X -> G` (shared cause) and `sigma_x` the hop
/// `G -> X` (intermediary graphs).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CausalSigmas {
    pub sigma_m: f64,
    pub sigma_g: f64,
    pub sigma_x: f64,
}

impl Default for CausalSigmas {
    fn default() -> Self {
        CausalSigmas {
            sigma_m: 1.0,
            sigma_g: 1.0,
            sigma_x: 1.0,
        }
    }
}

fn shared_cause_model(s: &CausalSigmas) -> StructuralModel {
    model(
        vec![
            ("X", Expr::normal(0.0, 1.0)),
            ("M", plus_noise(n("X"), 0.0, s.sigma_m)),
            ("G", plus_noise(n("X"), 0.0, s.sigma_g)),
        ],
        "G",
        "M",
    )
}

fn chain_model(s: &CausalSigmas) -> StructuralModel {
    model(
        vec![
            ("G", Expr::normal(0.0, 1.0)),
            ("X", plus_noise(n("G"), 0.0, s.sigma_x)),
            ("M", plus_noise(n("X"), 0.0, s.sigma_m)),
        ],
        "G",
        "M",
    )
}

fn check_sigmas(s: &CausalSigmas) -> Result<(), ScenarioError> {
    non_negative("sigma_m", s.sigma_m)?;
    non_negative("sigma_g", s.sigma_g)?;
    non_negative("sigma_x", s.sigma_x)
}

/// The regulator intervenes directly: `do X = value` on a shared cause or an
/// intermediary, or `do M = value` on the metric itself.
pub fn build_causal(
    variant: CausalVariant,
    value: f64,
    sigmas: &CausalSigmas,
) -> Result<ScenarioDoc, ScenarioError> {
    finite("value", value)?;
    check_sigmas(sigmas)?;
    let (m, target, name) = match variant {
        CausalVariant::SharedCause => (shared_cause_model(sigmas), "X", "causal-shared"),
        CausalVariant::Intermediary => (chain_model(sigmas), "X", "causal-intermediary"),
        CausalVariant::MetricManipulation => (chain_model(sigmas), "M", "causal-metric"),
    };
    finish(ScenarioDoc::new(m, vec![Stage::intervene(target, value)], name))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MistakenVariant {
    /// Shared cause `X` of `M` and `G`; the regulator selects `M >= c`, then
    /// fixes `X = x_star`.
    IgnoredSharedCause {
        sigma_m: f64,
        sigma_g: f64,
        c: f64,
        x_star: f64,
    },
    /// `G -> X -> M` with noise on both hops; the regulator selects `M >= c`.
    IgnoredIntermediary { sigma_x: f64, sigma_m: f64, c: f64 },
    /// `M = X + G + N(0, sigma_m)` with an independent cause `X`; the
    /// regulator selects `M >= c`.
    IgnoredAdditionalCause { sigma_x: f64, sigma_m: f64, c: f64 },
}

impl MistakenVariant {
    pub fn ignored_shared_cause() -> Self {
        MistakenVariant::IgnoredSharedCause {
            sigma_m: 1.0,
            sigma_g: 1.0,
            c: 1.0,
            x_star: 1.0,
        }
    }

    pub fn ignored_intermediary() -> Self {
        MistakenVariant::IgnoredIntermediary {
            sigma_x: 1.0,
            sigma_m: 1.0,
            c: 1.0,
        }
    }

    pub fn ignored_additional_cause() -> Self {
        MistakenVariant::IgnoredAdditionalCause {
            sigma_x: 1.0,
            sigma_m: 0.5,
            c: 1.0,
        }
    }
}

pub fn build_mistaken(variant: &MistakenVariant) -> Result<ScenarioDoc, ScenarioError> {
    match *variant {
        MistakenVariant::IgnoredSharedCause {
            sigma_m,
            sigma_g,
            c,
            x_star,
        } => {
            non_negative("sigma_m", sigma_m)?;
            non_negative("sigma_g", sigma_g)?;
            finite("c", c)?;
            finite("x_star", x_star)?;
            let m = shared_cause_model(&CausalSigmas {
                sigma_m,
                sigma_g,
                sigma_x: 0.0,
            });
            finish(ScenarioDoc::new(
                m,
                vec![
                    Stage::threshold("M", Comparator::Ge, c),
                    Stage::intervene("X", x_star),
                ],
                "ignored-shared",
            ))
        }
        MistakenVariant::IgnoredIntermediary { sigma_x, sigma_m, c } => {
            non_negative("sigma_x", sigma_x)?;
            non_negative("sigma_m", sigma_m)?;
            finite("c", c)?;
            let m = chain_model(&CausalSigmas {
                sigma_m,
                sigma_g: 0.0,
                sigma_x,
            });
            finish(ScenarioDoc::new(
                m,
                vec![Stage::threshold("M", Comparator::Ge, c)],
                "ignored-intermediary",
            ))
        }
        MistakenVariant::IgnoredAdditionalCause { sigma_x, sigma_m, c } => {
            positive("sigma_x", sigma_x)?;
            non_negative("sigma_m", sigma_m)?;
            finite("c", c)?;
            let m = model(
                vec![
                    ("X", Expr::normal(0.0, sigma_x)),
                    ("G", Expr::normal(0.0, 1.0)),
                    ("M", plus_noise(n("X") + n("G"), 0.0, sigma_m)),
                ],
                "G",
                "M",
            );
            finish(ScenarioDoc::new(
                m,
                vec![Stage::threshold("M", Comparator::Ge, c)],
                "ignored-additional",
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mechanism {
    /// Agent keeps the top `q` by `G_A + k * X` before the regulator
    /// thresholds `M_R = G_R + X` at `c`.
    AgentSelection { k: f64, q: f64, c: f64 },
    /// Agent fixes the shared cause `X = value` before the regulator
    /// thresholds `M_R` at `c`.
    AgentIntervention { value: f64, c: f64 },
}

impl Mechanism {
    pub fn agent_selection() -> Self {
        Mechanism::AgentSelection {
            k: 1.0,
            q: 0.1,
            c: 1.0,
        }
    }

    pub fn agent_intervention() -> Self {
        Mechanism::AgentIntervention { value: 2.0, c: 1.0 }
    }
}

pub fn build_adversarial_misalignment(mechanism: &Mechanism) -> Result<ScenarioDoc, ScenarioError> {
    match *mechanism {
        Mechanism::AgentSelection { k, q, c } => {
            finite("k", k)?;
            fraction("q", q)?;
            finite("c", c)?;
            let m = model(
                vec![
                    ("X", Expr::normal(0.0, 1.0)),
                    ("G_R", Expr::normal(0.0, 1.0)),
                    ("M_R", n("G_R") + n("X")),
                    ("G_A", Expr::normal(0.0, 1.0)),
                ],
                "G_R",
                "M_R",
            );
            let score = if k == 0.0 { n("G_A") } else { n("G_A") + k * n("X") };
            finish(ScenarioDoc::new(
                m,
                vec![
                    Stage::Agent(vec![Stage::top(score, q)]),
                    Stage::threshold("M_R", Comparator::Ge, c),
                ],
                "adversarial-misalignment",
            ))
        }
        Mechanism::AgentIntervention { value, c } => {
            finite("value", value)?;
            finite("c", c)?;
            let m = model(
                vec![
                    ("X", Expr::normal(0.0, 1.0)),
                    ("M_R", n("X") + Expr::normal(0.0, 1.0)),
                    ("G_R", n("X") + Expr::normal(0.0, 1.0)),
                ],
                "G_R",
                "M_R",
            );
            finish(ScenarioDoc::new(
                m,
                vec![
                    Stage::Agent(vec![Stage::intervene("X", value)]),
                    Stage::threshold("M_R", Comparator::Ge, c),
                ],
                "adversarial-misalignment",
            ))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CampbellParams {
    pub q: f64,
    pub c: f64,
}

impl Default for CampbellParams {
    fn default() -> Self {
        CampbellParams { q: 0.1, c: 1.0 }
    }
}

/// The agent picks its own metric `M_A = G_A * X` and keeps the top `q` by
/// it; the regulator then thresholds `M_R = G_R + X` at `c`.
pub fn build_campbell(p: &CampbellParams) -> Result<ScenarioDoc, ScenarioError> {
    fraction("q", p.q)?;
    finite("c", p.c)?;
    let m = model(
        vec![
            ("X", Expr::normal(0.0, 1.0)),
            ("G_R", Expr::normal(0.0, 1.0)),
            ("G_A", Expr::normal(0.0, 1.0)),
            ("M_R", n("G_R") + n("X")),
            ("M_A", n("G_A") * n("X")),
        ],
        "G_R",
        "M_R",
    );
    finish(ScenarioDoc::new(
        m,
        vec![
            Stage::Agent(vec![Stage::top(n("G_A") * n("X"), p.q)]),
            Stage::threshold("M_R", Comparator::Ge, p.c),
        ],
        "campbell",
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CobraVariant {
    /// `M = G + Y` with a hidden cause `Y = 0` the agent raises to `y_max`.
    Normal { y_max: f64 },
    /// `M = G + N(0, sigma_e)` and the agent keeps the top `q` by `M`.
    NonCausal { q: f64, sigma_e: f64 },
}

impl CobraVariant {
    pub fn normal() -> Self {
        CobraVariant::Normal { y_max: 5.0 }
    }

    pub fn non_causal() -> Self {
        CobraVariant::NonCausal { q: 0.5, sigma_e: 1.0 }
    }
}

pub fn build_cobra(variant: &CobraVariant) -> Result<ScenarioDoc, ScenarioError> {
    match *variant {
        CobraVariant::Normal { y_max } => {
            finite("y_max", y_max)?;
            let m = model(
                vec![
                    ("G", Expr::normal(0.0, 1.0)),
                    ("Y", Expr::Const(0.0)),
                    ("M", n("G") + n("Y")),
                ],
                "G",
                "M",
            );
            finish(ScenarioDoc::new(
                m,
                vec![Stage::Agent(vec![Stage::intervene("Y", y_max)])],
                "cobra-normal",
            ))
        }
        CobraVariant::NonCausal { q, sigma_e } => {
            fraction("q", q)?;
            non_negative("sigma_e", sigma_e)?;
            let m = model(
                vec![
                    ("G", Expr::normal(0.0, 1.0)),
                    ("M", plus_noise(n("G"), 0.0, sigma_e)),
                ],
                "G",
                "M",
            );
            finish(ScenarioDoc::new(
                m,
                vec![Stage::Agent(vec![Stage::top(n("M"), q)])],
                "cobra-noncausal",
            ))
        }
    }
}

/// Parameter names accepted by `canonical` for a scenario, with defaults.
pub fn canonical_parameters(name: &str) -> Option<Vec<(&'static str, String)>> {
    let f = |v: f64| crate::dsl::format_number(v);
    Some(match name {
        "regressional" => {
            let d = RegressionalParams::default();
            vec![
                ("mu_e", f(d.mu_e)),
                ("sigma_e", f(d.sigma_e)),
                ("sigma_g", f(d.sigma_g)),
                ("c", f(d.c)),
            ]
        }
        "extremal-insufficiency" => vec![("beta", f(0.1)), ("q", f(0.01))],
        "extremal-regime" => vec![("a", f(2.0)), ("x", f(0.0)), ("y", f(-5.0)), ("sigma", f(2.0))],
        "causal-shared" => vec![("value", f(2.0)), ("sigma_m", f(1.0)), ("sigma_g", f(1.0))],
        "causal-intermediary" => vec![("value", f(0.0)), ("sigma_x", f(1.0)), ("sigma_m", f(1.0))],
        "causal-metric" => vec![("value", f(7.0)), ("sigma_x", f(1.0)), ("sigma_m", f(1.0))],
        "ignored-shared" => vec![
            ("sigma_m", f(1.0)),
            ("sigma_g", f(1.0)),
            ("c", f(1.0)),
            ("x_star", f(1.0)),
        ],
        "ignored-intermediary" => vec![("sigma_x", f(1.0)), ("sigma_m", f(1.0)), ("c", f(1.0))],
        "ignored-additional" => vec![("sigma_x", f(1.0)), ("sigma_m", f(0.5)), ("c", f(1.0))],
        "adversarial-misalignment" => vec![
            ("mechanism", "selection".to_string()),
            ("k", f(1.0)),
            ("q", f(0.1)),
            ("c", f(1.0)),
            ("value", f(2.0)),
        ],
        "campbell" => vec![("q", f(0.1)), ("c", f(1.0))],
        "cobra-normal" => vec![("y_max", f(5.0))],
        "cobra-noncausal" => vec![("q", f(0.5)), ("sigma_e", f(1.0))],
        _ => return None,
    })
}

struct Args {
    values: BTreeMap<String, String>,
}

impl Args {
    fn new(name: &str, overrides: &[(String, String)]) -> Result<Args, ScenarioError> {
        let params =
            canonical_parameters(name).ok_or_else(|| ScenarioError::UnknownScenario(name.to_string()))?;
        let mut values: BTreeMap<String, String> =
            params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        for (key, value) in overrides {
            if !values.contains_key(key) {
                return Err(ScenarioError::UnknownParameter {
                    scenario: name.to_string(),
                    key: key.clone(),
                    valid: params.iter().map(|(k, _)| *k).collect(),
                });
            }
            values.insert(key.clone(), value.clone());
        }
        Ok(Args { values })
    }

    fn text(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn num(&self, key: &str) -> Result<f64, ScenarioError> {
        let raw = self.text(key);
        raw.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ScenarioError::BadValue {
                key: key.to_string(),
                value: raw.to_string(),
            })
    }
}

/// Builds a canonical scenario by name, with `key=value` parameter overrides.
pub fn canonical(name: &str, overrides: &[(String, String)]) -> Result<ScenarioDoc, ScenarioError> {
    let a = Args::new(name, overrides)?;
    let causal = |variant: CausalVariant| -> Result<ScenarioDoc, ScenarioError> {
        let sigmas = CausalSigmas {
            sigma_m: a.num("sigma_m")?,
            sigma_g: if a.values.contains_key("sigma_g") {
                a.num("sigma_g")?
            } else {
                1.0
            },
            sigma_x: if a.values.contains_key("sigma_x") {
                a.num("sigma_x")?
            } else {
                1.0
            },
        };
        build_causal(variant, a.num("value")?, &sigmas)
    };
    match name {
        "regressional" => build_regressional(&RegressionalParams {
            mu_e: a.num("mu_e")?,
            sigma_e: a.num("sigma_e")?,
            sigma_g: a.num("sigma_g")?,
            c: a.num("c")?,
        }),
        "extremal-insufficiency" => build_extremal(&ExtremalVariant::Insufficiency {
            beta: a.num("beta")?,
            q: a.num("q")?,
        }),
        "extremal-regime" => build_extremal(&ExtremalVariant::RegimeChange {
            a: a.num("a")?,
            x: a.num("x")?,
            y: a.num("y")?,
            sigma: a.num("sigma")?,
        }),
        "causal-shared" => causal(CausalVariant::SharedCause),
        "causal-intermediary" => causal(CausalVariant::Intermediary),
        "causal-metric" => causal(CausalVariant::MetricManipulation),
        "ignored-shared" => build_mistaken(&MistakenVariant::IgnoredSharedCause {
            sigma_m: a.num("sigma_m")?,
            sigma_g: a.num("sigma_g")?,
            c: a.num("c")?,
            x_star: a.num("x_star")?,
        }),
        "ignored-intermediary" => build_mistaken(&MistakenVariant::IgnoredIntermediary {
            sigma_x: a.num("sigma_x")?,
            sigma_m: a.num("sigma_m")?,
            c: a.num("c")?,
        }),
        "ignored-additional" => build_mistaken(&MistakenVariant::IgnoredAdditionalCause {
            sigma_x: a.num("sigma_x")?,
            sigma_m: a.num("sigma_m")?,
            c: a.num("c")?,
        }),
        "adversarial-misalignment" => {
            let mechanism = match a.text("mechanism") {
                "selection" => Mechanism::AgentSelection {
                    k: a.num("k")?,
                    q: a.num("q")?,
                    c: a.num("c")?,
                },
                "intervention" => Mechanism::AgentIntervention {
                    value: a.num("value")?,
                    c: a.num("c")?,
                },
                other => {
                    return Err(ScenarioError::BadValue {
                        key: "mechanism".to_string(),
                        value: format!("{other} (expected selection or intervention)"),
                    })
                }
            };
            build_adversarial_misalignment(&mechanism)
        }
        "campbell" => build_campbell(&CampbellParams {
            q: a.num("q")?,
            c: a.num("c")?,
        }),
        "cobra-normal" => build_cobra(&CobraVariant::Normal {
            y_max: a.num("y_max")?,
        }),
        "cobra-noncausal" => build_cobra(&CobraVariant::NonCausal {
            q: a.num("q")?,
            sigma_e: a.num("sigma_e")?,
        }),
        _ => Err(ScenarioError::UnknownScenario(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_named, render};

    #[test]
    fn every_canonical_builds_and_round_trips() {
        for name in CANONICAL_NAMES {
            let doc = canonical(name, &[]).unwrap();
            assert_eq!(doc.source_name, name);
            let back = parse_named(&render(&doc), name).unwrap();
            assert_eq!(back, doc, "{name}");
        }
    }

    #[test]
    fn overrides_apply() {
        let doc = canonical("campbell", &[("q".into(), "0.2".into())]).unwrap();
        assert!(render(&doc).contains("top 0.2 by"));
    }

    #[test]
    fn unknown_names_and_parameters() {
        let err = canonical("bogus", &[]).unwrap_err();
        assert!(err.to_string().contains("regressional"));
        let err = canonical("campbell", &[("beta".into(), "1".into())]).unwrap_err();
        assert!(matches!(err, ScenarioError::UnknownParameter { .. }));
        let err = canonical("campbell", &[("q".into(), "abc".into())]).unwrap_err();
        assert!(matches!(err, ScenarioError::BadValue { .. }));
    }

    #[test]
    fn domain_checks() {
        assert!(build_campbell(&CampbellParams { q: 0.0, c: 1.0 }).is_err());
        assert!(build_regressional(&RegressionalParams {
            sigma_g: 0.0,
            ..Default::default()
        })
        .is_err());
        assert!(build_regressional(&RegressionalParams {
            sigma_e: -1.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn noise_free_metric_renders_without_noise_leaf() {
        let doc = build_regressional(&RegressionalParams {
            sigma_e: 0.0,
            ..Default::default()
        })
        .unwrap();
        assert!(render(&doc).contains("node M = G + normal(0, 0)"));
    }
}
