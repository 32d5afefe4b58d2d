use std::fmt::Write;

use super::{Region, ScenarioDoc};
use crate::pipeline::Stage;
use crate::scm::{Expr, Noise};

/// Shortest text that parses back to exactly `v`.
pub fn format_number(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() > 18 {
        format!("{v:e}")
    } else {
        plain
    }
}

pub fn render(doc: &ScenarioDoc) -> String {
    let mut out = String::new();
    for node in &doc.model.nodes {
        let _ = writeln!(out, "node {} = {}", node.id, render_expr(&node.expr));
    }
    let _ = writeln!(out, "goal {}", doc.model.goal);
    let _ = writeln!(out, "metric {}", doc.model.metric);
    if let Some(region) = &doc.fit_region {
        let _ = writeln!(out, "fit {}", render_region(region));
    }
    for stage in &doc.stages {
        let _ = writeln!(out, "stage {}", render_stage(stage));
    }
    out
}

pub fn render_region(region: &Region) -> String {
    region
        .conditions
        .iter()
        .map(|c| format!("{} {} {}", c.node, c.cmp, format_number(c.value)))
        .collect::<Vec<_>>()
        .join(" and ")
}

/// Stage text as it appears after the `stage` keyword.
pub fn render_stage(stage: &Stage) -> String {
    match stage {
        Stage::Threshold { node, cmp, c } => {
            format!("select threshold {node} {cmp} {}", format_number(*c))
        }
        Stage::TopFraction { score, q } => {
            format!("select top {} by {}", format_number(*q), render_expr(score))
        }
        Stage::Do(iv) => format!("do {} = {}", iv.target, format_number(iv.value)),
        Stage::Agent(inner) if inner.is_empty() => "agent { }".to_string(),
        Stage::Agent(inner) => {
            let body: Vec<String> = inner.iter().map(render_stage).collect();
            format!("agent {{ {} }}", body.join(" "))
        }
    }
}

const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const ATOM: u8 = 4;

pub fn render_expr(expr: &Expr) -> String {
    render_at(expr, SUM)
}

fn render_at(expr: &Expr, min: u8) -> String {
    let (text, prec) = match expr {
        Expr::Const(v) => (format_number(*v), ATOM),
        Expr::Node(id) => (id.to_string(), ATOM),
        Expr::Noise(spec) => {
            let text = match spec.noise {
                Noise::Normal { mu, sigma } => {
                    format!("normal({}, {})", format_number(mu), format_number(sigma))
                }
                Noise::Uniform { lo, hi } => {
                    format!("uniform({}, {})", format_number(lo), format_number(hi))
                }
                Noise::Constant(v) => format!("constant({})", format_number(v)),
            };
            (text, ATOM)
        }
        Expr::Add(a, b) => (format!("{} + {}", render_at(a, SUM), render_at(b, PRODUCT)), SUM),
        Expr::Sub(a, b) => (format!("{} - {}", render_at(a, SUM), render_at(b, PRODUCT)), SUM),
        Expr::Mul(a, b) => (
            format!("{} * {}", render_at(a, PRODUCT), render_at(b, UNARY)),
            PRODUCT,
        ),
        Expr::Div(a, b) => (
            format!("{} / {}", render_at(a, PRODUCT), render_at(b, UNARY)),
            PRODUCT,
        ),
        // a literal right after '-' would fold into a negative constant
        Expr::Neg(a) => match **a {
            Expr::Const(v) => (format!("-({})", format_number(v)), UNARY),
            _ => (format!("-{}", render_at(a, UNARY)), UNARY),
        },
        Expr::Pow(a, e) => (format!("pow({}, {})", render_at(a, SUM), format_number(*e)), ATOM),
        Expr::Piecewise {
            lhs,
            cmp,
            rhs,
            then,
            otherwise,
        } => (
            format!(
                "piecewise({} {} {} : {}, {})",
                render_at(lhs, SUM),
                cmp,
                render_at(rhs, SUM),
                render_at(then, SUM),
                render_at(otherwise, SUM)
            ),
            ATOM,
        ),
    };
    if prec < min {
        format!("({text})")
    } else {
        text
    }
}
