//! Report serialization. Numbers use Rust's shortest round-trip formatting,
//! which is locale independent; lines end in LF.

use serde::Serialize;

use goodhart_core::diagnostics::{EffectReport, SweepCurve, SweepPoint};

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn to_csv<const N: usize>(header: [&str; N], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

pub fn report_json(report: &EffectReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// One row per stage, with the scenario-level fields repeated on each row.
pub fn report_csv(r: &EffectReport) -> String {
    let header = [
        "scenario_name",
        "n",
        "seed",
        "stage",
        "label",
        "count",
        "goal_mean",
        "goal_std",
        "metric_mean",
        "metric_std",
        "pearson",
        "fit_slope",
        "fit_intercept",
        "fit_region",
        "fit_n",
        "proxy_gap",
        "model_gap",
        "corr_collapse",
    ];
    let fit = &r.reference_fit;
    let rows = r.stages.iter().enumerate().map(|(i, s)| {
        vec![
            r.scenario_name.clone(),
            r.n.to_string(),
            r.seed.to_string(),
            i.to_string(),
            s.label.clone(),
            s.count.to_string(),
            num(s.goal_mean),
            num(s.goal_std),
            num(s.metric_mean),
            num(s.metric_std),
            opt(s.pearson),
            num(fit.slope),
            num(fit.intercept),
            fit.fit_region_label.clone(),
            fit.n_fit.to_string(),
            num(r.proxy_gap),
            num(r.model_gap),
            opt(r.corr_collapse),
        ]
    });
    to_csv(header, rows)
}

pub fn sweep_csv(curve: &SweepCurve) -> String {
    let header = [
        "c",
        "n_selected",
        "mean_goal",
        "mean_metric",
        "proxy_gap",
        "se_goal",
    ];
    let rows = curve.points.iter().map(|p| {
        vec![
            num(p.c),
            p.n_selected.to_string(),
            num(p.mean_goal),
            num(p.mean_metric),
            num(p.proxy_gap),
            num(p.se_goal),
        ]
    });
    to_csv(header, rows)
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    scenario_name: &'a str,
    n: usize,
    seed: u64,
    points: &'a [SweepPoint],
    omitted: &'a [f64],
}

pub fn sweep_json(scenario_name: &str, n: usize, seed: u64, curve: &SweepCurve) -> String {
    let doc = SweepDocument {
        scenario_name,
        n,
        seed,
        points: &curve.points,
        omitted: &curve.omitted,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("sweep serializes");
    s.push('\n');
    s
}
