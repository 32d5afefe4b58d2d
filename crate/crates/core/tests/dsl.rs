mod common;

use proptest::prelude::*;

use goodhart_core::dsl::{check_all, parse, parse_named, render, Condition, Region};
use goodhart_core::{canonical, Comparator, Expr, NodeId, ScenarioDoc, Stage, CANONICAL_NAMES};

const MINIMAL: &str =
    "node G = normal(0,1)\nnode M = G + normal(0,1)\ngoal G\nmetric M\nstage select threshold M >= 1.0";

#[test]
fn minimal_document() {
    let doc = parse(MINIMAL).unwrap();
    assert_eq!(doc.model.nodes.len(), 2);
    assert_eq!(doc.stages.len(), 1);
    assert_eq!(
        render(&doc),
        "node G = normal(0, 1)\nnode M = G + normal(0, 1)\ngoal G\nmetric M\nstage select threshold M >= 1\n"
    );
}

#[test]
fn undefined_reference_points_at_line_one() {
    let err = parse("node M = Q + 1").unwrap_err();
    assert_eq!(err.line, 1);
    assert!(err.message.contains("undefined reference Q"));
    assert_eq!(err.snippet, "node M = Q + 1");
}

#[test]
fn canonical_scenarios_round_trip() {
    for name in CANONICAL_NAMES {
        let text = render(&canonical(name, &[]).unwrap());
        let doc = parse(&text).unwrap();
        assert_eq!(parse(&render(&doc)).unwrap(), doc, "{name}");
        assert_eq!(render(&doc), text, "{name}");
    }
}

#[test]
fn comments_blank_lines_and_spacing() {
    let text =
        "# header\n\n  node G=normal( 0 ,1 )   # trailing\nnode M = G+normal(0,1)\r\ngoal G\nmetric M\n\n";
    let doc = parse(text).unwrap();
    assert_eq!(doc.model.nodes.len(), 2);
    assert!(doc.stages.is_empty());
}

#[test]
fn agent_blocks_may_span_lines() {
    let text = "node G = normal(0, 1)\nnode M = G\ngoal G\nmetric M\nstage agent {\n  select top 0.5 by M\n  do M = 1\n}\n";
    let doc = parse(text).unwrap();
    assert!(matches!(&doc.stages[0], Stage::Agent(inner) if inner.len() == 2));
    assert_eq!(parse(&render(&doc)).unwrap(), doc);
}

#[test]
fn stage_outside_grammar() {
    let base = "node G = normal(0, 1)\nnode M = G\ngoal G\nmetric M\n";
    for (stage, needle) in [
        ("stage select top 1.5 by M", "(0, 1]"),
        ("stage select threshold Z >= 1", "Z"),
        ("stage do Z = 1", "Z"),
        ("stage agent { agent { do M = 1 } }", "nested"),
        ("stage select bottom 0.1 by M", "expected"),
    ] {
        let err = parse(&format!("{base}{stage}")).unwrap_err();
        assert_eq!(err.line, 5, "{stage}");
        assert!(err.message.contains(needle), "{stage}: {}", err.message);
    }
}

#[test]
fn duplicate_declarations() {
    let err = parse("node G = 1\nnode G = 2\ngoal G\nmetric G").unwrap_err();
    assert_eq!(err.line, 2);
    let err = parse("node G = 1\ngoal G\ngoal G\nmetric G").unwrap_err();
    assert_eq!(err.line, 3);
}

#[test]
fn check_all_lists_every_problem() {
    let errs = check_all("node A = B\nnode B = normal(0, -1)\ngoal A\n");
    assert!(errs.len() >= 3, "{errs:?}");
    assert!(errs
        .windows(2)
        .all(|w| (w[0].line, w[0].column) <= (w[1].line, w[1].column)));
    assert!(errs.iter().any(|e| e.message.contains("metric")));
    assert!(check_all(MINIMAL).is_empty());
}

/// Byte spans of the lexical tokens on one line.
fn token_spans(line: &str) -> Vec<(usize, usize)> {
    let b = line.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c == b'#' {
            break;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphanumeric() || c == b'_' || c == b'.' {
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'.') {
                i += 1;
            }
        } else if (c == b'<' || c == b'>') && b.get(i + 1) == Some(&b'=') {
            i += 2;
        } else {
            i += 1;
        }
        spans.push((start, i));
    }
    spans
}

fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = CANONICAL_NAMES
        .iter()
        .map(|n| (n.to_string(), render(&canonical(n, &[]).unwrap())))
        .collect();
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "ghl") {
            out.push((
                path.display().to_string(),
                std::fs::read_to_string(&path).unwrap(),
            ));
        }
    }
    out
}

#[test]
fn corrupted_token_is_reported_on_its_line() {
    let mut checked = 0;
    for (name, text) in corpus() {
        let lines: Vec<&str> = text.lines().collect();
        for (li, line) in lines.iter().enumerate() {
            for (s, e) in token_spans(line) {
                for bad in ["@", ")", "}", ":", ","] {
                    if &line[s..e] == bad {
                        continue;
                    }
                    let mut corrupted: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
                    corrupted[li] = format!("{}{bad}{}", &line[..s], &line[e..]);
                    let err = parse(&corrupted.join("\n"))
                        .expect_err(&format!("{name}: '{}' parsed", corrupted[li]));
                    assert_eq!(err.line, li + 1, "{name}: '{}' -> {err}", corrupted[li]);
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn deleted_token_is_harmless_or_local() {
    for (name, text) in corpus() {
        let lines: Vec<&str> = text.lines().collect();
        for (li, line) in lines.iter().enumerate() {
            for (s, e) in token_spans(line) {
                let mut cut: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
                cut[li] = format!("{}{}", &line[..s], &line[e..]);
                if let Err(err) = parse(&cut.join("\n")) {
                    // removing a declaration can only break a later line or the end of input
                    assert!(err.line > li, "{name}: '{}' -> {err}", cut[li]);
                }
            }
        }
    }
}

fn cmp() -> impl Strategy<Value = Comparator> {
    prop_oneof![
        Just(Comparator::Ge),
        Just(Comparator::Gt),
        Just(Comparator::Le),
        Just(Comparator::Lt)
    ]
}

fn literal() -> impl Strategy<Value = f64> {
    prop_oneof![
        -5.0..5.0f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        (-3i32..3).prop_map(f64::from),
    ]
}

fn leaf_stage(names: Vec<String>) -> impl Strategy<Value = Stage> {
    let pick = move |i: usize| names[i % names.len()].clone();
    let (p1, p2, p3) = (pick.clone(), pick.clone(), pick);
    prop_oneof![
        (any::<usize>(), cmp(), literal()).prop_map(move |(i, c, v)| Stage::threshold(&p1(i), c, v)),
        (
            any::<usize>(),
            any::<usize>(),
            0.01..=1.0f64,
            -2.0..2.0f64,
            0.0..2.0f64
        )
            .prop_map(move |(i, j, q, k, s)| Stage::top(
                Expr::node(&p2(i)) * k + Expr::node(&p2(j)) - Expr::normal(0.0, s),
                q
            )),
        (any::<usize>(), literal()).prop_map(move |(i, v)| Stage::intervene(&p3(i), v)),
    ]
}

fn document() -> impl Strategy<Value = ScenarioDoc> {
    common::model().prop_flat_map(|model| {
        let names: Vec<String> = model.nodes.iter().map(|n| n.id.to_string()).collect();
        let stage = prop_oneof![
            3 => leaf_stage(names.clone()),
            1 => prop::collection::vec(leaf_stage(names.clone()), 0..3).prop_map(Stage::Agent),
        ];
        let fit = proptest::option::of(prop::collection::vec((any::<usize>(), cmp(), literal()), 1..3));
        (Just(model), prop::collection::vec(stage, 0..4), fit).prop_map(move |(model, stages, fit)| {
            let region = fit.map(|cs| {
                Region::new(
                    cs.into_iter()
                        .map(|(i, cmp, value)| Condition {
                            node: NodeId::new(names[i % names.len()].as_str()),
                            cmp,
                            value,
                        })
                        .collect(),
                )
            });
            let mut doc = common::doc(model, stages);
            doc.fit_region = region;
            doc.renumber_noise_sites();
            doc.source_name = "scenario".to_string();
            doc
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn parse_inverts_render(doc in document()) {
        let text = render(&doc);
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(&back, &doc);
        prop_assert_eq!(render(&back), text);
    }

    #[test]
    fn parse_is_total_on_arbitrary_text(text in "\\PC{0,200}") {
        let _ = parse(&text);
        let _ = check_all(&text);
    }

    #[test]
    fn parse_is_total_on_token_soup(
        words in prop::collection::vec(
            prop::sample::select(vec![
                "node", "goal", "metric", "stage", "select", "threshold", "top", "by", "do", "agent",
                "fit", "and", "normal", "uniform", "pow", "piecewise", "constant", "G", "M", "X", "=",
                "+", "-", "*", "/", "(", ")", "{", "}", ",", ":", "<=", ">=", "<", ">", "1", "0.5",
                "-2", "1e308", "1e999", "\n", "#", "@",
            ]),
            0..60,
        )
    ) {
        let text = words.join(" ");
        let _ = parse(&text);
        let _ = check_all(&text);
    }

    #[test]
    fn named_parse_keeps_name(doc in document(), name in "[a-z][a-z-]{0,12}") {
        let back = parse_named(&render(&doc), &name).unwrap();
        prop_assert_eq!(back.source_name, name);
    }
}
