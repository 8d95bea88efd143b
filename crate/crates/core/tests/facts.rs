use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use comicforge_core::facts::stats::{pearson, slope};
use comicforge_core::facts::{fact_weight, DataFact, FactForm, RankParams};
use comicforge_core::model::{load_ensemble, parse_ensemble, Dataset};
use comicforge_core::{extract_facts, Exact};
use comicforge_testkit::{pearson_naive, random_facts, rng, slope_naive};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn fixture(p: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(p)
}

fn fact(id: &str, form: FactForm, attrs: &[&str]) -> DataFact {
    DataFact {
        id: id.into(),
        form,
        level: form.level(),
        attributes: attrs.iter().map(|s| s.to_string()).collect(),
        subject: "s".into(),
        subject_attribute: None,
        measure: None,
        values: vec![],
        entities: vec![],
        source_chart: "x".into(),
    }
}

#[test]
fn hand_derived_weight() {
    let f = fact("f", FactForm::Minimum, &["a", "b"]);
    let nb = vec![fact("g1", FactForm::Minimum, &["a", "b"]), fact("g2", FactForm::Trend, &["b", "c"])];
    let exact: Exact = fact_weight(&f, &[&nb], &RankParams::default()).unwrap();
    assert_eq!(exact, Exact::new(4, 9));
    let float: f64 = fact_weight(&f, &[&nb], &RankParams::default()).unwrap();
    assert!((float - 4.0 / 9.0).abs() < 1e-12);
}

fn argsort(facts: &[DataFact], nbrs: &[Vec<DataFact>], p: &RankParams<Exact>) -> Vec<String> {
    let lists: Vec<&[DataFact]> = nbrs.iter().map(Vec::as_slice).collect();
    let mut w: Vec<(Exact, usize)> = facts
        .iter()
        .enumerate()
        .map(|(i, f)| (fact_weight(f, &lists, p).unwrap(), i))
        .collect();
    w.sort();
    w.into_iter().map(|(_, i)| facts[i].id.clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scaling_weights_keeps_the_ranking(seed in any::<u64>(), k in 1i64..50, d in 1i64..50) {
        let mut r = rng(seed);
        let facts = random_facts(&mut r, "s", 10);
        let nbrs: Vec<Vec<DataFact>> = (0..r.gen_range(1..=3))
            .map(|i| {
                let n = r.gen_range(1..8);
                random_facts(&mut r, &format!("n{i}"), n)
            })
            .collect();
        let p = RankParams {
            alpha: Exact::new(r.gen_range(0..10), 7),
            beta: Exact::new(r.gen_range(0..10), 7),
            gamma: Exact::new(r.gen_range(1..10), 7),
            delta: Exact::from_integer(4),
        };
        let s = Exact::new(k, d);
        let scaled = RankParams { alpha: p.alpha * s, beta: p.beta * s, gamma: p.gamma * s, delta: p.delta };
        prop_assert_eq!(argsort(&facts, &nbrs, &p), argsort(&facts, &nbrs, &scaled));
    }

    #[test]
    fn weights_are_zero_exactly_when_everything_matches(seed in any::<u64>()) {
        let mut r = rng(seed);
        let facts = random_facts(&mut r, "s", 6);
        let nb = random_facts(&mut r, "n", 3);
        let p = RankParams::<Exact>::default();
        for f in &facts {
            let w = fact_weight(f, &[&nb], &p).unwrap();
            prop_assert!(w >= Exact::from_integer(0));
            let all_match = nb.iter().all(|g| g.form == f.form && g.level == f.level && g.attributes == f.attributes);
            prop_assert_eq!(w == Exact::from_integer(0), all_match);
        }
    }

    #[test]
    fn correlation_and_slope_match_reference(seed in any::<u64>()) {
        let mut r = rng(seed);
        let xs: Vec<f64> = (0..50).map(|_| r.gen_range(-100.0..100.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x + r.gen_range(-40.0..40.0)).collect();
        let (a, b) = (pearson(&xs, &ys).unwrap(), pearson_naive(&xs, &ys).unwrap());
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        let (a, b) = (slope(&xs, &ys).unwrap(), slope_naive(&xs, &ys).unwrap());
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
    }
}

#[test]
fn extraction_ignores_row_order() {
    let dir = fixture("marketing");
    let loaded = load_ensemble(&dir.join("ensemble.json"), None).unwrap();
    let text = fs::read_to_string(dir.join("visits.csv")).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    let mut r = rng(7);
    for _ in 0..3 {
        lines.shuffle(&mut r);
        let shuffled = format!("{header}\n{}\n", lines.join("\n"));
        let mut data = Dataset::from_csv(&shuffled).unwrap();
        data.meta = loaded.ensemble.dataset.meta.clone();
        for chart in &loaded.ensemble.charts {
            let a = extract_facts(chart, &loaded.ensemble.dataset).unwrap();
            let b = extract_facts(chart, &data).unwrap();
            assert_eq!(a, b, "chart {}", chart.id);
        }
    }
}

#[test]
fn fixture_facts_are_well_formed() {
    for path in ["marketing/ensemble.json", "cars/ensemble.json"] {
        let e = load_ensemble(&fixture(path), None).unwrap().ensemble;
        for chart in &e.charts {
            let x = extract_facts(chart, &e.dataset).unwrap();
            assert!(!x.facts.is_empty(), "{}", chart.id);
            let attrs = chart.attribute_set();
            let ids: BTreeSet<&str> = x.facts.iter().map(|f| f.id.as_str()).collect();
            assert_eq!(ids.len(), x.facts.len());
            for f in &x.facts {
                assert!(f.attributes.is_subset(&attrs));
                assert_eq!(f.level, f.form.level());
                assert!((1..=3).contains(&f.level));
            }
        }
    }
}

#[test]
fn horsepower_chart_has_the_193_bhp_minimum() {
    let e = load_ensemble(&fixture("cars/ensemble.json"), None).unwrap().ensemble;
    let x = extract_facts(e.chart("mpg_trend").unwrap(), &e.dataset).unwrap();
    let min = x
        .facts
        .iter()
        .find(|f| f.form == FactForm::Minimum && f.measure.as_deref() == Some("Miles_per_Gallon"))
        .unwrap();
    assert_eq!(min.subject, "193 bhp");
    assert_eq!(min.value(), Some(9.0));
    assert_eq!(min.level, 1);
    let expected: BTreeSet<String> = ["Horsepower", "Miles_per_Gallon"].map(String::from).into();
    assert_eq!(min.attributes, expected);
}

#[test]
fn categorical_only_chart_warns() {
    let doc = r#"{"dataset":{"inline":[{"a":"x","b":"p"},{"a":"y","b":"q"},{"a":"x","b":"q"}]},
        "charts":[{"id":"c","mark":"point","channels":{"x":{"field":"a","type":"nominal"},"y":{"field":"b","type":"nominal"}}}]}"#;
    let e = parse_ensemble(doc, None).unwrap().ensemble;
    let x = extract_facts(&e.charts[0], &e.dataset).unwrap();
    assert!(!x.warnings.is_empty());
    assert!(x.facts.iter().all(|f| f.form == FactForm::Share));
}
