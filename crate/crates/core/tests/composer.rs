use std::collections::BTreeSet;
use std::path::PathBuf;

use comicforge_core::backbone::BackboneShape;
use comicforge_core::composer::{EditError, ImportError, Theme};
use comicforge_core::layout::LayoutPattern;
use comicforge_core::model::{load_ensemble, parse_ensemble};
use comicforge_core::{
    apply_edit, compose, export_html, export_json, import_json, ChartEnsemble, ComicDocument, Edit, Params,
};

fn fixture(p: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(p)
}

fn marketing() -> ChartEnsemble {
    load_ensemble(&fixture("marketing/ensemble.json"), None).unwrap().ensemble
}

fn members(doc: &ComicDocument) -> Vec<BTreeSet<&str>> {
    doc.pieces
        .iter()
        .map(|p| p.chart_ids.iter().map(String::as_str).collect())
        .collect()
}

fn set<'a>(ids: &[&'a str]) -> BTreeSet<&'a str> {
    ids.iter().copied().collect()
}

#[test]
fn marketing_comic_has_four_pieces() {
    let doc = compose(&marketing(), &Params::default()).unwrap();
    doc.check_invariants().unwrap();
    assert_eq!(
        members(&doc),
        vec![set(&["c5"]), set(&["c1", "c2", "c3", "c4"]), set(&["c6", "c7"]), set(&["c8", "c9"])]
    );
    let patterns: Vec<LayoutPattern> = doc.pieces.iter().map(|p| p.layout.pattern).collect();
    assert_eq!(
        patterns,
        vec![LayoutPattern::Full, LayoutPattern::HeroPlus3, LayoutPattern::Parallel2, LayoutPattern::Parallel2]
    );
    for p in &doc.pieces {
        assert!(p.layout.tiles_exactly());
        for panel in p.panels.values() {
            assert!(panel.selected.len() <= 4);
            assert!(!panel.caption.text.is_empty());
        }
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let e = marketing();
    let first = export_json(&compose(&e, &Params::default()).unwrap());
    for _ in 0..5 {
        assert_eq!(export_json(&compose(&e, &Params::default()).unwrap()), first);
    }
    let html = export_html(&compose(&e, &Params::default()).unwrap());
    assert_eq!(export_html(&compose(&e, &Params::default()).unwrap()), html);
}

const ROWS: &str = r#"[
    {"brand":"Acme","sales":10,"profit":2},
    {"brand":"Bolt","sales":30,"profit":5},
    {"brand":"Core","sales":20,"profit":9}
]"#;

fn bar(id: &str, t: i64) -> String {
    format!(
        r#"{{"id":"{id}","mark":"bar","created_at":{t},
        "channels":{{"x":{{"field":"brand","type":"nominal"}},
                     "y":{{"field":"sales","type":"quantitative","aggregate":"sum"}}}}}}"#
    )
}

fn inline(charts: &[String]) -> ChartEnsemble {
    let doc = format!(r#"{{"dataset":{{"inline":{ROWS}}},"charts":[{}]}}"#, charts.join(","));
    parse_ensemble(&doc, None).unwrap().ensemble
}

#[test]
fn single_chart_gives_one_full_panel() {
    let doc = compose(&inline(&[bar("only", 1)]), &Params::default()).unwrap();
    doc.check_invariants().unwrap();
    assert_eq!(doc.pieces.len(), 1);
    assert_eq!(doc.pieces[0].backbone.shape, BackboneShape::Single);
    assert_eq!(doc.pieces[0].layout.pattern, LayoutPattern::Full);
    assert!(doc.pieces[0].panels["only"].facts.iter().all(|f| f.weight == 0.0));
}

#[test]
fn identical_charts_pair_up_and_second_is_discounted() {
    let doc = compose(&inline(&[bar("a", 1), bar("b", 2)]), &Params::default()).unwrap();
    doc.check_invariants().unwrap();
    assert_eq!(doc.pieces.len(), 1);
    let piece = &doc.pieces[0];
    assert_eq!(piece.backbone.shape, BackboneShape::Chain2);
    assert_eq!(piece.backbone.root, "a");
    assert_eq!(piece.backbone.edges[0].weight, 0.0);
    assert!(piece.panels["a"].facts.iter().all(|f| !f.duplicate));
    assert!(piece.panels["b"].facts.iter().any(|f| f.duplicate));
}

#[test]
fn within_piece_swap_round_trips() {
    let e = marketing();
    let doc = compose(&e, &Params::default()).unwrap();
    let once = apply_edit(&doc, &e, 0, &Edit::SwapCharts { a: "c1".into(), b: "c2".into() }).unwrap();
    once.check_invariants().unwrap();
    assert_eq!(once.revision, 1);
    let p = doc.piece_of("c1").unwrap();
    assert_eq!(once.pieces[p].layout.cell("c2").unwrap().rect, doc.pieces[p].layout.cell("c1").unwrap().rect);
    let twice = apply_edit(&once, &e, 1, &Edit::SwapCharts { a: "c1".into(), b: "c2".into() }).unwrap();
    assert_eq!(twice.pieces, doc.pieces);
}

#[test]
fn between_piece_swap_exchanges_membership() {
    let e = marketing();
    let doc = compose(&e, &Params::default()).unwrap();
    let next = apply_edit(&doc, &e, 0, &Edit::SwapCharts { a: "c1".into(), b: "c6".into() }).unwrap();
    next.check_invariants().unwrap();
    assert_eq!(
        members(&next),
        vec![set(&["c5"]), set(&["c6", "c2", "c3", "c4"]), set(&["c1", "c7"]), set(&["c8", "c9"])]
    );
    let back = apply_edit(&next, &e, 1, &Edit::SwapCharts { a: "c1".into(), b: "c6".into() }).unwrap();
    assert_eq!(members(&back), members(&doc));
    back.check_invariants().unwrap();
}

#[test]
fn identity_reorder_changes_only_the_revision() {
    let e = marketing();
    let doc = compose(&e, &Params::default()).unwrap();
    let mut next = apply_edit(&doc, &e, 0, &Edit::ReorderPieces { order: vec![0, 1, 2, 3] }).unwrap();
    assert_eq!(next.revision, 1);
    next.revision = 0;
    assert_eq!(next, doc);

    let moved = apply_edit(&doc, &e, 0, &Edit::ReorderPieces { order: vec![3, 2, 1, 0] }).unwrap();
    moved.check_invariants().unwrap();
    assert!(moved.manual_order);
    assert_eq!(moved.pieces[0].chart_ids, doc.pieces[3].chart_ids);
    assert!(matches!(
        apply_edit(&doc, &e, 0, &Edit::ReorderPieces { order: vec![0, 0, 1, 2] }),
        Err(EditError::InvalidEdit(_))
    ));
}

#[test]
fn replacing_one_fact_counts_two_edits() {
    let e = marketing();
    let doc = compose(&e, &Params::default()).unwrap();
    let panel = doc.panel("c1").unwrap();
    let spare = panel
        .facts
        .iter()
        .find(|f| !panel.selected.contains(&f.fact.id))
        .unwrap()
        .fact
        .id
        .clone();
    let mut chosen = panel.selected.clone();
    chosen[0] = spare.clone();
    let next = apply_edit(&doc, &e, 0, &Edit::SelectFacts { chart: "c1".into(), facts: chosen.clone() }).unwrap();
    next.check_invariants().unwrap();
    assert_eq!(next.fact_edit_count(), 2);
    let got = next.panel("c1").unwrap();
    assert_eq!(got.selected, chosen);
    assert!(got.manual_selection);
    assert!(got.caption.segments.iter().any(|s| s.fact_id == spare));

    let bad = Edit::SelectFacts { chart: "c1".into(), facts: vec!["nope".into()] };
    assert!(matches!(apply_edit(&doc, &e, 0, &bad), Err(EditError::UnknownEntity(_))));
}

#[test]
fn pinned_caption_survives_recomposition() {
    let e = marketing();
    let doc = compose(&e, &Params::default()).unwrap();
    let text = "Hand written <caption> & notes".to_string();
    let pinned = apply_edit(&doc, &e, 0, &Edit::EditCaptionText { chart: "c6".into(), text: text.clone() }).unwrap();
    pinned.check_invariants().unwrap();
    let params = Params { alpha: 0.5, beta: 0.25, gamma: 0.25, ..Params::default() };
    let next = apply_edit(&pinned, &e, 1, &Edit::SetParams { params }).unwrap();
    next.check_invariants().unwrap();
    let panel = next.panel("c6").unwrap();
    assert!(panel.pinned);
    assert_eq!(panel.caption.text, text);
    assert!(export_html(&next).contains("Hand written &lt;caption&gt; &amp; notes"));
}

#[test]
fn include_and_exclude_charts() {
    let e = marketing();
    let doc = compose(&e, &Params::default()).unwrap();
    let out = apply_edit(&doc, &e, 0, &Edit::IncludeCharts { add: vec![], remove: vec!["c5".into()], target_piece: None }).unwrap();
    out.check_invariants().unwrap();
    assert!(out.piece_of("c5").is_none());
    assert!(out.excluded.contains("c5"));

    let small = out.piece_of("c6").unwrap();
    let back = apply_edit(&out, &e, 1, &Edit::IncludeCharts { add: vec!["c5".into()], remove: vec![], target_piece: Some(small) }).unwrap();
    back.check_invariants().unwrap();
    assert_eq!(back.piece_of("c5"), Some(small));
    assert_eq!(back.pieces[small].chart_ids.len(), 3);
    for (i, p) in out.pieces.iter().enumerate().filter(|(i, _)| *i != small) {
        assert_eq!(&back.pieces[i], p);
    }
    assert!(back.excluded.is_empty());

    let p = out.piece_of("c1").unwrap();
    let full = apply_edit(&out, &e, 1, &Edit::IncludeCharts { add: vec!["c5".into()], remove: vec![], target_piece: Some(p) });
    assert!(matches!(full, Err(EditError::OversizedPiece { size: 5, max: 4, .. })));
}

#[test]
fn stale_revision_is_rejected() {
    let e = marketing();
    let doc = compose(&e, &Params::default()).unwrap();
    let r = apply_edit(&doc, &e, 3, &Edit::SwapCharts { a: "c1".into(), b: "c2".into() });
    assert_eq!(r, Err(EditError::StaleRevision { expected: 3, current: 0 }));
    let other = inline(&[bar("a", 1)]);
    assert!(matches!(
        apply_edit(&doc, &other, 0, &Edit::SwapCharts { a: "c1".into(), b: "c2".into() }),
        Err(EditError::EnsembleMismatch)
    ));
}

#[test]
fn json_round_trip_and_schema_checks() {
    let doc = compose(&marketing(), &Params::default()).unwrap();
    let text = export_json(&doc);
    let back = import_json(text.as_bytes()).unwrap();
    assert_eq!(back, doc);
    assert_eq!(export_json(&back), text);

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["revision"] = serde_json::json!("zero");
    let tampered = serde_json::to_vec(&v).unwrap();
    assert!(matches!(import_json(&tampered), Err(ImportError::SchemaVersionMismatch(_))));
    v["schema"] = serde_json::json!(2);
    assert!(matches!(import_json(&serde_json::to_vec(&v).unwrap()), Err(ImportError::SchemaVersionMismatch(_))));
    assert!(matches!(import_json(b"{"), Err(ImportError::Syntax(_))));
}

#[test]
fn dark_theme_changes_the_palette() {
    let e = marketing();
    let doc = compose(&e, &Params::default()).unwrap();
    let mut style = doc.style.clone();
    style.theme = Theme::Dark;
    let dark = apply_edit(&doc, &e, 0, &Edit::SetStyle { style }).unwrap();
    let html = export_html(&dark);
    assert!(html.contains("#161b22"));
    assert!(html.contains(r#"data-theme="dark""#));
    assert!(!export_html(&doc).contains("#161b22"));
}

#[test]
fn piece_size_one_gives_singletons() {
    let params = Params { max_size: 1, ..Params::default() };
    let doc = compose(&marketing(), &params).unwrap();
    doc.check_invariants().unwrap();
    assert_eq!(doc.pieces.len(), 9);
    assert!(doc.pieces.iter().all(|p| p.layout.pattern == LayoutPattern::Full));
    assert!(compose(&marketing(), &Params { max_size: 5, ..Params::default() }).is_err());
}
