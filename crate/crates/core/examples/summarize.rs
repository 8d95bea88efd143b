use std::path::Path;

use comicforge_core::model::load_ensemble;
use comicforge_core::{compose, Params};

fn main() {
    let path = std::env::args().nth(1).expect("usage: summarize <ensemble.json>");
    let loaded = load_ensemble(Path::new(&path), None).expect("load");
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let doc = compose(&loaded.ensemble, &Params::default()).expect("compose");
    for p in &doc.pieces {
        println!("piece {} {:?} {:?} {:?}", p.index, p.backbone.shape, p.layout.pattern, p.chart_ids);
        for id in &p.chart_ids {
            println!("  {id}: {}", p.panels[id].caption.text);
        }
    }
    for w in &doc.warnings {
        println!("warning: {w}");
    }
}
