//! Turns a set of related charts into a data comic: charts are grouped into
//! story pieces, each piece gets a tree-shaped backbone and a panel layout,
//! and every chart gets a caption stitched from its most related data facts.

pub mod backbone;
pub mod caption;
pub mod composer;
pub mod facts;
pub mod layout;
pub mod model;
pub mod partition;
pub mod scalar;
pub mod transition;

pub use backbone::{build_backbone, BackboneShape, StoryBackbone};
pub use caption::{plan_stitches, realize, term_context, Caption, StitchPattern, StitchPlan};
pub use composer::{apply_edit, compose, link_terms, export_html, export_json, import_json, ComicDocument, Edit, Params, StyleConfig};
pub use facts::{extract_facts, fact_weight, rank_and_select, DataFact, FactForm, RankParams, RankedFacts};
pub use layout::{assign_layout, order_pieces, LayoutPattern, StoryOrder, TierLayout};
pub use model::{ChartEnsemble, ChartSpec, Dataset};
pub use partition::{default_threshold, partition, Partition};
pub use scalar::{Exact, Scalar};
pub use transition::{diff_specs, distance, distance_matrix, CostTable, DistanceMatrix, EditScript};

pub type CostTableF64 = CostTable<f64>;
pub type CostTableExact = CostTable<Exact>;
pub type DistanceMatrixF64 = DistanceMatrix<f64>;
pub type DistanceMatrixExact = DistanceMatrix<Exact>;
pub type PartitionF64 = Partition<f64>;
pub type PartitionExact = Partition<Exact>;
pub type StoryBackboneF64 = StoryBackbone<f64>;
pub type StoryBackboneExact = StoryBackbone<Exact>;
pub type StoryOrderF64 = StoryOrder<f64>;
pub type RankParamsF64 = RankParams<f64>;
pub type RankedFactsF64 = RankedFacts<f64>;

/// Formats a number for captions: integers without decimals, anything else
/// with at most two decimals and no trailing zeros.
pub fn format_number(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x.fract() == 0.0 && x.abs() < 1e15 {
        return format!("{}", x as i64);
    }
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}
