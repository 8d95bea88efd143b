//! Comic documents: composition from an ensemble, refinement edits, export.

mod edit;
mod export;
mod html;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::{build_backbone, BackboneError, BackboneShape, StoryBackbone};
use crate::caption::{
    link_candidates, plan_stitches, realize, term_context, Caption, Connectives, ProviderError, TermCache, TermProvider,
    Vocabulary,
};
use crate::facts::{extract_facts, rank_and_select_with, DataFact, FactError, FactWarning, RankParams, RankedFact};
use crate::layout::{assign_layout_with, order_pieces, LayoutError, LayoutPattern, LayoutTable, TierLayout};
use crate::model::{ChartEnsemble, ChartSpec};
use crate::partition::{default_threshold, partition, PartitionError, DEFAULT_MAX_PIECE_SIZE};
use crate::transition::{distance_matrix, CostError, CostTable, DistanceMatrix};

pub use edit::{apply_edit, Edit, EditError};
pub use export::{export_json, import_json, ImportError};
pub use html::{export_html, Palette, DARK_PALETTE, LIGHT_PALETTE};

pub const SCHEMA_VERSION: u32 = 1;

/// Largest piece a backbone shape exists for.
pub const MAX_SUPPORTED_PIECE_SIZE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComposeError {
    #[error("params: {0}")]
    Params(String),
    #[error("no charts left to compose")]
    NoCharts,
    #[error("partition: {0}")]
    Partition(#[from] PartitionError),
    #[error("backbone: {0}")]
    Backbone(#[from] BackboneError),
    #[error("layout: {0}")]
    Layout(#[from] LayoutError),
    #[error("facts: {0}")]
    Facts(#[from] FactError),
}

impl From<CostError> for ComposeError {
    fn from(e: CostError) -> Self {
        ComposeError::Params(format!("cost table: {e}"))
    }
}

/// Every tunable of the pipeline. Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Linkage threshold; the mean pairwise distance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub max_size: usize,
    pub cost_table: CostTable<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub layout_overrides: BTreeMap<BackboneShape, LayoutPattern>,
}

impl Default for Params {
    fn default() -> Self {
        let r = RankParams::<f64>::default();
        Params {
            alpha: r.alpha,
            beta: r.beta,
            gamma: r.gamma,
            delta: r.delta,
            tau: None,
            max_size: DEFAULT_MAX_PIECE_SIZE,
            cost_table: CostTable::default(),
            layout_overrides: BTreeMap::new(),
        }
    }
}

impl Params {
    pub fn rank_params(&self) -> RankParams<f64> {
        RankParams {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
        }
    }

    pub fn validate(&self) -> Result<(), ComposeError> {
        let reals = [self.alpha, self.beta, self.gamma, self.delta];
        if reals.iter().any(|v| !v.is_finite()) {
            return Err(ComposeError::Params("weights must be finite".into()));
        }
        self.rank_params()
            .validate()
            .map_err(|e| ComposeError::Params(e.to_string()))?;
        if let Some(t) = self.tau {
            if !t.is_finite() || t < 0.0 {
                return Err(ComposeError::Params("tau must be a nonnegative number".into()));
            }
        }
        if self.max_size == 0 || self.max_size > MAX_SUPPORTED_PIECE_SIZE {
            return Err(ComposeError::Params(format!(
                "max_size must be between 1 and {MAX_SUPPORTED_PIECE_SIZE}"
            )));
        }
        self.cost_table.validate()?;
        LayoutTable::with_overrides(&self.layout_overrides)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AspectRatio {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Theme {
    Light,
    Dark,
}

/// Preset handed to the client-side chart renderer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartTheme {
    Default,
    Spreadsheet,
    GrammarOfGraphics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleConfig {
    pub aspect_ratio: AspectRatio,
    pub theme: Theme,
    pub chart_theme: ChartTheme,
    pub font_family: String,
    /// Points.
    pub font_size: u32,
}

impl Default for StyleConfig {
    fn default() -> Self {
        StyleConfig {
            aspect_ratio: AspectRatio { width: 4, height: 3 },
            theme: Theme::Light,
            chart_theme: ChartTheme::Default,
            font_family: "Helvetica, Arial, sans-serif".into(),
            font_size: 12,
        }
    }
}

impl StyleConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.aspect_ratio.width == 0 || self.aspect_ratio.height == 0 {
            return Err("aspect ratio must be positive".into());
        }
        if !(6..=72).contains(&self.font_size) {
            return Err("font size must be between 6 and 72 points".into());
        }
        if self.font_family.trim().is_empty() {
            return Err("font family must not be empty".into());
        }
        Ok(())
    }
}

/// One chart in a tier together with its facts and caption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub chart: ChartSpec,
    /// Full ranked list, ascending by weight.
    pub facts: Vec<RankedFact<f64>>,
    pub selected: Vec<String>,
    /// Selection was chosen by hand and survives recomputation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub manual_selection: bool,
    pub caption: Caption,
    /// Caption text was edited by hand and survives recomputation.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoryPiece {
    pub index: usize,
    /// Reading order.
    pub chart_ids: Vec<String>,
    pub backbone: StoryBackbone<f64>,
    pub layout: TierLayout,
    pub panels: BTreeMap<String, Panel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactEdit {
    pub revision: u64,
    pub chart: String,
    pub removed: Vec<String>,
    pub added: Vec<String>,
}

impl FactEdit {
    /// Replacing one fact counts as one removal plus one addition.
    pub fn count(&self) -> usize {
        self.removed.len() + self.added.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComicDocument {
    pub schema: u32,
    pub revision: u64,
    /// Content hash of the ensemble the document was composed from.
    pub ensemble_ref: String,
    pub params: Params,
    pub style: StyleConfig,
    /// Charts left out of the comic.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub excluded: BTreeSet<String>,
    /// Piece order was set by hand.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub manual_order: bool,
    pub pieces: Vec<StoryPiece>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fact_edits: Vec<FactEdit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ComicDocument {
    pub fn piece_of(&self, chart: &str) -> Option<usize> {
        self.pieces.iter().position(|p| p.panels.contains_key(chart))
    }

    pub fn panel(&self, chart: &str) -> Option<&Panel> {
        self.pieces.iter().find_map(|p| p.panels.get(chart))
    }

    pub fn chart_ids(&self) -> Vec<&str> {
        self.pieces
            .iter()
            .flat_map(|p| p.chart_ids.iter().map(String::as_str))
            .collect()
    }

    /// Total logical fact edits made through fact selection.
    pub fn fact_edit_count(&self) -> usize {
        self.fact_edits.iter().map(FactEdit::count).sum()
    }

    /// Structural invariants every document must satisfy.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.schema != SCHEMA_VERSION {
            return Err("schema version".into());
        }
        let mut seen = BTreeSet::new();
        for (i, p) in self.pieces.iter().enumerate() {
            if p.index != i {
                return Err(format!("piece {i} has index {}", p.index));
            }
            if p.chart_ids.is_empty() || p.chart_ids.len() > self.params.max_size.max(1) {
                return Err(format!("piece {i} has {} charts", p.chart_ids.len()));
            }
            if p.layout.reading_order != p.chart_ids {
                return Err(format!("piece {i}: reading order differs from chart ids"));
            }
            let ids: BTreeSet<&str> = p.chart_ids.iter().map(String::as_str).collect();
            let cells: BTreeSet<&str> = p.layout.cells.iter().map(|c| c.chart_id.as_str()).collect();
            let panels: BTreeSet<&str> = p.panels.keys().map(String::as_str).collect();
            if ids.len() != p.chart_ids.len() || ids != cells || ids != panels {
                return Err(format!("piece {i}: cells or panels do not cover its charts"));
            }
            if p.layout.cells.len() != p.layout.pattern.cell_count() || !p.layout.tiles_exactly() {
                return Err(format!("piece {i}: layout does not tile"));
            }
            if p.backbone.len() != p.chart_ids.len() || p.backbone.shape.node_count() != p.chart_ids.len() {
                return Err(format!("piece {i}: backbone size"));
            }
            for (id, panel) in &p.panels {
                if !seen.insert(id.clone()) {
                    return Err(format!("chart {id} appears twice"));
                }
                if panel.selected.len() > 4 || panel.selected.iter().any(|s| !panel.facts.iter().any(|f| &f.fact.id == s)) {
                    return Err(format!("chart {id}: bad selection"));
                }
                if panel.facts.iter().any(|f| f.weight.is_nan() || f.weight < 0.0) {
                    return Err(format!("chart {id}: negative weight"));
                }
                if panel.caption.text.is_empty() && !panel.selected.is_empty() {
                    return Err(format!("chart {id}: empty caption"));
                }
                if !panel.pinned {
                    let spans: Vec<&str> = panel.caption.segments.iter().map(|s| s.fact_id.as_str()).collect();
                    let mut want: Vec<&str> = panel.selected.iter().map(String::as_str).collect();
                    let mut got = spans.clone();
                    want.sort();
                    got.sort();
                    if want != got {
                        return Err(format!("chart {id}: segments do not match selection"));
                    }
                    if panel.caption.segments.windows(2).any(|w| w[0].end > w[1].start) {
                        return Err(format!("chart {id}: overlapping segments"));
                    }
                }
            }
        }
        if seen.iter().any(|id| self.excluded.contains(id)) {
            return Err("excluded chart present".into());
        }
        Ok(())
    }
}

/// Per-chart state carried over when pieces are rebuilt.
#[derive(Default)]
struct Carry {
    pinned: BTreeMap<String, Caption>,
    selections: BTreeMap<String, Vec<String>>,
}

impl Carry {
    fn from_doc(doc: &ComicDocument) -> Self {
        let mut c = Carry::default();
        for p in &doc.pieces {
            c.absorb(p);
        }
        c
    }

    fn absorb(&mut self, piece: &StoryPiece) {
        for (id, panel) in &piece.panels {
            if panel.pinned {
                self.pinned.insert(id.clone(), panel.caption.clone());
            }
            if panel.manual_selection {
                self.selections.insert(id.clone(), panel.selected.clone());
            }
        }
    }
}

/// Shared inputs of every piece computation.
struct Context<'a> {
    ensemble: ChartEnsemble,
    matrix: DistanceMatrix<f64>,
    params: &'a Params,
    table: LayoutTable,
    facts: BTreeMap<String, Vec<DataFact>>,
    vocab: Vocabulary,
    warnings: Vec<String>,
}

impl<'a> Context<'a> {
    fn new(full: &ChartEnsemble, excluded: &BTreeSet<String>, params: &'a Params) -> Result<Self, ComposeError> {
        params.validate()?;
        let ensemble = full.without(excluded);
        if ensemble.charts.is_empty() {
            return Err(ComposeError::NoCharts);
        }
        let matrix = distance_matrix(&ensemble, &params.cost_table);
        let table = LayoutTable::with_overrides(&params.layout_overrides)?;
        let extracted: Vec<_> = ensemble
            .charts
            .par_iter()
            .map(|c| (c.id.clone(), extract_facts(c, &ensemble.dataset)))
            .collect();
        let mut facts = BTreeMap::new();
        let mut warnings = Vec::new();
        for (id, r) in extracted {
            match r {
                Ok(x) => {
                    for w in x.warnings {
                        match w {
                            FactWarning::NoQuantitativeChannel => warnings.push(format!(
                                "chart {id}: no quantitative channel, only share facts extracted"
                            )),
                        }
                    }
                    facts.insert(id, x.facts);
                }
                Err(e @ FactError::EmptyAfterFiltering(_)) => {
                    warnings.push(e.to_string());
                    facts.insert(id, Vec::new());
                }
                Err(e) => return Err(e.into()),
            }
        }
        let vocab = Vocabulary::from_dataset(&ensemble.dataset);
        Ok(Context {
            ensemble,
            matrix,
            params,
            table,
            facts,
            vocab,
            warnings,
        })
    }

    fn build_piece(&self, index: usize, ids: &[String], carry: &Carry) -> Result<StoryPiece, ComposeError> {
        let backbone = build_backbone(ids, &self.matrix, &self.ensemble)?;
        let layout = assign_layout_with(&backbone, &self.table);
        let mut piece = StoryPiece {
            index,
            chart_ids: layout.reading_order.clone(),
            backbone,
            layout,
            panels: BTreeMap::new(),
        };
        self.rank_piece(&mut piece, carry)?;
        Ok(piece)
    }

    /// Recomputes rankings, selections and captions of a piece in its
    /// current reading order.
    fn rank_piece(&self, piece: &mut StoryPiece, carry: &Carry) -> Result<(), ComposeError> {
        piece.chart_ids = piece.layout.reading_order.clone();
        let neighbors: BTreeMap<String, Vec<String>> = piece
            .chart_ids
            .iter()
            .map(|id| {
                let n = piece.backbone.neighbors(id).into_iter().map(str::to_string).collect();
                (id.clone(), n)
            })
            .collect();
        let facts: BTreeMap<String, Vec<DataFact>> = piece
            .chart_ids
            .iter()
            .map(|id| (id.clone(), self.facts.get(id).cloned().unwrap_or_default()))
            .collect();
        let overrides: BTreeMap<String, Vec<String>> = piece
            .chart_ids
            .iter()
            .filter_map(|id| {
                let sel = carry.selections.get(id)?;
                let known = facts[id].iter().map(|f| &f.id).collect::<BTreeSet<_>>();
                sel.iter().all(|s| known.contains(s)).then(|| (id.clone(), sel.clone()))
            })
            .collect();
        let ranked = rank_and_select_with(
            &piece.chart_ids,
            &neighbors,
            &facts,
            &self.params.rank_params(),
            &overrides,
        )?;
        let words = Connectives::default();
        piece.panels = ranked
            .into_iter()
            .map(|r| {
                let id = r.chart_id.clone();
                let (caption, pinned) = match carry.pinned.get(&id) {
                    Some(c) => (c.clone(), true),
                    None => {
                        let sel = r.selected_facts();
                        (realize(&plan_stitches(&sel), &sel, &self.vocab, &words), false)
                    }
                };
                let panel = Panel {
                    chart: self.ensemble.chart(&id).cloned().expect("piece chart is in the ensemble"),
                    manual_selection: overrides.contains_key(&id),
                    selected: r.selected,
                    facts: r.facts,
                    caption,
                    pinned,
                };
                (id, panel)
            })
            .collect();
        Ok(())
    }

    /// Orders pieces along the shortest path through their roots.
    fn order(&self, pieces: Vec<StoryPiece>) -> Result<Vec<StoryPiece>, ComposeError> {
        let roots: Vec<String> = pieces.iter().map(|p| p.backbone.root.clone()).collect();
        let order = order_pieces(&roots, &self.matrix, &self.ensemble)?;
        let mut slots: Vec<Option<StoryPiece>> = pieces.into_iter().map(Some).collect();
        Ok(reindex(order.sequence.iter().map(|&i| slots[i].take().unwrap()).collect()))
    }
}

fn reindex(mut pieces: Vec<StoryPiece>) -> Vec<StoryPiece> {
    for (i, p) in pieces.iter_mut().enumerate() {
        p.index = i;
    }
    pieces
}

/// Runs the whole pipeline: distances, pieces, backbones, layouts, piece
/// order, fact ranking and captions. The result has revision 0.
pub fn compose(ensemble: &ChartEnsemble, params: &Params) -> Result<ComicDocument, ComposeError> {
    recompose(ensemble, params, &BTreeSet::new(), None)
}

/// Attaches encyclopedia links to every caption. Stops asking the provider
/// after its first failure; the remaining captions use the cache only.
pub fn link_terms(
    doc: &mut ComicDocument,
    ensemble: &ChartEnsemble,
    provider: Option<&dyn TermProvider>,
    cache: &mut TermCache,
) -> Option<ProviderError> {
    let mut provider = provider;
    let mut failure = None;
    for panel in doc.pieces.iter_mut().flat_map(|p| p.panels.values_mut()) {
        let selected: Vec<&DataFact> = panel
            .selected
            .iter()
            .filter_map(|id| panel.facts.iter().find(|r| &r.fact.id == id).map(|r| &r.fact))
            .collect();
        let candidates = link_candidates(&selected, &ensemble.dataset);
        let (mut caption, err) = term_context(&panel.caption, &candidates, provider, cache);
        if let Some(e) = err {
            provider = None;
            failure = Some(e);
            caption = term_context(&panel.caption, &candidates, None, cache).0;
        }
        panel.caption = caption;
    }
    failure
}

/// Full recomposition. With a previous document, pinned captions and manual
/// fact selections carry over, and so does a hand-set piece order when the
/// piece memberships are unchanged.
fn recompose(
    ensemble: &ChartEnsemble,
    params: &Params,
    excluded: &BTreeSet<String>,
    previous: Option<&ComicDocument>,
) -> Result<ComicDocument, ComposeError> {
    let ctx = Context::new(ensemble, excluded, params)?;
    let carry = previous.map(Carry::from_doc).unwrap_or_default();
    let tau = params.tau.unwrap_or_else(|| default_threshold(&ctx.matrix));
    let parts = partition(&ctx.matrix, params.max_size, tau)?;
    let pieces = parts
        .pieces
        .iter()
        .enumerate()
        .map(|(i, ids)| ctx.build_piece(i, ids, &carry))
        .collect::<Result<Vec<_>, _>>()?;

    let kept_order = previous.filter(|p| p.manual_order).and_then(|prev| {
        let key = |p: &StoryPiece| p.chart_ids.iter().cloned().collect::<BTreeSet<_>>();
        let mut by_members: BTreeMap<BTreeSet<String>, StoryPiece> =
            pieces.iter().map(|p| (key(p), p.clone())).collect();
        let ordered: Option<Vec<StoryPiece>> = prev.pieces.iter().map(|p| by_members.remove(&key(p))).collect();
        ordered.filter(|o| o.len() == pieces.len() && by_members.is_empty())
    });
    let manual_order = kept_order.is_some();
    let pieces = match kept_order {
        Some(o) => reindex(o),
        None => ctx.order(pieces)?,
    };
    Ok(ComicDocument {
        schema: SCHEMA_VERSION,
        revision: previous.map_or(0, |p| p.revision),
        ensemble_ref: ensemble.content_hash(),
        params: params.clone(),
        style: previous.map(|p| p.style.clone()).unwrap_or_default(),
        excluded: excluded.clone(),
        manual_order,
        pieces,
        fact_edits: previous.map(|p| p.fact_edits.clone()).unwrap_or_default(),
        warnings: ctx.warnings,
    })
}
