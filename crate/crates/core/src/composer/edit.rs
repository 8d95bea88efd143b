use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{recompose, reindex, Carry, ComicDocument, ComposeError, Context, FactEdit, Params, StyleConfig};
use crate::caption::Caption;
use crate::model::ChartEnsemble;

/// One refinement step. Serialized with an `op` tag, e.g.
/// `{"op":"swap_charts","a":"c1","b":"c2"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Edit {
    /// Within a piece: exchange positions. Across pieces: exchange membership.
    SwapCharts { a: String, b: String },
    /// `order[i]` is the current index of the piece that moves to position `i`.
    ReorderPieces { order: Vec<usize> },
    SelectFacts { chart: String, facts: Vec<String> },
    EditCaptionText { chart: String, text: String },
    SetStyle { style: StyleConfig },
    SetParams { params: Params },
    /// Adds previously excluded charts and excludes others. Without
    /// `target_piece` the comic is recomposed; with it, added charts join
    /// that piece and every other piece keeps its membership.
    IncludeCharts {
        #[serde(default)]
        add: Vec<String>,
        #[serde(default)]
        remove: Vec<String>,
        #[serde(default)]
        target_piece: Option<usize>,
    },
}

impl Edit {
    pub fn name(&self) -> &'static str {
        match self {
            Edit::SwapCharts { .. } => "swap_charts",
            Edit::ReorderPieces { .. } => "reorder_pieces",
            Edit::SelectFacts { .. } => "select_facts",
            Edit::EditCaptionText { .. } => "edit_caption_text",
            Edit::SetStyle { .. } => "set_style",
            Edit::SetParams { .. } => "set_params",
            Edit::IncludeCharts { .. } => "include_charts",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EditError {
    #[error("stale revision {expected}, document is at {current}")]
    StaleRevision { expected: u64, current: u64 },
    #[error("unknown {0}")]
    UnknownEntity(String),
    #[error("piece {piece} would hold {size} charts, more than {max}")]
    OversizedPiece { piece: usize, size: usize, max: usize },
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("document was composed from a different ensemble")]
    EnsembleMismatch,
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

fn invalid(msg: impl Into<String>) -> EditError {
    EditError::InvalidEdit(msg.into())
}

/// Applies one edit, producing the next revision. `doc` is left untouched.
pub fn apply_edit(
    doc: &ComicDocument,
    ensemble: &ChartEnsemble,
    expected_revision: u64,
    edit: &Edit,
) -> Result<ComicDocument, EditError> {
    if expected_revision != doc.revision {
        return Err(EditError::StaleRevision {
            expected: expected_revision,
            current: doc.revision,
        });
    }
    if ensemble.content_hash() != doc.ensemble_ref {
        return Err(EditError::EnsembleMismatch);
    }
    let mut next = match edit {
        Edit::SwapCharts { a, b } => swap(doc, ensemble, a, b)?,
        Edit::ReorderPieces { order } => reorder(doc, order)?,
        Edit::SelectFacts { chart, facts } => select(doc, ensemble, chart, facts)?,
        Edit::EditCaptionText { chart, text } => {
            if text.trim().is_empty() {
                return Err(invalid("caption text must not be empty"));
            }
            let mut next = doc.clone();
            let panel = next
                .pieces
                .iter_mut()
                .find_map(|p| p.panels.get_mut(chart))
                .ok_or_else(|| EditError::UnknownEntity(format!("chart {chart}")))?;
            panel.caption = Caption { text: text.clone(), ..Caption::default() };
            panel.pinned = true;
            next
        }
        Edit::SetStyle { style } => {
            style.validate().map_err(invalid)?;
            let mut next = doc.clone();
            next.style = style.clone();
            next
        }
        Edit::SetParams { params } => recompose(ensemble, params, &doc.excluded, Some(doc))?,
        Edit::IncludeCharts { add, remove, target_piece } => include(doc, ensemble, add, remove, *target_piece)?,
    };
    next.revision = doc.revision + 1;
    Ok(next)
}

fn locate(doc: &ComicDocument, chart: &str) -> Result<usize, EditError> {
    doc.piece_of(chart)
        .ok_or_else(|| EditError::UnknownEntity(format!("chart {chart}")))
}

fn swap(doc: &ComicDocument, ensemble: &ChartEnsemble, a: &str, b: &str) -> Result<ComicDocument, EditError> {
    if a == b {
        return Err(invalid("cannot swap a chart with itself"));
    }
    let (pa, pb) = (locate(doc, a)?, locate(doc, b)?);
    let ctx = Context::new(ensemble, &doc.excluded, &doc.params)?;
    let carry = Carry::from_doc(doc);
    let mut next = doc.clone();
    if pa == pb {
        let piece = &mut next.pieces[pa];
        piece.layout.swap(a, b);
        ctx.rank_piece(piece, &carry)?;
    } else {
        let exchange = |ids: &[String]| -> Vec<String> {
            ids.iter()
                .map(|id| if id == a { b.to_string() } else if id == b { a.to_string() } else { id.clone() })
                .collect()
        };
        for p in [pa, pb] {
            let ids = exchange(&doc.pieces[p].chart_ids);
            next.pieces[p] = ctx.build_piece(p, &ids, &carry)?;
        }
    }
    Ok(next)
}

fn reorder(doc: &ComicDocument, order: &[usize]) -> Result<ComicDocument, EditError> {
    let n = doc.pieces.len();
    let distinct: BTreeSet<usize> = order.iter().copied().collect();
    if order.len() != n || distinct.len() != n || distinct.iter().any(|&i| i >= n) {
        return Err(invalid(format!("order must be a permutation of 0..{n}")));
    }
    let mut next = doc.clone();
    if order.iter().enumerate().all(|(i, &j)| i == j) {
        return Ok(next);
    }
    next.pieces = reindex(order.iter().map(|&i| doc.pieces[i].clone()).collect());
    next.manual_order = true;
    Ok(next)
}

fn select(doc: &ComicDocument, ensemble: &ChartEnsemble, chart: &str, facts: &[String]) -> Result<ComicDocument, EditError> {
    let p = locate(doc, chart)?;
    let panel = &doc.pieces[p].panels[chart];
    if facts.len() > crate::facts::SELECTED_PER_CHART {
        return Err(invalid("at most four facts can be selected"));
    }
    if facts.iter().collect::<BTreeSet<_>>().len() != facts.len() {
        return Err(invalid("duplicate fact in selection"));
    }
    for f in facts {
        if !panel.facts.iter().any(|r| &r.fact.id == f) {
            return Err(EditError::UnknownEntity(format!("fact {f}")));
        }
    }
    let removed: Vec<String> = panel.selected.iter().filter(|s| !facts.contains(s)).cloned().collect();
    let added: Vec<String> = facts.iter().filter(|f| !panel.selected.contains(f)).cloned().collect();

    let ctx = Context::new(ensemble, &doc.excluded, &doc.params)?;
    let mut carry = Carry::from_doc(doc);
    carry.pinned.remove(chart);
    carry.selections.insert(chart.to_string(), facts.to_vec());
    let mut next = doc.clone();
    ctx.rank_piece(&mut next.pieces[p], &carry)?;
    if !removed.is_empty() || !added.is_empty() {
        next.fact_edits.push(FactEdit {
            revision: doc.revision + 1,
            chart: chart.to_string(),
            removed,
            added,
        });
    }
    Ok(next)
}

fn include(
    doc: &ComicDocument,
    ensemble: &ChartEnsemble,
    add: &[String],
    remove: &[String],
    target: Option<usize>,
) -> Result<ComicDocument, EditError> {
    if add.is_empty() && remove.is_empty() {
        return Err(invalid("nothing to add or remove"));
    }
    let present: BTreeSet<&str> = doc.chart_ids().into_iter().collect();
    for id in add {
        if ensemble.chart(id).is_none() {
            return Err(EditError::UnknownEntity(format!("chart {id}")));
        }
        if present.contains(id.as_str()) || remove.contains(id) {
            return Err(invalid(format!("chart {id} is already included")));
        }
    }
    for id in remove {
        if !present.contains(id.as_str()) {
            return Err(EditError::UnknownEntity(format!("chart {id}")));
        }
    }
    if add.iter().collect::<BTreeSet<_>>().len() != add.len() || remove.iter().collect::<BTreeSet<_>>().len() != remove.len() {
        return Err(invalid("duplicate chart id"));
    }
    let mut excluded = doc.excluded.clone();
    for id in add {
        excluded.remove(id);
    }
    excluded.extend(remove.iter().cloned());

    let Some(t) = target else {
        return Ok(recompose(ensemble, &doc.params, &excluded, Some(doc))?);
    };
    if t >= doc.pieces.len() {
        return Err(EditError::UnknownEntity(format!("piece {t}")));
    }
    let mut members: Vec<Vec<String>> = doc
        .pieces
        .iter()
        .map(|p| p.chart_ids.iter().filter(|id| !remove.contains(id)).cloned().collect())
        .collect();
    members[t].extend(add.iter().cloned());
    if members[t].len() > doc.params.max_size {
        return Err(EditError::OversizedPiece {
            piece: t,
            size: members[t].len(),
            max: doc.params.max_size,
        });
    }
    let ctx = Context::new(ensemble, &excluded, &doc.params)?;
    let carry = Carry::from_doc(doc);
    let mut pieces = Vec::new();
    for (i, ids) in members.iter().enumerate() {
        if ids.is_empty() {
            continue;
        }
        if ids == &doc.pieces[i].chart_ids {
            pieces.push(doc.pieces[i].clone());
        } else {
            pieces.push(ctx.build_piece(i, ids, &carry)?);
        }
    }
    let mut next = doc.clone();
    next.pieces = reindex(pieces);
    next.excluded = excluded;
    next.warnings = ctx.warnings;
    Ok(next)
}
