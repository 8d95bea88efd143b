//! Tier layouts for story pieces and the linear order of pieces.

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backbone::{BackboneShape, StoryBackbone};
use crate::model::ChartEnsemble;
use crate::scalar::Scalar;
use crate::transition::DistanceMatrix;

/// Exact tier-relative coordinate.
pub type Frac = Rational64;

/// Pieces up to this count are ordered by exhaustive search.
pub const EXACT_ORDER_LIMIT: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("pattern {pattern} has {cells} cells but shape {shape} has {nodes} charts")]
    PatternMismatch {
        shape: BackboneShape,
        pattern: LayoutPattern,
        cells: usize,
        nodes: usize,
    },
    #[error("no story pieces to order")]
    NoPieces,
    #[error("unknown chart {0:?}")]
    UnknownChart(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LayoutPattern {
    #[serde(rename = "FULL")]
    Full,
    #[serde(rename = "PARALLEL2")]
    Parallel2,
    #[serde(rename = "PARALLEL3")]
    Parallel3,
    #[serde(rename = "LARGE_LEFT")]
    LargeLeft,
    #[serde(rename = "GRID2x2")]
    Grid2x2,
    #[serde(rename = "HERO_PLUS3")]
    HeroPlus3,
    #[serde(rename = "WIDE_TOP")]
    WideTop,
    #[serde(rename = "L_SHAPE")]
    LShape,
}

impl fmt::Display for LayoutPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

fn f(n: i64, d: i64) -> Frac {
    Frac::new(n, d)
}

fn rect(x: Frac, y: Frac, w: Frac, h: Frac) -> Rect {
    Rect { x, y, w, h }
}

impl LayoutPattern {
    /// Cell rectangles in slot order. Slot 0 always holds the backbone root.
    pub fn cells(self) -> Vec<Rect> {
        let (zero, one) = (Frac::zero(), Frac::one());
        match self {
            LayoutPattern::Full => vec![rect(zero, zero, one, one)],
            LayoutPattern::Parallel2 => (0..2).map(|i| rect(f(i, 2), zero, f(1, 2), one)).collect(),
            LayoutPattern::Parallel3 => (0..3).map(|i| rect(f(i, 3), zero, f(1, 3), one)).collect(),
            LayoutPattern::LargeLeft => vec![
                rect(zero, zero, f(3, 5), one),
                rect(f(3, 5), zero, f(2, 5), f(1, 2)),
                rect(f(3, 5), f(1, 2), f(2, 5), f(1, 2)),
            ],
            LayoutPattern::Grid2x2 => (0..4)
                .map(|i| rect(f(i % 2, 2), f(i / 2, 2), f(1, 2), f(1, 2)))
                .collect(),
            LayoutPattern::HeroPlus3 => std::iter::once(rect(zero, zero, f(3, 5), one))
                .chain((0..3).map(|i| rect(f(3, 5), f(i, 3), f(2, 5), f(1, 3))))
                .collect(),
            LayoutPattern::WideTop => std::iter::once(rect(zero, zero, one, f(1, 2)))
                .chain((0..3).map(|i| rect(f(i, 3), f(1, 2), f(1, 3), f(1, 2))))
                .collect(),
            LayoutPattern::LShape => vec![
                rect(zero, zero, f(2, 3), f(2, 3)),
                rect(f(2, 3), zero, f(1, 3), f(2, 3)),
                rect(zero, f(2, 3), f(1, 2), f(1, 3)),
                rect(f(1, 2), f(2, 3), f(1, 2), f(1, 3)),
            ],
        }
    }

    pub fn cell_count(self) -> usize {
        self.cells().len()
    }
}

/// Axis-aligned rectangle in tier fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: Frac,
    pub y: Frac,
    pub w: Frac,
    pub h: Frac,
}

impl Rect {
    pub fn area(&self) -> Frac {
        self.w * self.h
    }

    pub fn intersection_area(&self, other: &Rect) -> Frac {
        let overlap = |a0: Frac, a1: Frac, b0: Frac, b1: Frac| {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                hi - lo
            } else {
                Frac::zero()
            }
        };
        overlap(self.x, self.x + self.w, other.x, other.x + other.w)
            * overlap(self.y, self.y + self.h, other.y, other.y + other.h)
    }

    pub fn within_unit(&self) -> bool {
        self.x >= Frac::zero()
            && self.y >= Frac::zero()
            && self.w > Frac::zero()
            && self.h > Frac::zero()
            && self.x + self.w <= Frac::one()
            && self.y + self.h <= Frac::one()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub chart_id: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierLayout {
    pub pattern: LayoutPattern,
    pub cells: Vec<Cell>,
    pub reading_order: Vec<String>,
}

impl TierLayout {
    /// Cells lie in the unit square, cover it, and do not overlap.
    pub fn tiles_exactly(&self) -> bool {
        let total: Frac = self.cells.iter().map(|c| c.rect.area()).sum();
        total == Frac::one()
            && self.cells.iter().all(|c| c.rect.within_unit())
            && self
                .cells
                .iter()
                .tuple_combinations()
                .all(|(a, b)| a.rect.intersection_area(&b.rect).is_zero())
    }

    pub fn cell(&self, chart_id: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| c.chart_id == chart_id)
    }

    /// Exchanges the positions of two charts, both in space and in reading order.
    pub fn swap(&mut self, a: &str, b: &str) {
        for c in &mut self.cells {
            if c.chart_id == a {
                c.chart_id = b.to_string();
            } else if c.chart_id == b {
                c.chart_id = a.to_string();
            }
        }
        for id in &mut self.reading_order {
            if id == a {
                *id = b.to_string();
            } else if id == b {
                *id = a.to_string();
            }
        }
    }
}

/// Backbone shape to layout pattern mapping.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutTable(BTreeMap<BackboneShape, LayoutPattern>);

impl Default for LayoutTable {
    fn default() -> Self {
        use BackboneShape as S;
        use LayoutPattern as P;
        LayoutTable(BTreeMap::from([
            (S::Single, P::Full),
            (S::Chain2, P::Parallel2),
            (S::Chain3, P::Parallel3),
            (S::Fork3, P::LargeLeft),
            (S::Chain4, P::Grid2x2),
            (S::Star4, P::HeroPlus3),
            (S::ForkDeep4, P::WideTop),
            (S::ForkSide4, P::LShape),
        ]))
    }
}

impl LayoutTable {
    /// Default table with `overrides` applied. Each override must keep the
    /// cell count of the shape it replaces.
    pub fn with_overrides(overrides: &BTreeMap<BackboneShape, LayoutPattern>) -> Result<Self, LayoutError> {
        let mut table = LayoutTable::default();
        for (&shape, &pattern) in overrides {
            if pattern.cell_count() != shape.node_count() {
                return Err(LayoutError::PatternMismatch {
                    shape,
                    pattern,
                    cells: pattern.cell_count(),
                    nodes: shape.node_count(),
                });
            }
            table.0.insert(shape, pattern);
        }
        Ok(table)
    }

    pub fn pattern(&self, shape: BackboneShape) -> LayoutPattern {
        self.0[&shape]
    }
}

/// Lays out a backbone with the default table.
pub fn assign_layout<S: Scalar>(backbone: &StoryBackbone<S>) -> TierLayout {
    assign_layout_with(backbone, &LayoutTable::default())
}

/// Lays out a backbone. Charts fill pattern slots in reading order, except
/// that `L_SHAPE` reserves its right-hand slot for the root's child that has
/// children of its own.
pub fn assign_layout_with<S: Scalar>(backbone: &StoryBackbone<S>, table: &LayoutTable) -> TierLayout {
    let pattern = table.pattern(backbone.shape);
    let reading_order = backbone.preorder();
    let mut slots = reading_order.clone();
    if pattern == LayoutPattern::LShape {
        let chain = backbone
            .children(&backbone.root)
            .into_iter()
            .find(|e| !backbone.children(&e.child).is_empty())
            .map(|e| e.child.clone());
        if let Some(chain) = chain {
            slots.retain(|id| *id != chain);
            slots.insert(1, chain);
        }
    }
    let cells = slots
        .into_iter()
        .zip(pattern.cells())
        .map(|(chart_id, rect)| Cell { chart_id, rect })
        .collect();
    TierLayout {
        pattern,
        cells,
        reading_order,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct StoryOrder<S> {
    pub sequence: Vec<usize>,
    pub total_cost: S,
}

/// Cost of a path, summed in a direction-independent order so a path and its
/// reverse compare equal.
fn path_cost<S: Scalar>(seq: &[usize], dist: &[Vec<S>]) -> S {
    let forward = seq.first() <= seq.last();
    let mut total = S::zero();
    let n = seq.len();
    for k in 0..n.saturating_sub(1) {
        let (a, b) = if forward { (seq[k], seq[k + 1]) } else { (seq[n - 1 - k], seq[n - 2 - k]) };
        total = total + dist[a][b];
    }
    total
}

/// Orders pieces along a shortest open path through their root charts.
///
/// `roots[i]` is the root chart of piece `i`. Up to [`EXACT_ORDER_LIMIT`]
/// pieces the path is a true minimum; ties prefer paths where the simplest
/// root comes earliest, then the lexicographically smallest sequence. Beyond
/// the limit a nearest-neighbour walk starts from the simplest root.
pub fn order_pieces<S: Scalar>(
    roots: &[String],
    matrix: &DistanceMatrix<S>,
    ensemble: &ChartEnsemble,
) -> Result<StoryOrder<S>, LayoutError> {
    let k = roots.len();
    if k == 0 {
        return Err(LayoutError::NoPieces);
    }
    let charts = roots
        .iter()
        .map(|id| ensemble.chart(id).ok_or_else(|| LayoutError::UnknownChart(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let idx = roots
        .iter()
        .map(|id| matrix.index_of(id).ok_or_else(|| LayoutError::UnknownChart(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let dist: Vec<Vec<S>> = idx.iter().map(|&i| idx.iter().map(|&j| matrix.get(i, j)).collect()).collect();
    let start = (0..k)
        .min_by(|&a, &b| charts[a].simplicity_key().cmp(&charts[b].simplicity_key()))
        .unwrap();

    let sequence = if k <= EXACT_ORDER_LIMIT {
        let mut best: Option<(S, usize, Vec<usize>)> = None;
        for perm in (0..k).permutations(k) {
            let cost = path_cost(&perm, &dist);
            let start_pos = perm.iter().position(|&p| p == start).unwrap();
            let better = match &best {
                None => true,
                Some((c, sp, _)) => cost < *c || (cost == *c && start_pos < *sp),
            };
            if better {
                best = Some((cost, start_pos, perm));
            }
        }
        best.unwrap().2
    } else {
        let mut seq = vec![start];
        let mut used = vec![false; k];
        used[start] = true;
        while seq.len() < k {
            let last = *seq.last().unwrap();
            let next = (0..k)
                .filter(|&j| !used[j])
                .min_by(|&a, &b| {
                    dist[last][a]
                        .partial_cmp(&dist[last][b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                })
                .unwrap();
            used[next] = true;
            seq.push(next);
        }
        seq
    };
    let total_cost = path_cost(&sequence, &dist);
    Ok(StoryOrder { sequence, total_cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::BackboneEdge;
    use crate::model::parse_ensemble;

    fn backbone(root: &str, edges: &[(&str, &str, f64)], shape: BackboneShape) -> StoryBackbone<f64> {
        StoryBackbone {
            root: root.into(),
            edges: edges
                .iter()
                .map(|(p, c, w)| BackboneEdge { parent: p.to_string(), child: c.to_string(), weight: *w })
                .collect(),
            shape,
        }
    }

    #[test]
    fn star_gets_hero_with_large_root() {
        let b = backbone("r", &[("r", "a", 1.), ("r", "b", 2.), ("r", "c", 3.)], BackboneShape::Star4);
        let l = assign_layout(&b);
        assert_eq!(l.pattern, LayoutPattern::HeroPlus3);
        let root_area = l.cell("r").unwrap().rect.area();
        for id in ["a", "b", "c"] {
            assert!(root_area >= l.cell(id).unwrap().rect.area());
        }
        assert_eq!(l.cell("a").unwrap().rect.area(), l.cell("c").unwrap().rect.area());
        assert!(l.tiles_exactly());
    }

    #[test]
    fn single_covers_tier() {
        let l = assign_layout(&backbone("r", &[], BackboneShape::Single));
        assert_eq!(l.cells.len(), 1);
        assert_eq!(l.cells[0].rect, rect(Frac::zero(), Frac::zero(), Frac::one(), Frac::one()));
    }

    #[test]
    fn chain3_thirds() {
        let b = backbone("r", &[("r", "a", 1.), ("a", "b", 1.)], BackboneShape::Chain3);
        let l = assign_layout(&b);
        assert!(l.cells.iter().all(|c| c.rect.w == f(1, 3)));
        assert_eq!(l.reading_order, vec!["r", "a", "b"]);
        assert!(l.tiles_exactly());
    }

    #[test]
    fn l_shape_puts_chain_child_right() {
        let b = backbone("A", &[("A", "B", 1.), ("A", "C", 2.), ("C", "D", 1.)], BackboneShape::ForkSide4);
        let l = assign_layout(&b);
        assert_eq!(l.cells[1].chart_id, "C");
        assert_eq!(l.reading_order, vec!["A", "B", "C", "D"]);
        assert_eq!(l.reading_order[0], b.root);
    }

    #[test]
    fn wide_top_puts_intermediate_leftmost() {
        let b = backbone("A", &[("A", "B", 1.), ("B", "C", 1.), ("B", "D", 2.)], BackboneShape::ForkDeep4);
        let l = assign_layout(&b);
        assert_eq!(l.pattern, LayoutPattern::WideTop);
        assert_eq!(l.cells[1].chart_id, "B");
        assert_eq!(l.cells[1].rect.x, Frac::zero());
    }

    #[test]
    fn every_pattern_tiles() {
        for shape in BackboneShape::ALL {
            let pattern = LayoutTable::default().pattern(shape);
            assert_eq!(pattern.cell_count(), shape.node_count());
            let cells = pattern
                .cells()
                .into_iter()
                .enumerate()
                .map(|(i, rect)| Cell { chart_id: i.to_string(), rect })
                .collect();
            let l = TierLayout { pattern, cells, reading_order: vec![] };
            assert!(l.tiles_exactly(), "{pattern}");
        }
    }

    #[test]
    fn overrides_must_match_cell_count() {
        let ok = BTreeMap::from([(BackboneShape::Fork3, LayoutPattern::Parallel3)]);
        assert_eq!(LayoutTable::with_overrides(&ok).unwrap().pattern(BackboneShape::Fork3), LayoutPattern::Parallel3);
        let bad = BTreeMap::from([(BackboneShape::Fork3, LayoutPattern::Grid2x2)]);
        assert!(LayoutTable::with_overrides(&bad).is_err());
    }

    fn roots_ensemble(n: usize) -> ChartEnsemble {
        let charts: Vec<String> = (0..n)
            .map(|i| format!(r#"{{"id":"{}","mark":"bar","channels":{{"x":{{"field":"p","type":"nominal"}}}}}}"#, (b'A' + i as u8) as char))
            .collect();
        parse_ensemble(&format!(r#"{{"dataset":{{"inline":[{{"p":1}}]}},"charts":[{}]}}"#, charts.join(",")), None)
            .unwrap()
            .ensemble
    }

    #[test]
    fn one_piece() {
        let e = roots_ensemble(1);
        let m = DistanceMatrix::from_rows(e.ids(), vec![vec![0.0]]).unwrap();
        let o = order_pieces(&e.ids(), &m, &e).unwrap();
        assert_eq!(o.sequence, vec![0]);
        assert_eq!(o.total_cost, 0.0);
    }

    #[test]
    fn three_roots_shortest_path() {
        let e = roots_ensemble(3);
        let m = DistanceMatrix::from_rows(e.ids(), vec![vec![0., 1., 5.], vec![1., 0., 1.], vec![5., 1., 0.]]).unwrap();
        let o = order_pieces(&e.ids(), &m, &e).unwrap();
        assert_eq!(o.sequence, vec![0, 1, 2]);
        assert_eq!(o.total_cost, 2.0);
    }

    #[test]
    fn equidistant_roots_start_simplest_lexicographic() {
        let e = roots_ensemble(4);
        let rows = (0..4).map(|i| (0..4).map(|j| if i == j { 0. } else { 1. }).collect()).collect();
        let m = DistanceMatrix::from_rows(e.ids(), rows).unwrap();
        // Pieces listed in reverse so the simplest (earliest) root is piece 3.
        let roots: Vec<String> = e.ids().into_iter().rev().collect();
        let o = order_pieces(&roots, &m, &e).unwrap();
        assert_eq!(o.sequence, vec![3, 0, 1, 2]);
    }

    #[test]
    fn greedy_beyond_limit() {
        let e = roots_ensemble(10);
        let rows = (0..10).map(|i: i64| (0..10).map(|j: i64| (i - j).abs() as f64).collect()).collect();
        let m = DistanceMatrix::from_rows(e.ids(), rows).unwrap();
        let o = order_pieces(&e.ids(), &m, &e).unwrap();
        assert_eq!(o.sequence, (0..10).collect::<Vec<_>>());
        assert_eq!(o.total_cost, 9.0);
    }
}
