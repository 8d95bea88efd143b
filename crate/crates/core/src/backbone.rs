//! Story backbones: a minimum spanning tree per piece, rooted at its simplest
//! chart.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ChartEnsemble;
use crate::scalar::Scalar;
use crate::transition::DistanceMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackboneError {
    #[error("backbone has {0} nodes; at most 4 are supported")]
    ShapeOverflow(usize),
    #[error("empty story piece")]
    EmptyPiece,
    #[error("unknown chart {0:?}")]
    UnknownChart(String),
    #[error("edges do not form a tree rooted at {0:?}")]
    NotATree(String),
}

/// Rooted tree shapes on one to four nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BackboneShape {
    Single,
    Chain2,
    Chain3,
    Fork3,
    Chain4,
    Star4,
    ForkDeep4,
    ForkSide4,
}

impl BackboneShape {
    pub const ALL: [BackboneShape; 8] = [
        BackboneShape::Single,
        BackboneShape::Chain2,
        BackboneShape::Chain3,
        BackboneShape::Fork3,
        BackboneShape::Chain4,
        BackboneShape::Star4,
        BackboneShape::ForkDeep4,
        BackboneShape::ForkSide4,
    ];

    pub fn node_count(self) -> usize {
        match self {
            BackboneShape::Single => 1,
            BackboneShape::Chain2 => 2,
            BackboneShape::Chain3 | BackboneShape::Fork3 => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for BackboneShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct BackboneEdge<S> {
    pub parent: String,
    pub child: String,
    pub weight: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct StoryBackbone<S> {
    pub root: String,
    /// Parent-to-child edges in preorder.
    pub edges: Vec<BackboneEdge<S>>,
    pub shape: BackboneShape,
}

impl<S: Scalar> StoryBackbone<S> {
    pub fn total_weight(&self) -> S {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Children of `id`, by ascending edge weight then id.
    pub fn children(&self, id: &str) -> Vec<&BackboneEdge<S>> {
        let mut v: Vec<_> = self.edges.iter().filter(|e| e.parent == id).collect();
        v.sort_by(|a, b| {
            a.weight
                .partial_cmp(&b.weight)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.child.cmp(&b.child))
        });
        v
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.edges.iter().find(|e| e.child == id).map(|e| e.parent.as_str())
    }

    /// Charts adjacent to `id` in the tree.
    pub fn neighbors(&self, id: &str) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.parent == id {
                    Some(e.child.as_str())
                } else if e.child == id {
                    Some(e.parent.as_str())
                } else {
                    None
                }
            })
            .collect();
        v.sort();
        v
    }

    /// Preorder walk from the root, children by ascending edge weight.
    pub fn preorder(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![self.root.clone()];
        while let Some(id) = stack.pop() {
            for e in self.children(&id).into_iter().rev() {
                stack.push(e.child.clone());
            }
            out.push(id);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Classifies a rooted tree given as parent-to-child edges.
pub fn classify_shape<'a>(
    root: &str,
    edges: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<BackboneShape, BackboneError> {
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut nodes: BTreeSet<&str> = BTreeSet::new();
    let mut count = 0;
    for (p, c) in edges {
        children.entry(p).or_default().push(c);
        nodes.insert(p);
        nodes.insert(c);
        count += 1;
    }
    nodes.insert(root);
    let n = nodes.len();
    if n > 4 {
        return Err(BackboneError::ShapeOverflow(n));
    }
    if count + 1 != n {
        return Err(BackboneError::NotATree(root.to_string()));
    }
    let kids = |id: &str| children.get(id).map_or(0, Vec::len);
    // Reachability check keeps cycles and stray roots out.
    let mut seen = BTreeSet::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if !seen.insert(id) {
            return Err(BackboneError::NotATree(root.to_string()));
        }
        stack.extend(children.get(id).into_iter().flatten().copied());
    }
    if seen.len() != n {
        return Err(BackboneError::NotATree(root.to_string()));
    }
    let root_kids = kids(root);
    Ok(match (n, root_kids) {
        (1, _) => BackboneShape::Single,
        (2, _) => BackboneShape::Chain2,
        (3, 2) => BackboneShape::Fork3,
        (3, _) => BackboneShape::Chain3,
        (4, 3) => BackboneShape::Star4,
        (4, 2) => BackboneShape::ForkSide4,
        (4, _) => {
            let child = children[root][0];
            if kids(child) == 2 {
                BackboneShape::ForkDeep4
            } else {
                BackboneShape::Chain4
            }
        }
        _ => unreachable!(),
    })
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Builds the backbone of one story piece.
///
/// Kruskal over the complete graph with edges ordered by weight, then by
/// whether both endpoints share the same attribute set (shared first), then by
/// sorted endpoint ids. The result is a minimum spanning tree that, among all
/// minimum spanning trees, has the most attribute-consistent edges. The root
/// is the chart with the fewest specifications, then the earliest, then the
/// smallest id.
pub fn build_backbone<S: Scalar>(
    piece: &[String],
    matrix: &DistanceMatrix<S>,
    ensemble: &ChartEnsemble,
) -> Result<StoryBackbone<S>, BackboneError> {
    if piece.is_empty() {
        return Err(BackboneError::EmptyPiece);
    }
    if piece.len() > 4 {
        return Err(BackboneError::ShapeOverflow(piece.len()));
    }
    let mut ids: Vec<&str> = piece.iter().map(String::as_str).collect();
    ids.sort();
    let charts = ids
        .iter()
        .map(|id| ensemble.chart(id).ok_or_else(|| BackboneError::UnknownChart(id.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    for id in &ids {
        if matrix.index_of(id).is_none() {
            return Err(BackboneError::UnknownChart(id.to_string()));
        }
    }
    let attrs: Vec<_> = charts.iter().map(|c| c.attribute_set()).collect();
    let root_pos = (0..ids.len())
        .min_by(|&a, &b| charts[a].simplicity_key().cmp(&charts[b].simplicity_key()))
        .unwrap();

    let n = ids.len();
    let mut candidates: Vec<(S, bool, usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| (matrix.between(ids[i], ids[j]), attrs[i] != attrs[j], i, j))
        .collect();
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (a.1, a.2, a.3).cmp(&(b.1, b.2, b.3)))
    });
    let mut dsu = DisjointSet((0..n).collect());
    let mut adjacency: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    for (w, _, i, j) in candidates {
        if dsu.union(i, j) {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
    }

    // Orient from the root; emit edges in preorder.
    let mut edges = Vec::with_capacity(n - 1);
    let mut visited = vec![false; n];
    let mut stack = vec![root_pos];
    visited[root_pos] = true;
    while let Some(u) = stack.pop() {
        let mut kids: Vec<(usize, S)> = adjacency[u].iter().copied().filter(|(v, _)| !visited[*v]).collect();
        kids.sort_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| ids[a.0].cmp(ids[b.0]))
        });
        for &(v, _) in &kids {
            visited[v] = true;
        }
        for &(v, w) in kids.iter().rev() {
            stack.push(v);
            edges.push(BackboneEdge {
                parent: ids[u].to_string(),
                child: ids[v].to_string(),
                weight: w,
            });
        }
    }
    let root = ids[root_pos].to_string();
    let shape = classify_shape(&root, edges.iter().map(|e| (e.parent.as_str(), e.child.as_str())))?;
    let mut backbone = StoryBackbone { root, edges, shape };
    // Re-emit edges in preorder so serialization is canonical.
    let order = backbone.preorder();
    let pos = |id: &str| order.iter().position(|x| x == id).unwrap();
    backbone.edges.sort_by_key(|e| pos(&e.child));
    Ok(backbone)
}
