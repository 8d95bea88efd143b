//! Story-piece identification: size-capped average-linkage agglomeration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::transition::DistanceMatrix;

pub const DEFAULT_MAX_PIECE_SIZE: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("linkage threshold must be a nonnegative number")]
    InvalidThreshold,
    #[error("maximum piece size must be at least 1")]
    InvalidMaxSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct Merge<S> {
    /// Members of the cluster holding the smaller chart id, sorted.
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub linkage: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct Partition<S> {
    /// Each piece sorted by id; pieces sorted by their smallest id.
    pub pieces: Vec<Vec<String>>,
    pub merge_log: Vec<Merge<S>>,
}

struct Cluster {
    members: Vec<usize>,
    min_id: usize,
}

/// Greedy agglomeration.
///
/// Each step merges the pair of clusters with the smallest average linkage
/// among pairs whose union fits in `max_size` and whose linkage is at most
/// `tau`. Equal linkages go to the pair with the lexicographically smallest
/// `(min id of A, min id of B)`. Stops when no pair qualifies.
pub fn partition<S: Scalar>(
    matrix: &DistanceMatrix<S>,
    max_size: usize,
    tau: S,
) -> Result<Partition<S>, PartitionError> {
    if !tau.is_nonnegative() {
        return Err(PartitionError::InvalidThreshold);
    }
    if max_size == 0 {
        return Err(PartitionError::InvalidMaxSize);
    }
    let n = matrix.len();
    let ids = matrix.ids();
    // rank[i] = position of ids[i] in sorted id order; tie-breaks use ranks.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }

    let mut clusters: Vec<Option<Cluster>> = (0..n)
        .map(|i| Some(Cluster { members: vec![i], min_id: rank[i] }))
        .collect();
    // sums[a][b]: total distance between members of clusters a and b.
    let mut sums: Vec<Vec<S>> = (0..n).map(|i| (0..n).map(|j| matrix.get(i, j)).collect()).collect();
    let mut merge_log = Vec::new();

    loop {
        let mut best: Option<(S, (usize, usize), usize, usize)> = None;
        for a in 0..n {
            let Some(ca) = &clusters[a] else { continue };
            for b in (a + 1)..n {
                let Some(cb) = &clusters[b] else { continue };
                if ca.members.len() + cb.members.len() > max_size {
                    continue;
                }
                let linkage = sums[a][b] / S::from_count(ca.members.len() * cb.members.len());
                if linkage > tau {
                    continue;
                }
                let key = if ca.min_id < cb.min_id {
                    (ca.min_id, cb.min_id)
                } else {
                    (cb.min_id, ca.min_id)
                };
                let better = match &best {
                    None => true,
                    Some((bl, bk, _, _)) => linkage < *bl || (linkage == *bl && key < *bk),
                };
                if better {
                    best = Some((linkage, key, a, b));
                }
            }
        }
        let Some((linkage, _, a, b)) = best else { break };
        let cb = clusters[b].take().unwrap();
        let ca = clusters[a].as_mut().unwrap();
        let (left, right) = if ca.min_id < cb.min_id {
            (&ca.members, &cb.members)
        } else {
            (&cb.members, &ca.members)
        };
        merge_log.push(Merge {
            left: sorted_ids(left, ids),
            right: sorted_ids(right, ids),
            linkage,
        });
        ca.members.extend(cb.members);
        ca.min_id = ca.min_id.min(cb.min_id);
        let merged: Vec<S> = sums[a].iter().zip(&sums[b]).map(|(x, y)| *x + *y).collect();
        for (c, s) in merged.into_iter().enumerate() {
            sums[a][c] = s;
            sums[c][a] = s;
        }
    }

    let mut pieces: Vec<Vec<String>> = clusters
        .into_iter()
        .flatten()
        .map(|c| sorted_ids(&c.members, ids))
        .collect();
    pieces.sort();
    Ok(Partition { pieces, merge_log })
}

fn sorted_ids(members: &[usize], ids: &[String]) -> Vec<String> {
    let mut v: Vec<String> = members.iter().map(|&i| ids[i].clone()).collect();
    v.sort();
    v
}

/// Mean of the off-diagonal distances; zero for fewer than two charts.
pub fn default_threshold<S: Scalar>(matrix: &DistanceMatrix<S>) -> S {
    let n = matrix.len();
    if n < 2 {
        return S::zero();
    }
    let total: S = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| matrix.get(i, j))
        .sum();
    total / S::from_count(n * (n - 1) / 2)
}
