//! Chart-to-chart transition cost.
//!
//! Two specs are aligned slot by slot (the mark, each channel slot, and each
//! `(kind, target)` transform key) and every mismatch becomes one Add, Modify
//! or Remove operation. The distance is the summed cost of those operations,
//! computed with a single merge pass over both specs.

use std::cmp::Ordering;
use std::fmt;

use itertools::{EitherOrBoth, Itertools};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Channel, ChannelBinding, ChartEnsemble, ChartSpec, Mark, Transformation};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("cost {0} is negative or not a number")]
    Negative(&'static str),
    #[error("every cost is zero")]
    AllZero,
    #[error("{0} add and remove costs differ; set `asymmetric` to allow this")]
    Asymmetric(&'static str),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatrixError {
    #[error("matrix is not square")]
    NotSquare,
    #[error("entry ({0},{1}) is negative or not a number")]
    Negative(usize, usize),
    #[error("diagonal entry {0} is not zero")]
    NonZeroDiagonal(usize),
    #[error("entries ({0},{1}) and ({1},{0}) differ")]
    NotSymmetric(usize, usize),
    #[error("{ids} ids for {n} rows")]
    IdCount { ids: usize, n: usize },
}

/// Per-operation costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct CostTable<S> {
    pub mark_modify: S,
    pub channel_add: S,
    pub channel_remove: S,
    pub channel_modify: S,
    pub transform_add: S,
    pub transform_remove: S,
    pub transform_modify: S,
    /// Allows add != remove; the distance then takes the cheaper direction.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub asymmetric: bool,
}

impl<S: Scalar> Default for CostTable<S> {
    fn default() -> Self {
        CostTable {
            mark_modify: S::from_real(1.0),
            channel_add: S::from_real(0.7),
            channel_remove: S::from_real(0.7),
            channel_modify: S::from_real(0.5),
            transform_add: S::from_real(0.8),
            transform_remove: S::from_real(0.8),
            transform_modify: S::from_real(0.6),
            asymmetric: false,
        }
    }
}

impl<S: Scalar> CostTable<S> {
    fn entries(&self) -> [(&'static str, S); 7] {
        [
            ("mark_modify", self.mark_modify),
            ("channel_add", self.channel_add),
            ("channel_remove", self.channel_remove),
            ("channel_modify", self.channel_modify),
            ("transform_add", self.transform_add),
            ("transform_remove", self.transform_remove),
            ("transform_modify", self.transform_modify),
        ]
    }

    pub fn validate(&self) -> Result<(), CostError> {
        for (name, v) in self.entries() {
            if !v.is_nonnegative() {
                return Err(CostError::Negative(name));
            }
        }
        if self.entries().iter().all(|(_, v)| v.is_zero()) {
            return Err(CostError::AllZero);
        }
        if !self.asymmetric {
            if self.channel_add != self.channel_remove {
                return Err(CostError::Asymmetric("channel"));
            }
            if self.transform_add != self.transform_remove {
                return Err(CostError::Asymmetric("transform"));
            }
        }
        Ok(())
    }

    /// Multiplies every entry by `k`.
    pub fn scaled(&self, k: S) -> Self {
        CostTable {
            mark_modify: self.mark_modify * k,
            channel_add: self.channel_add * k,
            channel_remove: self.channel_remove * k,
            channel_modify: self.channel_modify * k,
            transform_add: self.transform_add * k,
            transform_remove: self.transform_remove * k,
            transform_modify: self.transform_modify * k,
            asymmetric: self.asymmetric,
        }
    }

    pub fn cost(&self, kind: EditKind, slot: Slot) -> S {
        match (slot, kind) {
            (Slot::Mark, _) => self.mark_modify,
            (Slot::Channel, EditKind::Add) => self.channel_add,
            (Slot::Channel, EditKind::Remove) => self.channel_remove,
            (Slot::Channel, EditKind::Modify) => self.channel_modify,
            (Slot::Transform, EditKind::Add) => self.transform_add,
            (Slot::Transform, EditKind::Remove) => self.transform_remove,
            (Slot::Transform, EditKind::Modify) => self.transform_modify,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EditKind {
    Add,
    Modify,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Slot {
    Mark,
    Channel,
    Transform,
}

/// One step of an edit script, carrying enough data to be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EditOp {
    ModifyMark { from: Mark, to: Mark },
    AddChannel { channel: Channel, binding: ChannelBinding },
    RemoveChannel { channel: Channel, binding: ChannelBinding },
    ModifyChannel { channel: Channel, from: ChannelBinding, to: ChannelBinding },
    AddTransform(Transformation),
    RemoveTransform(Transformation),
    ModifyTransform { from: Transformation, to: Transformation },
}

impl EditOp {
    pub fn kind(&self) -> EditKind {
        match self {
            EditOp::AddChannel { .. } | EditOp::AddTransform(_) => EditKind::Add,
            EditOp::RemoveChannel { .. } | EditOp::RemoveTransform(_) => EditKind::Remove,
            _ => EditKind::Modify,
        }
    }

    pub fn slot(&self) -> Slot {
        match self {
            EditOp::ModifyMark { .. } => Slot::Mark,
            EditOp::AddChannel { .. } | EditOp::RemoveChannel { .. } | EditOp::ModifyChannel { .. } => {
                Slot::Channel
            }
            _ => Slot::Transform,
        }
    }

    pub fn detail(&self) -> String {
        match self {
            EditOp::ModifyMark { from, to } => format!("{from}->{to}"),
            EditOp::AddChannel { channel, binding } | EditOp::RemoveChannel { channel, binding } => {
                format!("{channel}={}", binding.field)
            }
            EditOp::ModifyChannel { channel, from, to } => format!(
                "{channel}: {}({})->{}({})",
                from.field, from.field_type, to.field, to.field_type
            ),
            EditOp::AddTransform(t) | EditOp::RemoveTransform(t) => {
                format!("{}({})", t.kind, t.target)
            }
            EditOp::ModifyTransform { from, to } => format!(
                "{}({}): {:?}->{:?}",
                from.kind, from.target, from.param, to.param
            ),
        }
    }

    fn reversed(&self) -> EditOp {
        match self.clone() {
            EditOp::ModifyMark { from, to } => EditOp::ModifyMark { from: to, to: from },
            EditOp::AddChannel { channel, binding } => EditOp::RemoveChannel { channel, binding },
            EditOp::RemoveChannel { channel, binding } => EditOp::AddChannel { channel, binding },
            EditOp::ModifyChannel { channel, from, to } => EditOp::ModifyChannel { channel, from: to, to: from },
            EditOp::AddTransform(t) => EditOp::RemoveTransform(t),
            EditOp::RemoveTransform(t) => EditOp::AddTransform(t),
            EditOp::ModifyTransform { from, to } => EditOp::ModifyTransform { from: to, to: from },
        }
    }
}

impl fmt::Display for EditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {:?} {}", self.kind(), self.slot(), self.detail())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
}

impl EditScript {
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn cost<S: Scalar>(&self, costs: &CostTable<S>) -> S {
        self.ops.iter().map(|op| costs.cost(op.kind(), op.slot())).sum()
    }

    /// Replays the script on `source`. Ops that do not match the source
    /// (wrong `from` value) are applied anyway; the script is trusted.
    pub fn apply(&self, source: &ChartSpec) -> ChartSpec {
        let mut out = source.clone();
        for op in &self.ops {
            match op {
                EditOp::ModifyMark { to, .. } => out.mark = *to,
                EditOp::AddChannel { channel, binding } => {
                    out.channels.insert(*channel, binding.clone());
                }
                EditOp::ModifyChannel { channel, to, .. } => {
                    out.channels.insert(*channel, to.clone());
                }
                EditOp::RemoveChannel { channel, .. } => {
                    out.channels.remove(channel);
                }
                EditOp::AddTransform(t) => out.transforms.push(t.clone()),
                EditOp::RemoveTransform(t) => out.transforms.retain(|x| x.key() != t.key()),
                EditOp::ModifyTransform { to, .. } => {
                    if let Some(x) = out.transforms.iter_mut().find(|x| x.key() == to.key()) {
                        *x = to.clone();
                    }
                }
            }
        }
        out.transforms.sort_by(|a, b| a.key().cmp(&b.key()));
        out
    }

    pub fn reversed(&self) -> EditScript {
        EditScript {
            ops: self.ops.iter().map(EditOp::reversed).collect(),
        }
    }
}

/// Visits the slot-wise differences between `a` and `b` in slot order.
fn walk<'a>(a: &'a ChartSpec, b: &'a ChartSpec, mut visit: impl FnMut(Diff<'a>)) {
    if a.mark != b.mark {
        visit(Diff::Mark(a.mark, b.mark));
    }
    for pair in a.channels.iter().merge_join_by(b.channels.iter(), |x, y| x.0.cmp(y.0)) {
        match pair {
            EitherOrBoth::Left((c, x)) => visit(Diff::Channel(*c, Some(x), None)),
            EitherOrBoth::Right((c, y)) => visit(Diff::Channel(*c, None, Some(y))),
            EitherOrBoth::Both((c, x), (_, y)) if x != y => visit(Diff::Channel(*c, Some(x), Some(y))),
            EitherOrBoth::Both(..) => {}
        }
    }
    let by_key = |x: &&Transformation, y: &&Transformation| -> Ordering { x.key().cmp(&y.key()) };
    for pair in a.transforms.iter().merge_join_by(b.transforms.iter(), by_key) {
        match pair {
            EitherOrBoth::Left(x) => visit(Diff::Transform(Some(x), None)),
            EitherOrBoth::Right(y) => visit(Diff::Transform(None, Some(y))),
            EitherOrBoth::Both(x, y) if x.param != y.param => visit(Diff::Transform(Some(x), Some(y))),
            EitherOrBoth::Both(..) => {}
        }
    }
}

enum Diff<'a> {
    Mark(Mark, Mark),
    Channel(Channel, Option<&'a ChannelBinding>, Option<&'a ChannelBinding>),
    Transform(Option<&'a Transformation>, Option<&'a Transformation>),
}

impl Diff<'_> {
    fn kind_slot(&self) -> (EditKind, Slot) {
        let kind = |l: bool, r: bool| match (l, r) {
            (true, false) => EditKind::Remove,
            (false, true) => EditKind::Add,
            _ => EditKind::Modify,
        };
        match self {
            Diff::Mark(..) => (EditKind::Modify, Slot::Mark),
            Diff::Channel(_, l, r) => (kind(l.is_some(), r.is_some()), Slot::Channel),
            Diff::Transform(l, r) => (kind(l.is_some(), r.is_some()), Slot::Transform),
        }
    }

    fn into_op(self) -> EditOp {
        match self {
            Diff::Mark(from, to) => EditOp::ModifyMark { from, to },
            Diff::Channel(channel, Some(x), None) => EditOp::RemoveChannel { channel, binding: x.clone() },
            Diff::Channel(channel, None, Some(y)) => EditOp::AddChannel { channel, binding: y.clone() },
            Diff::Channel(channel, Some(x), Some(y)) => EditOp::ModifyChannel {
                channel,
                from: x.clone(),
                to: y.clone(),
            },
            Diff::Transform(Some(x), None) => EditOp::RemoveTransform(x.clone()),
            Diff::Transform(None, Some(y)) => EditOp::AddTransform(y.clone()),
            Diff::Transform(Some(x), Some(y)) => EditOp::ModifyTransform {
                from: x.clone(),
                to: y.clone(),
            },
            Diff::Channel(_, None, None) | Diff::Transform(None, None) => unreachable!(),
        }
    }
}

/// Edit script turning `a` into `b` under slot-wise matching.
pub fn diff_specs(a: &ChartSpec, b: &ChartSpec) -> EditScript {
    let mut ops = Vec::new();
    walk(a, b, |d| ops.push(d.into_op()));
    EditScript { ops }
}

fn directed<S: Scalar>(a: &ChartSpec, b: &ChartSpec, costs: &CostTable<S>) -> S {
    let mut total = S::zero();
    walk(a, b, |d| {
        let (kind, slot) = d.kind_slot();
        total = total + costs.cost(kind, slot);
    });
    total
}

/// Summed operation cost between two charts.
pub fn distance<S: Scalar>(a: &ChartSpec, b: &ChartSpec, costs: &CostTable<S>) -> S {
    let forward = directed(a, b, costs);
    if !costs.asymmetric {
        return forward;
    }
    let backward = directed(b, a, costs);
    if backward < forward {
        backward
    } else {
        forward
    }
}

/// Symmetric matrix of pairwise distances with a zero diagonal, labelled by
/// chart id.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<S> {
    ids: Vec<String>,
    cells: Vec<S>,
}

impl<S: Scalar> DistanceMatrix<S> {
    /// Validates and wraps explicit rows.
    pub fn from_rows(ids: Vec<String>, rows: Vec<Vec<S>>) -> Result<Self, MatrixError> {
        let n = rows.len();
        if ids.len() != n {
            return Err(MatrixError::IdCount { ids: ids.len(), n });
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(MatrixError::NotSquare);
        }
        for (i, row) in rows.iter().enumerate() {
            if !row[i].is_zero() {
                return Err(MatrixError::NonZeroDiagonal(i));
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_nonnegative() {
                    return Err(MatrixError::Negative(i, j));
                }
                if *v != rows[j][i] {
                    return Err(MatrixError::NotSymmetric(i, j));
                }
            }
        }
        Ok(DistanceMatrix {
            ids,
            cells: rows.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.cells[i * self.ids.len() + j]
    }

    /// Distance between two charts by id. Panics on unknown ids.
    pub fn between(&self, a: &str, b: &str) -> S {
        let i = self.index_of(a).expect("unknown chart id");
        let j = self.index_of(b).expect("unknown chart id");
        self.get(i, j)
    }

    /// Restriction to `ids`, in the given order.
    pub fn subset(&self, ids: &[String]) -> DistanceMatrix<S> {
        let idx: Vec<usize> = ids
            .iter()
            .map(|id| self.index_of(id).expect("unknown chart id"))
            .collect();
        DistanceMatrix {
            ids: ids.to_vec(),
            cells: idx
                .iter()
                .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
                .map(|(i, j)| self.get(i, j))
                .collect(),
        }
    }

    pub fn rows(&self) -> Vec<Vec<S>> {
        self.cells.chunks(self.ids.len().max(1)).map(<[S]>::to_vec).collect()
    }
}

/// Pairwise distances over the ensemble. Rows are computed in parallel; every
/// cell is an independent call so the result matches a sequential run exactly.
pub fn distance_matrix<S: Scalar>(ensemble: &ChartEnsemble, costs: &CostTable<S>) -> DistanceMatrix<S> {
    let charts = &ensemble.charts;
    let n = charts.len();
    let upper: Vec<Vec<S>> = (0..n)
        .into_par_iter()
        .map(|i| ((i + 1)..n).map(|j| distance(&charts[i], &charts[j], costs)).collect())
        .collect();
    let mut cells = vec![S::zero(); n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &d) in row.iter().enumerate() {
            let j = i + 1 + k;
            cells[i * n + j] = d;
            cells[j * n + i] = d;
        }
    }
    DistanceMatrix {
        ids: ensemble.ids(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{FieldType, TransformKind};
    use crate::scalar::Exact;

    fn bind(field: &str, t: FieldType) -> ChannelBinding {
        ChannelBinding {
            field: field.into(),
            field_type: t,
        }
    }

    fn spec(mark: Mark, channels: Vec<(Channel, ChannelBinding)>, transforms: Vec<Transformation>) -> ChartSpec {
        let mut c = ChartSpec {
            id: "c".into(),
            mark,
            channels: channels.into_iter().collect(),
            transforms,
            created_at: 0,
            title: None,
        };
        c.normalize().unwrap();
        c
    }

    fn line_circle_pair() -> (ChartSpec, ChartSpec) {
        let q = FieldType::Quantitative;
        let left = spec(
            Mark::Line,
            vec![(Channel::X, bind("Horsepower", q)), (Channel::Y, bind("Miles_per_Gallon", q))],
            vec![Transformation {
                kind: TransformKind::Aggregate,
                target: "Miles_per_Gallon".into(),
                param: Some("mean".into()),
            }],
        );
        let right = spec(
            Mark::Circle,
            vec![
                (Channel::X, bind("Horsepower", q)),
                (Channel::Y, bind("Miles_per_Gallon", q)),
                (Channel::Color, bind("Origin", FieldType::Nominal)),
            ],
            vec![],
        );
        (left, right)
    }

    #[test]
    fn line_circle_pair_diffs_to_three_ops() {
        let (l, r) = line_circle_pair();
        let s = diff_specs(&l, &r);
        let summary: Vec<_> = s.ops.iter().map(|o| (o.kind(), o.slot())).collect();
        assert_eq!(
            summary,
            vec![
                (EditKind::Modify, Slot::Mark),
                (EditKind::Add, Slot::Channel),
                (EditKind::Remove, Slot::Transform),
            ]
        );
        assert_eq!(s.ops[0].detail(), "line->circle");
        assert_eq!(distance(&l, &r, &CostTable::<Exact>::default()), Exact::new(5, 2));
        assert!((distance(&l, &r, &CostTable::<f64>::default()) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn identity_is_empty() {
        let (l, _) = line_circle_pair();
        assert!(diff_specs(&l, &l).is_empty());
        assert_eq!(distance(&l, &l, &CostTable::<f64>::default()), 0.0);
    }

    #[test]
    fn added_channel_only() {
        let a = spec(Mark::Bar, vec![(Channel::X, bind("f1", FieldType::Nominal))], vec![]);
        let b = spec(
            Mark::Bar,
            vec![
                (Channel::X, bind("f1", FieldType::Nominal)),
                (Channel::Y, bind("f2", FieldType::Quantitative)),
            ],
            vec![],
        );
        let s = diff_specs(&a, &b);
        assert_eq!(s.ops.len(), 1);
        assert!(matches!(&s.ops[0], EditOp::AddChannel { channel: Channel::Y, .. }));
    }

    #[test]
    fn two_modified_channels() {
        let n = FieldType::Nominal;
        let a = spec(Mark::Bar, vec![(Channel::X, bind("a", n)), (Channel::Y, bind("b", n))], vec![]);
        let b = spec(Mark::Bar, vec![(Channel::X, bind("c", n)), (Channel::Y, bind("d", n))], vec![]);
        assert_eq!(distance(&a, &b, &CostTable::<Exact>::default()), Exact::from_integer(1));
    }

    #[test]
    fn script_replays_to_target() {
        let (l, r) = line_circle_pair();
        let mut replayed = diff_specs(&l, &r).apply(&l);
        replayed.id = r.id.clone();
        assert_eq!(replayed, r);
        let mut back = diff_specs(&l, &r).reversed().apply(&r);
        back.id = l.id.clone();
        assert_eq!(back, l);
    }

    #[test]
    fn asymmetric_takes_cheaper_direction() {
        let (l, r) = line_circle_pair();
        let mut costs = CostTable::<Exact> { channel_add: Exact::from_integer(5), ..CostTable::default() };
        assert_eq!(costs.validate(), Err(CostError::Asymmetric("channel")));
        costs.asymmetric = true;
        costs.validate().unwrap();
        // l->r adds a channel (5); r->l removes it (7/10).
        let d = distance(&l, &r, &costs);
        assert_eq!(d, Exact::new(1, 1) + Exact::new(7, 10) + Exact::new(4, 5));
        assert_eq!(d, distance(&r, &l, &costs));
    }

    #[test]
    fn cost_table_validation() {
        let mut c = CostTable::<f64>::default();
        c.validate().unwrap();
        c.mark_modify = -1.0;
        assert_eq!(c.validate(), Err(CostError::Negative("mark_modify")));
        let z = CostTable::<f64>::default().scaled(0.0);
        assert_eq!(z.validate(), Err(CostError::AllZero));
    }

    #[test]
    fn matrix_validation() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(DistanceMatrix::from_rows(ids.clone(), vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        assert!(DistanceMatrix::from_rows(ids.clone(), vec![vec![1.0, 1.0], vec![1.0, 0.0]]).is_err());
        let m = DistanceMatrix::from_rows(ids, vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.between("b", "a"), 1.0);
        assert_eq!(m.subset(&["b".to_string()]).rows(), vec![vec![0.0]]);
    }
}
