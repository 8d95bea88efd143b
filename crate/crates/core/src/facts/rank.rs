use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{DataFact, FactError, FactKey};
use crate::scalar::Scalar;

/// Number of facts captioned per chart.
pub const SELECTED_PER_CHART: usize = 4;

/// Tie breaker added to every discounted duplicate.
const DUPLICATE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct RankParams<S> {
    /// Weight of the form mismatch indicator.
    pub alpha: S,
    /// Weight of the level difference.
    pub beta: S,
    /// Weight of the attribute-set Jaccard distance.
    pub gamma: S,
    /// Multiplier applied to facts already selected on an earlier chart.
    pub delta: S,
}

impl<S: Scalar> Default for RankParams<S> {
    fn default() -> Self {
        let third = S::one() / S::from_count(3);
        RankParams {
            alpha: third,
            beta: third,
            gamma: third,
            delta: S::from_count(4),
        }
    }
}

impl<S: Scalar> RankParams<S> {
    pub fn validate(&self) -> Result<(), FactError> {
        let abc = [self.alpha, self.beta, self.gamma];
        if abc.iter().any(|v| !v.is_nonnegative()) || abc.iter().all(|v| v.is_zero()) {
            return Err(FactError::InvalidWeights);
        }
        if matches!(self.delta.partial_cmp(&S::one()), None | Some(std::cmp::Ordering::Less)) {
            return Err(FactError::InvalidWeights);
        }
        Ok(())
    }
}

fn jaccard_distance<S: Scalar>(a: &BTreeSet<String>, b: &BTreeSet<String>) -> S {
    let union = a.union(b).count();
    if union == 0 {
        return S::zero();
    }
    let inter = a.intersection(b).count();
    S::from_count(union - inter) / S::from_count(union)
}

/// Dissimilarity between a fact and each fact of every backbone neighbour,
/// averaged per neighbour and summed over neighbours. Lower is more related.
///
/// Neighbours without facts contribute nothing.
pub fn fact_weight<S: Scalar>(
    fact: &DataFact,
    neighbor_facts: &[&[DataFact]],
    params: &RankParams<S>,
) -> Result<S, FactError> {
    if neighbor_facts.is_empty() {
        return Err(FactError::NoNeighbors);
    }
    let mut total = S::zero();
    for facts in neighbor_facts.iter().filter(|f| !f.is_empty()) {
        let mut sum = S::zero();
        for g in *facts {
            if g.form != fact.form {
                sum = sum + params.alpha;
            }
            sum = sum + params.beta * S::from_count(g.level.abs_diff(fact.level) as usize);
            sum = sum + params.gamma * jaccard_distance::<S>(&g.attributes, &fact.attributes);
        }
        total = total + sum / S::from_count(facts.len());
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct RankedFact<S> {
    pub fact: DataFact,
    pub weight: S,
    /// Matches a fact selected on an earlier chart of the same piece.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub duplicate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "S: Deserialize<'de>", serialize = "S: Serialize"))]
pub struct RankedFacts<S> {
    pub chart_id: String,
    /// Ascending by weight; ties keep extraction order.
    pub facts: Vec<RankedFact<S>>,
    /// Ids of the first `min(4, len)` facts, unless chosen by hand.
    pub selected: Vec<String>,
}

impl<S> RankedFacts<S> {
    pub fn selected_facts(&self) -> Vec<&DataFact> {
        self.selected
            .iter()
            .filter_map(|id| self.facts.iter().find(|r| &r.fact.id == id).map(|r| &r.fact))
            .collect()
    }

    pub fn fact(&self, id: &str) -> Option<&DataFact> {
        self.facts.iter().find(|r| r.fact.id == id).map(|r| &r.fact)
    }
}

/// Ranks every chart of a piece, walking `reading_order`.
///
/// `neighbors` gives each chart's backbone neighbours. A fact whose
/// `(form, level, attributes, subject)` equals one selected on an earlier chart
/// gets `w * delta + 1e-6`. Charts without neighbours keep extraction order
/// with all weights zero.
pub fn rank_and_select<S: Scalar>(
    reading_order: &[String],
    neighbors: &BTreeMap<String, Vec<String>>,
    facts: &BTreeMap<String, Vec<DataFact>>,
    params: &RankParams<S>,
) -> Result<Vec<RankedFacts<S>>, FactError> {
    rank_and_select_with(reading_order, neighbors, facts, params, &BTreeMap::new())
}

/// [`rank_and_select`] where `overrides` fixes the selection of some charts.
/// Overridden selections also count as shown for later charts.
pub fn rank_and_select_with<S: Scalar>(
    reading_order: &[String],
    neighbors: &BTreeMap<String, Vec<String>>,
    facts: &BTreeMap<String, Vec<DataFact>>,
    params: &RankParams<S>,
    overrides: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<RankedFacts<S>>, FactError> {
    params.validate()?;
    let eps = S::from_real(DUPLICATE_EPSILON);
    let empty: Vec<DataFact> = Vec::new();
    let mut shown: Vec<DataFact> = Vec::new();
    let mut out = Vec::with_capacity(reading_order.len());
    for chart in reading_order {
        let own = facts.get(chart).unwrap_or(&empty);
        let nbr_lists: Vec<&[DataFact]> = neighbors
            .get(chart)
            .map(|ns| ns.iter().map(|n| facts.get(n).unwrap_or(&empty).as_slice()).collect())
            .unwrap_or_default();
        let shown_keys: BTreeSet<FactKey<'_>> = shown.iter().map(DataFact::key).collect();
        let mut ranked = Vec::with_capacity(own.len());
        for f in own {
            let w = match fact_weight(f, &nbr_lists, params) {
                Ok(w) => w,
                Err(FactError::NoNeighbors) => S::zero(),
                Err(e) => return Err(e),
            };
            let duplicate = shown_keys.contains(&f.key());
            let weight = if duplicate { w * params.delta + eps } else { w };
            ranked.push(RankedFact { fact: f.clone(), weight, duplicate });
        }
        drop(shown_keys);
        ranked.sort_by(|a, b| a.weight.partial_cmp(&b.weight).unwrap_or(Ordering::Equal));
        let selected: Vec<String> = match overrides.get(chart) {
            Some(ids) => ids.clone(),
            None => ranked.iter().take(SELECTED_PER_CHART).map(|r| r.fact.id.clone()).collect(),
        };
        shown.extend(
            selected
                .iter()
                .filter_map(|id| ranked.iter().find(|r| &r.fact.id == id))
                .map(|r| r.fact.clone()),
        );
        out.push(RankedFacts { chart_id: chart.clone(), facts: ranked, selected });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::FactForm;
    use crate::scalar::Exact;

    fn fact(id: &str, form: FactForm, attrs: &[&str]) -> DataFact {
        DataFact {
            id: id.into(),
            form,
            level: form.level(),
            attributes: attrs.iter().map(|s| s.to_string()).collect(),
            subject: "s".into(),
            subject_attribute: None,
            measure: None,
            values: vec![1.0],
            entities: vec![],
            source_chart: id.split('#').next().unwrap().into(),
        }
    }

    #[test]
    fn hand_computed_weight_is_four_ninths() {
        let f = fact("a#0", FactForm::Minimum, &["a", "b"]);
        let g1 = fact("b#0", FactForm::Minimum, &["a", "b"]);
        let g2 = fact("b#1", FactForm::Trend, &["b", "c"]);
        let nb = vec![g1, g2];
        let w: Exact = fact_weight(&f, &[&nb], &RankParams::default()).unwrap();
        assert_eq!(w, Exact::new(4, 9));
    }

    #[test]
    fn identical_sets_weigh_zero_and_disjoint_weigh_one() {
        let f = fact("a#0", FactForm::Mean, &["x"]);
        let same = vec![fact("b#0", FactForm::Mean, &["x"])];
        let w: Exact = fact_weight(&f, &[&same], &RankParams::default()).unwrap();
        assert_eq!(w, Exact::from_integer(0));
        let p = RankParams { alpha: Exact::from_integer(0), beta: Exact::from_integer(0), gamma: Exact::from_integer(1), delta: Exact::from_integer(4) };
        let other = vec![fact("b#0", FactForm::Maximum, &["y"]), fact("b#1", FactForm::Trend, &["z"])];
        assert_eq!(fact_weight(&f, &[&other], &p).unwrap(), Exact::from_integer(1));
    }

    #[test]
    fn no_neighbors_is_an_error() {
        let f = fact("a#0", FactForm::Mean, &["x"]);
        assert_eq!(fact_weight::<f64>(&f, &[], &RankParams::default()), Err(FactError::NoNeighbors));
    }

    #[test]
    fn invalid_params() {
        let p = RankParams::<f64> { delta: 0.5, ..RankParams::default() };
        assert_eq!(p.validate(), Err(FactError::InvalidWeights));
        let p = RankParams { alpha: 0.0, beta: 0.0, gamma: 0.0, delta: 4.0 };
        assert_eq!(p.validate(), Err(FactError::InvalidWeights));
        let p = RankParams { alpha: -1.0, beta: 1.0, gamma: 0.0, delta: 4.0 };
        assert_eq!(p.validate(), Err(FactError::InvalidWeights));
    }

    #[test]
    fn singleton_keeps_extraction_order_and_selects_four() {
        let fs: Vec<DataFact> = (0..6)
            .map(|i| fact(&format!("a#{i}"), if i % 2 == 0 { FactForm::Trend } else { FactForm::Mean }, &["x"]))
            .collect();
        let facts = BTreeMap::from([("a".to_string(), fs)]);
        let r = rank_and_select::<f64>(&["a".into()], &BTreeMap::new(), &facts, &RankParams::default()).unwrap();
        assert_eq!(r[0].selected, vec!["a#0", "a#1", "a#2", "a#3"]);
        assert!(r[0].facts.iter().all(|f| f.weight == 0.0));
    }

    #[test]
    fn fewer_than_four_all_selected() {
        let facts = BTreeMap::from([
            ("a".to_string(), vec![fact("a#0", FactForm::Mean, &["x"]), fact("a#1", FactForm::Range, &["x"]), fact("a#2", FactForm::Trend, &["x"])]),
            ("b".to_string(), vec![fact("b#0", FactForm::Mean, &["x"])]),
        ]);
        let nb = BTreeMap::from([("a".to_string(), vec!["b".to_string()]), ("b".to_string(), vec!["a".to_string()])]);
        let r = rank_and_select::<f64>(&["a".into(), "b".into()], &nb, &facts, &RankParams::default()).unwrap();
        assert_eq!(r[0].selected.len(), 3);
        assert_eq!(r[1].selected, vec!["b#0"]);
    }

    #[test]
    fn duplicate_on_later_chart_is_discounted() {
        let shared = |c: &str| fact(&format!("{c}#0"), FactForm::Mean, &["x"]);
        let facts = BTreeMap::from([
            ("a".to_string(), vec![shared("a")]),
            (
                "b".to_string(),
                vec![
                    shared("b"),
                    fact("b#1", FactForm::Maximum, &["x", "y"]),
                    fact("b#2", FactForm::Minimum, &["x", "y"]),
                    fact("b#3", FactForm::Range, &["y"]),
                    fact("b#4", FactForm::Share, &["x", "y"]),
                ],
            ),
        ]);
        let nb = BTreeMap::from([("a".to_string(), vec!["b".to_string()]), ("b".to_string(), vec!["a".to_string()])]);
        let r = rank_and_select::<Exact>(&["a".into(), "b".into()], &nb, &facts, &RankParams::default()).unwrap();
        assert_eq!(r[0].selected, vec!["a#0"]);
        let dup = r[1].facts.iter().find(|f| f.fact.id == "b#0").unwrap();
        assert!(dup.duplicate);
        // w = 0 before discounting, so only the epsilon remains
        assert_eq!(dup.weight, Exact::from_real(1e-6));
        // Discounting a zero weight leaves only the epsilon, which is still
        // below every non-duplicate here.
        for f in &r[1].facts {
            if !f.duplicate {
                assert!(f.weight > dup.weight);
            }
        }
    }

    #[test]
    fn duplicate_with_positive_weight_falls_behind() {
        let facts = BTreeMap::from([
            ("a".to_string(), vec![fact("a#0", FactForm::Trend, &["x"]), fact("a#1", FactForm::Mean, &["y"])]),
            ("b".to_string(), vec![fact("b#0", FactForm::Trend, &["x"]), fact("b#1", FactForm::Maximum, &["x"])]),
        ]);
        let nb = BTreeMap::from([("a".to_string(), vec!["b".to_string()]), ("b".to_string(), vec!["a".to_string()])]);
        let r = rank_and_select::<Exact>(&["a".into(), "b".into()], &nb, &facts, &RankParams::default()).unwrap();
        let b = &r[1];
        // undiscounted: b#0 = (0 + 1/3+1/3+1/3)/2 = 1/2, b#1 = (1/3+1/3 + 1/3+1/3)/2 = 2/3
        let w0 = b.facts.iter().find(|f| f.fact.id == "b#0").unwrap().weight;
        assert_eq!(w0, Exact::new(2, 1) + Exact::from_real(1e-6));
        assert_eq!(b.facts[0].fact.id, "b#1");
    }
}
