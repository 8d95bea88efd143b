//! Caption stitching: turning a chart's selected facts into one paragraph.

mod realize;
mod terms;

use serde::{Deserialize, Serialize};

use crate::facts::{DataFact, FactForm};

pub use realize::{realize, Connectives, Vocabulary};
pub use terms::{
    link_candidates, normalize_term, term_context, ProviderError, TermCache, TermProvider, TERM_CACHE_FILE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StitchPattern {
    Coreference,
    Subordination,
    Conjunction,
    Plain,
}

/// One unit of the caption: a stitched pair, or a single plain fact.
///
/// For subordination `first` is the main clause and `second` the embedded one;
/// for conjunction `first` is the maximum side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stitch {
    pub first: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second: Option<String>,
    pub pattern: StitchPattern,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StitchPlan {
    pub stitches: Vec<Stitch>,
}

impl StitchPlan {
    pub fn fact_ids(&self) -> Vec<&str> {
        self.stitches
            .iter()
            .flat_map(|s| std::iter::once(s.first.as_str()).chain(s.second.as_deref()))
            .collect()
    }
}

/// Character span (not byte span) of one fact within the caption text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub fact_id: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermLink {
    pub term: String,
    pub url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Caption {
    pub text: String,
    pub segments: Vec<Segment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub term_links: Vec<TermLink>,
}

fn is_extreme(f: FactForm) -> bool {
    matches!(f, FactForm::Maximum | FactForm::Minimum | FactForm::SecondMaximum)
}

fn mentions(host: &DataFact, guest: &DataFact) -> bool {
    host.entities.iter().any(|e| {
        e.value == guest.subject && guest.subject_attribute.as_deref().is_none_or(|a| a == e.attribute)
    })
}

fn opposed(a: &DataFact, b: &DataFact) -> bool {
    if a.measure.is_none() || a.measure != b.measure {
        return false;
    }
    match (a.form, b.form) {
        (FactForm::Maximum, FactForm::Minimum) | (FactForm::Minimum, FactForm::Maximum) => true,
        (FactForm::Trend, FactForm::Trend) => {
            let (x, y) = (a.value().unwrap_or(0.0), b.value().unwrap_or(0.0));
            x * y < 0.0
        }
        _ => false,
    }
}

/// Pattern for an ordered pair, with the pair re-ordered as it should be
/// realized. `None` means the two facts do not stitch.
fn pattern_for<'a>(a: &'a DataFact, b: &'a DataFact) -> Option<(StitchPattern, &'a DataFact, &'a DataFact)> {
    if a.subject == b.subject && a.subject_attribute == b.subject_attribute {
        return Some((StitchPattern::Coreference, a, b));
    }
    // The embedded fact must be one that reads as "which is <v> as ...".
    let embeddable = |f: &DataFact| is_extreme(f.form) || f.form == FactForm::Outlier;
    if mentions(a, b) && embeddable(b) {
        return Some((StitchPattern::Subordination, a, b));
    }
    if mentions(b, a) && embeddable(a) {
        return Some((StitchPattern::Subordination, b, a));
    }
    if opposed(a, b) {
        let a_first = match a.form {
            FactForm::Maximum => true,
            FactForm::Minimum => false,
            _ => a.value().unwrap_or(0.0) >= 0.0,
        };
        return Some(if a_first {
            (StitchPattern::Conjunction, a, b)
        } else {
            (StitchPattern::Conjunction, b, a)
        });
    }
    None
}

/// Greedy pairing in rank order: each fact is paired with the first later,
/// still unpaired fact it stitches with; leftovers stay plain.
pub fn plan_stitches(facts: &[&DataFact]) -> StitchPlan {
    let mut used = vec![false; facts.len()];
    let mut stitches = Vec::new();
    for i in 0..facts.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let partner = (i + 1..facts.len())
            .filter(|&j| !used[j])
            .find_map(|j| pattern_for(facts[i], facts[j]).map(|p| (j, p)));
        match partner {
            Some((j, (pattern, first, second))) => {
                used[j] = true;
                stitches.push(Stitch {
                    first: first.id.clone(),
                    second: Some(second.id.clone()),
                    pattern,
                });
            }
            None => stitches.push(Stitch {
                first: facts[i].id.clone(),
                second: None,
                pattern: StitchPattern::Plain,
            }),
        }
    }
    StitchPlan { stitches }
}
