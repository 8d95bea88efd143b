use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Caption, Segment, StitchPattern, StitchPlan};
use crate::facts::{DataFact, FactForm};
use crate::format_number;
use crate::model::Dataset;

/// Display names for attributes and values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub labels: BTreeMap<String, String>,
    pub proper_nouns: BTreeSet<String>,
}

impl Vocabulary {
    pub fn from_dataset(data: &Dataset) -> Self {
        Vocabulary {
            labels: data
                .schema()
                .keys()
                .map(|k| (k.clone(), data.label(k)))
                .collect(),
            proper_nouns: data.meta.proper_nouns.iter().cloned().collect(),
        }
    }

    pub fn label(&self, attr: &str) -> String {
        self.labels
            .get(attr)
            .cloned()
            .unwrap_or_else(|| attr.replace('_', " ").to_lowercase())
    }

    /// Lowercases a value, keeping proper nouns and all-caps acronyms. A value
    /// that is a single capital letter (a size code, a grade) is kept too.
    pub fn value(&self, v: &str) -> String {
        if self.proper_nouns.contains(v) {
            return v.to_string();
        }
        let single_word = !v.contains(' ');
        v.split(' ')
            .map(|w| {
                let letters: Vec<char> = w.chars().filter(|c| c.is_alphabetic()).collect();
                let acronym = (letters.len() >= 2 || (single_word && letters.len() == 1))
                    && letters.iter().all(|c| c.is_uppercase());
                if acronym || self.proper_nouns.contains(w) {
                    w.to_string()
                } else {
                    w.to_lowercase()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Fixed connective words per pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectives {
    pub coreference: String,
    pub subordination: String,
    pub conjunction: String,
}

impl Default for Connectives {
    fn default() -> Self {
        Connectives {
            coreference: "and also".into(),
            subordination: "which".into(),
            conjunction: "in contrast".into(),
        }
    }
}

/// A fragment of a fact sentence; `anchor` is the index of the fact entity
/// whose value the fragment ends with.
struct Piece {
    text: String,
    anchor: Option<usize>,
}

impl Piece {
    fn new(text: String) -> Self {
        Piece { text, anchor: None }
    }

    fn anchored(text: String, anchor: usize) -> Self {
        Piece { text, anchor: Some(anchor) }
    }
}

struct Phrase {
    head: Piece,
    pred: Piece,
    tail: Vec<Piece>,
}

impl Phrase {
    fn tail_text(&self) -> String {
        self.tail.iter().map(|p| p.text.as_str()).collect()
    }
}

fn extreme_word(form: FactForm) -> &'static str {
    match form {
        FactForm::Maximum => "highest",
        FactForm::Minimum => "lowest",
        _ => "second highest",
    }
}

fn value_at(f: &DataFact, i: usize) -> String {
    f.values.get(i).map(|v| format_number(*v)).unwrap_or_default()
}

fn subject_head(f: &DataFact, vocab: &Vocabulary) -> String {
    match &f.subject_attribute {
        Some(a) => format!("The {} of {}", vocab.label(a), vocab.value(&f.subject)),
        None => format!("The {}", vocab.value(&f.subject)),
    }
}

fn context_tail(f: &DataFact, vocab: &Vocabulary) -> Vec<Piece> {
    f.entities
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let lead = if i == 0 { " for" } else { " and" };
            Piece::anchored(format!("{lead} the {} of {}", vocab.label(&e.attribute), vocab.value(&e.value)), i)
        })
        .collect()
}

fn phrase(f: &DataFact, vocab: &Vocabulary) -> Phrase {
    let measure = f.measure.as_deref().map(|m| vocab.label(m)).unwrap_or_default();
    let v = value_at(f, 0);
    match f.form {
        FactForm::Maximum | FactForm::Minimum | FactForm::SecondMaximum => Phrase {
            head: Piece::new(subject_head(f, vocab)),
            pred: Piece::new(format!("has the {} {measure} of {v}", extreme_word(f.form))),
            tail: context_tail(f, vocab),
        },
        FactForm::Mean => Phrase {
            head: Piece::new(format!("The {measure}")),
            pred: Piece::new(format!("averages {v}")),
            tail: vec![],
        },
        FactForm::Range => Phrase {
            head: Piece::new(format!("The {measure}")),
            pred: Piece::new(format!("ranges from {} to {}", value_at(f, 1), value_at(f, 2))),
            tail: vec![Piece::new(format!(" with a spread of {v}"))],
        },
        FactForm::Share => Phrase {
            head: Piece::new(subject_head(f, vocab)),
            pred: Piece::new(if f.measure.is_some() {
                format!("accounts for {v}% of the total {measure}")
            } else {
                format!("makes up {v}% of the records")
            }),
            tail: vec![],
        },
        FactForm::RatioComparison => {
            let name = |i: usize| f.entities.get(i).map(|e| vocab.value(&e.value)).unwrap_or_default();
            Phrase {
                head: Piece::anchored(format!("The {measure} for {}", name(0)), 0),
                pred: Piece::anchored(format!("is {v} times that for {}", name(1)), 1),
                tail: vec![],
            }
        }
        FactForm::Trend => {
            let x = f.entities.first().map(|e| vocab.label(&e.attribute)).unwrap_or_default();
            let value = f.value().unwrap_or(0.0);
            let dir = if value > 0.0 {
                "an increasing"
            } else if value < 0.0 {
                "a decreasing"
            } else {
                "a flat"
            };
            Phrase {
                head: Piece::new(format!("The {measure}")),
                pred: Piece::new(format!("shows {dir} trend over the {x} with a slope of {v}")),
                tail: vec![],
            }
        }
        FactForm::Correlation => {
            let name = |i: usize| f.entities.get(i).map(|e| vocab.label(&e.attribute)).unwrap_or_default();
            let r = f.value().unwrap_or(0.0);
            let strength = match r.abs() {
                a if a >= 0.7 => "strong",
                a if a >= 0.4 => "moderate",
                _ => "weak",
            };
            let sign = if r >= 0.0 { "positive" } else { "negative" };
            Phrase {
                head: Piece::new(format!("The {} and the {}", name(0), name(1))),
                pred: Piece::new(format!("have a {strength} {sign} correlation of {v}")),
                tail: vec![],
            }
        }
        FactForm::Outlier => Phrase {
            head: Piece::new(subject_head(f, vocab)),
            pred: Piece::new(format!("is an outlier in {measure} at {v}")),
            tail: context_tail(f, vocab),
        },
    }
}

/// Relative clause describing `f` when embedded after a mention of its subject.
fn relative_clause(f: &DataFact, word: &str) -> String {
    let v = value_at(f, 0);
    match f.form {
        FactForm::Outlier => format!("{word} is an outlier at {v}"),
        form => format!("{word} is {v} as the {}", extreme_word(form)),
    }
}

/// Text accumulator that tracks its length in characters.
#[derive(Default)]
struct Out {
    text: String,
    chars: usize,
}

impl Out {
    fn push(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }
}

/// Renders a plan. Facts missing from `facts` are skipped.
pub fn realize(plan: &StitchPlan, facts: &[&DataFact], vocab: &Vocabulary, words: &Connectives) -> Caption {
    let find = |id: &str| facts.iter().copied().find(|f| f.id == id);
    let mut out = Out::default();
    let mut segments = Vec::new();
    for stitch in &plan.stitches {
        let Some(a) = find(&stitch.first) else { continue };
        let b = stitch.second.as_deref().and_then(find);
        if out.chars > 0 {
            out.push(" ");
        }
        let start = out.chars;
        let pa = phrase(a, vocab);
        match (stitch.pattern, b) {
            (StitchPattern::Coreference, Some(b)) => {
                let pb = phrase(b, vocab);
                out.push(&format!("{} {}{}", pa.head.text, pa.pred.text, pa.tail_text()));
                segments.push(Segment { fact_id: a.id.clone(), start, end: out.chars });
                out.push(&format!(" {} ", words.coreference));
                let s = out.chars;
                out.push(&format!("{}{}", pb.pred.text, pb.tail_text()));
                segments.push(Segment { fact_id: b.id.clone(), start: s, end: out.chars });
                out.push(".");
            }
            (StitchPattern::Subordination, Some(b)) => {
                let clause = relative_clause(b, &words.subordination);
                let anchor = a
                    .entities
                    .iter()
                    .position(|e| e.value == b.subject)
                    .unwrap_or(0);
                let pieces: Vec<&Piece> =
                    std::iter::once(&pa.head).chain(std::iter::once(&pa.pred)).chain(pa.tail.iter()).collect();
                let at = pieces.iter().position(|p| p.anchor == Some(anchor)).unwrap_or(0);
                let mut main_end = None;
                for (i, p) in pieces.iter().enumerate() {
                    if i == 1 {
                        out.push(" ");
                    }
                    out.push(&p.text);
                    if i == at {
                        if main_end.is_none() {
                            main_end = Some(out.chars);
                        }
                        out.push(", ");
                        let s = out.chars;
                        out.push(&clause);
                        let e = out.chars;
                        segments.push(Segment { fact_id: a.id.clone(), start, end: main_end.unwrap() });
                        segments.push(Segment { fact_id: b.id.clone(), start: s, end: e });
                        if i + 1 < pieces.len() {
                            out.push(",");
                        }
                    }
                }
                out.push(".");
            }
            (StitchPattern::Conjunction, Some(b)) => {
                out.push(&format!("{} {}{}", pa.head.text, pa.pred.text, pa.tail_text()));
                segments.push(Segment { fact_id: a.id.clone(), start, end: out.chars });
                out.push(&format!(", {}, ", words.conjunction));
                let s = out.chars;
                if matches!(b.form, FactForm::Maximum | FactForm::Minimum) {
                    let pb = phrase(b, vocab);
                    out.push(&format!(
                        "{} has the {} of that as {}{}",
                        vocab.value(&b.subject),
                        extreme_word(b.form),
                        value_at(b, 0),
                        pb.tail_text()
                    ));
                } else {
                    let pb = phrase(b, vocab);
                    out.push(&format!("{} {}{}", lower_first(&pb.head.text), pb.pred.text, pb.tail_text()));
                }
                segments.push(Segment { fact_id: b.id.clone(), start: s, end: out.chars });
                out.push(".");
            }
            _ => {
                out.push(&format!("{} {}{}", pa.head.text, pa.pred.text, pa.tail_text()));
                segments.push(Segment { fact_id: a.id.clone(), start, end: out.chars });
                out.push(".");
            }
        }
    }
    Caption { text: out.text, segments, term_links: Vec::new() }
}

fn lower_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::caption::plan_stitches;
    use crate::facts::Entity;

    fn vocab() -> Vocabulary {
        Vocabulary {
            labels: BTreeMap::from([
                ("weaptype1".into(), "weapon type".into()),
                ("iyear".into(), "year".into()),
                ("targtype1".into(), "target type".into()),
                ("attack_count".into(), "attack count".into()),
            ]),
            proper_nouns: BTreeSet::new(),
        }
    }

    fn fact(id: &str, form: FactForm, subject: &str, subj_attr: Option<&str>, values: &[f64], entities: &[(&str, &str)]) -> DataFact {
        DataFact {
            id: id.into(),
            form,
            level: form.level(),
            attributes: BTreeSet::from(["attack_count".to_string()]),
            subject: subject.into(),
            subject_attribute: subj_attr.map(str::to_string),
            measure: Some("attack_count".into()),
            values: values.to_vec(),
            entities: entities.iter().map(|(a, v)| Entity::new(*a, *v)).collect(),
            source_chart: "c".into(),
        }
    }

    fn caption(facts: &[DataFact]) -> (StitchPlan, Caption) {
        let refs: Vec<&DataFact> = facts.iter().collect();
        let plan = plan_stitches(&refs);
        let cap = realize(&plan, &refs, &vocab(), &Connectives::default());
        (plan, cap)
    }

    #[test]
    fn coreference_pair() {
        let e = "Explosives/ Bombs/ Dynamite";
        let facts = [
            fact("c#0", FactForm::Maximum, e, Some("weaptype1"), &[938.0], &[("iyear", "2015")]),
            fact("c#1", FactForm::SecondMaximum, e, Some("weaptype1"), &[840.0], &[("iyear", "2014")]),
        ];
        let (plan, cap) = caption(&facts);
        assert_eq!(plan.stitches[0].pattern, StitchPattern::Coreference);
        assert_eq!(
            cap.text,
            "The weapon type of explosives/ bombs/ dynamite has the highest attack count of 938 for the year of 2015 and also has the second highest attack count of 840 for the year of 2014."
        );
    }

    #[test]
    fn subordination_pair() {
        let p = "Private Citizens & Property";
        let facts = [
            fact("c#0", FactForm::RatioComparison, &format!("{p} vs. Tourists"), Some("targtype1"), &[328.67], &[("targtype1", p), ("targtype1", "Tourists")]),
            fact("c#1", FactForm::Maximum, p, Some("targtype1"), &[989.0], &[]),
        ];
        let (plan, cap) = caption(&facts);
        assert_eq!(plan.stitches[0].pattern, StitchPattern::Subordination);
        assert_eq!(
            cap.text,
            "The attack count for private citizens & property, which is 989 as the highest, is 328.67 times that for tourists."
        );
        assert_eq!(cap.segments.len(), 2);
    }

    #[test]
    fn conjunction_pair() {
        let facts = [
            fact("c#0", FactForm::Minimum, "2004", Some("iyear"), &[319.0], &[]),
            fact("c#1", FactForm::Maximum, "2014", Some("iyear"), &[3925.0], &[]),
        ];
        let (plan, cap) = caption(&facts);
        assert_eq!(plan.stitches[0].pattern, StitchPattern::Conjunction);
        assert_eq!(plan.stitches[0].first, "c#1");
        assert_eq!(
            cap.text,
            "The year of 2014 has the highest attack count of 3925, in contrast, 2004 has the lowest of that as 319."
        );
    }

    #[test]
    fn single_fact_has_no_connectives() {
        let facts = [fact("c#0", FactForm::Mean, "attack_count", None, &[12.5], &[])];
        let (_, cap) = caption(&facts);
        assert_eq!(cap.text, "The attack count averages 12.5.");
        assert_eq!(cap.segments, vec![Segment { fact_id: "c#0".into(), start: 0, end: 30 }]);
    }

    #[test]
    fn unrelated_facts_stay_plain_in_rank_order() {
        let mut a = fact("c#0", FactForm::Mean, "a", None, &[1.0], &[]);
        a.measure = Some("a".into());
        let mut b = fact("c#1", FactForm::Range, "b", None, &[2.0, 1.0, 3.0], &[]);
        b.measure = Some("b".into());
        let c = fact("c#2", FactForm::Maximum, "x", Some("iyear"), &[5.0], &[]);
        let mut d = fact("c#3", FactForm::Trend, "d", None, &[0.5], &[("iyear", "")]);
        d.measure = Some("d".into());
        let (plan, cap) = caption(&[a, b, c, d]);
        assert!(plan.stitches.iter().all(|s| s.pattern == StitchPattern::Plain));
        assert_eq!(plan.fact_ids(), vec!["c#0", "c#1", "c#2", "c#3"]);
        assert_eq!(cap.text.matches(". ").count(), 3);
        for w in cap.segments.windows(2) {
            assert!(w[0].end <= w[1].start);
        }
    }

    #[test]
    fn values_appear_verbatim() {
        let facts = [
            fact("c#0", FactForm::Range, "attack_count", None, &[42.5, 1.25, 43.75], &[]),
            fact("c#1", FactForm::Share, "Armed Assault", Some("weaptype1"), &[37.21], &[]),
        ];
        let (_, cap) = caption(&facts);
        for v in ["42.5", "1.25", "43.75", "37.21"] {
            assert!(cap.text.contains(v), "{v} missing from {}", cap.text);
        }
    }

    #[test]
    fn acronyms_and_proper_nouns_keep_case() {
        let mut v = vocab();
        v.proper_nouns.insert("Japan".into());
        assert_eq!(v.value("USA"), "USA");
        assert_eq!(v.value("Japan"), "Japan");
        assert_eq!(v.value("Tourists"), "tourists");
        assert_eq!(v.value("XL"), "XL");
        assert_eq!(v.value("L"), "L");
        assert_eq!(v.value("A Team"), "a team");
    }
}
