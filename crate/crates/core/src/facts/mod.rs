//! Data facts: extraction from a chart's data and neighbourhood ranking.

mod extract;
mod rank;
pub mod stats;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_facts, Extraction};
pub(crate) use extract::parse_temporal;
pub use rank::{fact_weight, rank_and_select, rank_and_select_with, RankParams, RankedFact, RankedFacts, SELECTED_PER_CHART};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FactError {
    #[error("chart {0}: no rows left after excluding nulls and applying filters")]
    EmptyAfterFiltering(String),
    #[error("chart {chart}: attribute {field:?} is not in the dataset")]
    UnknownAttribute { chart: String, field: String },
    #[error("chart has no neighbours in its backbone")]
    NoNeighbors,
    #[error("fact weights must be nonnegative and not all zero; the discount must be at least 1")]
    InvalidWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactWarning {
    /// Only categorical bindings; share facts were extracted instead.
    NoQuantitativeChannel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactForm {
    Minimum,
    Maximum,
    SecondMaximum,
    Mean,
    Range,
    Share,
    RatioComparison,
    Trend,
    Correlation,
    Outlier,
}

impl FactForm {
    /// 1: single entity, 2: relation between entities or attributes,
    /// 3: statement about the whole distribution.
    pub fn level(self) -> u8 {
        match self {
            FactForm::Minimum
            | FactForm::Maximum
            | FactForm::SecondMaximum
            | FactForm::Mean
            | FactForm::Range
            | FactForm::Share => 1,
            FactForm::RatioComparison | FactForm::Trend | FactForm::Correlation => 2,
            FactForm::Outlier => 3,
        }
    }
}

impl fmt::Display for FactForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).unwrap();
        f.write_str(s.as_str().unwrap())
    }
}

/// An attribute/value pair mentioned by a fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub attribute: String,
    /// Display form, unit suffix included.
    pub value: String,
}

impl Entity {
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Entity {
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

/// A typed statement about one chart's data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFact {
    pub id: String,
    pub form: FactForm,
    pub level: u8,
    pub attributes: BTreeSet<String>,
    /// What the fact is about: an entity value, or an attribute name for
    /// distribution-wide facts.
    pub subject: String,
    /// Attribute the subject value belongs to, when the subject is a value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_attribute: Option<String>,
    /// Measured attribute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    /// Numbers shown when the fact is realized, already rounded for display.
    pub values: Vec<f64>,
    /// Other entities mentioned: context keys, or the compared entities of a
    /// ratio.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entities: Vec<Entity>,
    pub source_chart: String,
}

/// Identity used for duplicate discounting.
pub type FactKey<'a> = (FactForm, u8, &'a BTreeSet<String>, &'a str);

impl DataFact {
    pub fn key(&self) -> FactKey<'_> {
        (self.form, self.level, &self.attributes, self.subject.as_str())
    }

    pub fn value(&self) -> Option<f64> {
        self.values.first().copied()
    }

    /// One-line bulleted rendering, used by the fact picker.
    pub fn summary(&self) -> String {
        let vals: Vec<String> = self.values.iter().map(|v| crate::format_number(*v)).collect();
        format!(
            "{} {} of {} ({})",
            self.form,
            self.measure.as_deref().unwrap_or(""),
            self.subject,
            vals.join(", ")
        )
    }
}
