//! Chart ensembles: the dataset plus the declarative chart specs built on it.
//!
//! A chart is reduced to the triple the rest of the engine compares: one mark,
//! a set of channel bindings keyed by channel slot, and a set of
//! transformations keyed by `(kind, target)`.

mod dataset;
mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{Dataset, DatasetMeta, Value};
pub use parse::{dataset_from_file, load_ensemble, parse_ensemble, LoadError, Loaded};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed spec: {0}")]
    MalformedSpec(String),
    #[error("chart {chart}: unknown attribute {field:?}")]
    UnknownAttribute { chart: String, field: String },
    #[error("duplicate chart id {0:?}")]
    DuplicateChartId(String),
    #[error("malformed data: {0}")]
    MalformedData(String),
    #[error("ensemble references a dataset file but none was supplied")]
    MissingDataset,
}

/// Non-fatal issue found while loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<String>,
    pub message: String,
}

impl Warning {
    pub fn new(chart: Option<&str>, message: impl Into<String>) -> Self {
        Warning {
            chart: chart.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.chart {
            Some(c) => write!(f, "chart {c}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(ModelError::MalformedSpec(format!(
                        "unknown {} {other:?}", stringify!($name).to_lowercase()
                    ))),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum!(
    /// Graphical mark. `circle` is kept distinct from `point` as in the
    /// declarative grammar the inputs come from.
    Mark {
        Bar => "bar",
        Line => "line",
        Point => "point",
        Circle => "circle",
        Area => "area",
        Rect => "rect",
        Tick => "tick",
    }
);

string_enum!(
    /// Encoding slot. Declaration order doubles as the slot order.
    Channel {
        X => "x",
        Y => "y",
        Color => "color",
        Size => "size",
        Shape => "shape",
        Row => "row",
        Column => "column",
    }
);

string_enum!(
    FieldType {
        Quantitative => "quantitative",
        Nominal => "nominal",
        Ordinal => "ordinal",
        Temporal => "temporal",
    }
);

string_enum!(
    TransformKind {
        Aggregate => "aggregate",
        Bin => "bin",
        Sort => "sort",
        Filter => "filter",
        TimeUnit => "timeUnit",
    }
);

impl FieldType {
    pub fn is_categorical(self) -> bool {
        !matches!(self, FieldType::Quantitative)
    }
}

/// A data attribute bound to a channel slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelBinding {
    pub field: String,
    #[serde(rename = "type")]
    pub field_type: FieldType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transformation {
    pub kind: TransformKind,
    /// Attribute name, or a channel name standing for its bound attribute.
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
}

impl Transformation {
    /// Matching key used by the diff.
    pub fn key(&self) -> (TransformKind, &str) {
        (self.kind, self.target.as_str())
    }
}

/// One chart of the ensemble.
///
/// Transformations are kept sorted by [`Transformation::key`] with no
/// duplicate keys, which the linear-time diff relies on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub id: String,
    pub mark: Mark,
    pub channels: BTreeMap<Channel, ChannelBinding>,
    #[serde(default)]
    pub transforms: Vec<Transformation>,
    pub created_at: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}

impl ChartSpec {
    /// Number of specifications: bound channels, transforms, and the mark.
    pub fn spec_count(&self) -> usize {
        self.channels.len() + self.transforms.len() + 1
    }

    /// Resolves a transform target to the attribute it refers to.
    pub fn resolve_target<'a>(&'a self, target: &'a str) -> &'a str {
        match Channel::from_str(target) {
            Ok(ch) => self
                .channels
                .get(&ch)
                .map(|b| b.field.as_str())
                .unwrap_or(target),
            Err(_) => target,
        }
    }

    /// Dataset attributes bound in channels or referenced by transforms.
    pub fn attribute_set(&self) -> BTreeSet<String> {
        let mut set: BTreeSet<String> = self.channels.values().map(|b| b.field.clone()).collect();
        for t in &self.transforms {
            set.insert(self.resolve_target(&t.target).to_string());
        }
        set
    }

    /// Ordering used wherever "the simplest, earliest chart" is picked.
    pub fn simplicity_key(&self) -> (usize, i64, &str) {
        (self.spec_count(), self.created_at, self.id.as_str())
    }

    /// The aggregate operation applied to `field`, if any.
    pub fn aggregate_of(&self, field: &str) -> Option<&str> {
        self.transforms
            .iter()
            .find(|t| t.kind == TransformKind::Aggregate && self.resolve_target(&t.target) == field)
            .map(|t| t.param.as_deref().unwrap_or("mean"))
    }

    pub fn transform_on(&self, kind: TransformKind, field: &str) -> Option<&Transformation> {
        self.transforms
            .iter()
            .find(|t| t.kind == kind && self.resolve_target(&t.target) == field)
    }

    pub(crate) fn normalize(&mut self) -> Result<(), ModelError> {
        self.transforms
            .sort_by(|a, b| a.key().cmp(&b.key()).then_with(|| a.param.cmp(&b.param)));
        for w in self.transforms.windows(2) {
            if w[0].key() == w[1].key() {
                return Err(ModelError::MalformedSpec(format!(
                    "chart {}: duplicate {} transform on {:?}",
                    self.id, w[0].kind, w[0].target
                )));
            }
        }
        Ok(())
    }
}

/// A dataset and the charts drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartEnsemble {
    pub dataset: Dataset,
    pub charts: Vec<ChartSpec>,
}

impl ChartEnsemble {
    pub fn chart(&self, id: &str) -> Option<&ChartSpec> {
        self.charts.iter().find(|c| c.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.charts.iter().position(|c| c.id == id)
    }

    pub fn ids(&self) -> Vec<String> {
        self.charts.iter().map(|c| c.id.clone()).collect()
    }

    /// Canonical JSON form with the dataset inlined.
    pub fn to_json(&self) -> serde_json::Value {
        let mut dataset = serde_json::Map::new();
        dataset.insert("inline".into(), self.dataset.to_json_rows());
        dataset.insert(
            "schema".into(),
            serde_json::to_value(self.dataset.schema()).unwrap(),
        );
        let meta = serde_json::to_value(&self.dataset.meta).unwrap();
        if let serde_json::Value::Object(m) = meta {
            dataset.extend(m);
        }
        serde_json::json!({
            "dataset": dataset,
            "charts": self.charts,
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(&self.to_json()).unwrap();
        hex::encode(Sha256::digest(&bytes))
    }

    /// Sub-ensemble with the given charts removed; file order is preserved.
    pub fn without(&self, excluded: &BTreeSet<String>) -> ChartEnsemble {
        ChartEnsemble {
            dataset: self.dataset.clone(),
            charts: self
                .charts
                .iter()
                .filter(|c| !excluded.contains(&c.id))
                .cloned()
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(channels: &[(Channel, &str)], transforms: &[(TransformKind, &str)]) -> ChartSpec {
        let mut c = ChartSpec {
            id: "c".into(),
            mark: Mark::Bar,
            channels: channels
                .iter()
                .map(|(ch, f)| {
                    (
                        *ch,
                        ChannelBinding {
                            field: f.to_string(),
                            field_type: FieldType::Nominal,
                        },
                    )
                })
                .collect(),
            transforms: transforms
                .iter()
                .map(|(k, t)| Transformation {
                    kind: *k,
                    target: t.to_string(),
                    param: None,
                })
                .collect(),
            created_at: 0,
            title: None,
        };
        c.normalize().unwrap();
        c
    }

    #[test]
    fn attribute_set_single_channel() {
        let c = chart(&[(Channel::X, "a")], &[]);
        assert_eq!(c.attribute_set(), BTreeSet::from(["a".to_string()]));
    }

    #[test]
    fn attribute_set_is_union_of_bindings_and_targets() {
        let c = chart(
            &[(Channel::X, "a"), (Channel::Color, "b")],
            &[(TransformKind::Filter, "c")],
        );
        let expected: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(c.attribute_set(), expected);
    }

    #[test]
    fn channel_targets_resolve_to_fields() {
        let c = chart(&[(Channel::Y, "mpg")], &[(TransformKind::Aggregate, "y")]);
        assert_eq!(c.attribute_set(), BTreeSet::from(["mpg".to_string()]));
        assert_eq!(c.aggregate_of("mpg"), Some("mean"));
    }

    #[test]
    fn spec_count_includes_mark() {
        let c = chart(&[(Channel::X, "a"), (Channel::Y, "b")], &[(TransformKind::Sort, "a")]);
        assert_eq!(c.spec_count(), 4);
    }

    #[test]
    fn duplicate_transform_keys_are_rejected() {
        let mut c = chart(&[(Channel::X, "a")], &[]);
        c.transforms = vec![
            Transformation { kind: TransformKind::Bin, target: "a".into(), param: None },
            Transformation { kind: TransformKind::Bin, target: "a".into(), param: Some("5".into()) },
        ];
        assert!(matches!(c.normalize(), Err(ModelError::MalformedSpec(_))));
    }
}
