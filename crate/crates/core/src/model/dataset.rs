use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FieldType, ModelError};

/// One cell of the shared dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Null,
    Number(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number(n) => Some(*n),
            Value::Text(s) => parse_finite(s),
            Value::Null => None,
        }
    }

    fn from_cell(cell: &str) -> Value {
        let cell = cell.trim();
        if cell.is_empty() {
            Value::Null
        } else if let Some(n) = parse_finite(cell) {
            Value::Number(n)
        } else {
            Value::Text(cell.to_string())
        }
    }

    fn from_json(v: &serde_json::Value) -> Result<Value, ModelError> {
        Ok(match v {
            serde_json::Value::Null => Value::Null,
            serde_json::Value::Number(n) => match n.as_f64() {
                Some(x) if x.is_finite() => Value::Number(x),
                _ => Value::Null,
            },
            serde_json::Value::String(s) => Value::Text(s.clone()),
            serde_json::Value::Bool(b) => Value::Text(b.to_string()),
            other => {
                return Err(ModelError::MalformedData(format!(
                    "nested value {other} in a flat row"
                )))
            }
        })
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Number(n) => f.write_str(&crate::format_number(*n)),
            Value::Text(s) => f.write_str(s),
        }
    }
}

fn parse_finite(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Presentation metadata carried alongside the dataset. All optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Unit suffix per attribute, e.g. `Horsepower -> bhp`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub units: BTreeMap<String, String>,
    /// Human label per attribute, e.g. `weaptype1 -> weapon type`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
    /// Attributes whose values keep their capitalization in captions.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub proper_nouns: BTreeSet<String>,
}

/// Tabular data shared by every chart of an ensemble.
///
/// Columns are kept in sorted attribute order; every row holds exactly one
/// value per column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: BTreeMap<String, FieldType>,
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Builds a dataset from rows keyed by attribute. Missing keys become nulls.
    pub fn from_records(
        records: Vec<BTreeMap<String, Value>>,
        declared: Option<BTreeMap<String, FieldType>>,
    ) -> Dataset {
        let mut names: BTreeSet<String> = records.iter().flat_map(|r| r.keys().cloned()).collect();
        if let Some(d) = &declared {
            names.extend(d.keys().cloned());
        }
        let columns: Vec<String> = names.into_iter().collect();
        let rows: Vec<Vec<Value>> = records
            .into_iter()
            .map(|mut r| {
                columns
                    .iter()
                    .map(|c| r.remove(c).unwrap_or(Value::Null))
                    .collect()
            })
            .collect();
        let schema = columns
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let ty = declared
                    .as_ref()
                    .and_then(|d| d.get(c).copied())
                    .unwrap_or_else(|| infer_type(rows.iter().map(|r| &r[i])));
                (c.clone(), ty)
            })
            .collect();
        Dataset {
            schema,
            columns,
            rows,
            meta: DatasetMeta::default(),
        }
    }

    /// Parses CSV text with a header row.
    pub fn from_csv(text: &str) -> Result<Dataset, ModelError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| ModelError::MalformedData(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let unique: BTreeSet<&String> = headers.iter().collect();
        if unique.len() != headers.len() {
            return Err(ModelError::MalformedData("duplicate CSV header".into()));
        }
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| ModelError::MalformedData(e.to_string()))?;
            records.push(
                headers
                    .iter()
                    .zip(rec.iter())
                    .map(|(h, cell)| (h.clone(), Value::from_cell(cell)))
                    .collect(),
            );
        }
        let mut ds = Dataset::from_records(records, None);
        if ds.columns.is_empty() {
            ds = Dataset::from_records(
                Vec::new(),
                Some(headers.into_iter().map(|h| (h, FieldType::Nominal)).collect()),
            );
        }
        Ok(ds)
    }

    /// Parses a JSON array of flat objects.
    pub fn from_json_rows(text: &str) -> Result<Dataset, ModelError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ModelError::MalformedData(e.to_string()))?;
        Dataset::from_json_value(&v, None)
    }

    pub(crate) fn from_json_value(
        v: &serde_json::Value,
        declared: Option<BTreeMap<String, FieldType>>,
    ) -> Result<Dataset, ModelError> {
        let arr = v
            .as_array()
            .ok_or_else(|| ModelError::MalformedData("rows must be a JSON array".into()))?;
        let mut records = Vec::with_capacity(arr.len());
        for row in arr {
            let obj = row
                .as_object()
                .ok_or_else(|| ModelError::MalformedData("each row must be an object".into()))?;
            let mut rec = BTreeMap::new();
            for (k, cell) in obj {
                rec.insert(k.clone(), Value::from_json(cell)?);
            }
            records.push(rec);
        }
        Ok(Dataset::from_records(records, declared))
    }

    pub fn schema(&self) -> &BTreeMap<String, FieldType> {
        &self.schema
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.schema.contains_key(name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.binary_search_by(|c| c.as_str().cmp(name)).ok()
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Human label for an attribute: configured label, else underscores to
    /// spaces in lowercase.
    pub fn label(&self, attr: &str) -> String {
        match self.meta.labels.get(attr) {
            Some(l) => l.clone(),
            None => attr.replace('_', " ").to_lowercase(),
        }
    }

    pub fn unit(&self, attr: &str) -> Option<&str> {
        self.meta.units.get(attr).map(String::as_str)
    }

    pub(crate) fn to_json_rows(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let obj: serde_json::Map<String, serde_json::Value> = self
                        .columns
                        .iter()
                        .zip(r)
                        .map(|(c, v)| (c.clone(), serde_json::to_value(v).unwrap()))
                        .collect();
                    serde_json::Value::Object(obj)
                })
                .collect(),
        )
    }
}

fn infer_type<'a>(values: impl Iterator<Item = &'a Value>) -> FieldType {
    let mut seen = false;
    let mut numeric = true;
    let mut temporal = true;
    for v in values {
        match v {
            Value::Null => continue,
            Value::Number(_) => temporal = false,
            Value::Text(s) => {
                numeric = false;
                if crate::facts::parse_temporal(s).is_none() {
                    temporal = false;
                }
            }
        }
        seen = true;
    }
    match (seen, numeric, temporal) {
        (false, _, _) => FieldType::Nominal,
        (true, true, _) => FieldType::Quantitative,
        (true, false, true) => FieldType::Temporal,
        _ => FieldType::Nominal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_types_are_inferred() {
        let ds = Dataset::from_csv("name,hp,date\nvw,90,2020-01-02\nbmw,,2021-03-04\n").unwrap();
        assert_eq!(ds.schema()["hp"], FieldType::Quantitative);
        assert_eq!(ds.schema()["name"], FieldType::Nominal);
        assert_eq!(ds.schema()["date"], FieldType::Temporal);
        assert_eq!(ds.len(), 2);
        let hp = ds.column_index("hp").unwrap();
        assert!(ds.rows()[1][hp].is_null());
    }

    #[test]
    fn json_rows_fill_missing_with_null() {
        let ds = Dataset::from_json_rows(r#"[{"a":1,"b":"x"},{"a":2}]"#).unwrap();
        let b = ds.column_index("b").unwrap();
        assert_eq!(ds.rows()[1][b], Value::Null);
    }

    #[test]
    fn nested_json_is_rejected() {
        assert!(Dataset::from_json_rows(r#"[{"a":[1]}]"#).is_err());
    }

    #[test]
    fn non_finite_numbers_are_text() {
        let ds = Dataset::from_csv("a\nNaN\n").unwrap();
        assert_eq!(ds.rows()[0][0], Value::Text("NaN".into()));
    }

    #[test]
    fn labels_default_to_humanized_names() {
        let mut ds = Dataset::from_csv("Miles_per_Gallon\n1\n").unwrap();
        assert_eq!(ds.label("Miles_per_Gallon"), "miles per gallon");
        ds.meta.labels.insert("Miles_per_Gallon".into(), "fuel economy".into());
        assert_eq!(ds.label("Miles_per_Gallon"), "fuel economy");
    }
}
