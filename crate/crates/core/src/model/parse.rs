use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{Map, Value as Json};

use super::{
    Channel, ChannelBinding, ChartEnsemble, ChartSpec, Dataset, DatasetMeta, FieldType, Mark,
    ModelError, TransformKind, Transformation, Warning,
};

/// A validated ensemble plus everything that was tolerated on the way in.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub ensemble: ChartEnsemble,
    pub warnings: Vec<Warning>,
}

const TOP_KEYS: &[&str] = &["dataset", "charts"];
const DATASET_KEYS: &[&str] = &["path", "inline", "csv", "schema", "units", "labels", "proper_nouns"];
const CHART_KEYS: &[&str] = &[
    "id", "mark", "channels", "encoding", "transforms", "transform", "created_at", "title",
];
const CHANNEL_KEYS: &[&str] = &["channel", "field", "type", "aggregate", "bin", "timeUnit", "sort"];
const TRANSFORM_KEYS: &[&str] = &["kind", "target", "param"];
const MAX_QUIET_ATTRIBUTES: usize = 3;

/// Parses an ensemble document.
///
/// `data` supplies the dataset when the document points at a file (or
/// overrides an inline one); presentation metadata in the document's dataset
/// object is applied either way.
pub fn parse_ensemble(doc: &str, data: Option<Dataset>) -> Result<Loaded, ModelError> {
    let root: Json =
        serde_json::from_str(doc).map_err(|e| ModelError::MalformedSpec(e.to_string()))?;
    parse_ensemble_value(&root, data)
}

/// Reads an ensemble file, resolving a `dataset.path` relative to it.
/// `data_override` takes precedence over whatever the file names.
pub fn load_ensemble(path: &Path, data_override: Option<&Path>) -> Result<Loaded, LoadError> {
    let text = read(path)?;
    let root: Json =
        serde_json::from_str(&text).map_err(|e| ModelError::MalformedSpec(e.to_string()))?;
    let data_path: Option<PathBuf> = match data_override {
        Some(p) => Some(p.to_path_buf()),
        None => root
            .get("dataset")
            .and_then(|d| d.get("path"))
            .and_then(Json::as_str)
            .map(|p| path.parent().unwrap_or(Path::new(".")).join(p)),
    };
    let data = match data_path {
        Some(p) => Some(dataset_from_file(&p)?),
        None => None,
    };
    Ok(parse_ensemble_value(&root, data)?)
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a CSV or JSON-rows dataset, choosing by extension.
pub fn dataset_from_file(path: &Path) -> Result<Dataset, LoadError> {
    let text = read(path)?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    Ok(if is_json {
        Dataset::from_json_rows(&text)?
    } else {
        Dataset::from_csv(&text)?
    })
}

pub(crate) fn parse_ensemble_value(root: &Json, data: Option<Dataset>) -> Result<Loaded, ModelError> {
    let mut warnings = Vec::new();
    let obj = root
        .as_object()
        .ok_or_else(|| ModelError::MalformedSpec("ensemble must be a JSON object".into()))?;
    warn_unknown(obj, TOP_KEYS, None, "ensemble", &mut warnings);

    let empty = Map::new();
    let ds_obj = match obj.get("dataset") {
        Some(Json::Object(m)) => m,
        Some(_) => return Err(ModelError::MalformedSpec("dataset must be an object".into())),
        None => &empty,
    };
    warn_unknown(ds_obj, DATASET_KEYS, None, "dataset", &mut warnings);
    let mut dataset = match data {
        Some(d) => d,
        None => inline_dataset(ds_obj)?,
    };
    dataset.meta = parse_meta(ds_obj)?;

    let charts_json = obj
        .get("charts")
        .and_then(Json::as_array)
        .ok_or_else(|| ModelError::MalformedSpec("charts must be an array".into()))?;
    if charts_json.is_empty() {
        return Err(ModelError::MalformedSpec("ensemble has no charts".into()));
    }

    let mut seen = HashSet::new();
    let mut charts = Vec::with_capacity(charts_json.len());
    for (index, cj) in charts_json.iter().enumerate() {
        let chart = parse_chart(cj, index, &dataset, &mut warnings)?;
        if !seen.insert(chart.id.clone()) {
            return Err(ModelError::DuplicateChartId(chart.id));
        }
        charts.push(chart);
    }
    Ok(Loaded {
        ensemble: ChartEnsemble { dataset, charts },
        warnings,
    })
}

fn inline_dataset(ds: &Map<String, Json>) -> Result<Dataset, ModelError> {
    let declared: Option<BTreeMap<String, FieldType>> = match ds.get("schema") {
        Some(s) => Some(
            serde_json::from_value(s.clone())
                .map_err(|e| ModelError::MalformedData(format!("schema: {e}")))?,
        ),
        None => None,
    };
    if let Some(rows) = ds.get("inline") {
        Dataset::from_json_value(rows, declared)
    } else if let Some(csv) = ds.get("csv").and_then(Json::as_str) {
        Dataset::from_csv(csv)
    } else if ds.contains_key("path") {
        Err(ModelError::MissingDataset)
    } else {
        Err(ModelError::MalformedSpec("dataset needs path, inline or csv".into()))
    }
}

fn parse_meta(ds: &Map<String, Json>) -> Result<DatasetMeta, ModelError> {
    let mut meta = DatasetMeta::default();
    let field = |k: &str| ds.get(k).cloned().unwrap_or(Json::Null);
    let bad = |k: &str, e: serde_json::Error| ModelError::MalformedData(format!("{k}: {e}"));
    if ds.contains_key("units") {
        meta.units = serde_json::from_value(field("units")).map_err(|e| bad("units", e))?;
    }
    if ds.contains_key("labels") {
        meta.labels = serde_json::from_value(field("labels")).map_err(|e| bad("labels", e))?;
    }
    if ds.contains_key("proper_nouns") {
        meta.proper_nouns =
            serde_json::from_value(field("proper_nouns")).map_err(|e| bad("proper_nouns", e))?;
    }
    Ok(meta)
}

fn warn_unknown(
    obj: &Map<String, Json>,
    known: &[&str],
    chart: Option<&str>,
    what: &str,
    warnings: &mut Vec<Warning>,
) {
    for k in obj.keys() {
        if !known.contains(&k.as_str()) {
            warnings.push(Warning::new(chart, format!("ignored unknown {what} key {k:?}")));
        }
    }
}

fn malformed(chart: &str, msg: impl std::fmt::Display) -> ModelError {
    ModelError::MalformedSpec(format!("chart {chart}: {msg}"))
}

fn parse_chart(
    cj: &Json,
    index: usize,
    dataset: &Dataset,
    warnings: &mut Vec<Warning>,
) -> Result<ChartSpec, ModelError> {
    let obj = cj
        .as_object()
        .ok_or_else(|| ModelError::MalformedSpec(format!("chart #{index} is not an object")))?;
    let id = match obj.get("id") {
        Some(Json::String(s)) if !s.is_empty() => s.clone(),
        Some(Json::Number(n)) => n.to_string(),
        _ => return Err(ModelError::MalformedSpec(format!("chart #{index} has no id"))),
    };
    warn_unknown(obj, CHART_KEYS, Some(&id), "chart", warnings);

    let mark = match obj.get("mark") {
        Some(Json::String(s)) => Mark::from_str(s),
        Some(Json::Object(m)) => match m.get("type").and_then(Json::as_str) {
            Some(s) => Mark::from_str(s),
            None => Err(malformed(&id, "mark object without type")),
        },
        _ => Err(malformed(&id, "missing mark")),
    }
    .map_err(|e| malformed(&id, e))?;

    let mut transforms = Vec::new();
    let channels = parse_channels(
        obj.get("channels").or_else(|| obj.get("encoding")),
        &id,
        &mut transforms,
        warnings,
    )?;
    if channels.is_empty() {
        return Err(malformed(&id, "no channel bound"));
    }

    if let Some(tj) = obj.get("transforms").or_else(|| obj.get("transform")) {
        let arr = tj
            .as_array()
            .ok_or_else(|| malformed(&id, "transforms must be an array"))?;
        for t in arr {
            if let Some(t) = parse_transform(t, &id, warnings)? {
                transforms.push(t);
            }
        }
    }

    let created_at = match obj.get("created_at") {
        None | Some(Json::Null) => index as i64,
        Some(Json::Number(n)) => n
            .as_i64()
            .or_else(|| n.as_f64().map(|f| f as i64))
            .ok_or_else(|| malformed(&id, "bad created_at"))?,
        Some(Json::String(s)) => chrono::DateTime::parse_from_rfc3339(s)
            .map(|t| t.timestamp())
            .map_err(|e| malformed(&id, format!("created_at: {e}")))?,
        Some(_) => return Err(malformed(&id, "bad created_at")),
    };
    let title = match obj.get("title") {
        Some(Json::String(s)) => Some(s.clone()),
        None | Some(Json::Null) => None,
        Some(_) => return Err(malformed(&id, "title must be a string")),
    };

    let mut chart = ChartSpec {
        id,
        mark,
        channels,
        transforms,
        created_at,
        title,
    };
    chart.normalize()?;
    validate_attributes(&chart, dataset)?;
    let attrs = chart.attribute_set().len();
    if attrs > MAX_QUIET_ATTRIBUTES {
        warnings.push(Warning::new(
            Some(&chart.id),
            format!("binds {attrs} data attributes (more than {MAX_QUIET_ATTRIBUTES})"),
        ));
    }
    Ok(chart)
}

fn parse_channels(
    cj: Option<&Json>,
    id: &str,
    transforms: &mut Vec<Transformation>,
    warnings: &mut Vec<Warning>,
) -> Result<BTreeMap<Channel, ChannelBinding>, ModelError> {
    let mut out = BTreeMap::new();
    let entries: Vec<(String, &Map<String, Json>)> = match cj {
        None => Vec::new(),
        Some(Json::Object(m)) => m
            .iter()
            .map(|(k, v)| {
                v.as_object()
                    .map(|o| (k.clone(), o))
                    .ok_or_else(|| malformed(id, format!("channel {k} must be an object")))
            })
            .collect::<Result<_, _>>()?,
        Some(Json::Array(a)) => a
            .iter()
            .map(|v| {
                let o = v
                    .as_object()
                    .ok_or_else(|| malformed(id, "channel entry must be an object"))?;
                let name = o
                    .get("channel")
                    .and_then(Json::as_str)
                    .ok_or_else(|| malformed(id, "channel entry without channel"))?;
                Ok((name.to_string(), o))
            })
            .collect::<Result<_, ModelError>>()?,
        Some(_) => return Err(malformed(id, "channels must be an object or array")),
    };
    for (name, o) in entries {
        let channel = match Channel::from_str(&name) {
            Ok(c) => c,
            Err(_) => {
                warnings.push(Warning::new(Some(id), format!("ignored unsupported channel {name:?}")));
                continue;
            }
        };
        warn_unknown(o, CHANNEL_KEYS, Some(id), "channel", warnings);
        let field = o
            .get("field")
            .and_then(Json::as_str)
            .ok_or_else(|| malformed(id, format!("channel {name} has no field")))?
            .to_string();
        let field_type = o
            .get("type")
            .and_then(Json::as_str)
            .ok_or_else(|| malformed(id, format!("channel {name} has no type")))
            .and_then(|t| FieldType::from_str(t).map_err(|e| malformed(id, e)))?;
        if out
            .insert(channel, ChannelBinding { field: field.clone(), field_type })
            .is_some()
        {
            return Err(malformed(id, format!("channel {name} bound twice")));
        }
        // Inline encoding transforms are lifted into the transform set.
        let inline = [
            ("aggregate", TransformKind::Aggregate),
            ("bin", TransformKind::Bin),
            ("timeUnit", TransformKind::TimeUnit),
            ("sort", TransformKind::Sort),
        ];
        for (key, kind) in inline {
            let param = match o.get(key) {
                None | Some(Json::Null) | Some(Json::Bool(false)) => continue,
                Some(Json::Bool(true)) => None,
                Some(Json::String(s)) => Some(s.clone()),
                Some(other) => Some(other.to_string()),
            };
            transforms.push(Transformation {
                kind,
                target: field.clone(),
                param,
            });
        }
    }
    Ok(out)
}

fn parse_transform(
    t: &Json,
    id: &str,
    warnings: &mut Vec<Warning>,
) -> Result<Option<Transformation>, ModelError> {
    let o = t
        .as_object()
        .ok_or_else(|| malformed(id, "transform must be an object"))?;
    let Some(kind) = o.get("kind").and_then(Json::as_str) else {
        warnings.push(Warning::new(Some(id), "ignored transform without kind"));
        return Ok(None);
    };
    warn_unknown(o, TRANSFORM_KEYS, Some(id), "transform", warnings);
    let kind = TransformKind::from_str(kind).map_err(|e| malformed(id, e))?;
    let target = o
        .get("target")
        .and_then(Json::as_str)
        .ok_or_else(|| malformed(id, format!("{kind} transform has no target")))?
        .to_string();
    let param = match o.get("param") {
        None | Some(Json::Null) => None,
        Some(Json::String(s)) => Some(s.clone()),
        Some(other) => Some(other.to_string()),
    };
    Ok(Some(Transformation { kind, target, param }))
}

fn validate_attributes(chart: &ChartSpec, dataset: &Dataset) -> Result<(), ModelError> {
    for b in chart.channels.values() {
        if !dataset.has_attribute(&b.field) {
            return Err(ModelError::UnknownAttribute {
                chart: chart.id.clone(),
                field: b.field.clone(),
            });
        }
    }
    for t in &chart.transforms {
        let attr = chart.resolve_target(&t.target);
        if !dataset.has_attribute(attr) {
            return Err(ModelError::UnknownAttribute {
                chart: chart.id.clone(),
                field: t.target.clone(),
            });
        }
    }
    Ok(())
}
