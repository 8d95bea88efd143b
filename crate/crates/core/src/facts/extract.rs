use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

use super::stats::{self, round2};
use super::{DataFact, Entity, FactError, FactForm, FactWarning};
use crate::model::{Channel, ChartSpec, Dataset, FieldType, TransformKind, Value};

const DEFAULT_BINS: usize = 10;
const OUTLIER_SIGMAS: f64 = 2.0;
const MAX_OUTLIERS: usize = 3;
const SUBJECT_PRIORITY: [Channel; 7] = [
    Channel::Color,
    Channel::Shape,
    Channel::Row,
    Channel::Column,
    Channel::X,
    Channel::Y,
    Channel::Size,
];

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub facts: Vec<DataFact>,
    pub warnings: Vec<FactWarning>,
}

pub(crate) fn parse_temporal(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(t.naive_utc());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    for fmt in ["%Y-%m-%d", "%Y/%m/%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, fmt) {
            return d.and_hms_opt(0, 0, 0);
        }
    }
    None
}

/// Grouping/display value of one cell after bin and time-unit transforms.
#[derive(Debug, Clone, PartialEq)]
enum KeyVal {
    Num(f64),
    Range(f64, f64),
    Text(String),
}

impl KeyVal {
    fn sort_number(&self) -> Option<f64> {
        match self {
            KeyVal::Num(x) | KeyVal::Range(x, _) => Some(*x),
            KeyVal::Text(_) => None,
        }
    }

    fn display(&self) -> String {
        match self {
            KeyVal::Num(x) => crate::format_number(*x),
            KeyVal::Range(lo, hi) => format!("{} to {}", crate::format_number(*lo), crate::format_number(*hi)),
            KeyVal::Text(s) => s.clone(),
        }
    }
}

impl Eq for KeyVal {}

impl PartialOrd for KeyVal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for KeyVal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KeyVal::Text(a), KeyVal::Text(b)) => a.cmp(b),
            (KeyVal::Text(_), _) => Ordering::Greater,
            (_, KeyVal::Text(_)) => Ordering::Less,
            (a, b) => a.sort_number().unwrap().total_cmp(&b.sort_number().unwrap()),
        }
    }
}

struct Field {
    name: String,
    channel: Channel,
    field_type: FieldType,
    col: usize,
    aggregate: Option<String>,
    bins: Option<(f64, f64, usize)>,
    time_unit: Option<String>,
}

impl Field {
    fn derive(&self, v: &Value) -> KeyVal {
        if let (Some((lo, hi, n)), Some(x)) = (self.bins, v.as_number()) {
            let width = (hi - lo) / n as f64;
            if width <= 0.0 {
                return KeyVal::Range(lo, hi);
            }
            let k = (((x - lo) / width).floor() as usize).min(n - 1);
            let start = lo + width * k as f64;
            return KeyVal::Range(round2(start), round2(start + width));
        }
        if let Some(unit) = &self.time_unit {
            if let Value::Text(s) = v {
                if let Some(t) = parse_temporal(s) {
                    let n = match unit.as_str() {
                        "year" => Some(t.year() as f64),
                        "month" => Some(t.month() as f64),
                        "date" | "day" => Some(t.day() as f64),
                        "hours" | "hour" => Some(t.hour() as f64),
                        "minutes" => Some(t.minute() as f64),
                        _ => None,
                    };
                    if let Some(n) = n {
                        return KeyVal::Num(n);
                    }
                }
            }
        }
        match v {
            Value::Number(x) => KeyVal::Num(*x),
            Value::Text(s) => KeyVal::Text(s.clone()),
            Value::Null => KeyVal::Text(String::new()),
        }
    }

    fn categorical(&self) -> bool {
        self.field_type.is_categorical() || self.bins.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FilterOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

struct Predicate {
    col: usize,
    op: FilterOp,
    literal: String,
}

impl Predicate {
    /// Parses `"<op> <literal>"`; a bare literal means equality.
    fn parse(col: usize, param: &str) -> Option<Predicate> {
        let p = param.trim();
        let ops = [
            ("==", FilterOp::Eq),
            ("!=", FilterOp::Ne),
            (">=", FilterOp::Ge),
            ("<=", FilterOp::Le),
            (">", FilterOp::Gt),
            ("<", FilterOp::Lt),
            ("=", FilterOp::Eq),
        ];
        for (tok, op) in ops {
            if let Some(rest) = p.strip_prefix(tok) {
                return Some(Predicate { col, op, literal: rest.trim().to_string() });
            }
        }
        (!p.is_empty()).then(|| Predicate { col, op: FilterOp::Eq, literal: p.to_string() })
    }

    fn accepts(&self, row: &[Value]) -> bool {
        let v = &row[self.col];
        let ord = match (v.as_number(), self.literal.parse::<f64>().ok()) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            _ => v.to_string().cmp(&self.literal),
        };
        match self.op {
            FilterOp::Eq => ord == Ordering::Equal,
            FilterOp::Ne => ord != Ordering::Equal,
            FilterOp::Lt => ord == Ordering::Less,
            FilterOp::Le => ord != Ordering::Greater,
            FilterOp::Gt => ord == Ordering::Greater,
            FilterOp::Ge => ord != Ordering::Less,
        }
    }
}

/// One row of the chart's (possibly aggregated) data: a value per field.
type Record = Vec<Option<KeyVal>>;

struct Builder<'a> {
    chart: &'a ChartSpec,
    data: &'a Dataset,
    facts: Vec<DataFact>,
}

impl Builder<'_> {
    fn display(&self, field: &Field, v: &KeyVal) -> String {
        let base = v.display();
        match (self.data.unit(&field.name), v) {
            (Some(u), KeyVal::Num(_)) => format!("{base} {u}"),
            _ => base,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        form: FactForm,
        attributes: BTreeSet<String>,
        subject: String,
        subject_attribute: Option<String>,
        measure: Option<&str>,
        values: Vec<f64>,
        entities: Vec<Entity>,
    ) {
        self.facts.push(DataFact {
            id: format!("{}#{}", self.chart.id, self.facts.len()),
            form,
            level: form.level(),
            attributes,
            subject,
            subject_attribute,
            measure: measure.map(str::to_string),
            values: values.into_iter().map(round2).collect(),
            entities,
            source_chart: self.chart.id.clone(),
        });
    }
}

/// Extracts every applicable fact from the chart's data.
///
/// Rows with a null in any attribute the chart uses are dropped first, then
/// filter transforms apply. Rows are put in a canonical order before any
/// computation so the output does not depend on input row order.
pub fn extract_facts(chart: &ChartSpec, data: &Dataset) -> Result<Extraction, FactError> {
    let used = chart.attribute_set();
    let mut cols = BTreeMap::new();
    for a in &used {
        let col = data.column_index(a).ok_or_else(|| FactError::UnknownAttribute {
            chart: chart.id.clone(),
            field: a.clone(),
        })?;
        cols.insert(a.as_str(), col);
    }
    let predicates: Vec<Predicate> = chart
        .transforms
        .iter()
        .filter(|t| t.kind == TransformKind::Filter)
        .filter_map(|t| Predicate::parse(cols[chart.resolve_target(&t.target)], t.param.as_deref()?))
        .collect();
    let mut rows: Vec<&Vec<Value>> = data
        .rows()
        .iter()
        .filter(|r| cols.values().all(|&c| !r[c].is_null()))
        .filter(|r| predicates.iter().all(|p| p.accepts(r)))
        .collect();
    if rows.is_empty() {
        return Err(FactError::EmptyAfterFiltering(chart.id.clone()));
    }
    rows.sort_by(|a, b| {
        cols.values()
            .map(|&c| cmp_values(&a[c], &b[c]))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });

    let mut fields: Vec<Field> = Vec::new();
    for (&channel, binding) in &chart.channels {
        if fields.iter().any(|f| f.name == binding.field) {
            continue;
        }
        let col = cols[binding.field.as_str()];
        let bins = chart.transform_on(TransformKind::Bin, &binding.field).and_then(|t| {
            let n = t
                .param
                .as_deref()
                .and_then(|p| p.parse::<usize>().ok())
                .filter(|&n| n > 0)
                .unwrap_or(DEFAULT_BINS);
            let xs: Vec<f64> = rows.iter().filter_map(|r| r[col].as_number()).collect();
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (!xs.is_empty()).then_some((lo, hi, n))
        });
        fields.push(Field {
            name: binding.field.clone(),
            channel,
            field_type: binding.field_type,
            col,
            aggregate: chart.aggregate_of(&binding.field).map(str::to_string),
            bins,
            time_unit: chart
                .transform_on(TransformKind::TimeUnit, &binding.field)
                .map(|t| t.param.clone().unwrap_or_else(|| "year".into())),
        });
    }

    let aggregated = fields.iter().any(|f| f.aggregate.is_some());
    let (records, measures) = if aggregated {
        aggregate_records(&fields, &rows)
    } else {
        raw_records(&fields, &rows)
    };

    let mut b = Builder { chart, data, facts: Vec::new() };
    let mut warnings = Vec::new();
    if measures.is_empty() && !aggregated {
        warnings.push(FactWarning::NoQuantitativeChannel);
        category_shares(&mut b, &fields, &records);
        return Ok(Extraction { facts: b.facts, warnings });
    }

    for &m in &measures {
        let keys: Vec<usize> = if aggregated {
            (0..fields.len()).filter(|&i| fields[i].aggregate.is_none()).collect()
        } else {
            (0..fields.len()).filter(|&i| i != m).collect()
        };
        measure_facts(&mut b, &fields, &records, m, &keys, aggregated);
    }
    correlation_fact(&mut b, &fields, &records);
    Ok(Extraction { facts: b.facts, warnings })
}

fn cmp_values(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => x.total_cmp(y),
        (Value::Number(_), _) => Ordering::Less,
        (_, Value::Number(_)) => Ordering::Greater,
        _ => a.to_string().cmp(&b.to_string()),
    }
}

fn aggregate_records(fields: &[Field], rows: &[&Vec<Value>]) -> (Vec<Record>, Vec<usize>) {
    let dims: Vec<usize> = (0..fields.len()).filter(|&i| fields[i].aggregate.is_none()).collect();
    let measures: Vec<usize> = (0..fields.len()).filter(|&i| fields[i].aggregate.is_some()).collect();
    let mut groups: BTreeMap<Vec<KeyVal>, Vec<Vec<f64>>> = BTreeMap::new();
    for r in rows {
        let key: Vec<KeyVal> = dims.iter().map(|&d| fields[d].derive(&r[fields[d].col])).collect();
        let slot = groups.entry(key).or_insert_with(|| vec![Vec::new(); measures.len()]);
        for (k, &m) in measures.iter().enumerate() {
            let f = &fields[m];
            if f.aggregate.as_deref() == Some("count") {
                slot[k].push(1.0);
            } else if let Some(x) = r[f.col].as_number() {
                slot[k].push(x);
            }
        }
    }
    let records = groups
        .into_iter()
        .map(|(key, vals)| {
            let mut rec: Record = vec![None; fields.len()];
            for (k, &d) in dims.iter().enumerate() {
                rec[d] = Some(key[k].clone());
            }
            for (k, &m) in measures.iter().enumerate() {
                rec[m] = apply_aggregate(fields[m].aggregate.as_deref().unwrap_or("mean"), &vals[k]).map(KeyVal::Num);
            }
            rec
        })
        .collect();
    (records, measures)
}

fn apply_aggregate(op: &str, xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    match op {
        "sum" | "count" => Some(xs.iter().sum()),
        "min" => xs.iter().copied().reduce(f64::min),
        "max" => xs.iter().copied().reduce(f64::max),
        "median" => stats::median(xs),
        _ => stats::mean(xs),
    }
}

fn raw_records(fields: &[Field], rows: &[&Vec<Value>]) -> (Vec<Record>, Vec<usize>) {
    let measures: Vec<usize> = (0..fields.len())
        .filter(|&i| {
            let f = &fields[i];
            f.field_type == FieldType::Quantitative
                && f.bins.is_none()
                && rows.iter().all(|r| r[f.col].as_number().is_some())
        })
        .collect();
    let records = rows
        .iter()
        .map(|r| {
            fields
                .iter()
                .enumerate()
                .map(|(i, f)| {
                    Some(if measures.contains(&i) {
                        KeyVal::Num(r[f.col].as_number().unwrap())
                    } else {
                        f.derive(&r[f.col])
                    })
                })
                .collect()
        })
        .collect();
    (records, measures)
}

fn num(rec: &Record, i: usize) -> Option<f64> {
    match &rec[i] {
        Some(KeyVal::Num(x)) => Some(*x),
        _ => None,
    }
}

fn argmax(vals: &[f64], skip: Option<usize>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in vals.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        if best.is_none_or(|b| *v > vals[b]) {
            best = Some(i);
        }
    }
    best
}

fn argmin(vals: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in vals.iter().enumerate() {
        if best.is_none_or(|b| *v < vals[b]) {
            best = Some(i);
        }
    }
    best
}

fn measure_facts(
    b: &mut Builder<'_>,
    fields: &[Field],
    records: &[Record],
    m: usize,
    keys: &[usize],
    aggregated: bool,
) {
    let pts: Vec<&Record> = records.iter().filter(|r| num(r, m).is_some()).collect();
    if pts.is_empty() {
        return;
    }
    let vals: Vec<f64> = pts.iter().map(|r| num(r, m).unwrap()).collect();
    let measure = fields[m].name.as_str();
    let subject_key = SUBJECT_PRIORITY
        .iter()
        .find_map(|ch| keys.iter().copied().find(|&k| fields[k].channel == *ch));
    let record_attrs: BTreeSet<String> = std::iter::once(m)
        .chain(keys.iter().copied())
        .map(|i| fields[i].name.clone())
        .collect();
    let measure_only: BTreeSet<String> = BTreeSet::from([measure.to_string()]);

    // subject string, subject attribute, and context entities for a record
    let describe = |b: &Builder<'_>, rec: &Record| -> (String, String, Vec<Entity>) {
        let s = subject_key.unwrap();
        let subject = b.display(&fields[s], rec[s].as_ref().unwrap());
        let context = keys
            .iter()
            .filter(|&&k| k != s)
            .map(|&k| Entity::new(&fields[k].name, b.display(&fields[k], rec[k].as_ref().unwrap())))
            .collect();
        (subject, fields[s].name.clone(), context)
    };

    if subject_key.is_some() {
        let hi = argmax(&vals, None).unwrap();
        let (s, a, ctx) = describe(b, pts[hi]);
        b.push(FactForm::Maximum, record_attrs.clone(), s, Some(a), Some(measure), vec![vals[hi]], ctx);
        if pts.len() >= 2 {
            let lo = argmin(&vals).unwrap();
            let (s, a, ctx) = describe(b, pts[lo]);
            b.push(FactForm::Minimum, record_attrs.clone(), s, Some(a), Some(measure), vec![vals[lo]], ctx);
        }
        if pts.len() >= 3 {
            let second = argmax(&vals, Some(hi)).unwrap();
            let (s, a, ctx) = describe(b, pts[second]);
            b.push(FactForm::SecondMaximum, record_attrs.clone(), s, Some(a), Some(measure), vec![vals[second]], ctx);
        }
    }

    if pts.len() >= 2 {
        let mean = stats::mean(&vals).unwrap();
        b.push(FactForm::Mean, measure_only.clone(), measure.to_string(), None, Some(measure), vec![mean], vec![]);
    }
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    b.push(FactForm::Range, measure_only.clone(), measure.to_string(), None, Some(measure), vec![hi - lo, lo, hi], vec![]);

    // Single categorical dimension: shares and extreme-category ratio.
    if let [k] = keys {
        let k = *k;
        let distinct: BTreeSet<&KeyVal> = pts.iter().filter_map(|r| r[k].as_ref()).collect();
        if fields[k].categorical() && distinct.len() == pts.len() {
            let attrs = BTreeSet::from([measure.to_string(), fields[k].name.clone()]);
            let additive = aggregated
                && matches!(fields[m].aggregate.as_deref(), Some("sum") | Some("count"));
            let total: f64 = vals.iter().sum();
            if additive && pts.len() >= 2 && vals.iter().all(|v| *v >= 0.0) && total > 0.0 {
                let top = argmax(&vals, None).unwrap();
                let subject = b.display(&fields[k], pts[top][k].as_ref().unwrap());
                b.push(
                    FactForm::Share,
                    attrs.clone(),
                    subject,
                    Some(fields[k].name.clone()),
                    Some(measure),
                    vec![100.0 * vals[top] / total],
                    vec![],
                );
            }
            let (top, bottom) = (argmax(&vals, None).unwrap(), argmin(&vals).unwrap());
            if pts.len() >= 2 && top != bottom && vals[bottom] > 0.0 {
                let a = b.display(&fields[k], pts[top][k].as_ref().unwrap());
                let z = b.display(&fields[k], pts[bottom][k].as_ref().unwrap());
                let name = &fields[k].name;
                b.push(
                    FactForm::RatioComparison,
                    attrs,
                    format!("{a} vs. {z}"),
                    Some(name.clone()),
                    Some(measure),
                    vec![vals[top] / vals[bottom]],
                    vec![Entity::new(name, a), Entity::new(name, z)],
                );
            }
        }
    }

    trend_fact(b, fields, &pts, &vals, m, keys);

    if subject_key.is_some() && pts.len() >= 3 {
        let mean = stats::mean(&vals).unwrap();
        let sd = stats::std_dev(&vals).unwrap();
        if sd > 0.0 {
            let mut out: Vec<usize> = (0..pts.len())
                .filter(|&i| (vals[i] - mean).abs() > OUTLIER_SIGMAS * sd)
                .collect();
            out.sort_by(|&a, &c| (vals[c] - mean).abs().total_cmp(&(vals[a] - mean).abs()).then(a.cmp(&c)));
            out.truncate(MAX_OUTLIERS);
            out.sort();
            for i in out {
                let (s, a, ctx) = describe(b, pts[i]);
                b.push(FactForm::Outlier, record_attrs.clone(), s, Some(a), Some(measure), vec![vals[i]], ctx);
            }
        }
    }
}

fn trend_fact(b: &mut Builder<'_>, fields: &[Field], pts: &[&Record], vals: &[f64], m: usize, keys: &[usize]) {
    let [x] = keys else { return };
    let x = *x;
    let fx = &fields[x];
    if fx.channel != Channel::X || x == m {
        return;
    }
    let ordinal_rank: BTreeMap<&KeyVal, usize> = pts
        .iter()
        .filter_map(|r| r[x].as_ref())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    let xs: Option<Vec<f64>> = pts
        .iter()
        .map(|r| {
            let k = r[x].as_ref()?;
            match k {
                KeyVal::Num(v) | KeyVal::Range(v, _) => Some(*v),
                KeyVal::Text(s) => match fx.field_type {
                    FieldType::Temporal => parse_temporal(s).map(|t| t.and_utc().timestamp() as f64),
                    FieldType::Ordinal => Some(ordinal_rank[k] as f64),
                    _ => None,
                },
            }
        })
        .collect();
    let Some(xs) = xs else { return };
    if ordinal_rank.len() < 3 {
        return;
    }
    if let Some(s) = stats::slope(&xs, vals) {
        let measure = fields[m].name.clone();
        b.push(
            FactForm::Trend,
            BTreeSet::from([fx.name.clone(), measure.clone()]),
            measure.clone(),
            None,
            Some(&measure),
            vec![s],
            vec![Entity::new(&fx.name, "")],
        );
    }
}

fn correlation_fact(b: &mut Builder<'_>, fields: &[Field], records: &[Record]) {
    let quant: Vec<usize> = (0..fields.len())
        .filter(|&i| fields[i].field_type == FieldType::Quantitative && fields[i].bins.is_none())
        .collect();
    for (ai, &a) in quant.iter().enumerate() {
        for &c in &quant[ai + 1..] {
            let pairs: Vec<(f64, f64)> = records.iter().filter_map(|r| Some((num(r, a)?, num(r, c)?))).collect();
            if pairs.len() < 3 {
                continue;
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            if let Some(r) = stats::pearson(&xs, &ys) {
                let (na, nc) = (fields[a].name.clone(), fields[c].name.clone());
                b.push(
                    FactForm::Correlation,
                    BTreeSet::from([na.clone(), nc.clone()]),
                    format!("{na} and {nc}"),
                    None,
                    None,
                    vec![r],
                    vec![Entity::new(&na, ""), Entity::new(&nc, "")],
                );
                return;
            }
        }
    }
}

fn category_shares(b: &mut Builder<'_>, fields: &[Field], records: &[Record]) {
    for (i, f) in fields.iter().enumerate() {
        let mut counts: BTreeMap<&KeyVal, usize> = BTreeMap::new();
        for r in records {
            if let Some(k) = &r[i] {
                *counts.entry(k).or_default() += 1;
            }
        }
        let total: usize = counts.values().sum();
        // First category with the highest count, in canonical order.
        let Some((top, n)) = counts
            .iter()
            .fold(None::<(&KeyVal, usize)>, |acc, (k, &n)| match acc {
                Some((_, best)) if best >= n => acc,
                _ => Some((k, n)),
            })
        else {
            continue;
        };
        if counts.len() < 2 {
            continue;
        }
        b.push(
            FactForm::Share,
            BTreeSet::from([f.name.clone()]),
            b.display(f, top),
            Some(f.name.clone()),
            None,
            vec![100.0 * n as f64 / total as f64],
            vec![],
        );
    }
}
