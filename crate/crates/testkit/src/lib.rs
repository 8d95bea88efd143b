//! Random inputs and slow reference implementations used by the test suites.
//!
//! Every reference here is written independently of the library code it
//! checks: no shared helpers, and the simplest algorithm that is obviously
//! correct.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use comicforge_core::facts::{DataFact, FactForm};
use comicforge_core::model::{
    Channel, ChannelBinding, ChartEnsemble, ChartSpec, Dataset, FieldType, Mark, TransformKind, Transformation,
};
use comicforge_core::{CostTable, Exact};
use itertools::Itertools;
use rand::seq::{IteratorRandom, SliceRandom};
use rand::Rng;
pub use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Attributes of [`small_dataset`] with their types.
pub const FIELDS: [(&str, FieldType); 7] = [
    ("q1", FieldType::Quantitative),
    ("q2", FieldType::Quantitative),
    ("q3", FieldType::Quantitative),
    ("n1", FieldType::Nominal),
    ("n2", FieldType::Nominal),
    ("o1", FieldType::Ordinal),
    ("t1", FieldType::Temporal),
];

const PARAMS: [Option<&str>; 4] = [None, Some("sum"), Some("mean"), Some("10")];

/// Eight rows covering every attribute in [`FIELDS`].
pub fn small_dataset() -> Dataset {
    let rows: Vec<serde_json::Value> = (0..8)
        .map(|i| {
            serde_json::json!({
                "q1": i, "q2": (i * 7) % 5, "q3": 10 - i,
                "n1": (["a", "b", "c"][i % 3]), "n2": (["x", "y"][i % 2]),
                "o1": (["low", "mid", "high"][i % 3]),
                "t1": format!("2020-0{}-01", 1 + i % 6),
            })
        })
        .collect();
    let text = serde_json::to_string(&rows).unwrap();
    Dataset::from_json_rows(&text).unwrap()
}

/// A random valid chart over [`FIELDS`]: 1 to 4 channels and up to 3
/// transforms on bound attributes.
pub fn random_spec(rng: &mut impl Rng, id: &str, created_at: i64) -> ChartSpec {
    let mark = *Mark::ALL.choose(rng).unwrap();
    let n_channels = rng.gen_range(1..=4);
    let mut slots = Channel::ALL.to_vec();
    slots.shuffle(rng);
    let mut channels = BTreeMap::new();
    for ch in slots.into_iter().take(n_channels) {
        let (field, field_type) = FIELDS[rng.gen_range(0..FIELDS.len())];
        channels.insert(ch, ChannelBinding { field: field.to_string(), field_type });
    }
    let bound: Vec<String> = channels.values().map(|b| b.field.clone()).unique().collect();
    let mut transforms: BTreeMap<(TransformKind, String), Option<String>> = BTreeMap::new();
    for _ in 0..rng.gen_range(0..=3) {
        let kind = *TransformKind::ALL.choose(rng).unwrap();
        let target = bound.choose(rng).unwrap().clone();
        let param = PARAMS.choose(rng).unwrap().map(str::to_string);
        transforms.insert((kind, target), param);
    }
    ChartSpec {
        id: id.to_string(),
        mark,
        channels,
        transforms: transforms
            .into_iter()
            .map(|((kind, target), param)| Transformation { kind, target, param })
            .collect(),
        created_at,
        title: None,
    }
}

/// `n` random charts `c0..c{n-1}` over [`small_dataset`].
pub fn random_ensemble(rng: &mut impl Rng, n: usize) -> ChartEnsemble {
    let charts = (0..n)
        .map(|i| {
            let created_at = rng.gen_range(0..4);
            random_spec(rng, &format!("c{i}"), created_at)
        })
        .collect();
    ChartEnsemble { dataset: small_dataset(), charts }
}

/// Mutates a spec a little, so clusters of similar charts appear.
pub fn perturb(rng: &mut impl Rng, spec: &ChartSpec, id: &str) -> ChartSpec {
    let mut s = spec.clone();
    s.id = id.to_string();
    match rng.gen_range(0..3) {
        0 => s.mark = *Mark::ALL.choose(rng).unwrap(),
        1 => {
            let ch = *Channel::ALL.choose(rng).unwrap();
            let (field, field_type) = FIELDS[rng.gen_range(0..FIELDS.len())];
            s.channels.insert(ch, ChannelBinding { field: field.into(), field_type });
        }
        _ => {
            if s.channels.len() > 1 {
                let k = *s.channels.keys().choose(rng).unwrap();
                let field = s.channels[&k].field.clone();
                s.channels.remove(&k);
                if !s.channels.values().any(|b| b.field == field) {
                    s.transforms.retain(|t| t.target != field);
                }
            }
        }
    }
    s
}

/// Every specification as a `slot -> value` entry.
fn slot_map(s: &ChartSpec) -> HashMap<String, (char, String)> {
    let mut m = HashMap::new();
    m.insert("mark".to_string(), ('m', s.mark.to_string()));
    for (ch, b) in &s.channels {
        m.insert(format!("channel/{ch}"), ('c', format!("{}:{}", b.field, b.field_type)));
    }
    for t in &s.transforms {
        m.insert(format!("transform/{}/{}", t.kind, t.target), ('t', format!("{:?}", t.param)));
    }
    m
}

/// Distance from a full comparison of the two slot sets.
pub fn slot_set_distance(a: &ChartSpec, b: &ChartSpec, c: &CostTable<Exact>) -> Exact {
    let (ma, mb) = (slot_map(a), slot_map(b));
    let keys: BTreeSet<&String> = ma.keys().chain(mb.keys()).collect();
    let mut total = Exact::from_integer(0);
    for k in keys {
        total += match (ma.get(k), mb.get(k)) {
            (Some((cat, va)), Some((_, vb))) if va != vb => match cat {
                'm' => c.mark_modify,
                'c' => c.channel_modify,
                _ => c.transform_modify,
            },
            (Some(_), Some(_)) => Exact::from_integer(0),
            (Some((cat, _)), None) => {
                if *cat == 'c' {
                    c.channel_remove
                } else {
                    c.transform_remove
                }
            }
            (None, Some((cat, _))) => {
                if *cat == 'c' {
                    c.channel_add
                } else {
                    c.transform_add
                }
            }
            (None, None) => unreachable!(),
        };
    }
    total
}

/// One merge of the reference agglomeration: both member lists sorted, the
/// first holding the smaller id, and the average linkage.
pub type OracleMerge = (Vec<String>, Vec<String>, Exact);

/// Average-linkage agglomeration recomputing every linkage from scratch at
/// each step.
pub fn hac_oracle(ids: &[String], d: &[Vec<Exact>], max_size: usize, tau: Exact) -> (Vec<Vec<String>>, Vec<OracleMerge>) {
    let mut clusters: Vec<Vec<usize>> = (0..ids.len()).map(|i| vec![i]).collect();
    let min_id = |c: &Vec<usize>| c.iter().map(|&i| ids[i].clone()).min().unwrap();
    let mut log = Vec::new();
    loop {
        let mut best: Option<(Exact, String, String, usize, usize)> = None;
        for x in 0..clusters.len() {
            for y in 0..clusters.len() {
                let (a, b) = (&clusters[x], &clusters[y]);
                if x == y || min_id(a) > min_id(b) || a.len() + b.len() > max_size {
                    continue;
                }
                let mut sum = Exact::from_integer(0);
                for &i in a {
                    for &j in b {
                        sum += d[i][j];
                    }
                }
                let link = sum / Exact::from_integer((a.len() * b.len()) as i64);
                if link > tau {
                    continue;
                }
                let cand = (link, min_id(a), min_id(b), x, y);
                if best.as_ref().is_none_or(|b| (cand.0, &cand.1, &cand.2) < (b.0, &b.1, &b.2)) {
                    best = Some(cand);
                }
            }
        }
        let Some((link, _, _, x, y)) = best else { break };
        let names = |c: &Vec<usize>| c.iter().map(|&i| ids[i].clone()).sorted().collect::<Vec<_>>();
        log.push((names(&clusters[x]), names(&clusters[y]), link));
        let merged: Vec<usize> = clusters[x].iter().chain(&clusters[y]).copied().collect();
        let (hi, lo) = (x.max(y), x.min(y));
        clusters.remove(hi);
        clusters.remove(lo);
        clusters.push(merged);
    }
    let mut pieces: Vec<Vec<String>> = clusters
        .iter()
        .map(|c| c.iter().map(|&i| ids[i].clone()).sorted().collect())
        .collect();
    pieces.sort();
    (pieces, log)
}

/// Decodes a Prüfer sequence into the edges of a labelled tree on
/// `seq.len() + 2` nodes.
pub fn prufer_tree(seq: &[usize]) -> Vec<(usize, usize)> {
    let n = seq.len() + 2;
    let mut degree = vec![1; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::new();
    for &s in seq {
        let leaf = (0..n).find(|&i| degree[i] == 1).unwrap();
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Every labelled tree on `n >= 1` nodes.
pub fn all_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    match n {
        0 => vec![],
        1 => vec![vec![]],
        2 => vec![vec![(0, 1)]],
        _ => (0..n - 2)
            .map(|_| 0..n)
            .multi_cartesian_product()
            .map(|seq| prufer_tree(&seq))
            .collect(),
    }
}

/// Minimum total weight over every spanning tree of the complete graph.
pub fn min_spanning_weight(d: &[Vec<Exact>]) -> Exact {
    all_trees(d.len())
        .into_iter()
        .map(|t| t.iter().map(|&(a, b)| d[a][b]).sum::<Exact>())
        .min()
        .unwrap()
}

/// Orients an undirected tree away from `root` as parent-child pairs.
pub fn orient(edges: &[(usize, usize)], root: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut frontier = vec![root];
    let mut seen = BTreeSet::from([root]);
    while let Some(p) = frontier.pop() {
        for &(a, b) in edges {
            let other = if a == p { b } else if b == p { a } else { continue };
            if seen.insert(other) {
                out.push((p, other));
                frontier.push(other);
            }
        }
    }
    out
}

/// Minimum cost of an open path visiting every node once.
pub fn hamiltonian_min(d: &[Vec<Exact>]) -> Exact {
    let n = d.len();
    if n <= 1 {
        return Exact::from_integer(0);
    }
    (0..n)
        .permutations(n)
        .map(|p| p.windows(2).map(|w| d[w[0]][w[1]]).sum::<Exact>())
        .min()
        .unwrap()
}

/// Random symmetric matrix with zero diagonal, entries in tenths up to 5.
pub fn random_metric_free_matrix(rng: &mut impl Rng, n: usize) -> Vec<Vec<Exact>> {
    let mut d = vec![vec![Exact::from_integer(0); n]; n];
    for (i, j) in (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))) {
        let v = Exact::new(rng.gen_range(1..=50), 10);
        d[i][j] = v;
        d[j][i] = v;
    }
    d
}

/// Pearson correlation from raw sums.
pub fn pearson_naive(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    (den > 0.0).then(|| (n * sxy - sx * sy) / den)
}

/// Least-squares slope from raw sums.
pub fn slope_naive(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let den = n * sxx - sx * sx;
    (den != 0.0).then(|| (n * sxy - sx * sy) / den)
}

const ATTRS: [&str; 5] = ["a", "b", "c", "d", "e"];

/// A random fact with 1 to 3 attributes from a five-name pool.
pub fn random_fact(rng: &mut impl Rng, chart: &str, k: usize) -> DataFact {
    let forms = [
        FactForm::Minimum,
        FactForm::Maximum,
        FactForm::SecondMaximum,
        FactForm::Mean,
        FactForm::Range,
        FactForm::Share,
        FactForm::RatioComparison,
        FactForm::Trend,
        FactForm::Correlation,
        FactForm::Outlier,
    ];
    let form = *forms.choose(rng).unwrap();
    let n = rng.gen_range(1..=3);
    let attributes: BTreeSet<String> = ATTRS.choose_multiple(rng, n).map(|s| s.to_string()).collect();
    DataFact {
        id: format!("{chart}#{k}"),
        form,
        level: form.level(),
        attributes,
        subject: ["s0", "s1", "s2"].choose(rng).unwrap().to_string(),
        subject_attribute: None,
        measure: Some("a".into()),
        values: vec![rng.gen_range(0..100) as f64],
        entities: vec![],
        source_chart: chart.to_string(),
    }
}

pub fn random_facts(rng: &mut impl Rng, chart: &str, n: usize) -> Vec<DataFact> {
    (0..n).map(|k| random_fact(rng, chart, k)).collect()
}

/// `n` charts built from a few random seeds, each perturbed a couple of
/// times, so that the ensemble has visible clusters.
pub fn clustered_ensemble(rng: &mut impl Rng, n: usize) -> ChartEnsemble {
    let mut charts = Vec::new();
    while charts.len() < n {
        let id = format!("c{}", charts.len());
        let created_at = rng.gen_range(0..3);
        let base = random_spec(rng, &id, created_at);
        charts.push(base.clone());
        for _ in 0..rng.gen_range(0..3) {
            if charts.len() < n {
                let id = format!("c{}", charts.len());
                charts.push(perturb(rng, &base, &id));
            }
        }
    }
    ChartEnsemble { dataset: small_dataset(), charts }
}
