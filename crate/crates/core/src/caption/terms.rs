use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{Caption, TermLink};
use crate::facts::DataFact;
use crate::model::{Dataset, FieldType};

pub const TERM_CACHE_FILE: &str = "term_cache.json";

/// Shortest term worth linking.
const MIN_TERM_CHARS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("term provider unavailable: {0}")]
    Unavailable(String),
}

/// Resolves a term to an encyclopedia URL. `Ok(None)` means no article.
pub trait TermProvider: Send + Sync {
    fn lookup(&self, term: &str) -> Result<Option<String>, ProviderError>;
}

/// Lowercase, underscores as spaces, single spaces.
pub fn normalize_term(term: &str) -> String {
    term.replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// On-disk map from normalized term to URL; misses are cached as `null`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermCache {
    path: Option<PathBuf>,
    entries: BTreeMap<String, Option<String>>,
    dirty: bool,
}

impl TermCache {
    pub fn in_memory() -> Self {
        TermCache::default()
    }

    /// Loads `path`, starting empty if the file does not exist.
    pub fn load(path: &Path) -> io::Result<Self> {
        let entries = match fs::read_to_string(path) {
            Ok(s) => serde_json::from_str(&s).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e),
        };
        Ok(TermCache { path: Some(path.to_path_buf()), entries, dirty: false })
    }

    pub fn get(&self, term: &str) -> Option<&Option<String>> {
        self.entries.get(&normalize_term(term))
    }

    pub fn insert(&mut self, term: &str, url: Option<String>) {
        self.entries.insert(normalize_term(term), url);
        self.dirty = true;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Writes the cache if it changed, via a temporary file and rename.
    pub fn save(&mut self) -> io::Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if !self.dirty {
            return Ok(());
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&self.entries).map_err(io::Error::other)?)?;
        fs::rename(&tmp, path)?;
        self.dirty = false;
        Ok(())
    }
}

/// Nominal values and attribute names mentioned by the facts, plus dataset
/// proper nouns. Numbers and short words are dropped.
pub fn link_candidates(facts: &[&DataFact], data: &Dataset) -> Vec<String> {
    let nominal = |attr: &str| {
        matches!(data.schema().get(attr), Some(FieldType::Nominal) | Some(FieldType::Ordinal))
    };
    let mut out: BTreeSet<String> = BTreeSet::new();
    for f in facts {
        if f.subject_attribute.as_deref().is_some_and(nominal) {
            out.insert(f.subject.clone());
        }
        for e in &f.entities {
            if nominal(&e.attribute) {
                out.insert(e.value.clone());
            }
        }
        out.extend(f.attributes.iter().cloned());
    }
    out.extend(data.meta.proper_nouns.iter().cloned());
    out.into_iter()
        .filter(|t| t.chars().count() >= MIN_TERM_CHARS && t.parse::<f64>().is_err())
        .collect()
}

/// Adds encyclopedia links for candidates that occur in the caption text.
///
/// Cached terms never reach the provider. With no provider (offline) only
/// cached links are used. A provider failure returns the caption unchanged
/// together with the error.
pub fn term_context(
    caption: &Caption,
    candidates: &[String],
    provider: Option<&dyn TermProvider>,
    cache: &mut TermCache,
) -> (Caption, Option<ProviderError>) {
    let text = normalize_term(&caption.text);
    let mut seen = BTreeSet::new();
    let mut links = Vec::new();
    for c in candidates {
        let term = normalize_term(c);
        if term.is_empty() || !text.contains(&term) || !seen.insert(term.clone()) {
            continue;
        }
        let url = match cache.get(&term) {
            Some(hit) => hit.clone(),
            None => match provider {
                None => continue,
                Some(p) => match p.lookup(&term) {
                    Ok(url) => {
                        cache.insert(&term, url.clone());
                        url
                    }
                    Err(e) => return (caption.clone(), Some(e)),
                },
            },
        };
        if let Some(url) = url {
            links.push(TermLink { term, url });
        }
    }
    let mut out = caption.clone();
    out.term_links = links;
    (out, None)
}
