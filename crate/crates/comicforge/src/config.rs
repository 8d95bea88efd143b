//! Settings from `comicforge.json`, environment variables and flags.

use std::path::{Path, PathBuf};

use comicforge_core::transition::CostTable;
use comicforge_core::Params;
use serde::Deserialize;
use thiserror::Error;

pub const CONFIG_FILE: &str = "comicforge.json";
pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "comicforge-data";
/// `{term}` is replaced by the percent-encoded term.
pub const DEFAULT_TERM_URL: &str = "https://en.wikipedia.org/api/rest_v1/page/summary/{term}";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("{0}")]
    Env(String),
}

/// Everything the file may set. Keys mirror the CLI flags.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub ensemble: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub html: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
    pub tau: Option<f64>,
    pub max_piece_size: Option<usize>,
    pub cost_table: Option<PathBuf>,
    pub offline: Option<bool>,
    pub data_dir: Option<PathBuf>,
    pub bind_addr: Option<String>,
    pub term_url: Option<String>,
}

impl FileConfig {
    /// Reads `path`. Relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: FileConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.ensemble,
            &mut cfg.data,
            &mut cfg.out,
            &mut cfg.html,
            &mut cfg.cost_table,
            &mut cfg.data_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// `explicit` if given, else `comicforge.json` in the working directory
    /// when present, else defaults.
    pub fn discover(explicit: Option<&Path>) -> Result<Self, ConfigError> {
        match explicit {
            Some(p) => Self::load(p),
            None if Path::new(CONFIG_FILE).is_file() => Self::load(Path::new(CONFIG_FILE)),
            None => Ok(Self::default()),
        }
    }

    /// Later sources win.
    pub fn merge(self, over: FileConfig) -> FileConfig {
        FileConfig {
            ensemble: over.ensemble.or(self.ensemble),
            data: over.data.or(self.data),
            out: over.out.or(self.out),
            html: over.html.or(self.html),
            alpha: over.alpha.or(self.alpha),
            beta: over.beta.or(self.beta),
            gamma: over.gamma.or(self.gamma),
            delta: over.delta.or(self.delta),
            tau: over.tau.or(self.tau),
            max_piece_size: over.max_piece_size.or(self.max_piece_size),
            cost_table: over.cost_table.or(self.cost_table),
            offline: over.offline.or(self.offline),
            data_dir: over.data_dir.or(self.data_dir),
            bind_addr: over.bind_addr.or(self.bind_addr),
            term_url: over.term_url.or(self.term_url),
        }
    }

    /// Values from `COMICFORGE_DATA_DIR`, `COMICFORGE_BIND_ADDR` and
    /// `COMICFORGE_OFFLINE`.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let offline = match get("COMICFORGE_OFFLINE") {
            None => None,
            Some(v) => Some(parse_bool(&v).ok_or_else(|| {
                ConfigError::Env(format!("COMICFORGE_OFFLINE must be true or false, got {v:?}"))
            })?),
        };
        Ok(FileConfig {
            data_dir: get("COMICFORGE_DATA_DIR").filter(|s| !s.is_empty()).map(PathBuf::from),
            bind_addr: get("COMICFORGE_BIND_ADDR").filter(|s| !s.is_empty()),
            offline,
            ..FileConfig::default()
        })
    }

    /// Pipeline parameters on top of the defaults. The cost table file is
    /// read here.
    pub fn params(&self) -> Result<Params, ConfigError> {
        let mut p = Params::default();
        if let Some(v) = self.alpha {
            p.alpha = v;
        }
        if let Some(v) = self.beta {
            p.beta = v;
        }
        if let Some(v) = self.gamma {
            p.gamma = v;
        }
        if let Some(v) = self.delta {
            p.delta = v;
        }
        if self.tau.is_some() {
            p.tau = self.tau;
        }
        if let Some(v) = self.max_piece_size {
            p.max_size = v;
        }
        if let Some(path) = &self.cost_table {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                path: path.clone(),
                source,
            })?;
            p.cost_table = serde_json::from_str::<CostTable<f64>>(&text).map_err(|e| ConfigError::Invalid {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
        Ok(p)
    }

    pub fn offline(&self) -> bool {
        self.offline.unwrap_or(false)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
    }

    pub fn bind_addr(&self) -> String {
        self.bind_addr.clone().unwrap_or_else(|| DEFAULT_BIND_ADDR.to_string())
    }

    pub fn term_url(&self) -> String {
        self.term_url.clone().unwrap_or_else(|| DEFAULT_TERM_URL.to_string())
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Some(true),
        "0" | "false" | "no" | "off" | "" => Some(false),
        _ => None,
    }
}
