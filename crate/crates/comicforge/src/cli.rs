//! Command-line entry points.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use comicforge_core::caption::{TermCache, TermProvider, TERM_CACHE_FILE};
use comicforge_core::model::{load_ensemble, LoadError};
use comicforge_core::{compose, export_html, export_json, link_terms};

use crate::api::{router, AppState};
use crate::config::{ConfigError, FileConfig};
use crate::store::{write_atomic, FsStore};
use crate::terms::HttpTermProvider;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;

const LOOKUP_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Parser)]
#[command(name = "comicforge", version, about = "Compose data comics from chart ensembles")]
struct Cli {
    /// Settings file; defaults to ./comicforge.json when present.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compose a comic and write it as JSON (and optionally HTML).
    Generate(GenerateArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Ensemble JSON file.
    #[arg(long)]
    ensemble: Option<PathBuf>,
    /// Dataset file overriding the one the ensemble names.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output JSON path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    html: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_piece_size: Option<usize>,
    /// JSON file with per-operation costs.
    #[arg(long)]
    cost_table: Option<PathBuf>,
    /// Skip encyclopedia lookups; cached links are still used.
    #[arg(long)]
    offline: bool,
    /// Compose twice and fail unless both outputs are identical.
    #[arg(long)]
    seedless_check: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    offline: bool,
}

enum Failure {
    Validation(String),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io { .. } => Failure::Io(e.to_string()),
            LoadError::Model(_) => Failure::Validation(e.to_string()),
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
            let text = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let result = FileConfig::discover(cli.config.as_deref())
        .map_err(Failure::from)
        .and_then(|file| match cli.command {
            Command::Generate(a) => generate(file, a, stdout, stderr),
            Command::Serve(a) => serve(file, a, stderr),
        });
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Validation(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_VALIDATION
        }
        Err(Failure::Io(m)) => {
            let _ = writeln!(stderr, "error: {m}");
            EXIT_IO
        }
    }
}

fn generate(file: FileConfig, a: GenerateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), Failure> {
    let flags = FileConfig {
        ensemble: a.ensemble,
        data: a.data,
        out: a.out,
        html: a.html,
        alpha: a.alpha,
        beta: a.beta,
        gamma: a.gamma,
        delta: a.delta,
        tau: a.tau,
        max_piece_size: a.max_piece_size,
        cost_table: a.cost_table,
        offline: a.offline.then_some(true),
        ..FileConfig::default()
    };
    let cfg = file.merge(FileConfig::from_env(|k| std::env::var(k).ok())?).merge(flags);
    let Some(ensemble_path) = cfg.ensemble.clone() else {
        let mut cmd = <Cli as clap::CommandFactory>::command();
        cmd.build();
        let usage = cmd
            .find_subcommand_mut("generate")
            .map(|c| c.render_usage().to_string())
            .unwrap_or_default();
        return Err(Failure::Validation(format!("--ensemble is required\n\n{usage}")));
    };
    let params = cfg.params()?;
    params.validate().map_err(|e| Failure::Validation(e.to_string()))?;

    let loaded = load_ensemble(&ensemble_path, cfg.data.as_deref())?;
    for w in &loaded.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let ensemble = loaded.ensemble;
    let mut doc = compose(&ensemble, &params).map_err(|e| Failure::Validation(e.to_string()))?;
    if a.seedless_check {
        let again = compose(&ensemble, &params).map_err(|e| Failure::Validation(e.to_string()))?;
        if export_json(&again) != export_json(&doc) {
            return Err(Failure::Validation("two runs produced different documents".into()));
        }
    }
    for w in &doc.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }

    let cache_path = cfg.data_dir().join(TERM_CACHE_FILE);
    let mut cache = TermCache::load(&cache_path).map_err(|e| Failure::Io(format!("{}: {e}", cache_path.display())))?;
    let provider = (!cfg.offline()).then(|| HttpTermProvider::new(&cfg.term_url(), LOOKUP_TIMEOUT));
    if let Some(e) = link_terms(&mut doc, &ensemble, provider.as_ref().map(|p| p as &dyn TermProvider), &mut cache) {
        let _ = writeln!(stderr, "warning: {e}; continuing with cached links only");
    }
    if !cache.is_empty() && !cfg.offline() {
        if let Err(e) = std::fs::create_dir_all(cfg.data_dir()).and_then(|_| cache.save()) {
            let _ = writeln!(stderr, "warning: could not save term cache: {e}");
        }
    }

    let json = export_json(&doc);
    match &cfg.out {
        Some(p) => write_file(p, json.as_bytes())?,
        None => stdout.write_all(json.as_bytes()).map_err(|e| Failure::Io(e.to_string()))?,
    }
    if let Some(p) = &cfg.html {
        write_file(p, export_html(&doc).as_bytes())?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn serve(file: FileConfig, a: ServeArgs, stderr: &mut dyn Write) -> Result<(), Failure> {
    let flags = FileConfig {
        data_dir: a.data_dir,
        bind_addr: a.bind,
        offline: a.offline.then_some(true),
        ..FileConfig::default()
    };
    let cfg = file.merge(FileConfig::from_env(|k| std::env::var(k).ok())?).merge(flags);
    let io = |e: std::io::Error| Failure::Io(e.to_string());
    let store = FsStore::open(&cfg.data_dir()).map_err(io)?;
    let cache = TermCache::load(&store.root().join(TERM_CACHE_FILE)).map_err(io)?;
    let terms: Option<Arc<dyn TermProvider>> = if cfg.offline() {
        None
    } else {
        Some(Arc::new(HttpTermProvider::new(&cfg.term_url(), LOOKUP_TIMEOUT)))
    };
    let state = Arc::new(AppState::new(Arc::new(store), terms, cache));
    let rt = tokio::runtime::Runtime::new().map_err(io)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(cfg.bind_addr()).await.map_err(io)?;
        let addr = listener.local_addr().map_err(io)?;
        let _ = writeln!(stderr, "listening on http://{addr}");
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(io)
    })
}
