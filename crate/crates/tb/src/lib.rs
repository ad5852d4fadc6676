//! Experiment runner: config validation, study dispatch, artifact and
//! manifest output.

pub mod config;
pub mod manifest;
pub mod studies;

use config::{validate_text, ConfigError, ExperimentConfig};
use manifest::{check_completeness, config_hash, RunManifest};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug)]
pub enum RunError {
    /// unreadable or invalid config; nothing was written
    Config(ConfigError),
    /// compute or output failure
    Resource(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Resource(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "config error:\n{e}"),
            RunError::Resource(e) => write!(f, "run failed: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Thread count: the flag, then TB_THREADS, then rayon's default.
pub fn thread_count(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var("TB_THREADS").ok().and_then(|v| v.trim().parse().ok())).filter(|&n| n > 0)
}

/// Applies the command-line overrides to a validated config.
pub fn prepare(text: &str, opts: &RunOptions) -> Result<ExperimentConfig, RunError> {
    let mut cfg = validate_text(text).map_err(RunError::Config)?.config;
    if let Some(s) = opts.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &opts.out {
        cfg.output = Some(o.to_string_lossy().into_owned());
    }
    Ok(cfg)
}

/// Hash of the normalized config without its output location.
pub fn hash_of(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output = None;
    config_hash(&c.to_toml())
}

/// Runs a prepared config and writes CSVs, plot scripts and manifest.json
/// into its output directory. Nothing is written if the study fails.
pub fn execute(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<RunManifest, RunError> {
    let declared = studies::declared_gates(cfg);
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RunError::Resource(format!("thread pool: {e}")))?;
    let used = pool.current_num_threads();
    let result = pool.install(|| studies::run_study(cfg)).map_err(|e| RunError::Resource(e.to_string()))?;
    check_completeness(&declared, &result.gates).map_err(RunError::Resource)?;
    let dir = PathBuf::from(cfg.output.clone().unwrap_or_else(|| format!("out/{}", cfg.study)));
    let mut files: Vec<String> = result.artifacts.iter().map(|a| a.name.clone()).collect();
    files.push("config.toml".into());
    files.push("manifest.json".into());
    let manifest = RunManifest {
        study: cfg.study.tag().into(),
        config_hash: hash_of(cfg),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed(),
        threads: used,
        wall_time_s: start.elapsed().as_secs_f64(),
        pass: result.gates.iter().all(|g| g.pass),
        gates: result.gates,
        reports: result.reports,
        files,
    };
    write_all(&dir, cfg, &result.artifacts, &manifest).map_err(|e| RunError::Resource(format!("{}: {e}", dir.display())))?;
    Ok(manifest)
}

fn write_all(dir: &Path, cfg: &ExperimentConfig, arts: &[studies::Artifact], m: &RunManifest) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for a in arts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    std::fs::write(dir.join("manifest.json"), m.to_json())?;
    Ok(())
}
