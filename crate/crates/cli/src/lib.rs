//! Experiment runner for the m-Hessian toolkit: configuration loading,
//! experiment drivers and the on-disk report tree.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};

pub use config::{Experiment, ExperimentConfig};
pub use error::CliError;
pub use report::{Outcome, Report};

/// Command-line run options.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    /// Single thread, lexicographic sweeps, serial families.
    pub serial: bool,
    pub threads: Option<usize>,
    pub resolution_override: Option<Vec<f64>>,
    pub quiet: bool,
}

/// Loads the configuration, applies overrides and validates.
pub fn resolve_config(exp: Experiment, opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(exp, opts.config.as_deref())?;
    if let Some(r) = &opts.resolution_override {
        cfg.resolutions = r.clone();
        cfg.validate()?;
    }
    Ok(cfg)
}

/// Runs `exp` and writes its report tree under `out`.
pub fn run(exp: Experiment, out: &Path, opts: &RunOptions) -> Result<Outcome, CliError> {
    let cfg = resolve_config(exp, opts)?;
    let threads = if opts.serial { Some(1) } else { opts.threads };
    let body = move || -> Result<Outcome, CliError> {
        let mut report = Report::new(out)?.quiet(opts.quiet);
        let ctx = experiments::Context::new(cfg, opts.serial);
        experiments::run(exp, &ctx, &mut report)?;
        report.finish(exp, &ctx.cfg)
    };
    match threads {
        Some(t) => {
            if t == 0 {
                return Err(CliError::Config("--threads must be positive".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(body)
        }
        None => body(),
    }
}

/// Registry listing as JSON lines.
pub fn registry_lines() -> Vec<String> {
    mhess_core::registry::registry_list()
        .iter()
        .map(|e| serde_json::to_string(e).expect("catalog entry serializes"))
        .collect()
}
