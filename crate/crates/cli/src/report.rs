//! Report tree: summary JSON, CSV tables, gnuplot data and field dumps.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use mhess_core::domain::{write_field, GridDomain, ScalarField};
use mhess_core::hess::kappa;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::CliError;

/// Row role in a report.
pub const ASSERTED: &str = "asserted";
pub const FITTED: &str = "fitted";
pub const REPORTED: &str = "reported";

#[derive(Clone, Debug, Serialize)]
pub struct GridInfo {
    pub h: f64,
    pub n: usize,
    pub dims: Vec<usize>,
    pub nodes: usize,
    pub interior: usize,
    pub boundary: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

/// Result of a completed run.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub passed: bool,
    pub failures: Vec<String>,
    pub summary_path: PathBuf,
}

/// Collects outputs of one experiment; writes are serialized through it.
pub struct Report {
    out: PathBuf,
    files: Vec<String>,
    assertions: Vec<Assertion>,
    results: Map<String, Value>,
    grids: Vec<GridInfo>,
    quiet: bool,
}

impl Report {
    pub fn new(out: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out)?;
        Ok(Report {
            out: out.to_path_buf(),
            files: Vec::new(),
            assertions: Vec::new(),
            results: Map::new(),
            grids: Vec::new(),
            quiet: false,
        })
    }

    /// Suppresses per-assertion console lines.
    pub fn quiet(mut self, quiet: bool) -> Self {
        self.quiet = quiet;
        self
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    fn register(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.out.join(name)
    }

    /// Writes `rows` as `name` (CSV with header).
    pub fn table<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let path = self.register(name);
        let mut w = csv::Writer::from_path(path)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Whitespace-separated columns with a commented header.
    pub fn dat(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let path = self.register(name);
        let mut w = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(w, "# {}", header.join(" "))?;
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binary field dump plus sidecar.
    pub fn field(&mut self, name: &str, field: &ScalarField) -> Result<(), CliError> {
        let path = self.register(name);
        self.register(&format!("{name}.json"));
        write_field(field, &path)?;
        Ok(())
    }

    /// Convergence log `(iteration, update)`.
    pub fn convergence(&mut self, name: &str, history: &[f64]) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Row {
            iteration: usize,
            update: f64,
        }
        let rows: Vec<Row> = history
            .iter()
            .enumerate()
            .map(|(i, &u)| Row {
                iteration: i + 1,
                update: u,
            })
            .collect();
        self.table(name, &rows)
    }

    /// Records a hard assertion.
    pub fn check(&mut self, label: impl Into<String>, pass: bool, detail: impl Into<String>) {
        let a = Assertion {
            label: label.into(),
            pass,
            detail: detail.into(),
        };
        if !self.quiet {
            println!("[{}] {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.label, a.detail);
        }
        self.assertions.push(a);
    }

    pub fn result<T: Serialize>(&mut self, key: &str, value: &T) -> Result<(), CliError> {
        self.results.insert(key.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn grid(&mut self, dom: &GridDomain) {
        self.grids.push(GridInfo {
            h: dom.h(),
            n: dom.n(),
            dims: dom.dims().to_vec(),
            nodes: dom.node_count(),
            interior: dom.interior().len(),
            boundary: dom.boundary().len(),
        });
    }

    pub fn assertions(&self) -> &[Assertion] {
        &self.assertions
    }

    /// Writes `assertions.csv` and `summary.json`.
    pub fn finish(mut self, exp: Experiment, cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
        let assertions = std::mem::take(&mut self.assertions);
        self.table("assertions.csv", &assertions)?;
        let failures: Vec<String> = assertions
            .iter()
            .filter(|a| !a.pass)
            .map(|a| format!("{}: {}", a.label, a.detail))
            .collect();
        let passed = failures.is_empty();
        self.register("summary.json");
        let mut files = self.files.clone();
        files.sort();
        let summary = serde_json::json!({
            "experiment": exp.name(),
            "name": cfg.name,
            "status": if passed { "pass" } else { "fail" },
            "kappa": kappa(cfg.domain.n, cfg.m),
            "n": cfg.domain.n,
            "m": cfg.m,
            "grids": self.grids,
            "config_hash": cfg.content_hash(),
            "config": cfg,
            "assertions": assertions.len(),
            "failures": failures,
            "results": Value::Object(self.results),
            "files": files,
        });
        let summary_path = self.out.join("summary.json");
        fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
        Ok(Outcome {
            passed,
            failures,
            summary_path,
        })
    }
}
