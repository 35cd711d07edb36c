//! Experiment configuration: strict JSON merged over per-experiment
//! defaults.

use std::path::Path;

use mhess_core::domain::FamilyKind;
use mhess_core::registry;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Experiments selectable from the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Solve,
    Envelope,
    Capacity,
    VerifyTheoremA,
    VerifyLemma41,
    VerifyHolder,
    VerifyStability,
    VerifyVolumeCapacity,
    OracleSuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Envelope => "envelope",
            Experiment::Capacity => "capacity",
            Experiment::VerifyTheoremA => "verify-theorem-a",
            Experiment::VerifyLemma41 => "verify-lemma41",
            Experiment::VerifyHolder => "verify-holder",
            Experiment::VerifyStability => "verify-stability",
            Experiment::VerifyVolumeCapacity => "verify-volume-capacity",
            Experiment::OracleSuite => "oracle-suite",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Ball,
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub shape: ShapeKind,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_widths: Option<Vec<f64>>,
}

/// Registry names of the analytic inputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Functions {
    /// Potential whose Hessian measure is tested.
    pub phi: Option<String>,
    /// Boundary data.
    pub g: Option<String>,
    /// Obstacle.
    pub h: Option<String>,
    /// Right-hand density.
    pub f: Option<String>,
    /// Closed-form solution for error reporting.
    pub exact: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Sweep stopping tolerance on the sup update at the coarsest grid.
    pub sweep: f64,
    /// The tolerance at spacing `h` is `sweep·(h/h_0)^p`.
    pub sweep_refinement_power: f64,
    pub max_iter: usize,
    /// Sup error against `functions.exact`.
    pub exact: f64,
    /// Relative measure error of a solve; unasserted when absent.
    pub measure_error: Option<f64>,
    /// Complementarity defect relative to total mass.
    pub complementarity: f64,
    /// Mass fraction allowed off the contact band.
    pub leak: f64,
    /// Cellwise ratio slack on the contact band.
    pub contact_ratio: f64,
    /// Penalized-vs-sweep agreement relative to `osc(h)`.
    pub penalized: f64,
    /// Discretization slack of the boundary mass inequality.
    pub disc: f64,
    /// Relative change allowed between resolutions for fitted constants.
    pub stability: f64,
    /// Slack factor of the capslice inequality.
    pub capslice_factor: f64,
    /// Allowed deviation of a capacity scaling slope.
    pub slope: f64,
    /// Safety factor on predicted Hölder exponents.
    pub exponent_factor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            sweep: 1e-10,
            sweep_refinement_power: 0.0,
            max_iter: 200_000,
            exact: 1e-8,
            measure_error: None,
            complementarity: 1e-3,
            leak: 0.02,
            contact_ratio: 0.1,
            penalized: 5e-3,
            disc: 0.3,
            stability: 0.25,
            capslice_factor: 1.2,
            slope: 0.3,
            exponent_factor: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderKind {
    Lexicographic,
    Colored,
}

/// Fully resolved experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub domain: DomainSpec,
    pub m: usize,
    /// Grid spacings, strictly decreasing.
    pub resolutions: Vec<f64>,
    pub functions: Functions,
    /// Multiplier of the density `functions.f`.
    pub f_scale: f64,
    pub tolerances: Tolerances,
    /// Base seed mixed into every random set family.
    pub seed: u64,
    pub family: Vec<FamilyKind>,
    /// Exponent `r` of the volume-capacity and mass-capacity inequalities.
    pub r: f64,
    /// Domination exponent τ.
    pub tau: f64,
    /// Regularization radii of Hölder measurements (empty: derived from h).
    pub holder_ladder: Vec<f64>,
    /// Penalization ladder (empty: no penalized run).
    pub j_ladder: Vec<f64>,
    /// Grid spacings of the penalized runs.
    pub penalized_resolutions: Vec<f64>,
    /// Expected log-log slope of capacity against ball radius.
    pub expected_slope: Option<f64>,
    pub order: OrderKind,
    pub dump_fields: bool,
}

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

fn disc() -> DomainSpec {
    DomainSpec {
        shape: ShapeKind::Ball,
        n: 1,
        radius: Some(1.0),
        half_widths: None,
    }
}

fn ball4() -> DomainSpec {
    DomainSpec {
        shape: ShapeKind::Ball,
        n: 2,
        radius: Some(1.0),
        half_widths: None,
    }
}

fn names(phi: Option<&str>, g: Option<&str>, h: Option<&str>, f: Option<&str>, exact: Option<&str>) -> Functions {
    Functions {
        phi: phi.map(String::from),
        g: g.map(String::from),
        h: h.map(String::from),
        f: f.map(String::from),
        exact: exact.map(String::from),
    }
}

/// Mixed family for the inequality experiments: `balls` radii, annuli,
/// boundary collars and random unions. Radii and widths are at least
/// `feature`, so every member is resolved on the coarsest grid.
pub fn mixed_family(
    balls: usize,
    annuli: usize,
    collars: usize,
    unions: usize,
    seed: u64,
    feature: f64,
) -> Vec<FamilyKind> {
    let mut out = Vec::new();
    if balls > 0 {
        out.push(FamilyKind::Balls {
            radii: (0..balls)
                .map(|i| feature + (0.65 - feature) * i as f64 / balls as f64)
                .collect(),
        });
    }
    if annuli > 0 {
        out.push(FamilyKind::Annuli {
            bands: (0..annuli)
                .map(|i| {
                    let a = 0.2 + 0.25 * i as f64 / annuli as f64;
                    (a, a + feature.max(0.2))
                })
                .collect(),
        });
    }
    if collars > 0 {
        out.push(FamilyKind::BoundaryCollars {
            widths: (0..collars)
                .map(|i| feature + 0.3 * i as f64 / collars as f64)
                .collect(),
        });
    }
    if unions > 0 {
        out.push(FamilyKind::RandomUnions {
            count: unions,
            balls_per_set: 3,
            radius_range: (feature.max(0.2), feature.max(0.2) + 0.15),
            seed,
        });
    }
    out
}

impl ExperimentConfig {
    /// Built-in configuration of an experiment.
    pub fn default_for(exp: Experiment) -> Self {
        let base = ExperimentConfig {
            name: exp.name().to_string(),
            domain: disc(),
            m: 1,
            resolutions: vec![pow2(-5), pow2(-6)],
            functions: Functions::default(),
            f_scale: 1.0,
            tolerances: Tolerances::default(),
            seed: 7,
            family: Vec::new(),
            r: 0.5,
            tau: 2.0,
            holder_ladder: Vec::new(),
            j_ladder: Vec::new(),
            penalized_resolutions: Vec::new(),
            expected_slope: None,
            order: OrderKind::Lexicographic,
            dump_fields: true,
        };
        match exp {
            Experiment::Solve => ExperimentConfig {
                functions: names(None, Some("quadratic"), None, Some("one"), Some("quadratic")),
                ..base
            },
            Experiment::Envelope => ExperimentConfig {
                resolutions: vec![pow2(-6), pow2(-7)],
                functions: names(None, None, Some("radial-bump"), None, None),
                j_ladder: (4..=12).map(pow2).collect(),
                penalized_resolutions: vec![pow2(-5)],
                tolerances: Tolerances {
                    sweep_refinement_power: 6.0,
                    ..Tolerances::default()
                },
                ..base
            },
            Experiment::Capacity => ExperimentConfig {
                domain: ball4(),
                resolutions: vec![1.0 / 12.0],
                family: vec![FamilyKind::Balls {
                    radii: vec![0.15, 0.2, 0.3, 0.4],
                }],
                expected_slope: Some(2.0),
                ..base
            },
            Experiment::VerifyTheoremA => ExperimentConfig {
                domain: ball4(),
                resolutions: vec![pow2(-3), pow2(-4)],
                functions: names(Some("power-gamma-1/4"), None, None, None, None),
                family: mixed_family(14, 10, 6, 20, 0, 0.25),
                tolerances: Tolerances {
                    stability: 0.3,
                    ..Tolerances::default()
                },
                ..base
            },
            Experiment::VerifyLemma41 => ExperimentConfig {
                resolutions: vec![pow2(-6), pow2(-7)],
                functions: names(Some("power-gamma-1/4"), None, None, None, None),
                family: vec![
                    FamilyKind::BoundaryCollars {
                        widths: vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
                    },
                    FamilyKind::Balls { radii: vec![0.5] },
                ],
                ..base
            },
            Experiment::VerifyHolder => ExperimentConfig {
                resolutions: vec![pow2(-7)],
                functions: names(Some("power-gamma-1/4"), Some("zero"), None, None, None),
                holder_ladder: vec![0.03, 0.045, 0.07, 0.1, 0.15, 0.22, 0.32],
                ..base
            },
            Experiment::VerifyStability => ExperimentConfig {
                family: mixed_family(6, 4, 0, 6, 0, 0.15),
                ..ExperimentConfig {
                    resolutions: vec![pow2(-5)],
                    ..base
                }
            },
            Experiment::VerifyVolumeCapacity => ExperimentConfig {
                domain: ball4(),
                resolutions: vec![pow2(-3), pow2(-4)],
                r: 0.9,
                family: mixed_family(10, 8, 4, 8, 0, 0.25),
                ..base
            },
            Experiment::OracleSuite => ExperimentConfig {
                dump_fields: false,
                ..base
            },
        }
    }

    /// Loads `path` (if any) over the defaults of `exp` and validates.
    pub fn load(exp: Experiment, path: Option<&Path>) -> Result<Self, CliError> {
        let mut value = serde_json::to_value(Self::default_for(exp)).expect("defaults serialize");
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            let user: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            if !user.is_object() {
                return Err(CliError::Config("configuration must be a JSON object".into()));
            }
            merge(&mut value, user);
        }
        let cfg: ExperimentConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = self.domain.n;
        if !(1..=2).contains(&n) {
            return Err(CliError::Config(format!("domain.n must be 1 or 2, got {n}")));
        }
        if self.m < 1 || self.m > n {
            return Err(CliError::Config(format!("m must lie in 1..={n}, got {}", self.m)));
        }
        match self.domain.shape {
            ShapeKind::Ball => {
                if !self.domain.radius.is_some_and(|r| r > 0.0) {
                    return Err(CliError::Config("ball domain needs a positive radius".into()));
                }
            }
            ShapeKind::Box => {
                let ok = self
                    .domain
                    .half_widths
                    .as_ref()
                    .is_some_and(|w| w.len() == 2 * n && w.iter().all(|v| *v > 0.0));
                if !ok {
                    return Err(CliError::Config(format!("box domain needs {} positive half widths", 2 * n)));
                }
            }
        }
        if self.resolutions.is_empty() {
            return Err(CliError::Config("resolution ladder is empty".into()));
        }
        if self.resolutions.iter().any(|h| !(*h > 0.0)) {
            return Err(CliError::Config("resolutions must be positive".into()));
        }
        if self.resolutions.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Config("resolution ladder must be strictly refining".into()));
        }
        let f = &self.functions;
        for name in [&f.phi, &f.g, &f.h, &f.f, &f.exact].into_iter().flatten() {
            if !registry::is_registered(name) {
                return Err(CliError::Config(format!("unknown analytic function '{name}'")));
            }
        }
        let t = &self.tolerances;
        if self.penalized_resolutions.iter().any(|h| !(*h > 0.0)) {
            return Err(CliError::Config("penalized resolutions must be positive".into()));
        }
        if !(t.sweep > 0.0) || t.max_iter == 0 || !t.sweep_refinement_power.is_finite() {
            return Err(CliError::Config("sweep tolerance and max_iter must be positive".into()));
        }
        if !(self.tau > 1.0) {
            return Err(CliError::Config(format!("tau must exceed 1, got {}", self.tau)));
        }
        if self.j_ladder.windows(2).any(|w| w[1] <= w[0]) || self.j_ladder.iter().any(|j| !(*j > 0.0)) {
            return Err(CliError::Config("j ladder must be positive and increasing".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical serialization.
    pub fn content_hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// Recursive object merge; non-object values replace.
fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn load_str(exp: Experiment, text: &str) -> Result<ExperimentConfig, CliError> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        ExperimentConfig::load(exp, Some(f.path()))
    }

    #[test]
    fn defaults_validate() {
        for exp in [
            Experiment::Solve,
            Experiment::Envelope,
            Experiment::Capacity,
            Experiment::VerifyTheoremA,
            Experiment::VerifyLemma41,
            Experiment::VerifyHolder,
            Experiment::VerifyStability,
            Experiment::VerifyVolumeCapacity,
            Experiment::OracleSuite,
        ] {
            ExperimentConfig::default_for(exp).validate().unwrap();
        }
    }

    #[test]
    fn partial_override_merges() {
        let c = load_str(Experiment::Solve, r#"{"tolerances": {"sweep": 1e-9}, "m": 1}"#).unwrap();
        assert_eq!(c.tolerances.sweep, 1e-9);
        assert_eq!(c.tolerances.max_iter, 200_000);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(load_str(Experiment::Solve, r#"{"m": 2}"#), Err(CliError::Config(_))));
        assert!(matches!(load_str(Experiment::Solve, r#"{"bogus": 1}"#), Err(CliError::Config(_))));
        assert!(matches!(
            load_str(Experiment::Solve, r#"{"resolutions": [0.01, 0.02]}"#),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            load_str(Experiment::Solve, r#"{"functions": {"g": "nope"}}"#),
            Err(CliError::Config(_))
        ));
        assert!(matches!(load_str(Experiment::Solve, "[1]"), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_is_stable() {
        let a = ExperimentConfig::default_for(Experiment::Solve);
        assert_eq!(a.content_hash(), a.clone().content_hash());
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(a.content_hash(), b.content_hash());
    }
}
