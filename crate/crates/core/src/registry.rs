//! Catalog of named analytic test functions on `C^n` (real coordinates
//! `x1, y1, x2, y2, ...`), with analytic complex Hessians where available
//! and Hölder witnesses `(α, κ)` on the closed unit ball.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{GridDomain, ScalarField};
use crate::error::{Error, Result};
use crate::smooth;
use crate::symm::HermitianForm;

/// Prefix selecting the Hölder extension of a registered function.
pub const EXTENSION_PREFIX: &str = "ext:";

/// Radial profile `u = f(|z|²)` with its first two derivatives.
#[derive(Clone, Copy)]
struct Radial {
    f: fn(f64) -> f64,
    df: fn(f64) -> f64,
    d2f: fn(f64) -> f64,
    /// Profile is smooth only for `s > 0`.
    singular_at_origin: bool,
}

#[derive(Clone, Copy)]
enum Kind {
    Radial(Radial),
    General {
        eval: fn(&[f64]) -> f64,
        hessian: Option<fn(&[f64]) -> HermitianForm>,
    },
}

/// One catalog entry.
#[derive(Clone, Copy)]
pub struct AnalyticFn {
    name: &'static str,
    description: &'static str,
    kind: Kind,
    witness: Option<(f64, f64)>,
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn radial_hessian(r: &Radial, x: &[f64]) -> Option<HermitianForm> {
    let s = norm_sq(x);
    if r.singular_at_origin && s == 0.0 {
        return None;
    }
    let n = x.len() / 2;
    let z: Vec<Complex64> = (0..n).map(|j| Complex64::new(x[2 * j], x[2 * j + 1])).collect();
    let (d1, d2) = ((r.df)(s), (r.d2f)(s));
    let mut h = HermitianForm::zeros(n);
    for j in 0..n {
        for k in j..n {
            let mut v = z[j].conj() * z[k] * d2;
            if j == k {
                v += d1;
            }
            h.set(j, k, v);
        }
    }
    Some(h)
}

impl AnalyticFn {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn description(&self) -> &'static str {
        self.description
    }

    /// Hölder pair `(α, κ)` valid on the closed unit ball.
    pub fn witness(&self) -> Option<(f64, f64)> {
        self.witness
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Radial(r) => (r.f)(norm_sq(x)),
            Kind::General { eval, .. } => eval(x),
        }
    }

    pub fn has_hessian(&self) -> bool {
        match &self.kind {
            Kind::Radial(_) => true,
            Kind::General { hessian, .. } => hessian.is_some(),
        }
    }

    /// Complex Hessian `(∂²u/∂z_j∂z̄_k)` at `x`; `None` where not available.
    pub fn hessian(&self, x: &[f64]) -> Option<HermitianForm> {
        match &self.kind {
            Kind::Radial(r) => radial_hessian(r, x),
            Kind::General { hessian, .. } => hessian.map(|f| f(x)),
        }
    }

    /// Samples on interior and boundary nodes.
    pub fn sample(&self, dom: &Arc<GridDomain>) -> ScalarField {
        ScalarField::from_fn(dom, |x| self.eval(x))
    }

    /// Samples on every lattice node.
    pub fn sample_all(&self, dom: &Arc<GridDomain>) -> ScalarField {
        ScalarField::from_fn_all(dom, |x| self.eval(x))
    }
}

const fn radial(
    name: &'static str,
    description: &'static str,
    f: fn(f64) -> f64,
    df: fn(f64) -> f64,
    d2f: fn(f64) -> f64,
    singular_at_origin: bool,
    witness: Option<(f64, f64)>,
) -> AnalyticFn {
    AnalyticFn {
        name,
        description,
        kind: Kind::Radial(Radial {
            f,
            df,
            d2f,
            singular_at_origin,
        }),
        witness,
    }
}

fn harmonic_wave_hessian(x: &[f64]) -> HermitianForm {
    HermitianForm::zeros(x.len() / 2)
}

static CATALOG: [AnalyticFn; 13] = [
    radial("quadratic", "|z|^2 - 1", |s| s - 1.0, |_| 1.0, |_| 0.0, false, Some((1.0, 2.0))),
    radial("neg-quadratic", "1 - |z|^2", |s| 1.0 - s, |_| -1.0, |_| 0.0, false, Some((1.0, 2.0))),
    radial(
        "power-gamma-1/8",
        "|z|^(1/4) - 1",
        |s| s.powf(0.125) - 1.0,
        |s| 0.125 * s.powf(-0.875),
        |s| -0.109375 * s.powf(-1.875),
        true,
        Some((0.25, 1.0)),
    ),
    radial(
        "power-gamma-1/4",
        "|z|^(1/2) - 1",
        |s| s.powf(0.25) - 1.0,
        |s| 0.25 * s.powf(-0.75),
        |s| -0.1875 * s.powf(-1.75),
        true,
        Some((0.5, 1.0)),
    ),
    radial(
        "power-gamma-1/2",
        "|z| - 1",
        |s| s.sqrt() - 1.0,
        |s| 0.5 / s.sqrt(),
        |s| -0.25 * s.powf(-1.5),
        true,
        Some((1.0, 1.0)),
    ),
    AnalyticFn {
        name: "harmonic-wave",
        description: "x1^2 - y1^2",
        kind: Kind::General {
            eval: |x| x[0] * x[0] - x[1] * x[1],
            hessian: Some(harmonic_wave_hessian),
        },
        witness: Some((1.0, 2.0)),
    },
    AnalyticFn {
        name: "holder-wave",
        description: "|x1|^(1/2)",
        kind: Kind::General {
            eval: |x| x[0].abs().sqrt(),
            hessian: None,
        },
        witness: Some((0.5, 1.0)),
    },
    radial(
        "radial-bump",
        "-(1 - |z|^2)^2",
        |s| -(1.0 - s) * (1.0 - s),
        |s| 2.0 * (1.0 - s),
        |_| -2.0,
        false,
        Some((1.0, 2.0)),
    ),
    AnalyticFn {
        name: "cap-obstacle",
        description: "min(0, |z|^2 - 1/4)",
        kind: Kind::General {
            eval: |x| (norm_sq(x) - 0.25).min(0.0),
            hessian: None,
        },
        witness: Some((1.0, 1.0)),
    },
    radial(
        "sqrt-profile",
        "-(1 - |z|^2)^(1/2)",
        |s| -(1.0 - s).max(0.0).sqrt(),
        |s| 0.5 / (1.0 - s).sqrt(),
        |s| 0.25 * (1.0 - s).powf(-1.5),
        false,
        Some((0.5, std::f64::consts::SQRT_2)),
    ),
    radial("zero", "0", |_| 0.0, |_| 0.0, |_| 0.0, false, Some((1.0, 0.0))),
    radial("one", "1", |_| 1.0, |_| 0.0, |_| 0.0, false, Some((1.0, 0.0))),
    radial(
        "gaussian-density",
        "exp(-4|z|^2)",
        |s| (-4.0 * s).exp(),
        |s| -4.0 * (-4.0 * s).exp(),
        |s| 16.0 * (-4.0 * s).exp(),
        false,
        Some((1.0, 4.0)),
    ),
];

/// Catalog entry summary.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub analytic_hessian: bool,
    pub holder_alpha: Option<f64>,
    pub holder_kappa: Option<f64>,
}

/// Deterministic catalog listing, in registration order.
pub fn registry_list() -> Vec<CatalogEntry> {
    CATALOG
        .iter()
        .map(|e| CatalogEntry {
            name: e.name.to_string(),
            description: e.description.to_string(),
            analytic_hessian: e.has_hessian(),
            holder_alpha: e.witness.map(|w| w.0),
            holder_kappa: e.witness.map(|w| w.1),
        })
        .collect()
}

/// Looks up a base entry (without the extension prefix).
pub fn lookup(name: &str) -> Result<&'static AnalyticFn> {
    CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::Config(format!("unknown analytic function '{name}'")))
}

/// True when `name` or `ext:name` resolves.
pub fn is_registered(name: &str) -> bool {
    lookup(name.strip_prefix(EXTENSION_PREFIX).unwrap_or(name)).is_ok()
}

/// Field for `name` on interior and boundary nodes; `ext:name` returns the
/// Hölder extension of the base entry to every lattice node.
pub fn field(name: &str, dom: &Arc<GridDomain>) -> Result<ScalarField> {
    match name.strip_prefix(EXTENSION_PREFIX) {
        Some(base) => {
            let e = lookup(base)?;
            let (alpha, kappa) = e
                .witness
                .ok_or_else(|| Error::Config(format!("'{base}' has no Hölder witness")))?;
            smooth::holder_extend(&e.sample(dom), alpha, kappa)
        }
        None => Ok(lookup(name)?.sample(dom)),
    }
}

/// Largest `|u(z) - u(w)| / (κ |z - w|^α)` over random pairs in the closed
/// unit ball of `C^n`; at most 1 when the witness holds.
pub fn witness_ratio(e: &AnalyticFn, n: usize, pairs: usize, seed: u64) -> Option<f64> {
    let (alpha, kappa) = e.witness?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| loop {
        let x: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if norm_sq(&x) <= 1.0 {
            return x;
        }
    };
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let a = point(&mut rng);
        let b = point(&mut rng);
        let d = a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
        let gap = (e.eval(&a) - e.eval(&b)).abs();
        if d > 0.0 {
            let bound = kappa * d.powf(alpha);
            let r = if bound > 0.0 {
                gap / bound
            } else if gap > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst = worst.max(r);
        }
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;
    use crate::hess;

    #[test]
    fn quadratic_hessian_is_identity() {
        let e = lookup("quadratic").unwrap();
        let h = e.hessian(&[0.3, -0.2, 0.1, 0.4]).unwrap();
        let id = HermitianForm::identity(2);
        for j in 0..2 {
            for k in 0..2 {
                assert!((h.get(j, k) - id.get(j, k)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn unknown_name_errors() {
        assert!(matches!(lookup("nope"), Err(Error::Config(_))));
        assert!(!is_registered("ext:nope"));
        assert!(is_registered("ext:quadratic"));
    }

    #[test]
    fn witnesses_hold_on_random_pairs() {
        for e in CATALOG.iter() {
            for n in 1..=2 {
                let r = witness_ratio(e, n, 4000, 7).unwrap();
                assert!(r <= 1.0 + 1e-12, "{} n={n}: {r}", e.name);
            }
        }
    }

    #[test]
    fn radial_hessians_match_discrete() {
        let d = make_ball(2, 1.0, 1.0 / 16.0).unwrap();
        for name in ["radial-bump", "gaussian-density", "power-gamma-1/2"] {
            let e = lookup(name).unwrap();
            let u = e.sample(&d);
            let node = d.node_at(&[4, 2, -3, 5]).unwrap();
            let x = d.coords(node);
            let exact = e.hessian(&x).unwrap();
            let disc = hess::node_hessian(u.values(), &d, node);
            let scale = 1.0 + exact.norm_inf();
            for j in 0..2 {
                for k in 0..2 {
                    let err = (exact.get(j, k) - disc.get(j, k)).norm();
                    assert!(err < 0.05 * scale, "{name} ({j},{k}): {err}");
                }
            }
        }
    }

    #[test]
    fn extension_agrees_on_closure() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let base = field("power-gamma-1/4", &d).unwrap();
        let ext = field("ext:power-gamma-1/4", &d).unwrap();
        for &i in d.interior() {
            assert!((base.get(i) - ext.get(i)).abs() < 1e-12);
        }
        assert!(ext.values().iter().all(|v| v.is_finite()));
    }
}
