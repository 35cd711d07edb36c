//! Relative m-Hessian capacity through the extremal function, capacity
//! domination fits, and the inequality evaluators built on them.
//!
//! Inequalities whose constants are existence constants are fitted and
//! required to be stable under refinement; the boundary mass inequality has
//! explicit constants and is asserted.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{CompactSet, ScalarField};
use crate::envelope::envelope_sweep;
use crate::error::{Error, Result};
use crate::fit::log_log_fit;
use crate::hess::{self, DiscreteMeasure};
use crate::smooth::{self, HolderWitness};
use crate::sweep::SweepOptions;
use crate::symm;

/// Capacity of one compact set.
#[derive(Clone, Debug)]
pub struct CapacityResult {
    pub label: String,
    pub value: f64,
    /// Relative extremal function `u_K^*`.
    pub extremal: ScalarField,
    /// Fraction of set nodes where `u_K^* <= -1 + contact_tol`.
    pub contact_fraction: f64,
    pub iterations: usize,
    pub final_update: f64,
    pub converged: bool,
}

/// `Cap_m(K, Ω)` as the total σ_m mass of the envelope of the obstacle
/// `-1` on `K`, `0` elsewhere, with zero boundary data.
pub fn capacity(set: &CompactSet, m: usize, opts: &SweepOptions) -> Result<CapacityResult> {
    let dom = Arc::clone(set.domain());
    if m < 1 || m > dom.n() {
        return Err(Error::Config(format!("m must lie in 1..={}, got {m}", dom.n())));
    }
    let zero = ScalarField::constant(&dom, 0.0);
    if set.is_empty() {
        return Ok(CapacityResult {
            label: set.label().to_string(),
            value: 0.0,
            extremal: zero,
            contact_fraction: 1.0,
            iterations: 0,
            final_update: 0.0,
            converged: true,
        });
    }
    let mut obstacle = zero;
    for &i in set.nodes() {
        obstacle.set(i, -1.0);
    }
    let boundary = vec![0.0; dom.boundary().len()];
    let env = envelope_sweep(&obstacle, m, &boundary, opts)?;
    let hits = set
        .nodes()
        .iter()
        .filter(|&&i| env.field.get(i) <= -1.0 + env.contact_tol)
        .count();
    Ok(CapacityResult {
        label: set.label().to_string(),
        value: env.total_mass,
        contact_fraction: hits as f64 / set.len() as f64,
        extremal: env.field,
        iterations: env.iterations,
        final_update: env.final_update,
        converged: env.converged,
    })
}

/// Capacity of the centred ball `B_s` relative to `B_R` for radial
/// extremal functions: with `a = 1 - n/m`,
/// `C(n,m) π^n / n! · (|a| / ((s/R)^{2a} - 1))^m · R^{2(n-m)}` for `m < n`
/// and `π^n / n! · (2 ln(R/s))^{-n}` for `m = n`.
pub fn ball_capacity_oracle(n: usize, m: usize, s: f64, radius: f64) -> Result<f64> {
    if m < 1 || m > n {
        return Err(Error::Parameter(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    if !(s > 0.0 && s < radius) {
        return Err(Error::Parameter(format!("need 0 < s < R, got s = {s}, R = {radius}")));
    }
    let nf: f64 = (1..=n).map(|k| k as f64).product();
    let base = std::f64::consts::PI.powi(n as i32) / nf;
    let t = s / radius;
    let unit = if m == n {
        base * (2.0 * (1.0 / t).ln()).powi(-(n as i32))
    } else {
        let a = 1.0 - n as f64 / m as f64;
        symm::binomial(n, m) * base * (a.abs() / (t.powf(2.0 * a) - 1.0)).powi(m as i32)
    };
    Ok(unit * radius.powi(2 * (n - m) as i32))
}

/// Capacities of a family, in parallel unless `serial`.
pub fn capacities(sets: &[CompactSet], m: usize, opts: &SweepOptions, serial: bool) -> Result<Vec<CapacityResult>> {
    if serial {
        sets.iter().map(|s| capacity(s, m, opts)).collect()
    } else {
        sets.par_iter().map(|s| capacity(s, m, opts)).collect()
    }
}

/// Fitted capacity domination `μ(K) <= A Cap^τ` over samples with
/// capacity at most 1.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DominationFit {
    pub a: f64,
    pub tau: f64,
    /// `(mass, capacity)` samples.
    pub pairs: Vec<(f64, f64)>,
    /// Largest `mass / cap^τ` among eligible samples (equals `a`).
    pub max_ratio: f64,
    /// Number of samples with capacity in `(0, 1]`.
    pub eligible: usize,
}

/// Smallest `A` with `mass <= A cap^τ` on every sample with `0 < cap <= 1`.
pub fn fit_domination(pairs: &[(f64, f64)], tau: f64) -> Result<DominationFit> {
    if !(tau > 1.0) {
        return Err(Error::Parameter(format!("tau must exceed 1, got {tau}")));
    }
    let mut a = 0.0f64;
    let mut eligible = 0;
    for &(mass, cap) in pairs {
        if cap > 0.0 && cap <= 1.0 {
            eligible += 1;
            a = a.max(mass / cap.powf(tau));
        }
    }
    Ok(DominationFit {
        a,
        tau,
        pairs: pairs.to_vec(),
        max_ratio: a,
        eligible,
    })
}

/// Per-set row of an inequality report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SetRow {
    pub label: String,
    pub delta_k: f64,
    pub volume: f64,
    pub mass: f64,
    pub capacity: f64,
    /// Value of the row's tested ratio (meaning depends on the report).
    pub ratio: f64,
    /// True when the row enters an assertion, false when only fitted.
    pub asserted: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResolutionFit {
    pub h: f64,
    pub rows: Vec<SetRow>,
    /// Fitted constant at this resolution.
    pub constant: f64,
    /// Label of the set achieving the constant.
    pub argmax: String,
}

fn check_exponent_range(n: usize, m: usize, r: f64, what: &str) -> Result<()> {
    if m >= n {
        return Err(Error::Unsupported(format!("{what} is evaluated only for m < n")));
    }
    let top = m as f64 / (n - m) as f64;
    if !(r > 0.0 && r < top) {
        return Err(Error::Parameter(format!("r = {r} must lie in (0, {top})")));
    }
    Ok(())
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        (b - a).abs() / a.abs().max(b.abs())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeCapacityReport {
    pub r: f64,
    pub resolutions: Vec<ResolutionFit>,
    /// Relative change of `N(r)` between consecutive resolutions.
    pub changes: Vec<f64>,
    pub single_sample: bool,
    pub stable: bool,
}

/// Fits `N(r) = max λ(K)/Cap(K)^{1+r}` per resolution and requires the
/// fit to change by less than 25% between consecutive resolutions.
pub fn volume_capacity_check(
    families: &[Vec<CompactSet>],
    m: usize,
    r: f64,
    opts: &SweepOptions,
    serial: bool,
) -> Result<VolumeCapacityReport> {
    let first = families
        .first()
        .and_then(|f| f.first())
        .ok_or_else(|| Error::EmptySet("no sets supplied".into()))?;
    check_exponent_range(first.domain().n(), m, r, "the volume-capacity inequality")?;
    let mut resolutions = Vec::new();
    for fam in families {
        let caps = capacities(fam, m, opts, serial)?;
        let mut rows = Vec::new();
        let mut best = (0.0f64, String::new());
        for (set, cap) in fam.iter().zip(&caps) {
            let ratio = if cap.value > 0.0 { set.volume() / cap.value.powf(1.0 + r) } else { f64::INFINITY };
            if ratio > best.0 {
                best = (ratio, set.label().to_string());
            }
            rows.push(SetRow {
                label: set.label().to_string(),
                delta_k: set.hausdorff_to_boundary(),
                volume: set.volume(),
                mass: set.volume(),
                capacity: cap.value,
                ratio,
                asserted: false,
                pass: ratio.is_finite(),
            });
        }
        resolutions.push(ResolutionFit {
            h: fam.first().map(|s| s.domain().h()).unwrap_or(0.0),
            rows,
            constant: best.0,
            argmax: best.1,
        });
    }
    let changes: Vec<f64> = resolutions
        .windows(2)
        .map(|w| relative_change(w[0].constant, w[1].constant))
        .collect();
    let single_sample = families.iter().any(|f| f.len() < 2);
    Ok(VolumeCapacityReport {
        r,
        stable: changes.iter().all(|c| *c < 0.25) && resolutions.iter().all(|r| r.constant.is_finite()),
        resolutions,
        changes,
        single_sample,
    })
}

/// `ε = αr / ((2 - α)m + α)`.
pub fn theorem_a_epsilon(alpha: f64, m: usize, r: f64) -> f64 {
    alpha * r / ((2.0 - alpha) * m as f64 + alpha)
}

/// Potential and set family at one resolution.
#[derive(Clone, Debug)]
pub struct PhiSample {
    pub phi: ScalarField,
    pub family: Vec<CompactSet>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoremAReport {
    pub alpha: f64,
    pub kappa: f64,
    pub r: f64,
    pub epsilon: f64,
    pub resolutions: Vec<ResolutionFit>,
    pub changes: Vec<f64>,
    /// Within 30% between consecutive resolutions.
    pub stable: bool,
    /// No eligible set exceeds the fitted bound at its own resolution.
    pub bound_holds: bool,
    /// The constant form `C_0 κ + C_1 κ^m + κ^m` is reported
    /// with the κ part evaluated; `C_0`, `C_1` are not known numerically.
    pub constant_form: String,
}

/// Fits `A` in `mass(K) <= A (Cap^{1+ε} + Cap^{1+mε})` over sets with
/// capacity at most 1 at each resolution.
pub fn theorem_a_check(
    samples: &[PhiSample],
    witness: (f64, f64),
    m: usize,
    r: f64,
    opts: &SweepOptions,
    serial: bool,
) -> Result<TheoremAReport> {
    let (alpha, kappa) = witness;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} outside (0, 1]")));
    }
    let first = samples.first().ok_or_else(|| Error::EmptySet("no samples".into()))?;
    check_exponent_range(first.phi.domain().n(), m, r, "mass-capacity bound")?;
    let eps = theorem_a_epsilon(alpha, m, r);
    let mf = m as f64;
    let mut resolutions = Vec::new();
    for s in samples {
        let dom = s.phi.domain();
        if dom.boundary().iter().any(|&i| s.phi.get(i).abs() > 1e-9) {
            return Err(Error::Precondition("phi must vanish on boundary nodes".into()));
        }
        let mu = hess::hessian_measure(&s.phi, m)?;
        let caps = capacities(&s.family, m, opts, serial)?;
        let mut rows = Vec::new();
        let mut best = (0.0f64, String::new());
        for (set, cap) in s.family.iter().zip(&caps) {
            let mass = mu.mass_on(set.nodes());
            let c = cap.value;
            let eligible = c > 0.0 && c <= 1.0;
            let ratio = if c > 0.0 { mass / (c.powf(1.0 + eps) + c.powf(1.0 + mf * eps)) } else { 0.0 };
            if eligible && ratio > best.0 {
                best = (ratio, set.label().to_string());
            }
            rows.push(SetRow {
                label: set.label().to_string(),
                delta_k: set.hausdorff_to_boundary(),
                volume: set.volume(),
                mass,
                capacity: c,
                ratio,
                asserted: false,
                pass: true,
            });
        }
        for row in &mut rows {
            row.pass = !(row.capacity > 0.0 && row.capacity <= 1.0) || row.ratio <= best.0 * (1.0 + 1e-12);
        }
        resolutions.push(ResolutionFit {
            h: dom.h(),
            rows,
            constant: best.0,
            argmax: best.1,
        });
    }
    let changes: Vec<f64> = resolutions
        .windows(2)
        .map(|w| relative_change(w[0].constant, w[1].constant))
        .collect();
    let bound_holds = resolutions.iter().all(|r| r.rows.iter().all(|row| row.pass));
    Ok(TheoremAReport {
        alpha,
        kappa,
        r,
        epsilon: eps,
        stable: changes.iter().all(|c| *c < 0.3),
        bound_holds,
        changes,
        resolutions,
        constant_form: format!(
            "A = C0*{kappa} + C1*{} + {} (C0, C1 fitted implicitly)",
            kappa.powi(m as i32),
            kappa.powi(m as i32)
        ),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryMassReport {
    pub alpha: f64,
    pub l: f64,
    pub disc_tol: f64,
    pub rows: Vec<SetRow>,
    pub max_ratio: f64,
    pub holds: bool,
}

/// Asserts `mass(K) <= L^m δ_K^{mα} Cap(K) (1 + disc_tol)` on every set.
/// `ratio` in each row is `mass / (L^m δ_K^{mα} Cap)`.
pub fn boundary_mass_check(
    phi: &ScalarField,
    witness: Option<(f64, f64)>,
    family: &[CompactSet],
    m: usize,
    disc_tol: f64,
    opts: &SweepOptions,
    serial: bool,
) -> Result<BoundaryMassReport> {
    let (alpha, l) = witness.ok_or_else(|| Error::Precondition("a Hölder witness (alpha, L) is required".into()))?;
    let dom = phi.domain();
    if dom.boundary().iter().any(|&i| phi.get(i).abs() > 1e-9) {
        return Err(Error::Precondition("phi must vanish on boundary nodes".into()));
    }
    let mu = hess::hessian_measure(phi, m)?;
    let caps = capacities(family, m, opts, serial)?;
    let mf = m as f64;
    let mut rows = Vec::new();
    let mut max_ratio = 0.0f64;
    let mut holds = true;
    for (set, cap) in family.iter().zip(&caps) {
        let mass = mu.mass_on(set.nodes());
        let bound = l.powf(mf) * set.hausdorff_to_boundary().powf(mf * alpha) * cap.value;
        let ratio = if bound > 0.0 {
            mass / bound
        } else if mass > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let pass = ratio <= 1.0 + disc_tol;
        holds &= pass;
        max_ratio = max_ratio.max(ratio);
        rows.push(SetRow {
            label: set.label().to_string(),
            delta_k: set.hausdorff_to_boundary(),
            volume: set.volume(),
            mass,
            capacity: cap.value,
            ratio,
            asserted: true,
            pass,
        });
    }
    Ok(BoundaryMassReport {
        alpha,
        l,
        disc_tol,
        rows,
        max_ratio,
        holds,
    })
}

/// Which exponent of the moduli estimates is tested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuliBranch {
    /// Fields in the zero-boundary class: exponent `(α/2)^k / m`.
    ZeroBoundary,
    /// Boundary data from a C^{1,1} function: exponent `(α/2)^k`.
    C11Boundary,
}

/// Predicted exponent of the moduli estimate for order `k`.
pub fn moduli_exponent(alpha: f64, k: usize, m: usize, branch: ModuliBranch) -> f64 {
    let base = (alpha / 2.0).powi(k as i32);
    match branch {
        ModuliBranch::ZeroBoundary => base / m as f64,
        ModuliBranch::C11Boundary => base,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModuliRow {
    pub l1: f64,
    /// `∫|u - v| σ_k(φ)` for `k = 1..=m`.
    pub lhs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModuliReport {
    pub alpha: f64,
    pub branch: ModuliBranch,
    pub mass_bound: f64,
    pub rows: Vec<ModuliRow>,
    pub predicted: Vec<f64>,
    pub slopes: Vec<Option<f64>>,
    /// Smallest `C_k` with `lhs <= C_k R l1^{exponent}`.
    pub fitted_constants: Vec<f64>,
    pub holds: bool,
}

/// Slope test of `∫|u - v| dσ_k(φ)` against `‖u - v‖_1` over the ladder
/// `vs`; each slope must reach the predicted exponent minus 0.1.
pub fn moduli_estimate_check(
    phi: &ScalarField,
    alpha: f64,
    u: &ScalarField,
    vs: &[ScalarField],
    m: usize,
    branch: ModuliBranch,
) -> Result<ModuliReport> {
    let dom = phi.domain();
    if m < 1 || m > dom.n() {
        return Err(Error::Config(format!("m must lie in 1..={}, got {m}", dom.n())));
    }
    let eigs = hess::eigen_field(phi)?;
    let vol = dom.cell_volume();
    let sigma: Vec<Vec<f64>> = (1..=m)
        .map(|k| eigs.iter().map(|l| symm::sigma_unchecked(l.values(), k).max(0.0) * vol).collect())
        .collect();
    let mut mass_bound = hess::hessian_measure(u, m)?.total();
    let mut rows = Vec::new();
    for v in vs {
        let l1 = u.l1_distance(v);
        if l1 > 1.0 {
            return Err(Error::Precondition(format!("‖u - v‖_1 = {l1} exceeds 1")));
        }
        mass_bound = mass_bound.max(hess::hessian_measure(v, m)?.total());
        let lhs = sigma
            .iter()
            .map(|cells| {
                dom.interior()
                    .iter()
                    .zip(cells)
                    .map(|(&i, c)| (u.get(i) - v.get(i)).abs() * c)
                    .sum()
            })
            .collect();
        rows.push(ModuliRow { l1, lhs });
    }
    let predicted: Vec<f64> = (1..=m).map(|k| moduli_exponent(alpha, k, m, branch)).collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.l1).collect();
    let mut slopes = Vec::new();
    let mut constants = Vec::new();
    let mut holds = true;
    for k in 0..m {
        let ys: Vec<f64> = rows.iter().map(|r| r.lhs[k]).collect();
        let slope = log_log_fit(&xs, &ys).map(|f| f.slope);
        let c = rows
            .iter()
            .filter(|r| r.l1 > 0.0)
            .map(|r| r.lhs[k] / (mass_bound.max(f64::MIN_POSITIVE) * r.l1.powf(predicted[k])))
            .fold(0.0, f64::max);
        constants.push(c);
        let all_zero = ys.iter().all(|y| *y == 0.0);
        holds &= all_zero || slope.is_some_and(|s| s >= predicted[k] - 0.1);
        slopes.push(slope);
    }
    Ok(ModuliReport {
        alpha,
        branch,
        mass_bound,
        rows,
        predicted,
        slopes,
        fitted_constants: constants,
        holds,
    })
}

/// Predicted Hölder exponents of the Dirichlet solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremBExponents {
    pub gamma: f64,
    pub gamma_prime: f64,
    /// Bound `2γ α^m / 2^m` (boundary data C^{1,1}).
    pub alpha_prime: f64,
    /// Bound `γ' α^m / 2^m` (boundary data C^{2α}).
    pub alpha_double_prime: f64,
}

/// `γ = mα / (m(m+1)α + (n-m)[(2-α)m + α])`, `γ' = γ/m` and the two
/// exponent bounds.
pub fn theorem_b_exponents(m: usize, n: usize, alpha: f64) -> Result<TheoremBExponents> {
    if m < 1 || m > n {
        return Err(Error::Parameter(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Parameter(format!("alpha = {alpha} outside (0, 1]")));
    }
    let mf = m as f64;
    let den = mf * (mf + 1.0) * alpha + (n - m) as f64 * ((2.0 - alpha) * mf + alpha);
    let gamma = mf * alpha / den;
    let gamma_prime = alpha / den;
    let scale = alpha.powi(m as i32) / 2f64.powi(m as i32);
    Ok(TheoremBExponents {
        gamma,
        gamma_prime,
        alpha_prime: 2.0 * gamma * scale,
        alpha_double_prime: gamma_prime * scale,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremBReport {
    pub predicted: TheoremBExponents,
    /// Bound the measurement is compared with.
    pub bound: f64,
    pub witness: HolderWitness,
    pub solve_iterations: usize,
    pub solve_converged: bool,
    pub measure_error: f64,
    pub holds: bool,
}

/// Solves with `μ = σ_m(φ)` and boundary data `boundary`, measures the
/// Hölder exponent of the solution and requires at least half the
/// predicted bound (`α'` for C^{1,1} data, `α''` otherwise).
pub fn theorem_b_experiment(
    phi: &ScalarField,
    alpha: f64,
    boundary: Vec<f64>,
    c11_boundary: bool,
    m: usize,
    ladder: &[f64],
    opts: &SweepOptions,
) -> Result<TheoremBReport> {
    let dom = phi.domain();
    let predicted = theorem_b_exponents(m, dom.n(), alpha)?;
    let mu: DiscreteMeasure = hess::hessian_measure(phi, m)?;
    let p = crate::solver::DirichletProblem::new(dom, m, mu, boundary)?;
    let sol = crate::solver::solve_dirichlet(&p, opts)?;
    let witness = smooth::measure_holder(&sol.field, ladder)?;
    let bound = if c11_boundary { predicted.alpha_prime } else { predicted.alpha_double_prime };
    Ok(TheoremBReport {
        predicted,
        bound,
        holds: witness.exponent >= 0.5 * bound,
        witness,
        solve_iterations: sol.iterations,
        solve_converged: sol.converged,
        measure_error: sol.measure_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{compact_family, make_ball, FamilyKind};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponent_arithmetic() {
        assert_abs_diff_eq!(theorem_a_epsilon(1.0, 1, 0.5), 0.25, epsilon = 1e-15);
        let e = theorem_b_exponents(1, 2, 1.0).unwrap();
        assert_abs_diff_eq!(e.gamma, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(e.alpha_prime, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(e.gamma_prime, e.gamma, epsilon = 1e-15);
        for m in 1..=3 {
            let e = theorem_b_exponents(m, m, 0.7).unwrap();
            assert_abs_diff_eq!(e.gamma, 1.0 / (m as f64 + 1.0), epsilon = 1e-14);
        }
        assert!(theorem_b_exponents(3, 2, 0.5).is_err());
        assert!(theorem_b_exponents(1, 2, 0.0).is_err());
        assert_abs_diff_eq!(moduli_exponent(1.0, 2, 2, ModuliBranch::ZeroBoundary), 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(moduli_exponent(1.0, 1, 1, ModuliBranch::C11Boundary), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn disc_capacity_matches_log_formula() {
        let d = make_ball(1, 1.0, 1.0 / 64.0).unwrap();
        let set = &compact_family(&d, &FamilyKind::Balls { radii: vec![0.3] }).unwrap()[0];
        let c = capacity(set, 1, &SweepOptions::with_tol(1e-11)).unwrap();
        let exact = std::f64::consts::PI / (2.0 * (1.0f64 / 0.3).ln());
        assert!(c.converged);
        assert!((c.value - exact).abs() / exact < 0.05, "{} vs {exact}", c.value);
        assert!(c.contact_fraction > 0.95);
    }

    #[test]
    fn ball_oracle_special_cases() {
        let pi = std::f64::consts::PI;
        let s: f64 = 0.3;
        assert_abs_diff_eq!(ball_capacity_oracle(1, 1, s, 1.0).unwrap(), pi / (2.0 * (1.0 / s).ln()), epsilon = 1e-14);
        assert_abs_diff_eq!(ball_capacity_oracle(2, 1, s, 1.0).unwrap(), pi * pi / (s.powi(-2) - 1.0), epsilon = 1e-13);
        let r = ball_capacity_oracle(2, 1, 0.6, 2.0).unwrap();
        assert_abs_diff_eq!(r, 4.0 * ball_capacity_oracle(2, 1, 0.3, 1.0).unwrap(), epsilon = 1e-12);
        assert!(ball_capacity_oracle(2, 3, s, 1.0).is_err());
    }

    #[test]
    fn empty_set_has_zero_capacity() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let e = CompactSet::new(&d, vec![], "empty").unwrap();
        assert_eq!(capacity(&e, 1, &SweepOptions::default()).unwrap().value, 0.0);
    }

    #[test]
    fn domination_fit() {
        let f = fit_domination(&[(0.1, 0.5), (0.2, 2.0), (0.01, 0.1)], 2.0).unwrap();
        assert_abs_diff_eq!(f.a, 1.0, epsilon = 1e-12);
        assert_eq!(f.eligible, 2);
        assert!(fit_domination(&[], 1.0).is_err());
    }

    #[test]
    fn m_equal_n_unsupported() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let fam = compact_family(&d, &FamilyKind::Balls { radii: vec![0.3] }).unwrap();
        let r = volume_capacity_check(&[fam], 1, 0.5, &SweepOptions::default(), true);
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }
}
