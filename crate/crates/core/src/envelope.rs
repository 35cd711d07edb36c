//! m-subharmonic envelopes `P_{m,Ω}(h) = sup{v ∈ SH_m(Ω) : v <= h}`.
//!
//! [`envelope_sweep`] runs projected relaxation on the Hessian pencil: a
//! node's value moves to `min(h, t*)` with `t*` the largest centre value
//! keeping the local Hessian in Γ̄_m. [`envelope_penalized`] solves the
//! penalized equations `σ_m(u) = e^{j(u-h)} σ_m^+(h)` along a ladder of `j`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, ScalarField};
use crate::error::{Error, Result};
use crate::hess::{self, DiscreteMeasure};
use crate::smooth;
use crate::sweep::{self, SweepOptions, SweepOutcome};
use crate::symm;

/// Envelope field with convergence and complementarity diagnostics.
#[derive(Clone, Debug)]
pub struct EnvelopeResult {
    pub field: ScalarField,
    pub iterations: usize,
    pub final_update: f64,
    pub converged: bool,
    /// Interior nodes with `h̃ >= h - contact_tol`.
    pub contact_mask: Vec<bool>,
    pub contact_tol: f64,
    /// `∫ (h - h̃) dσ_m(h̃)` over the interior nodes.
    pub complementarity_defect: f64,
    /// Total mass of `σ_m(h̃)`.
    pub total_mass: f64,
    pub history: Vec<f64>,
}

impl EnvelopeResult {
    /// Number of interior nodes in the contact band.
    pub fn contact_count(&self) -> usize {
        self.contact_mask.iter().filter(|&&b| b).count()
    }
}

fn check_m(dom: &GridDomain, m: usize) -> Result<()> {
    if m < 1 || m > dom.n() {
        return Err(Error::Config(format!("m must lie in 1..={}, got {m}", dom.n())));
    }
    Ok(())
}

fn check_boundary(obstacle: &ScalarField, boundary: &[f64]) -> Result<()> {
    let dom = obstacle.domain();
    if boundary.len() != dom.boundary().len() {
        return Err(Error::Domain(format!(
            "expected {} boundary values, got {}",
            dom.boundary().len(),
            boundary.len()
        )));
    }
    if !obstacle.is_finite_on_closure() || boundary.iter().any(|b| !b.is_finite()) {
        return Err(Error::Domain("obstacle and boundary data must be finite".into()));
    }
    for (&node, &b) in dom.boundary().iter().zip(boundary) {
        let hv = obstacle.get(node);
        if b > hv + 1e-12 * (1.0 + hv.abs()) {
            return Err(Error::Precondition(format!(
                "boundary datum {b} exceeds obstacle {hv} at node {node}"
            )));
        }
    }
    Ok(())
}

/// Contact band threshold `max(10·tol, h²)`.
pub fn contact_tolerance(dom: &GridDomain, tol: f64) -> f64 {
    (10.0 * tol).max(dom.h() * dom.h())
}

fn finish(
    obstacle: &ScalarField,
    values: Vec<f64>,
    m: usize,
    outcome: SweepOutcome,
    tol: f64,
) -> Result<EnvelopeResult> {
    let dom = Arc::clone(obstacle.domain());
    let field = ScalarField::from_values(&dom, values)?;
    let contact_tol = contact_tolerance(&dom, tol);
    let mut contact_mask = vec![false; dom.node_count()];
    for &i in dom.interior() {
        contact_mask[i] = field.get(i) >= obstacle.get(i) - contact_tol;
    }
    let mu = hess::hessian_measure(&field, m)?;
    let gap: Vec<f64> = (0..dom.node_count())
        .map(|i| {
            let d = obstacle.get(i) - field.get(i);
            if d.is_finite() {
                d
            } else {
                0.0
            }
        })
        .collect();
    let complementarity_defect = mu.integrate(&gap);
    Ok(EnvelopeResult {
        field,
        iterations: outcome.iterations,
        final_update: outcome.final_update,
        converged: outcome.converged,
        contact_mask,
        contact_tol,
        complementarity_defect,
        total_mass: mu.total(),
        history: outcome.history,
    })
}

/// Envelope of `obstacle` with Dirichlet data `boundary` (slot order),
/// starting from the obstacle and sweeping downwards.
pub fn envelope_sweep(
    obstacle: &ScalarField,
    m: usize,
    boundary: &[f64],
    opts: &SweepOptions,
) -> Result<EnvelopeResult> {
    let dom = Arc::clone(obstacle.domain());
    check_m(&dom, m)?;
    check_boundary(obstacle, boundary)?;
    let mut values = obstacle.values().to_vec();
    for (&node, &b) in dom.boundary().iter().zip(boundary) {
        values[node] = b;
    }
    let h2 = dom.h() * dom.h();
    let obs = obstacle.values();
    let outcome = sweep::run(&dom, &mut values, opts, |v, node| {
        let lam0 = hess::pencil_base(v, &dom, node);
        (h2 * symm::cone_shift(&lam0, m), obs[node])
    });
    finish(obstacle, values, m, outcome, opts.tol)
}

/// `σ_m^+(h)`: the density `σ_m(λ(h))` where the discrete Hessian of `h`
/// lies in Γ̄_m at slack `h_grid²`, 0 elsewhere (interior order).
pub fn sigma_plus(obstacle: &ScalarField, m: usize) -> Result<Vec<f64>> {
    let dom = obstacle.domain();
    check_m(dom, m)?;
    let slack = dom.h() * dom.h();
    Ok(hess::eigen_field(obstacle)?
        .iter()
        .map(|l| {
            if symm::in_gamma_m(l, m, slack) {
                symm::sigma_unchecked(l.values(), m).max(0.0)
            } else {
                0.0
            }
        })
        .collect())
}

/// One rung of the penalization ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PenaltyStep {
    pub j: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `sup (h - u_j)` over interior nodes.
    pub sup_gap_to_obstacle: f64,
    /// `sup |u_j - u_{j-1}|` (0 for the first rung).
    pub sup_increment: f64,
    /// `min (u_j - u_{j-1})`; negative values break monotonicity.
    pub min_increment: f64,
}

/// Output of the penalized scheme.
#[derive(Clone, Debug)]
pub struct PenalizedResult {
    /// Final rung as an envelope result.
    pub result: EnvelopeResult,
    pub ladder: Vec<PenaltyStep>,
    /// True when every rung satisfies `u_j >= u_{j-1} - tolerance`.
    pub monotone: bool,
    pub monotonicity_tolerance: f64,
}

/// Root of `ln σ_m(λ_0 - t/h²) = j(t - h_node) + ln σ⁺` on `t <= t*`.
fn penalized_root(lam0: &symm::EigenTuple, m: usize, h2: f64, j: f64, hn: f64, sp: f64) -> f64 {
    let t_star = h2 * symm::cone_shift(lam0, m);
    if sp <= 0.0 {
        return t_star;
    }
    let ln_sp = sp.ln();
    let g = |t: f64| {
        let s = symm::pencil_sigma(lam0, m, t / h2);
        if s <= 0.0 {
            f64::NEG_INFINITY
        } else {
            s.ln() - j * (t - hn) - ln_sp
        }
    };
    // At t_f = target for σ⁺ the left side equals ln σ⁺ and the penalty is
    // nonpositive when t_f <= h; otherwise t = h already gives g >= 0.
    let t_f = h2 * symm::target_shift(lam0, m, sp);
    let mut lo = t_f.min(hn);
    let mut hi = t_star;
    if lo >= hi {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Penalized approximations `u_j` of the envelope, with `u_j = h` on the
/// boundary nodes. Each rung starts from the previous one; the first from
/// the subsolution `A·ρ + min h`.
pub fn envelope_penalized(
    obstacle: &ScalarField,
    m: usize,
    j_ladder: &[f64],
    opts: &SweepOptions,
) -> Result<PenalizedResult> {
    let dom = Arc::clone(obstacle.domain());
    check_m(&dom, m)?;
    if j_ladder.is_empty() || j_ladder.windows(2).any(|w| w[1] <= w[0]) || j_ladder[0] <= 0.0 {
        return Err(Error::Parameter("j ladder must be positive and increasing".into()));
    }
    if !obstacle.is_finite_on_closure() {
        return Err(Error::Domain("obstacle must be finite".into()));
    }
    let sp = sigma_plus(obstacle, m)?;
    let h2 = dom.h() * dom.h();
    let obs = obstacle.values();

    let rho_min = rho_lambda_min(&dom)?;
    let sp_max = sp.iter().cloned().fold(0.0, f64::max);
    let a = (sp_max / symm::binomial(dom.n(), m)).powf(1.0 / m as f64) / rho_min;
    let hmin = obstacle.min();
    let mut values = obstacle.values().to_vec();
    for &i in dom.interior() {
        values[i] = (a * dom.rho(i) + hmin).min(obs[i]);
    }

    let mono_tol = 10.0 * opts.tol;
    let mut ladder = Vec::with_capacity(j_ladder.len());
    let mut monotone = true;
    let mut last = None;
    for (rung, &j) in j_ladder.iter().enumerate() {
        let prev = values.clone();
        let outcome = sweep::run(&dom, &mut values, opts, |v, node| {
            let lam0 = hess::pencil_base(v, &dom, node);
            let slot = dom.interior_slot(node).unwrap();
            (penalized_root(&lam0, m, h2, j, obs[node], sp[slot]), f64::INFINITY)
        });
        let mut sup_gap = f64::NEG_INFINITY;
        let mut sup_inc = 0.0f64;
        let mut min_inc = f64::INFINITY;
        for &i in dom.interior() {
            sup_gap = sup_gap.max(obs[i] - values[i]);
            let d = values[i] - prev[i];
            sup_inc = sup_inc.max(d.abs());
            min_inc = min_inc.min(d);
        }
        if rung == 0 {
            sup_inc = 0.0;
            min_inc = 0.0;
        } else if min_inc < -mono_tol {
            monotone = false;
        }
        ladder.push(PenaltyStep {
            j,
            iterations: outcome.iterations,
            converged: outcome.converged,
            sup_gap_to_obstacle: sup_gap,
            sup_increment: sup_inc,
            min_increment: min_inc,
        });
        last = Some(outcome);
    }
    let result = finish(obstacle, values, m, last.expect("nonempty ladder"), opts.tol)?;
    Ok(PenalizedResult {
        result,
        ladder,
        monotone,
        monotonicity_tolerance: mono_tol,
    })
}

/// Smallest eigenvalue of the discrete Hessian of `ρ` over the interior.
pub(crate) fn rho_lambda_min(dom: &GridDomain) -> Result<f64> {
    let m = dom
        .interior()
        .iter()
        .map(|&i| hess::node_eigenvalues(dom.rho_values(), dom, i).min())
        .fold(f64::INFINITY, f64::min);
    if !(m > 0.0) {
        return Err(Error::Infeasible(format!(
            "defining function is not strictly plurisubharmonic on the lattice (λ_min = {m})"
        )));
    }
    Ok(m)
}

/// Report of the obstacle measure bound `σ_m(h̃) <= 1_{h̃=h} σ_m^+(h)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureBoundReport {
    pub total_mass: f64,
    /// Mass of `σ_m(h̃)` off the contact band.
    pub leak_mass: f64,
    pub leak_fraction: f64,
    pub leak_tol: f64,
    /// `max σ_m(h̃) / σ_m^+(h)` over contact cells with positive mass.
    pub max_contact_ratio: f64,
    /// Contact cells violating `σ_m(h̃) <= σ_m^+(h)(1 + rel_tol) + abs_tol`.
    pub contact_violations: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub holds: bool,
}

/// Checks the obstacle measure bound on an envelope of a C²-sampled `h`:
/// (a) the mass off the contact band is at most `leak_tol` of the total
/// and (b) cellwise `σ_m(h̃) <= σ_m^+(h)(1 + rel_tol)` on the band.
pub fn measure_bound_check(
    obstacle: &ScalarField,
    envelope: &EnvelopeResult,
    m: usize,
    leak_tol: f64,
    rel_tol: f64,
) -> Result<MeasureBoundReport> {
    let dom = obstacle.domain();
    let sp = sigma_plus(obstacle, m)?;
    let mu: DiscreteMeasure = hess::hessian_measure(&envelope.field, m)?;
    let dens = mu.density();
    let abs_tol = 1e-8 * (1.0 + sp.iter().cloned().fold(0.0, f64::max));
    let mut leak = 0.0;
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for (slot, &i) in dom.interior().iter().enumerate() {
        if envelope.contact_mask[i] {
            if dens[slot] > sp[slot] * (1.0 + rel_tol) + abs_tol {
                violations += 1;
            }
            if dens[slot] > abs_tol {
                let r = if sp[slot] > 0.0 { dens[slot] / sp[slot] } else { f64::INFINITY };
                max_ratio = max_ratio.max(r);
            }
        } else {
            leak += mu.cell_mass()[slot];
        }
    }
    let total = mu.total();
    let leak_fraction = if total > 0.0 { leak / total } else { 0.0 };
    Ok(MeasureBoundReport {
        total_mass: total,
        leak_mass: leak,
        leak_fraction,
        leak_tol,
        max_contact_ratio: max_ratio,
        contact_violations: violations,
        rel_tol,
        abs_tol,
        holds: leak <= leak_tol * total + abs_tol * dom.cell_volume() && violations == 0,
    })
}

/// Decreasing approximation of a negative m-sh `u` by envelopes:
/// `u_j = max(P(h_j), j·ρ)` on interior nodes and 0 on boundary nodes, with
/// `h_j = max(u, min_{i <= j} u_{δ_i})` built from the regularizations along
/// the decreasing radii `deltas` (rung `j` is 1-based).
pub fn smoothing_ladder(
    u: &ScalarField,
    m: usize,
    deltas: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<ScalarField>> {
    let dom = Arc::clone(u.domain());
    check_m(&dom, m)?;
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Parameter("smoothing radii must decrease".into()));
    }
    if u.max() > 1e-12 {
        return Err(Error::Precondition("smoothing ladder needs u <= 0".into()));
    }
    let mut running_min: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(deltas.len());
    for (k, &delta) in deltas.iter().enumerate() {
        let ud = smooth::regularize(u, delta)?;
        let cur = match running_min.take() {
            None => ud.values().to_vec(),
            Some(prev) => prev.iter().zip(ud.values()).map(|(a, b)| a.min(*b)).collect(),
        };
        let mut hj = u.clone();
        for &i in dom.interior().iter().chain(dom.boundary()) {
            let c = cur[i];
            if c.is_finite() {
                hj.set(i, c.max(u.get(i)));
            }
        }
        running_min = Some(cur);
        let boundary = hj.boundary_values();
        let env = envelope_sweep(&hj, m, &boundary, opts)?;
        let j = (k + 1) as f64;
        let mut uj = env.field;
        for &i in dom.interior() {
            uj.set(i, uj.get(i).max(j * dom.rho(i)));
        }
        for &i in dom.boundary() {
            uj.set(i, 0.0);
        }
        out.push(uj);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;

    fn opts() -> SweepOptions {
        SweepOptions::with_tol(1e-12)
    }

    #[test]
    fn msh_obstacle_is_fixed() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let h = ScalarField::from_fn(&d, |x| x[0] * x[0] + x[1] * x[1] - 1.0);
        let r = envelope_sweep(&h, 1, &h.boundary_values(), &opts()).unwrap();
        assert!(r.converged);
        assert!(r.field.sup_distance(&h) < 1e-12);
        assert_eq!(r.contact_count(), d.interior().len());
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn shift_and_monotonicity() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let h = ScalarField::from_fn(&d, |x| -(1.0 - x[0] * x[0] - x[1] * x[1]).powi(2));
        let a = envelope_sweep(&h, 1, &h.boundary_values(), &opts()).unwrap();
        let h2 = h.map(|v| v + 0.3);
        let b = envelope_sweep(&h2, 1, &h2.boundary_values(), &opts()).unwrap();
        for &i in d.interior() {
            assert!((b.field.get(i) - a.field.get(i) - 0.3).abs() < 1e-9);
        }
        let lower = h.map(|v| v - 0.1);
        let c = envelope_sweep(&lower, 1, &lower.boundary_values(), &opts()).unwrap();
        for &i in d.interior() {
            assert!(c.field.get(i) <= a.field.get(i) + 1e-10);
            assert!(a.field.get(i) <= h.get(i) + 1e-12);
        }
    }

    #[test]
    fn concave_obstacle_has_vanishing_mass() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let h = ScalarField::from_fn(&d, |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        let sp = sigma_plus(&h, 1).unwrap();
        assert!(sp.iter().all(|&v| v == 0.0));
        let r = envelope_sweep(&h, 1, &h.boundary_values(), &opts()).unwrap();
        assert!(r.total_mass < 1e-6, "{}", r.total_mass);
    }

    #[test]
    fn boundary_above_obstacle_rejected() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let h = ScalarField::constant(&d, 0.0);
        let b = vec![1.0; d.boundary().len()];
        assert!(matches!(envelope_sweep(&h, 1, &b, &opts()), Err(Error::Precondition(_))));
    }
}
