//! Dirichlet problem `(dd^c U)^m ∧ β^{n-m} = μ`, `U = g` on `∂Ω`, and the
//! comparison, stability and Cegrell-type checkers built on it.
//!
//! The solver starts from the subsolution `A·ρ + G` (`G` the discrete
//! harmonic interpolant of `g`) and relaxes each node to the centre value
//! solving `σ_m(λ_0 - t/h²) = f` on the admissible branch. Targets below
//! the cone boundary clamp to it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::capacity;
use crate::domain::{CompactSet, GridDomain, ScalarField};
use crate::envelope::rho_lambda_min;
use crate::error::{Error, Result};
use crate::hess::{self, kappa, DiscreteMeasure};
use crate::sweep::{self, SweepOptions};
use crate::symm::{self, HermitianForm};

/// Data of a Dirichlet problem.
#[derive(Clone, Debug)]
pub struct DirichletProblem {
    pub domain: Arc<GridDomain>,
    pub m: usize,
    pub rhs: DiscreteMeasure,
    /// Boundary values in slot order.
    pub boundary: Vec<f64>,
}

impl DirichletProblem {
    pub fn new(domain: &Arc<GridDomain>, m: usize, rhs: DiscreteMeasure, boundary: Vec<f64>) -> Result<Self> {
        if m < 1 || m > domain.n() {
            return Err(Error::Config(format!("m must lie in 1..={}, got {m}", domain.n())));
        }
        if !Arc::ptr_eq(rhs.domain(), domain) {
            return Err(Error::Domain("right-hand side lives on another domain".into()));
        }
        if boundary.len() != domain.boundary().len() || boundary.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("boundary data must be finite, one value per boundary node".into()));
        }
        Ok(DirichletProblem {
            domain: Arc::clone(domain),
            m,
            rhs,
            boundary,
        })
    }

    /// Problem with density `f(z)` and boundary data `g(z)`.
    pub fn from_fns<F, G>(domain: &Arc<GridDomain>, m: usize, f: F, g: G) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
        G: Fn(&[f64]) -> f64,
    {
        let rhs = DiscreteMeasure::from_density_fn(domain, f)?;
        let boundary = domain.boundary().iter().map(|&i| g(&domain.coords(i))).collect();
        Self::new(domain, m, rhs, boundary)
    }
}

/// Solution with convergence data.
#[derive(Clone, Debug)]
pub struct SolveResult {
    pub field: ScalarField,
    pub iterations: usize,
    /// Sup-norm of the last sweep's update.
    pub residual: f64,
    /// `|total σ_m(U) - μ(Ω)| / μ(Ω)` (absolute when `μ(Ω) = 0`).
    pub measure_error: f64,
    pub converged: bool,
    /// Coefficient `A` of the initial subsolution `A·ρ + G`.
    pub subsolution_scale: f64,
    pub history: Vec<f64>,
}

fn boundary_field(p: &DirichletProblem, interior: f64) -> Vec<f64> {
    let dom = &p.domain;
    let mut v = vec![f64::NAN; dom.node_count()];
    for &i in dom.interior() {
        v[i] = interior;
    }
    for (&i, &g) in dom.boundary().iter().zip(&p.boundary) {
        v[i] = g;
    }
    v
}

/// Discrete harmonic interpolant of the boundary data.
pub fn harmonic_interpolant(p: &DirichletProblem, opts: &SweepOptions) -> Result<ScalarField> {
    let dom = Arc::clone(&p.domain);
    let mean = if p.boundary.is_empty() {
        0.0
    } else {
        p.boundary.iter().sum::<f64>() / p.boundary.len() as f64
    };
    let mut v = boundary_field(p, mean);
    let h2 = dom.h() * dom.h();
    let out = sweep::run(&dom, &mut v, opts, |vals, node| {
        let lam0 = hess::pencil_base(vals, &dom, node);
        (h2 * lam0.sum() / dom.n() as f64, f64::INFINITY)
    });
    if !out.converged {
        return Err(Error::Infeasible(format!(
            "harmonic interpolant did not converge (update {})",
            out.final_update
        )));
    }
    ScalarField::from_values(&dom, v)
}

/// Subsolution `A·ρ + G` sampled on interior and boundary nodes, so its
/// boundary values `g + A·ρ` lie below `g` by `O(A h)`. `A` starts from
/// `((max f)/C(n,m))^{1/m}/λ_min(ρ) + max|λ(G)|/λ_min(ρ)` and doubles until
/// every interior node satisfies `σ_m >= f` inside Γ̄_m.
pub fn subsolution(p: &DirichletProblem, opts: &SweepOptions) -> Result<(ScalarField, f64)> {
    let dom = Arc::clone(&p.domain);
    let g = harmonic_interpolant(p, opts)?;
    let rho_min = rho_lambda_min(&dom)?;
    let dens: Vec<f64> = p.rhs.density().iter().map(|f| f / kappa(dom.n(), p.m)).collect();
    let fmax = dens.iter().cloned().fold(0.0, f64::max);
    let gmax = hess::eigen_field(&g)?.iter().map(|l| l.norm_inf()).fold(0.0, f64::max);
    let mut a = ((fmax / symm::binomial(dom.n(), p.m)).powf(1.0 / p.m as f64) + gmax) / rho_min;
    if !(a > 0.0) {
        a = 0.0;
    }
    for _ in 0..60 {
        let mut v = g.values().to_vec();
        for &i in dom.interior().iter().chain(dom.boundary()) {
            v[i] += a * dom.rho(i);
        }
        let ok = dom.interior().iter().zip(&dens).all(|(&i, &f)| {
            let l = hess::node_eigenvalues(&v, &dom, i);
            let slack = symm::default_slack(&l);
            symm::in_gamma_m(&l, p.m, slack) && symm::sigma_unchecked(l.values(), p.m) >= f - slack
        });
        if ok {
            return Ok((ScalarField::from_values(&dom, v)?, a));
        }
        a = if a > 0.0 { 2.0 * a } else { 1.0 };
    }
    Err(Error::Infeasible("no discrete subsolution of the form A·ρ + G found".into()))
}

/// Solves the Dirichlet problem from the constructed subsolution.
pub fn solve_dirichlet(p: &DirichletProblem, opts: &SweepOptions) -> Result<SolveResult> {
    let (init, a) = subsolution(p, opts)?;
    let mut r = solve_from(p, &init, opts)?;
    r.subsolution_scale = a;
    Ok(r)
}

/// Solves the Dirichlet problem from an arbitrary initial field; the
/// boundary values of `init` are replaced by the problem's data.
pub fn solve_from(p: &DirichletProblem, init: &ScalarField, opts: &SweepOptions) -> Result<SolveResult> {
    let dom = Arc::clone(&p.domain);
    let mut v = init.values().to_vec();
    for (&i, &g) in dom.boundary().iter().zip(&p.boundary) {
        v[i] = g;
    }
    if dom.interior().iter().any(|&i| !v[i].is_finite()) {
        return Err(Error::Domain("initial field must be finite on interior nodes".into()));
    }
    let dens: Vec<f64> = p.rhs.density().iter().map(|f| f / kappa(dom.n(), p.m)).collect();
    let h2 = dom.h() * dom.h();
    let m = p.m;
    let out = sweep::run(&dom, &mut v, opts, |vals, node| {
        let lam0 = hess::pencil_base(vals, &dom, node);
        let f = dens[dom.interior_slot(node).unwrap()];
        (h2 * symm::target_shift(&lam0, m, f), f64::INFINITY)
    });
    let field = ScalarField::from_values(&dom, v)?;
    let mass = hess::hessian_measure(&field, m)?.total();
    let want = p.rhs.total();
    let measure_error = if want > 0.0 { (mass - want).abs() / want } else { mass.abs() };
    Ok(SolveResult {
        field,
        iterations: out.iterations,
        residual: out.final_update,
        measure_error,
        converged: out.converged,
        subsolution_scale: 0.0,
        history: out.history,
    })
}

/// Outcome of a comparison-principle check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// True when the hypotheses failed and nothing was asserted.
    pub vacuous: bool,
    pub hypothesis_failures: Vec<String>,
    /// `max (v - u)` over interior nodes.
    pub worst_violation: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Checks `u >= v - tol` given `σ_m(u) <= σ_m(v)` cellwise and `v <= u` on
/// the boundary. Fails the hypotheses, and reports vacuously, otherwise.
pub fn comparison_check(u: &ScalarField, v: &ScalarField, m: usize, tol: f64) -> Result<ComparisonReport> {
    let dom = u.domain();
    let mu = hess::hessian_measure(u, m)?;
    let mv = hess::hessian_measure(v, m)?;
    let mut failures = Vec::new();
    let scale = mu.cell_mass().iter().chain(mv.cell_mass()).cloned().fold(0.0, f64::max);
    let cell_tol = 1e-6 * scale + 1e-14;
    let bad_cells = mu
        .cell_mass()
        .iter()
        .zip(mv.cell_mass())
        .filter(|(a, b)| **a > **b + cell_tol)
        .count();
    if bad_cells > 0 {
        failures.push(format!("measure ordering fails on {bad_cells} cells"));
    }
    let bad_boundary = dom
        .boundary()
        .iter()
        .filter(|&&i| v.get(i) > u.get(i) + tol)
        .count();
    if bad_boundary > 0 {
        failures.push(format!("boundary ordering fails on {bad_boundary} nodes"));
    }
    for (name, f) in [("u", u), ("v", v)] {
        if !hess::is_msh(f, m, 1e-8)?.holds {
            failures.push(format!("{name} is not discretely m-subharmonic"));
        }
    }
    let worst = dom
        .interior()
        .iter()
        .map(|&i| v.get(i) - u.get(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let vacuous = !failures.is_empty();
    Ok(ComparisonReport {
        vacuous,
        hypothesis_failures: failures,
        worst_violation: worst,
        tolerance: tol,
        holds: vacuous || worst <= tol,
    })
}

/// Constant `C = 1 + 2^τ A^{1/m} / (1 - 2^{1-τ})` of the stability estimate.
pub fn stability_constant(a: f64, tau: f64, m: usize) -> Result<f64> {
    if !(tau > 1.0) {
        return Err(Error::Parameter(format!("tau must exceed 1, got {tau}")));
    }
    if !(a >= 0.0) {
        return Err(Error::Parameter(format!("A must be nonnegative, got {a}")));
    }
    Ok(1.0 + 2f64.powf(tau) * a.powf(1.0 / m as f64) / (1.0 - 2f64.powf(1.0 - tau)))
}

/// Exponent `γ = (τ - 1)/(τ(m + 1) - m)` of the stability estimate.
pub fn stability_exponent(tau: f64, m: usize) -> Result<f64> {
    if !(tau > 1.0) {
        return Err(Error::Parameter(format!("tau must exceed 1, got {tau}")));
    }
    Ok((tau - 1.0) / (tau * (m as f64 + 1.0) - m as f64))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `sup (v - u)_+`.
    pub lhs: f64,
    /// `‖(v - u)_+‖_{1,μ}`.
    pub l1_mu: f64,
    pub rhs: f64,
    pub c: f64,
    pub gamma: f64,
    /// `σ_m(u) <= μ` cellwise at tolerance.
    pub measure_hypothesis: bool,
    /// `v <= u` on boundary nodes at tolerance.
    pub boundary_hypothesis: bool,
    pub holds: bool,
}

/// Evaluates `sup (v-u)_+ <= 2‖(v-u)_+‖^{1/(m+1)} + C‖(v-u)_+‖^γ` with the
/// `L¹(μ)` norm and asserts it up to a relative tolerance.
pub fn stability_bound(
    u: &ScalarField,
    v: &ScalarField,
    mu: &DiscreteMeasure,
    a: f64,
    tau: f64,
    m: usize,
    tol: f64,
) -> Result<StabilityReport> {
    let c = stability_constant(a, tau, m)?;
    let gamma = stability_exponent(tau, m)?;
    let dom = u.domain();
    let pos: Vec<f64> = (0..dom.node_count())
        .map(|i| {
            let d = v.get(i) - u.get(i);
            if d.is_finite() {
                d.max(0.0)
            } else {
                0.0
            }
        })
        .collect();
    let lhs = dom.interior().iter().map(|&i| pos[i]).fold(0.0, f64::max);
    let l1 = mu.integrate(&pos);
    let rhs = 2.0 * l1.powf(1.0 / (m as f64 + 1.0)) + c * l1.powf(gamma);
    let su = hess::hessian_measure(u, m)?;
    let scale = mu.cell_mass().iter().cloned().fold(0.0, f64::max);
    let measure_hypothesis = su
        .cell_mass()
        .iter()
        .zip(mu.cell_mass())
        .all(|(a, b)| *a <= *b * (1.0 + 1e-6) + 1e-8 * scale + 1e-14);
    let boundary_hypothesis = dom.boundary().iter().all(|&i| v.get(i) <= u.get(i) + 1e-12);
    Ok(StabilityReport {
        lhs,
        l1_mu: l1,
        rhs,
        c,
        gamma,
        measure_hypothesis,
        boundary_hypothesis,
        holds: lhs <= rhs * (1.0 + tol),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapsliceReport {
    pub s: f64,
    pub t: f64,
    /// Nodes in `{u < v - s - t}`.
    pub set_size: usize,
    /// `t^m Cap_m({u < v - s - t})`.
    pub lhs: f64,
    /// `∫_{u < v - s} σ_m(u)`.
    pub rhs: f64,
    pub factor: f64,
    pub vacuous: bool,
    pub boundary_ordering: bool,
    pub holds: bool,
}

/// Checks `t^m Cap_m({u < v-s-t}) <= ∫_{u < v-s} σ_m(u)` up to `factor`.
pub fn capslice_inequality_check(
    u: &ScalarField,
    v: &ScalarField,
    s: f64,
    t: f64,
    m: usize,
    factor: f64,
    opts: &SweepOptions,
) -> Result<CapsliceReport> {
    if !(s >= 0.0 && t > 0.0) {
        return Err(Error::Parameter(format!("need s >= 0 and t > 0, got ({s}, {t})")));
    }
    let dom = u.domain();
    let boundary_ordering = dom.boundary().iter().all(|&i| u.get(i) >= v.get(i) - 1e-12);
    let nodes: Vec<usize> = dom
        .interior()
        .iter()
        .copied()
        .filter(|&i| u.get(i) < v.get(i) - s - t)
        .collect();
    let mu = hess::hessian_measure(u, m)?;
    let rhs_nodes: Vec<usize> = dom
        .interior()
        .iter()
        .copied()
        .filter(|&i| u.get(i) < v.get(i) - s)
        .collect();
    let rhs = mu.mass_on(&rhs_nodes);
    if nodes.is_empty() {
        return Ok(CapsliceReport {
            s,
            t,
            set_size: 0,
            lhs: 0.0,
            rhs,
            factor,
            vacuous: true,
            boundary_ordering,
            holds: true,
        });
    }
    let set = CompactSet::new(dom, nodes, "sublevel")?;
    let cap = capacity::capacity(&set, m, opts)?;
    let lhs = t.powi(m as i32) * cap.value;
    Ok(CapsliceReport {
        s,
        t,
        set_size: set.len(),
        lhs,
        rhs,
        factor,
        vacuous: false,
        boundary_ordering,
        holds: lhs <= factor * rhs,
    })
}

/// Mixed form `M(A_1, ..., A_m)` obtained by polarizing `σ_m`, so that
/// `M(A, ..., A) = σ_m(A)`.
pub fn mixed_sigma(forms: &[HermitianForm]) -> f64 {
    let m = forms.len();
    let mut acc = 0.0;
    for mask in 1u32..(1 << m) {
        let mut sum = HermitianForm::zeros(forms[0].dim());
        for (i, f) in forms.iter().enumerate() {
            if mask & (1 << i) != 0 {
                sum = sum.add(f);
            }
        }
        let sign = if (m - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * symm::sigma_unchecked(symm::eigenvalues(&sum).values(), m);
    }
    let fact: f64 = (1..=m).map(|k| k as f64).product();
    acc / fact
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CegrellReport {
    pub k: usize,
    pub m: usize,
    /// `∫ dd^c u ∧ (dd^c v)^k ∧ (dd^c w)^{m-k-1} ∧ β^{n-m}`.
    pub lhs: f64,
    /// `H_m(u)^{1/m} H_m(v)^{k/m} H_m(w)^{(m-k-1)/m}`.
    pub rhs: f64,
    pub holds: bool,
    pub note: String,
}

/// Cegrell inequality for fields whose node Hessians commute (radial
/// families); other inputs are reported as unsupported.
pub fn cegrell_check(
    u: &ScalarField,
    v: &ScalarField,
    w: &ScalarField,
    k: usize,
    m: usize,
    tol: f64,
) -> Result<CegrellReport> {
    let dom = u.domain();
    if m < 2 || m > dom.n() || k < 1 || k > m - 1 {
        return Err(Error::Parameter(format!("need 2 <= m <= n and 1 <= k <= m-1, got m = {m}, k = {k}")));
    }
    for f in [u, v, w] {
        if f.max() > 1e-12 {
            return Err(Error::Precondition("Cegrell check needs nonpositive fields".into()));
        }
        if dom.boundary().iter().any(|&i| f.get(i).abs() > 1e-12) {
            return Err(Error::Precondition("Cegrell check needs zero boundary values".into()));
        }
    }
    let hu = hess::complex_hessian(u)?;
    let hv = hess::complex_hessian(v)?;
    let hw = hess::complex_hessian(w)?;
    let vol = dom.cell_volume() * kappa(dom.n(), m);
    let mut lhs = 0.0;
    let mut masses = [0.0f64; 3];
    for ((a, b), c) in hu.forms().iter().zip(hv.forms()).zip(hw.forms()) {
        let scale = a.norm_inf().max(b.norm_inf()).max(c.norm_inf()).max(1.0);
        let comm = a.commutator_norm(b).max(a.commutator_norm(c)).max(b.commutator_norm(c));
        if comm > 1e-8 * scale * scale {
            return Err(Error::Unsupported(
                "mixed Hessian products are evaluated only for commuting (radial) families".into(),
            ));
        }
        let mut forms = vec![*a];
        forms.extend(std::iter::repeat(*b).take(k));
        forms.extend(std::iter::repeat(*c).take(m - k - 1));
        lhs += mixed_sigma(&forms) * vol;
        for (slot, f) in [a, b, c].into_iter().enumerate() {
            masses[slot] += symm::sigma_unchecked(symm::eigenvalues(f).values(), m).max(0.0) * vol;
        }
    }
    let mf = m as f64;
    let rhs = masses[0].powf(1.0 / mf) * masses[1].powf(k as f64 / mf) * masses[2].powf((mf - k as f64 - 1.0) / mf);
    Ok(CegrellReport {
        k,
        m,
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + tol) + 1e-14,
        note: "evaluated on commuting node Hessians only".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;
    use approx::assert_abs_diff_eq;

    fn opts() -> SweepOptions {
        SweepOptions::with_tol(1e-13)
    }

    #[test]
    fn quadratic_is_reproduced_on_disc() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let q = |x: &[f64]| x[0] * x[0] + x[1] * x[1] - 1.0;
        let p = DirichletProblem::from_fns(&d, 1, |_| 1.0, q).unwrap();
        let r = solve_dirichlet(&p, &opts()).unwrap();
        assert!(r.converged);
        let exact = ScalarField::from_fn(&d, q);
        assert!(r.field.sup_distance(&exact) < 1e-9);
        assert!(r.measure_error < 1e-9);
    }

    #[test]
    fn stability_arithmetic() {
        assert_abs_diff_eq!(stability_exponent(2.0, 1).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(stability_constant(1.0, 2.0, 1).unwrap(), 9.0, epsilon = 1e-12);
        assert!(matches!(stability_constant(1.0, 1.0, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn mixed_sigma_polarizes() {
        let i = HermitianForm::identity(2);
        let two = i.scale(2.0);
        assert_abs_diff_eq!(mixed_sigma(&[i, two]), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mixed_sigma(&[two, two]), 4.0, epsilon = 1e-12);
        let a = HermitianForm::diag(&[1.0, 3.0]);
        let b = HermitianForm::diag(&[2.0, 5.0]);
        // Mixed discriminant of diagonal forms: (a1 b2 + a2 b1)/2.
        assert_abs_diff_eq!(mixed_sigma(&[a, b]), 5.5, epsilon = 1e-12);
    }

    #[test]
    fn cegrell_homogeneity_case() {
        let d = make_ball(2, 1.0, 1.0 / 6.0).unwrap();
        let u = ScalarField::from_fn(&d, |x| x.iter().map(|v| v * v).sum::<f64>() - 1.0);
        // Zero the boundary values so the fields sit in the admissible class.
        let mut u0 = u.clone();
        for &i in d.boundary() {
            u0.set(i, 0.0);
        }
        let v0 = u0.map(|x| 2.0 * x);
        let r = cegrell_check(&u0, &v0, &u0, 1, 2, 1e-9);
        let r = r.unwrap();
        assert!(r.holds);
    }

    #[test]
    fn comparison_trivial_shift() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let u = ScalarField::from_fn(&d, |x| x[0] * x[0] + x[1] * x[1] - 1.0);
        let v = u.map(|x| x - 0.2);
        let r = comparison_check(&u, &v, 1, 1e-9).unwrap();
        assert!(!r.vacuous && r.holds);
        let r = comparison_check(&v, &u, 1, 1e-9).unwrap();
        assert!(r.vacuous);
    }
}
