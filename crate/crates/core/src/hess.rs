//! Discrete complex Hessian, σ_k fields, discrete m-Hessian measures and
//! pointwise m-subharmonicity checks.
//!
//! Diagonal entries use 3-point differences, `(1/4)(u_xx + u_yy)`; the mixed
//! entry `∂²u/∂z_1∂z̄_2 = (1/4)[(u_{x1x2} + u_{y1y2}) + i(u_{x1y2} - u_{y1x2})]`
//! uses 4-point cross stencils without the centre value. A node's own value
//! therefore enters only the diagonal and the Hessian is affine in it:
//! `H(t) = H_0 - (t/h²) I`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{GridDomain, ScalarField, MIXED_PAIRS};
use crate::error::{Error, Result};
use crate::symm::{self, EigenTuple, HermitianForm};

/// Conversion from eigenvalue density `σ_m(λ)` to the mass density of
/// `(dd^c u)^m ∧ β^{n-m}` against Lebesgue measure.
///
/// The toolkit identifies `σ_m(u)` with the measure, as in the definition
/// of the m-Hessian measure, so the constant is 1 for every `(n, m)`.
pub fn kappa(n: usize, m: usize) -> f64 {
    debug_assert!(m >= 1 && m <= n);
    1.0
}

/// Raw entries of the discrete Hessian at `node` with the centre value
/// replaced by `centre`: `(diag, mixed)` where `mixed` is entry `(0, 1)`
/// (zero for `n = 1`).
#[inline]
pub(crate) fn hessian_parts(values: &[f64], dom: &GridDomain, node: usize, centre: f64) -> ([f64; 2], Complex64) {
    let inv = 0.25 / (dom.h() * dom.h());
    let ax = dom.axis_offsets();
    let at = |o: isize| values[(node as isize + o) as usize];
    let mut diag = [0.0; 2];
    for (j, d) in diag.iter_mut().enumerate().take(dom.n()) {
        let sx = at(ax[2 * j][0]) + at(ax[2 * j][1]);
        let sy = at(ax[2 * j + 1][0]) + at(ax[2 * j + 1][1]);
        *d = (sx + sy - 4.0 * centre) * inv;
    }
    if dom.n() == 1 {
        return (diag, Complex64::new(0.0, 0.0));
    }
    let st = dom.strides();
    let mut mixed = [0.0; 4];
    for (k, &(a, b)) in MIXED_PAIRS.iter().enumerate() {
        let (sa, sb) = (st[a] as isize, st[b] as isize);
        // u_ab ≈ [u(+a+b) - u(+a-b) - u(-a+b) + u(-a-b)] / (4h²)
        mixed[k] = (at(sa + sb) - at(sa - sb) - at(sb - sa) + at(-sa - sb)) * inv;
    }
    let off = Complex64::new(0.25 * (mixed[0] + mixed[1]), 0.25 * (mixed[2] - mixed[3]));
    (diag, off)
}

/// Discrete complex Hessian at one interior node.
pub fn node_hessian(values: &[f64], dom: &GridDomain, node: usize) -> HermitianForm {
    let (diag, off) = hessian_parts(values, dom, node, values[node]);
    let mut h = HermitianForm::diag(&diag[..dom.n()]);
    if dom.n() == 2 {
        h.set(0, 1, off);
    }
    h
}

#[inline]
fn parts_to_eigs(n: usize, diag: [f64; 2], off: Complex64) -> EigenTuple {
    if n == 1 {
        EigenTuple::new(&[diag[0]])
    } else {
        symm::eig2(diag[0], diag[1], off.re, off.im)
    }
}

/// Eigenvalues of the discrete Hessian at one interior node.
#[inline]
pub fn node_eigenvalues(values: &[f64], dom: &GridDomain, node: usize) -> EigenTuple {
    let (diag, off) = hessian_parts(values, dom, node, values[node]);
    parts_to_eigs(dom.n(), diag, off)
}

/// Eigenvalues `λ_0` of the pencil base `H_0` (centre value set to zero);
/// the Hessian with centre value `t` has eigenvalues `λ_0 - t/h²`.
#[inline]
pub fn pencil_base(values: &[f64], dom: &GridDomain, node: usize) -> EigenTuple {
    let (diag, off) = hessian_parts(values, dom, node, 0.0);
    parts_to_eigs(dom.n(), diag, off)
}

/// Discrete Hessian on every interior node.
#[derive(Clone, Debug)]
pub struct HessianField {
    domain: Arc<GridDomain>,
    forms: Vec<HermitianForm>,
}

impl HessianField {
    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    /// Forms in interior order.
    pub fn forms(&self) -> &[HermitianForm] {
        &self.forms
    }

    /// Form at a lattice node, if interior.
    pub fn at(&self, node: usize) -> Option<&HermitianForm> {
        self.domain.interior_slot(node).map(|s| &self.forms[s])
    }
}

fn require_finite(u: &ScalarField) -> Result<()> {
    if !u.is_finite_on_closure() {
        return Err(Error::Domain("field has non-finite values on interior or boundary nodes".into()));
    }
    Ok(())
}

/// Discrete complex Hessian of `u` at every interior node.
pub fn complex_hessian(u: &ScalarField) -> Result<HessianField> {
    require_finite(u)?;
    let dom = u.domain();
    let forms = dom
        .interior()
        .par_iter()
        .map(|&i| node_hessian(u.values(), dom, i))
        .collect();
    Ok(HessianField {
        domain: Arc::clone(dom),
        forms,
    })
}

/// Eigenvalues of the discrete Hessian at every interior node.
pub fn eigen_field(u: &ScalarField) -> Result<Vec<EigenTuple>> {
    require_finite(u)?;
    let dom = u.domain();
    Ok(dom
        .interior()
        .par_iter()
        .map(|&i| node_eigenvalues(u.values(), dom, i))
        .collect())
}

/// `σ_k` of the discrete Hessian at every interior node (interior order).
pub fn sigma_field(u: &ScalarField, k: usize) -> Result<Vec<f64>> {
    let n = u.domain().n();
    if k < 1 || k > n {
        return Err(Error::Domain(format!("sigma_field needs 1 <= k <= n = {n}, got {k}")));
    }
    Ok(eigen_field(u)?
        .iter()
        .map(|l| symm::sigma_unchecked(l.values(), k))
        .collect())
}

/// Fraction of clamped cells above which a measure carries a warning.
pub const CLAMP_WARNING_FRACTION: f64 = 0.1;

/// Nonnegative per-node masses on the interior nodes.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure {
    domain: Arc<GridDomain>,
    cell_mass: Vec<f64>,
    total: f64,
    clamped_fraction: f64,
    warning: Option<String>,
}

impl DiscreteMeasure {
    /// Measure with the given cell masses (interior order).
    pub fn from_masses(domain: &Arc<GridDomain>, cell_mass: Vec<f64>) -> Result<Self> {
        if cell_mass.len() != domain.interior().len() {
            return Err(Error::Domain(format!(
                "expected {} cell masses, got {}",
                domain.interior().len(),
                cell_mass.len()
            )));
        }
        if let Some(bad) = cell_mass.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("cell mass {bad} is not finite and nonnegative")));
        }
        let total = cell_mass.iter().sum();
        Ok(DiscreteMeasure {
            domain: Arc::clone(domain),
            cell_mass,
            total,
            clamped_fraction: 0.0,
            warning: None,
        })
    }

    /// Measure with Lebesgue density `f` (interior order): mass `f·h^{2n}`.
    pub fn from_density(domain: &Arc<GridDomain>, density: &[f64]) -> Result<Self> {
        let vol = domain.cell_volume();
        Self::from_masses(domain, density.iter().map(|f| f * vol).collect())
    }

    /// Measure with density `f(z)` sampled at the interior nodes.
    pub fn from_density_fn<F: Fn(&[f64]) -> f64>(domain: &Arc<GridDomain>, f: F) -> Result<Self> {
        let dens: Vec<f64> = domain.interior().iter().map(|&i| f(&domain.coords(i))).collect();
        Self::from_density(domain, &dens)
    }

    /// Point mass carried by the single cell at `node`.
    pub fn spike(domain: &Arc<GridDomain>, node: usize, mass: f64) -> Result<Self> {
        let slot = domain
            .interior_slot(node)
            .ok_or_else(|| Error::Domain(format!("spike node {node} is not interior")))?;
        let mut cells = vec![0.0; domain.interior().len()];
        cells[slot] = mass;
        Self::from_masses(domain, cells)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    /// Masses in interior order.
    pub fn cell_mass(&self) -> &[f64] {
        &self.cell_mass
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Per-node density `mass / h^{2n}` in interior order.
    pub fn density(&self) -> Vec<f64> {
        let vol = self.domain.cell_volume();
        self.cell_mass.iter().map(|m| m / vol).collect()
    }

    /// Fraction of cells whose raw σ_m was negative beyond slack.
    pub fn clamped_fraction(&self) -> f64 {
        self.clamped_fraction
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    /// Mass carried by a set of lattice nodes (non-interior nodes carry none).
    pub fn mass_on(&self, nodes: &[usize]) -> f64 {
        nodes
            .iter()
            .filter_map(|&i| self.domain.interior_slot(i))
            .map(|s| self.cell_mass[s])
            .sum()
    }

    /// `∫ |w| dμ` for a lattice field `w`.
    pub fn integrate_abs(&self, w: &[f64]) -> f64 {
        self.domain
            .interior()
            .iter()
            .zip(&self.cell_mass)
            .map(|(&i, m)| w[i].abs() * m)
            .sum()
    }

    /// `∫ w dμ` for a lattice field `w`.
    pub fn integrate(&self, w: &[f64]) -> f64 {
        self.domain
            .interior()
            .iter()
            .zip(&self.cell_mass)
            .map(|(&i, m)| w[i] * m)
            .sum()
    }

    /// Cellwise scaled copy.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_masses(&self.domain, self.cell_mass.iter().map(|v| v * c).collect())
    }
}

/// Discrete m-Hessian measure: cell mass `max(σ_m(λ), 0)·h^{2n}·κ`.
pub fn hessian_measure(u: &ScalarField, m: usize) -> Result<DiscreteMeasure> {
    let dom = u.domain();
    if m < 1 || m > dom.n() {
        return Err(Error::Domain(format!("m must lie in 1..={}, got {m}", dom.n())));
    }
    let eigs = eigen_field(u)?;
    let scale = dom.cell_volume() * kappa(dom.n(), m);
    let mut clamped = 0usize;
    let cells: Vec<f64> = eigs
        .iter()
        .map(|l| {
            let s = symm::sigma_unchecked(l.values(), m);
            if s < -symm::default_slack(l).powi(m as i32).max(1e-10) {
                clamped += 1;
            }
            s.max(0.0) * scale
        })
        .collect();
    let mut mu = DiscreteMeasure::from_masses(dom, cells)?;
    mu.clamped_fraction = if eigs.is_empty() { 0.0 } else { clamped as f64 / eigs.len() as f64 };
    if mu.clamped_fraction > CLAMP_WARNING_FRACTION {
        mu.warning = Some(format!(
            "{:.1}% of cells had negative sigma_{m} and were clamped",
            100.0 * mu.clamped_fraction
        ));
    }
    Ok(mu)
}

/// Outcome of a discrete m-subharmonicity test.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MshReport {
    pub holds: bool,
    /// Lattice indices of violating nodes.
    pub violations: Vec<usize>,
    /// Most negative `σ_k` found over violating nodes (0 if none).
    pub worst: f64,
}

/// Tests `λ(H(node)) ∈ Γ̄_m` up to `slack` at every interior node.
pub fn is_msh(u: &ScalarField, m: usize, slack: f64) -> Result<MshReport> {
    let dom = u.domain();
    if m < 1 || m > dom.n() {
        return Err(Error::Domain(format!("m must lie in 1..={}, got {m}", dom.n())));
    }
    if !(slack >= 0.0) {
        return Err(Error::Parameter(format!("slack must be nonnegative, got {slack}")));
    }
    let eigs = eigen_field(u)?;
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for (l, &node) in eigs.iter().zip(dom.interior()) {
        if !symm::in_gamma_m(l, m, slack) {
            violations.push(node);
            let e = symm::sigma_all(l.values());
            worst = (1..=m).map(|k| e[k]).fold(worst, f64::min);
        }
    }
    Ok(MshReport {
        holds: violations.is_empty(),
        violations,
        worst,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Sub,
    Super,
}

/// Outcome of a pointwise viscosity check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ViscosityReport {
    pub side: Side,
    pub passes: bool,
    pub failures: Vec<usize>,
    /// Largest violation of the tested inequality.
    pub worst: f64,
}

/// Pointwise sub/supersolution test of `σ_m(u) = f` for smooth sampled `u`.
///
/// Sub side: `λ ∈ Γ̄_m` and `σ_m(λ) >= f - tol`. Super side: the clamped
/// value (`σ_m(λ)` inside `Γ̄_m`, 0 outside) satisfies `[σ_m]_+ <= f + tol`.
/// `f` is a density in interior order; cone membership uses the default
/// slack.
pub fn viscosity_check(u: &ScalarField, f: &[f64], m: usize, side: Side, tol: f64) -> Result<ViscosityReport> {
    let dom = u.domain();
    if m < 1 || m > dom.n() {
        return Err(Error::Domain(format!("m must lie in 1..={}, got {m}", dom.n())));
    }
    if f.len() != dom.interior().len() {
        return Err(Error::Domain("right-hand side length does not match interior".into()));
    }
    let eigs = eigen_field(u)?;
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for ((l, &node), &fi) in eigs.iter().zip(dom.interior()).zip(f) {
        let inside = symm::in_gamma_m(l, m, symm::default_slack(l));
        let s = symm::sigma_unchecked(l.values(), m) * kappa(dom.n(), m);
        let defect = match side {
            Side::Sub => {
                if inside {
                    fi - s
                } else {
                    f64::INFINITY
                }
            }
            Side::Super => {
                let clamped = if inside { s.max(0.0) } else { 0.0 };
                clamped - fi
            }
        };
        if defect > tol {
            failures.push(node);
        }
        if defect.is_finite() {
            worst = worst.max(defect);
        } else {
            worst = f64::INFINITY;
        }
    }
    Ok(ViscosityReport {
        side,
        passes: failures.is_empty(),
        failures,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;
    use approx::assert_abs_diff_eq;

    #[test]
    fn quadratic_gives_identity() {
        for (n, h) in [(1, 1.0 / 16.0), (2, 1.0 / 6.0)] {
            let d = make_ball(n, 1.0, h).unwrap();
            let u = ScalarField::from_fn(&d, |x| x.iter().map(|v| v * v).sum::<f64>());
            let hf = complex_hessian(&u).unwrap();
            for f in hf.forms() {
                for j in 0..n {
                    for k in 0..n {
                        let want = if j == k { 1.0 } else { 0.0 };
                        assert_abs_diff_eq!(f.get(j, k).re, want, epsilon = 1e-9);
                        assert_abs_diff_eq!(f.get(j, k).im, 0.0, epsilon = 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn harmonic_real_part_has_zero_hessian() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let u = ScalarField::from_fn(&d, |x| x[0] * x[0] - x[1] * x[1]);
        let s = sigma_field(&u, 1).unwrap();
        assert!(s.iter().all(|v| v.abs() < 1e-9));
        let mu = hessian_measure(&u, 1).unwrap();
        assert!(mu.total() < 1e-9);
    }

    #[test]
    fn mixed_entries_match_analytic() {
        let d = make_ball(2, 1.0, 1.0 / 6.0).unwrap();
        // x1 x2: ∂²/∂z1∂z̄2 = 1/4.
        let u = ScalarField::from_fn(&d, |x| x[0] * x[2]);
        let hf = complex_hessian(&u).unwrap();
        for f in hf.forms() {
            assert_abs_diff_eq!(f.get(0, 1).re, 0.25, epsilon = 1e-9);
            assert_abs_diff_eq!(f.get(0, 1).im, 0.0, epsilon = 1e-9);
        }
        // x1 y2: ∂²/∂z1∂z̄2 = i/4.
        let u = ScalarField::from_fn(&d, |x| x[0] * x[3]);
        let hf = complex_hessian(&u).unwrap();
        for f in hf.forms() {
            assert_abs_diff_eq!(f.get(0, 1).im, 0.25, epsilon = 1e-9);
            assert_abs_diff_eq!(f.get(1, 0).im, -0.25, epsilon = 1e-9);
        }
    }

    #[test]
    fn sigma_field_examples() {
        let d = make_ball(2, 1.0, 1.0 / 6.0).unwrap();
        let q = ScalarField::from_fn(&d, |x| x.iter().map(|v| v * v).sum::<f64>());
        assert!(sigma_field(&q, 2).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-9));
        assert!(sigma_field(&q, 1).unwrap().iter().all(|v| (v - 2.0).abs() < 1e-9));
        let (a, b) = (0.7, 2.5);
        let w = ScalarField::from_fn(&d, |x| a * (x[0] * x[0] + x[1] * x[1]) + b * (x[2] * x[2] + x[3] * x[3]));
        assert!(sigma_field(&w, 2).unwrap().iter().all(|v| (v - a * b).abs() < 1e-9));
        assert!(sigma_field(&w, 3).is_err());
    }

    #[test]
    fn disc_quadratic_mass() {
        // The interior cells cover the disc up to a band of width ~h, so the
        // mass equals their area exactly and approaches π under refinement.
        let mut errs = Vec::new();
        for h in [1.0 / 64.0, 1.0 / 128.0] {
            let d = make_ball(1, 1.0, h).unwrap();
            let u = ScalarField::from_fn(&d, |x| x[0] * x[0] + x[1] * x[1] - 1.0);
            let mu = hessian_measure(&u, 1).unwrap();
            let area = d.interior().len() as f64 * d.cell_volume();
            assert!((mu.total() - kappa(1, 1) * area).abs() < 1e-9 * area);
            assert_eq!(mu.clamped_fraction(), 0.0);
            errs.push((mu.total() - std::f64::consts::PI).abs() / std::f64::consts::PI);
        }
        assert!(errs[1] < errs[0]);
        assert!(errs[1] < 0.02, "{errs:?}");
    }

    #[test]
    fn msh_examples() {
        let d = make_ball(2, 1.0, 1.0 / 6.0).unwrap();
        let q = ScalarField::from_fn(&d, |x| x.iter().map(|v| v * v).sum::<f64>());
        assert!(is_msh(&q, 1, 0.0).unwrap().holds);
        assert!(is_msh(&q, 2, 0.0).unwrap().holds);
        let nq = q.map(|v| -v);
        assert!(!is_msh(&nq, 1, 0.0).unwrap().holds);
        let w = ScalarField::from_fn(&d, |x| x[0] * x[0] + x[1] * x[1] - 0.5 * (x[2] * x[2] + x[3] * x[3]));
        assert!(is_msh(&w, 1, 1e-9).unwrap().holds);
        let r = is_msh(&w, 2, 1e-9).unwrap();
        assert!(!r.holds);
        assert_abs_diff_eq!(r.worst, -0.5, epsilon = 1e-9);
    }

    #[test]
    fn viscosity_examples() {
        let d = make_ball(2, 1.0, 1.0 / 6.0).unwrap();
        let q = ScalarField::from_fn(&d, |x| x.iter().map(|v| v * v).sum::<f64>() - 1.0);
        let ones = vec![1.0; d.interior().len()];
        assert!(viscosity_check(&q, &ones, 2, Side::Sub, 1e-9).unwrap().passes);
        assert!(viscosity_check(&q, &ones, 2, Side::Super, 1e-9).unwrap().passes);
        let nq = q.map(|v| -v);
        let zeros = vec![0.0; d.interior().len()];
        assert!(!viscosity_check(&nq, &zeros, 2, Side::Sub, 1e-9).unwrap().passes);
        assert!(viscosity_check(&nq, &zeros, 2, Side::Super, 1e-9).unwrap().passes);
    }

    #[test]
    fn pencil_is_affine_in_centre() {
        let d = make_ball(2, 1.0, 1.0 / 6.0).unwrap();
        let u = ScalarField::from_fn(&d, |x| (x[0] - 0.3 * x[3]).powi(2) + x[1] * x[2] + x[0].exp());
        let mut vals = u.values().to_vec();
        let h2 = d.h() * d.h();
        for &i in d.interior().iter().step_by(37) {
            let base = pencil_base(&vals, &d, i);
            for t in [-0.4, 0.0, 0.9] {
                vals[i] = t;
                let l = node_eigenvalues(&vals, &d, i);
                for (a, b) in l.values().iter().zip(base.shifted(t / h2).values()) {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-9);
                }
            }
        }
    }
}
