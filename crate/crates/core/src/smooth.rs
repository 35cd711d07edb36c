//! Convolution regularization, Hölder extension and empirical Hölder
//! moduli.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{omega_delta, GridDomain, NodeClass, ScalarField};
use crate::error::{Error, Result};
use crate::fit::log_log_fit;
use crate::hess;

/// Discrete radial kernel `c (1 - |ζ/δ|²)³` on the lattice offsets with
/// `|ζ| < δ`, normalized so the weights sum to 1.
#[derive(Clone, Debug)]
pub struct Mollifier {
    delta: f64,
    h: f64,
    offsets: Vec<Vec<isize>>,
    weights: Vec<f64>,
}

impl Mollifier {
    /// Kernel of radius `delta` for a lattice of spacing `h` in `axes`
    /// real dimensions. Requires `delta >= 2h`.
    pub fn new(delta: f64, h: f64, axes: usize) -> Result<Self> {
        if !(h > 0.0) || !(delta >= 2.0 * h * (1.0 - 1e-12)) {
            return Err(Error::Resolution(format!(
                "mollifier radius {delta} below 2h = {}",
                2.0 * h
            )));
        }
        let r = (delta / h).ceil() as isize;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        let mut idx = vec![-r; axes];
        loop {
            let q = idx.iter().map(|&i| (i * i) as f64).sum::<f64>() * h * h / (delta * delta);
            if q < 1.0 {
                offsets.push(idx.clone());
                weights.push((1.0 - q).powi(3));
            }
            let mut a = 0;
            loop {
                if a == axes {
                    let total: f64 = weights.iter().sum();
                    for w in &mut weights {
                        *w /= total;
                    }
                    return Ok(Mollifier {
                        delta,
                        h,
                        offsets,
                        weights,
                    });
                }
                idx[a] += 1;
                if idx[a] > r {
                    idx[a] = -r;
                    a += 1;
                } else {
                    break;
                }
            }
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn offsets(&self) -> &[Vec<isize>] {
        &self.offsets
    }

    /// `Σ_k w_k |k h|²`, the shift a quadratic `|z|²` picks up under
    /// convolution.
    pub fn second_moment(&self) -> f64 {
        self.offsets
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| w * o.iter().map(|&i| (i * i) as f64).sum::<f64>() * self.h * self.h)
            .sum()
    }
}

fn convolve_at(u: &[f64], dom: &GridDomain, k: &Mollifier, node: usize) -> f64 {
    let base = dom.index_of(node);
    let half = dom.half_counts();
    let strides = dom.strides();
    let mut acc = 0.0;
    let mut wsum = 0.0;
    'outer: for (off, &w) in k.offsets.iter().zip(&k.weights) {
        let mut lin = 0usize;
        for a in 0..off.len() {
            let i = base[a] + off[a] + half[a] as isize;
            if i < 0 || i >= dom.dims()[a] as isize {
                continue 'outer;
            }
            lin += i as usize * strides[a];
        }
        let v = u[lin];
        if v.is_finite() {
            acc += w * v;
            wsum += w;
        }
    }
    if wsum > 0.0 {
        acc / wsum
    } else {
        f64::NAN
    }
}

/// Regularization `u_δ = u ⋆ χ_δ` on every lattice node.
///
/// Weights are renormalized over the finite in-lattice values covered by
/// the kernel, so the result is exact on constants. To convolve a Hölder
/// extension, pass the output of [`holder_extend`].
pub fn regularize(u: &ScalarField, delta: f64) -> Result<ScalarField> {
    let dom = u.domain();
    let k = Mollifier::new(delta, dom.h(), dom.axes())?;
    let values: Vec<f64> = (0..dom.node_count())
        .into_par_iter()
        .map(|i| convolve_at(u.values(), dom, &k, i))
        .collect();
    ScalarField::from_values(dom, values)
}

/// Regularization evaluated only where `mask` is set (`NaN` elsewhere).
pub fn regularize_on(u: &ScalarField, delta: f64, mask: &[bool]) -> Result<ScalarField> {
    let dom = u.domain();
    let k = Mollifier::new(delta, dom.h(), dom.axes())?;
    let values: Vec<f64> = (0..dom.node_count())
        .into_par_iter()
        .map(|i| if mask[i] { convolve_at(u.values(), dom, &k, i) } else { f64::NAN })
        .collect();
    ScalarField::from_values(dom, values)
}

/// Hölder extension `ū(z) = sup{u(ζ) - κ|z - ζ|^α : ζ ∈ Ω̄}` on the whole
/// lattice, with `Ω̄` the interior and boundary nodes.
pub fn holder_extend(u: &ScalarField, alpha: f64, kappa: f64) -> Result<ScalarField> {
    if !(alpha > 0.0 && alpha <= 1.0) || !(kappa >= 0.0) {
        return Err(Error::Parameter(format!("Hölder pair ({alpha}, {kappa}) out of range")));
    }
    if !u.is_finite_on_closure() {
        return Err(Error::Domain("field must be finite on interior and boundary nodes".into()));
    }
    let dom = u.domain();
    let mut sources: Vec<(f64, Vec<isize>)> = dom
        .interior()
        .iter()
        .chain(dom.boundary())
        .map(|&i| (u.get(i), dom.index_of(i)))
        .collect();
    sources.sort_by(|a, b| b.0.total_cmp(&a.0));
    // |z - ζ|^α depends only on the integer squared distance.
    let max_sq: usize = dom.dims().iter().map(|d| (d - 1) * (d - 1)).sum();
    let h = dom.h();
    let table: Vec<f64> = (0..=max_sq).map(|q| kappa * ((q as f64).sqrt() * h).powf(alpha)).collect();
    let values: Vec<f64> = (0..dom.node_count())
        .into_par_iter()
        .map(|node| {
            let z = dom.index_of(node);
            let mut best = f64::NEG_INFINITY;
            for (v, zeta) in &sources {
                if *v <= best {
                    break;
                }
                let q: isize = z.iter().zip(zeta).map(|(a, b)| (a - b) * (a - b)).sum();
                let cand = v - table[q as usize];
                if cand > best {
                    best = cand;
                }
            }
            best
        })
        .collect();
    ScalarField::from_values(dom, values)
}

/// Empirical Hölder modulus from the regularization ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HolderWitness {
    /// Fitted exponent, clamped to `(0, 1]`.
    pub exponent: f64,
    /// Smallest `c` with `M(δ) <= c δ^exponent` over the ladder.
    pub seminorm: f64,
    /// Raw log-log slope of `M(δ)`.
    pub slope: f64,
    pub residual: f64,
    pub ladder: Vec<f64>,
    /// `M(δ) = sup_{Ω_δ} (u_δ - u)` per ladder entry.
    pub sup_gaps: Vec<f64>,
    pub reliable: bool,
    /// Smallest admissible radius, `2h`.
    pub delta_floor: f64,
    pub notes: Vec<String>,
}

const MIN_EXPONENT: f64 = 1e-3;

/// Largest difference between axis-adjacent closure nodes.
fn max_adjacent_jump(u: &ScalarField) -> f64 {
    let dom = u.domain();
    let mut worst = 0.0f64;
    for &i in dom.interior() {
        for off in dom.axis_offsets() {
            for &o in off {
                let j = (i as isize + o) as usize;
                let d = (u.get(i) - u.get(j)).abs();
                if d.is_finite() {
                    worst = worst.max(d);
                }
            }
        }
    }
    worst
}

fn check_ladder(dom: &GridDomain, ladder: &[f64]) -> Result<Vec<f64>> {
    if ladder.len() < 5 {
        return Err(Error::Parameter(format!("ladder needs at least 5 radii, got {}", ladder.len())));
    }
    let mut l = ladder.to_vec();
    l.sort_by(|a, b| a.total_cmp(b));
    if l[0] < 2.0 * dom.h() * (1.0 - 1e-12) {
        return Err(Error::Resolution(format!("ladder radius {} below 2h = {}", l[0], 2.0 * dom.h())));
    }
    if l[l.len() - 1] < 10.0 * l[0] * (1.0 - 1e-12) {
        return Err(Error::Parameter("ladder must span at least one decade".into()));
    }
    Ok(l)
}

/// `M(δ) = sup_{Ω_δ}(u_δ - u)`.
pub fn sup_gap(u: &ScalarField, delta: f64) -> Result<f64> {
    let mask = omega_delta(u.domain(), delta)?;
    let ud = regularize_on(u, delta, &mask)?;
    Ok(u.domain()
        .interior()
        .iter()
        .filter(|&&i| mask[i])
        .map(|&i| ud.get(i) - u.get(i))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Fits `M(δ) ≈ c δ^α` over the ladder.
///
/// The fit is flagged unreliable when the slope is below 0.05, when `M`
/// fails to increase with δ beyond a 5% tolerance, when some `M(δ)` is
/// not positive, or when two adjacent nodes differ by at least half the
/// oscillation (a jump the ladder cannot resolve at this spacing).
pub fn measure_holder(u: &ScalarField, ladder: &[f64]) -> Result<HolderWitness> {
    let dom = u.domain();
    let ladder = check_ladder(dom, ladder)?;
    let gaps: Vec<f64> = ladder.iter().map(|&d| sup_gap(u, d)).collect::<Result<_>>()?;
    let mut notes = Vec::new();
    let mut reliable = true;
    if gaps.iter().any(|g| !(*g > 0.0)) {
        reliable = false;
        notes.push("nonpositive sup gap in ladder".to_string());
    }
    for w in gaps.windows(2) {
        if w[1] < w[0] * (1.0 - 0.05) {
            reliable = false;
            notes.push("sup gap not monotone in delta".to_string());
            break;
        }
    }
    let osc = u.oscillation();
    if osc > 0.0 && max_adjacent_jump(u) >= 0.5 * osc {
        reliable = false;
        notes.push("adjacent-node jump exceeds half the oscillation".to_string());
    }
    let fit = log_log_fit(&ladder, &gaps);
    let (slope, residual) = fit.map(|f| (f.slope, f.residual)).unwrap_or((0.0, f64::INFINITY));
    if slope < 0.05 {
        reliable = false;
        notes.push(format!("slope {slope:.3} does not show decay"));
    }
    let exponent = slope.clamp(MIN_EXPONENT, 1.0);
    let seminorm = ladder
        .iter()
        .zip(&gaps)
        .map(|(d, g)| g.max(0.0) / d.powf(exponent))
        .fold(0.0, f64::max);
    Ok(HolderWitness {
        exponent,
        seminorm,
        slope,
        residual,
        ladder,
        sup_gaps: gaps,
        reliable,
        delta_floor: 2.0 * dom.h(),
        notes,
    })
}

/// Pairwise Hölder test on the boundary collar.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CollarCheck {
    /// `max |u(z) - u(ζ)| / (κ |z - ζ|^α)` over sampled pairs.
    pub max_ratio: f64,
    pub pairs: usize,
    pub holds: bool,
}

/// Checks `|u(z) - u(ζ)| <= κ|z - ζ|^α` for `z` within `width` of `∂Ω` and
/// `ζ ∈ Ω̄` with `|z - ζ| <= width`, up to a relative tolerance of 1%.
pub fn collar_holder_check(u: &ScalarField, alpha: f64, kappa: f64, width: f64) -> Result<CollarCheck> {
    let dom = u.domain();
    if !(width >= dom.h()) {
        return Err(Error::Resolution(format!("collar width {width} below the spacing")));
    }
    let r = (width / dom.h()).floor() as isize;
    let d = dom.axes();
    let mut offs = Vec::new();
    let mut idx = vec![-r; d];
    'gen: loop {
        let q: isize = idx.iter().map(|i| i * i).sum();
        if q > 0 && q <= r * r {
            offs.push((dom.offset(&idx), (q as f64).sqrt() * dom.h()));
        }
        let mut a = 0;
        loop {
            if a == d {
                break 'gen;
            }
            idx[a] += 1;
            if idx[a] > r {
                idx[a] = -r;
                a += 1;
            } else {
                break;
            }
        }
    }
    let collar: Vec<usize> = dom
        .interior()
        .iter()
        .chain(dom.boundary())
        .copied()
        .filter(|&i| dom.dist(i) <= width)
        .collect();
    let results: Vec<(f64, usize)> = collar
        .par_iter()
        .map(|&z| {
            let mut worst = 0.0f64;
            let mut count = 0usize;
            for &(o, dist) in &offs {
                let j = z as isize + o;
                if j < 0 || j as usize >= dom.node_count() {
                    continue;
                }
                let j = j as usize;
                if dom.class(j) == NodeClass::Exterior || dom.index_of(j).iter().zip(dom.index_of(z)).any(|(a, b)| (a - b).abs() > r) {
                    continue;
                }
                count += 1;
                let bound = kappa * dist.powf(alpha);
                let diff = (u.get(z) - u.get(j)).abs();
                let ratio = if bound > 0.0 { diff / bound } else if diff > 0.0 { f64::INFINITY } else { 0.0 };
                worst = worst.max(ratio);
            }
            (worst, count)
        })
        .collect();
    let max_ratio = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let pairs = results.iter().map(|r| r.1).sum();
    Ok(CollarCheck {
        max_ratio,
        pairs,
        holds: max_ratio <= 1.01,
    })
}

/// One row of the Poisson–Jensen comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoissonJensenRow {
    pub delta: f64,
    /// `∫_{Ω_δ} (u_δ - u)`.
    pub l1_gap: f64,
    /// `∫_{Ω_δ} dd^c u ∧ β^{n-1}`, the σ_1 mass of `Ω_δ`.
    pub mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PoissonJensenReport {
    pub rows: Vec<PoissonJensenRow>,
    pub l1_norm: f64,
    /// Smallest `a` with `l1_gap <= a δ² mass` on the ladder.
    pub a_fit: f64,
    /// Smallest `b` with `l1_gap <= b δ ‖u‖_1` on the ladder.
    pub b_fit: f64,
    /// Log-log slope of `l1_gap / mass` against δ.
    pub mass_slope: Option<f64>,
    /// Log-log slope of `l1_gap` against δ.
    pub l1_slope: Option<f64>,
    pub mass_trend_ok: bool,
    pub l1_trend_ok: bool,
}

/// Compares `∫_{Ω_δ}(u_δ - u)` with `δ²·mass` and `δ·‖u‖_1` over a ladder.
/// A trend holds when its slope is at least 2 (resp. 1) within 0.2, or
/// when the gap vanishes to rounding.
pub fn poisson_jensen_check(u: &ScalarField, ladder: &[f64]) -> Result<PoissonJensenReport> {
    let dom = Arc::clone(u.domain());
    let sigma1 = hess::sigma_field(u, 1)?;
    let vol = dom.cell_volume();
    let mut rows = Vec::new();
    for &delta in ladder {
        let mask = omega_delta(&dom, delta)?;
        let ud = regularize_on(u, delta, &mask)?;
        let mut l1 = 0.0;
        let mut mass = 0.0;
        for (slot, &i) in dom.interior().iter().enumerate() {
            if mask[i] {
                l1 += (ud.get(i) - u.get(i)).abs() * vol;
                mass += sigma1[slot].max(0.0) * vol;
            }
        }
        rows.push(PoissonJensenRow { delta, l1_gap: l1, mass });
    }
    let l1_norm = u.l1_norm();
    let a_fit = rows
        .iter()
        .filter(|r| r.mass > 0.0)
        .map(|r| r.l1_gap / (r.delta * r.delta * r.mass))
        .fold(0.0, f64::max);
    let b_fit = if l1_norm > 0.0 {
        rows.iter().map(|r| r.l1_gap / (r.delta * l1_norm)).fold(0.0, f64::max)
    } else {
        0.0
    };
    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let scale = l1_norm.max(1.0) * 1e-10;
    let negligible = rows.iter().all(|r| r.l1_gap <= scale);
    let ratios: Vec<f64> = rows
        .iter()
        .map(|r| if r.mass > 0.0 { r.l1_gap / r.mass } else { 0.0 })
        .collect();
    let gaps: Vec<f64> = rows.iter().map(|r| r.l1_gap).collect();
    let mass_slope = log_log_fit(&deltas, &ratios).map(|f| f.slope);
    let l1_slope = log_log_fit(&deltas, &gaps).map(|f| f.slope);
    Ok(PoissonJensenReport {
        mass_trend_ok: negligible || mass_slope.is_some_and(|s| s >= 1.8),
        l1_trend_ok: negligible || l1_slope.is_some_and(|s| s >= 0.8),
        rows,
        l1_norm,
        a_fit,
        b_fit,
        mass_slope,
        l1_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;

    #[test]
    fn kernel_is_normalized_and_radial() {
        let k = Mollifier::new(0.2, 1.0 / 32.0, 2).unwrap();
        let s: f64 = k.weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(k.weights().iter().all(|&w| w >= 0.0));
        for (o, w) in k.offsets().iter().zip(k.weights()) {
            let mirror: Vec<isize> = vec![-o[1], o[0]];
            let j = k.offsets().iter().position(|p| *p == mirror).unwrap();
            assert!((k.weights()[j] - w).abs() < 1e-15);
        }
        assert!(matches!(Mollifier::new(0.05, 1.0 / 32.0, 2), Err(Error::Resolution(_))));
    }

    #[test]
    fn constants_and_quadratics() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let one = ScalarField::constant(&d, 3.5);
        let r = regularize(&one, 0.1).unwrap();
        for &i in d.interior() {
            assert!((r.get(i) - 3.5).abs() < 1e-12);
        }
        let q = ScalarField::from_fn(&d, |x| x[0] * x[0] + x[1] * x[1]);
        let delta = 0.15;
        let k = Mollifier::new(delta, d.h(), 2).unwrap();
        let mask = omega_delta(&d, delta).unwrap();
        let r = regularize_on(&q, delta, &mask).unwrap();
        for &i in d.interior() {
            if mask[i] {
                assert!((r.get(i) - q.get(i) - k.second_moment()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn extension_of_zero() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let z = ScalarField::constant(&d, 0.0);
        let e = holder_extend(&z, 0.5, 2.0).unwrap();
        for i in 0..d.node_count() {
            if d.class(i) != NodeClass::Exterior {
                assert_eq!(e.get(i), 0.0);
            } else {
                assert!(e.get(i) < 0.0);
            }
        }
    }

    #[test]
    fn extension_is_idempotent_and_agrees() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let u = ScalarField::from_fn(&d, |x| (x[0] * x[0] + x[1] * x[1]).powf(0.25) - 1.0);
        let e = holder_extend(&u, 0.5, 1.0).unwrap();
        for &i in d.interior().iter().chain(d.boundary()) {
            assert!((e.get(i) - u.get(i)).abs() < 1e-12);
        }
        let e2 = holder_extend(&e, 0.5, 1.0).unwrap();
        for i in 0..d.node_count() {
            if d.class(i) != NodeClass::Exterior {
                assert!((e2.get(i) - e.get(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn holder_of_smooth_and_jump() {
        let d = make_ball(1, 1.0, 1.0 / 64.0).unwrap();
        let ladder = [0.04, 0.06, 0.1, 0.2, 0.4];
        let q = ScalarField::from_fn(&d, |x| x[0] * x[0] + x[1] * x[1]);
        let w = measure_holder(&q, &ladder).unwrap();
        assert_eq!(w.exponent, 1.0);
        assert!((w.slope - 2.0).abs() < 0.05);
        let jump = ScalarField::from_fn(&d, |x| if x[0] > 0.0 { 1.0 } else { 0.0 });
        assert!(!measure_holder(&jump, &ladder).unwrap().reliable);
        assert!(measure_holder(&q, &ladder[..4]).is_err());
        assert!(matches!(measure_holder(&q, &[0.01, 0.1, 0.2, 0.3, 0.4]), Err(Error::Resolution(_))));
    }

    #[test]
    fn poisson_jensen_harmonic() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let u = ScalarField::from_fn(&d, |x| x[0] * x[0] - x[1] * x[1] - 2.0);
        let r = poisson_jensen_check(&u, &[0.1, 0.2, 0.3]).unwrap();
        assert!(r.rows.iter().all(|row| row.l1_gap < 1e-10));
        assert!(r.mass_trend_ok && r.l1_trend_ok);
    }
}
