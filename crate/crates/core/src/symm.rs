//! Elementary symmetric functions, the Gårding cones Γ_m, and eigenvalues of
//! small Hermitian matrices.
//!
//! Everything here works on dimensions `n <= 4`. The eigenvalue routine uses
//! a closed form for `n <= 2` and cyclic complex Jacobi rotations above that;
//! [`sigma_k_minor_oracle`] provides an eigenvalue-free route to the same
//! numbers through principal minors.
//!
//! The solver and envelope modules move along the pencil `λ - s·1`
//! (eigenvalues shifted by a common amount); [`cone_shift`] and
//! [`target_shift`] solve the two scalar problems that arise there.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest complex dimension handled by the small-matrix routines.
pub const MAX_DIM: usize = 4;

/// Sorted eigenvalues `λ_1 <= ... <= λ_n` of a Hermitian form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenTuple {
    len: usize,
    vals: [f64; MAX_DIM],
}

impl EigenTuple {
    /// Builds a tuple from arbitrary-order values; they are sorted ascending.
    ///
    /// Panics if more than [`MAX_DIM`] values are given.
    pub fn new(values: &[f64]) -> Self {
        assert!(
            !values.is_empty() && values.len() <= MAX_DIM,
            "eigen tuple length must be in 1..=4, got {}",
            values.len()
        );
        let mut vals = [0.0; MAX_DIM];
        vals[..values.len()].copy_from_slice(values);
        let mut t = EigenTuple {
            len: values.len(),
            vals,
        };
        t.sort();
        t
    }

    fn sort(&mut self) {
        self.vals[..self.len].sort_by(|a, b| a.total_cmp(b));
    }

    pub fn dim(&self) -> usize {
        self.len
    }

    pub fn values(&self) -> &[f64] {
        &self.vals[..self.len]
    }

    pub fn min(&self) -> f64 {
        self.vals[0]
    }

    pub fn max(&self) -> f64 {
        self.vals[self.len - 1]
    }

    pub fn sum(&self) -> f64 {
        self.values().iter().sum()
    }

    /// `max_i |λ_i|`.
    pub fn norm_inf(&self) -> f64 {
        self.values().iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `λ - s·1`.
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = *self;
        for v in &mut out.vals[..self.len] {
            *v -= s;
        }
        out
    }

    /// `t·λ`; ordering is restored for negative `t`.
    pub fn scaled(&self, t: f64) -> Self {
        let mut out = *self;
        for v in &mut out.vals[..self.len] {
            *v *= t;
        }
        out.sort();
        out
    }

    /// Componentwise sum of the sorted tuples.
    pub fn add(&self, other: &EigenTuple) -> Self {
        assert_eq!(self.len, other.len, "dimension mismatch");
        let mut out = *self;
        for i in 0..self.len {
            out.vals[i] += other.vals[i];
        }
        out.sort();
        out
    }
}

/// Binomial coefficient `C(n, k)` as a float.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// All elementary symmetric polynomials `e_0..=e_n` by direct product
/// expansion (`e_k` accumulates every k-subset product).
pub fn sigma_all(values: &[f64]) -> [f64; MAX_DIM + 1] {
    let mut e = [0.0; MAX_DIM + 1];
    e[0] = 1.0;
    for (i, &v) in values.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            e[k] += v * e[k - 1];
        }
    }
    e
}

/// `σ_k(λ)`: the sum over all k-subsets of products of eigenvalues.
/// `σ_0 = 1`.
pub fn sigma_k(lambda: &EigenTuple, k: usize) -> Result<f64> {
    if k > lambda.dim() {
        return Err(Error::Domain(format!(
            "sigma_k needs 0 <= k <= n = {}, got k = {k}",
            lambda.dim()
        )));
    }
    Ok(sigma_all(lambda.values())[k])
}

#[inline]
pub(crate) fn sigma_unchecked(values: &[f64], k: usize) -> f64 {
    sigma_all(values)[k]
}

/// Default cone-membership slack `1e-10 · max(1, ‖λ‖_∞)`.
pub fn default_slack(lambda: &EigenTuple) -> f64 {
    1e-10 * lambda.norm_inf().max(1.0)
}

/// Membership in the closed cone Γ̄_m up to `slack`: `σ_k(λ) >= -slack` for
/// every `1 <= k <= m`. Values of `m` above `n` are treated as `m = n`.
pub fn in_gamma_m(lambda: &EigenTuple, m: usize, slack: f64) -> bool {
    debug_assert!(m >= 1, "cone index must be at least 1");
    let e = sigma_all(lambda.values());
    let m = m.min(lambda.dim());
    (1..=m).all(|k| e[k] >= -slack)
}

/// An `n × n` complex Hermitian matrix with `n <= 4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermitianForm {
    dim: usize,
    entries: [[Complex64; MAX_DIM]; MAX_DIM],
}

impl HermitianForm {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension must be in 1..=4");
        HermitianForm {
            dim,
            entries: [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut h = Self::zeros(dim);
        for j in 0..dim {
            h.entries[j][j] = Complex64::new(1.0, 0.0);
        }
        h
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut h = Self::zeros(values.len());
        for (j, &v) in values.iter().enumerate() {
            h.entries[j][j] = Complex64::new(v, 0.0);
        }
        h
    }

    /// Builds a form from full rows, checking the Hermitian symmetry to a
    /// relative tolerance of `1e-12`.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let dim = rows.len();
        if !(1..=MAX_DIM).contains(&dim) || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Domain("Hermitian form must be square with n <= 4".into()));
        }
        let mut h = Self::zeros(dim);
        let scale = rows
            .iter()
            .flat_map(|r| r.iter())
            .fold(1.0f64, |a, z| a.max(z.norm()));
        for j in 0..dim {
            for k in 0..dim {
                if (rows[j][k] - rows[k][j].conj()).norm() > 1e-12 * scale {
                    return Err(Error::Domain(format!("entry ({j},{k}) breaks Hermitian symmetry")));
                }
            }
        }
        for j in 0..dim {
            h.entries[j][j] = Complex64::new(rows[j][j].re, 0.0);
            for k in j + 1..dim {
                h.entries[j][k] = rows[j][k];
                h.entries[k][j] = rows[j][k].conj();
            }
        }
        Ok(h)
    }

    /// Sets entry `(j, k)` and its mirror `(k, j)`.
    pub fn set(&mut self, j: usize, k: usize, value: Complex64) {
        if j == k {
            self.entries[j][j] = Complex64::new(value.re, 0.0);
        } else {
            self.entries[j][k] = value;
            self.entries[k][j] = value.conj();
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries[j][k]
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|k| self.entries[j][k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &HermitianForm) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for j in 0..self.dim {
            for k in 0..self.dim {
                out.entries[j][k] += other.entries[j][k];
            }
        }
        out
    }

    pub fn scale(&self, t: f64) -> Self {
        let mut out = *self;
        for j in 0..self.dim {
            for k in 0..self.dim {
                out.entries[j][k] *= t;
            }
        }
        out
    }

    /// `H + t·I`.
    pub fn shift_identity(&self, t: f64) -> Self {
        let mut out = *self;
        for j in 0..self.dim {
            out.entries[j][j] += t;
        }
        out
    }

    /// Frobenius norm of the commutator `AB - BA`.
    pub fn commutator_norm(&self, other: &HermitianForm) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for j in 0..n {
            for k in 0..n {
                let mut c = Complex64::new(0.0, 0.0);
                for l in 0..n {
                    c += self.entries[j][l] * other.entries[l][k]
                        - other.entries[j][l] * self.entries[l][k];
                }
                acc += c.norm_sqr();
            }
        }
        acc.sqrt()
    }

    fn frobenius(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim {
            for k in 0..self.dim {
                acc += self.entries[j][k].norm_sqr();
            }
        }
        acc.sqrt()
    }

    fn off_diagonal(&self) -> f64 {
        let mut acc = 0.0;
        for j in 0..self.dim {
            for k in 0..self.dim {
                if j != k {
                    acc += self.entries[j][k].norm_sqr();
                }
            }
        }
        acc.sqrt()
    }
}

/// Sum of all `k × k` principal minors of `h`. Equals `σ_k(λ(h))` without
/// computing eigenvalues.
pub fn sigma_k_minor_oracle(h: &HermitianForm, k: usize) -> Result<f64> {
    let n = h.dim();
    if k > n {
        return Err(Error::Domain(format!(
            "minor oracle needs 0 <= k <= n = {n}, got k = {k}"
        )));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let mut sub = [[Complex64::new(0.0, 0.0); MAX_DIM]; MAX_DIM];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                sub[a][b] = h.get(i, j);
            }
        }
        total += complex_det(&mut sub, k).re;
    }
    Ok(total)
}

/// Determinant by Gaussian elimination with partial pivoting; `a` is
/// destroyed.
fn complex_det(a: &mut [[Complex64; MAX_DIM]; MAX_DIM], k: usize) -> Complex64 {
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&x, &y| a[x][col].norm().total_cmp(&a[y][col].norm()))
            .unwrap();
        if a[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..k {
            let factor = a[row][col] / a[col][col];
            for c in col..k {
                let sub = factor * a[col][c];
                a[row][c] -= sub;
            }
        }
    }
    det
}

/// Eigenvalues of a Hermitian form, sorted ascending.
pub fn eigenvalues(h: &HermitianForm) -> EigenTuple {
    match h.dim() {
        1 => EigenTuple::new(&[h.get(0, 0).re]),
        2 => {
            let a = h.get(0, 0).re;
            let d = h.get(1, 1).re;
            let b = h.get(0, 1);
            eig2(a, d, b.re, b.im)
        }
        _ => jacobi_eigenvalues(h),
    }
}

/// Closed-form eigenvalues of `[[a, b], [b̄, d]]` with `b = b_re + i b_im`.
#[inline]
pub(crate) fn eig2(a: f64, d: f64, b_re: f64, b_im: f64) -> EigenTuple {
    let mean = 0.5 * (a + d);
    let rad = (0.5 * (a - d)).hypot(b_re.hypot(b_im));
    EigenTuple {
        len: 2,
        vals: [mean - rad, mean + rad, 0.0, 0.0],
    }
}

fn jacobi_eigenvalues(h: &HermitianForm) -> EigenTuple {
    let n = h.dim();
    let mut a = *h;
    let target = 1e-12 * a.frobenius().max(1.0);
    for _sweep in 0..100 {
        if a.off_diagonal() <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, p, q);
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|j| a.get(j, j).re).collect();
    EigenTuple::new(&vals)
}

/// One complex Jacobi rotation annihilating entry `(p, q)`: a diagonal phase
/// makes the pivot real, then a real plane rotation zeroes it.
fn rotate(a: &mut HermitianForm, p: usize, q: usize) {
    let n = a.dim;
    let apq = a.entries[p][q];
    let mag = apq.norm();
    if mag < 1e-300 {
        return;
    }
    let phase = apq / mag;
    // Column q times conj(phase), row q times phase: entry (p, q) becomes |apq|.
    for k in 0..n {
        a.entries[k][q] *= phase.conj();
    }
    for k in 0..n {
        a.entries[q][k] *= phase;
    }
    let app = a.entries[p][p].re;
    let aqq = a.entries[q][q].re;
    let zeta = (aqq - app) / (2.0 * mag);
    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
    let t = if zeta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    for k in 0..n {
        let akp = a.entries[k][p];
        let akq = a.entries[k][q];
        a.entries[k][p] = akp * c - akq * s;
        a.entries[k][q] = akp * s + akq * c;
    }
    for k in 0..n {
        let apk = a.entries[p][k];
        let aqk = a.entries[q][k];
        a.entries[p][k] = apk * c - aqk * s;
        a.entries[q][k] = apk * s + aqk * c;
    }
    a.entries[p][q] = Complex64::new(0.0, 0.0);
    a.entries[q][p] = Complex64::new(0.0, 0.0);
    a.entries[p][p].im = 0.0;
    a.entries[q][q].im = 0.0;
}

/// `σ_m(λ - s·1)`.
#[inline]
pub fn pencil_sigma(lambda: &EigenTuple, m: usize, s: f64) -> f64 {
    sigma_unchecked(lambda.shifted(s).values(), m)
}

/// The largest shift `s` with `λ - s·1 ∈ Γ̄_m`.
///
/// The admissible shifts form a half-line because Γ_m is a convex cone
/// containing the positive orthant. The boundary lies in `[λ_min, mean(λ)]`:
/// Γ_n is the orthant and Γ_1 the half-space `σ_1 >= 0`.
pub fn cone_shift(lambda: &EigenTuple, m: usize) -> f64 {
    let n = lambda.dim();
    let m = m.min(n);
    if m == 1 {
        return lambda.sum() / n as f64;
    }
    if m == n {
        return lambda.min();
    }
    let mut lo = lambda.min();
    let mut hi = lambda.sum() / n as f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if in_gamma_m(&lambda.shifted(mid), m, 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// The shift `s <= cone_shift(λ, m)` solving `σ_m(λ - s·1) = target`.
///
/// Along the pencil σ_m decreases strictly from `+∞` to `0` on the
/// admissible half-line, so the root is unique for `target >= 0`. A
/// nonpositive target returns the cone boundary itself.
pub fn target_shift(lambda: &EigenTuple, m: usize, target: f64) -> f64 {
    let n = lambda.dim();
    let m = m.min(n);
    if m == 1 {
        return (lambda.sum() - target.max(0.0)) / n as f64;
    }
    let top = cone_shift(lambda, m);
    if target <= 0.0 {
        return top;
    }
    if n == 2 {
        // (λ1 - s)(λ2 - s) = target on the branch s <= λ1.
        let (l1, l2) = (lambda.min(), lambda.max());
        let gap = l2 - l1;
        return l1 - 2.0 * target / (gap + (gap * gap + 4.0 * target).sqrt());
    }
    // Superadditivity of σ_m^{1/m} on the cone gives
    // σ_m(λ - s·1) >= C(n,m)(s* - s)^m, which brackets the root from below.
    let mut lo = top - (target / binomial(n, m)).powf(1.0 / m as f64);
    let mut hi = top;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pencil_sigma(lambda, m, mid) >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sigma_k_examples() {
        let ones = EigenTuple::new(&[1.0, 1.0]);
        assert_eq!(sigma_k(&ones, 1).unwrap(), 2.0);
        assert_eq!(sigma_k(&ones, 2).unwrap(), 1.0);
        assert_eq!(sigma_k(&ones, 0).unwrap(), 1.0);
        let zeros = EigenTuple::new(&[0.0, 0.0, 0.0]);
        for k in 1..=3 {
            assert_eq!(sigma_k(&zeros, k).unwrap(), 0.0);
        }
        // 2-subsets of {1,2,3}: 1·2 + 1·3 + 2·3.
        let l = EigenTuple::new(&[1.0, 2.0, 3.0]);
        assert_eq!(sigma_k(&l, 2).unwrap(), 11.0);
        assert!(matches!(sigma_k(&l, 4), Err(Error::Domain(_))));
    }

    #[test]
    fn minor_oracle_examples() {
        assert_abs_diff_eq!(
            sigma_k_minor_oracle(&HermitianForm::identity(2), 2).unwrap(),
            1.0
        );
        let d = HermitianForm::diag(&[2.5, -0.5]);
        assert_abs_diff_eq!(sigma_k_minor_oracle(&d, 1).unwrap(), 2.0);
        let h = HermitianForm::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ])
        .unwrap();
        assert_abs_diff_eq!(sigma_k_minor_oracle(&h, 2).unwrap(), 3.0, epsilon = 1e-14);
        assert!(sigma_k_minor_oracle(&h, 3).is_err());
    }

    #[test]
    fn eigenvalue_examples() {
        for n in 1..=4 {
            let e = eigenvalues(&HermitianForm::identity(n));
            assert!(e.values().iter().all(|&v| (v - 1.0).abs() < 1e-14));
        }
        let e = eigenvalues(&HermitianForm::diag(&[3.0, -1.0]));
        assert_eq!(e.values(), &[-1.0, 3.0]);
        let h = HermitianForm::from_rows(&[
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.0, -1.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let e = eigenvalues(&h);
        assert_abs_diff_eq!(e.values()[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values()[1], 3.0, epsilon = 1e-14);
    }

    #[test]
    fn jacobi_on_known_spectrum() {
        // Tridiagonal [2,-1; -1,2,-1; -1,2] has eigenvalues 2 - √2, 2, 2 + √2.
        let h = HermitianForm::from_rows(&[
            vec![c(2.0, 0.0), c(-1.0, 0.0), c(0.0, 0.0)],
            vec![c(-1.0, 0.0), c(2.0, 0.0), c(0.0, -1.0)],
            vec![c(0.0, 0.0), c(0.0, 1.0), c(2.0, 0.0)],
        ])
        .unwrap();
        let e = eigenvalues(&h);
        let s = 2f64.sqrt();
        assert_abs_diff_eq!(e.values()[0], 2.0 - s, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values()[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.values()[2], 2.0 + s, epsilon = 1e-12);
    }

    #[test]
    fn gamma_membership_examples() {
        assert!(in_gamma_m(&EigenTuple::new(&[1.0, 1.0, 1.0]), 3, 0.0));
        let l = EigenTuple::new(&[-1.0, 3.0]);
        assert!(in_gamma_m(&l, 1, 0.0));
        assert!(!in_gamma_m(&l, 2, 0.0));
        assert!(in_gamma_m(&EigenTuple::new(&[0.0, 0.0]), 2, 0.0));
    }

    #[test]
    fn non_hermitian_rows_rejected() {
        let bad = HermitianForm::from_rows(&[
            vec![c(1.0, 0.0), c(1.0, 1.0)],
            vec![c(1.0, 1.0), c(1.0, 0.0)],
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn cone_shift_lands_on_boundary() {
        let l = EigenTuple::new(&[-0.3, 0.4, 1.2, 2.0]);
        for m in 1..=4 {
            let s = cone_shift(&l, m);
            assert!(in_gamma_m(&l.shifted(s), m, 1e-12));
            assert!(!in_gamma_m(&l.shifted(s + 1e-6), m, 0.0));
            assert_abs_diff_eq!(pencil_sigma(&l, m, s), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn target_shift_solves_pencil_equation() {
        let l = EigenTuple::new(&[-0.3, 0.4, 1.2, 2.0]);
        for m in 1..=4 {
            for &f in &[0.0, 1e-3, 0.5, 7.0] {
                let s = target_shift(&l, m, f);
                assert!(s <= cone_shift(&l, m) + 1e-12);
                assert_abs_diff_eq!(pencil_sigma(&l, m, s), f, epsilon = 1e-9 * (1.0 + f));
            }
        }
        let l2 = EigenTuple::new(&[0.5, 3.0]);
        let s = target_shift(&l2, 2, 2.0);
        assert_abs_diff_eq!(pencil_sigma(&l2, 2, s), 2.0, epsilon = 1e-13);
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2), 6.0);
        assert_eq!(binomial(2, 0), 1.0);
        assert_eq!(binomial(2, 3), 0.0);
    }
}
