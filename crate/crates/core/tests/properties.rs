use approx::assert_relative_eq;
use mhess_core::symm::{self, cone_shift, eigenvalues, in_gamma_m, pencil_sigma, sigma_k, sigma_k_minor_oracle, target_shift};
use mhess_core::{hess, make_ball, EigenTuple, HermitianForm, ScalarField};
use num_complex::Complex64;
use proptest::prelude::*;

fn hermitian(dim: usize) -> impl Strategy<Value = HermitianForm> {
    proptest::collection::vec(-3.0f64..3.0, dim * dim).prop_map(move |v| {
        let mut h = HermitianForm::zeros(dim);
        let mut it = v.into_iter();
        for j in 0..dim {
            h.set(j, j, Complex64::new(it.next().unwrap(), 0.0));
            for k in j + 1..dim {
                h.set(j, k, Complex64::new(it.next().unwrap(), it.next().unwrap()));
            }
        }
        h
    })
}

fn any_hermitian() -> impl Strategy<Value = HermitianForm> {
    (1usize..=4).prop_flat_map(hermitian)
}

fn tuple(dim: usize) -> impl Strategy<Value = EigenTuple> {
    proptest::collection::vec(-2.0f64..2.0, dim).prop_map(|v| EigenTuple::new(&v))
}

proptest! {
    #[test]
    fn sigma_matches_minor_expansion(h in any_hermitian()) {
        let lam = eigenvalues(&h);
        let norm = h.norm_inf();
        for k in 1..=h.dim() {
            let a = sigma_k(&lam, k).unwrap();
            let b = sigma_k_minor_oracle(&h, k).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + norm.powi(k as i32)));
        }
    }

    #[test]
    fn eigenvalues_sum_to_trace(h in any_hermitian()) {
        let trace: f64 = (0..h.dim()).map(|j| h.get(j, j).re).sum();
        prop_assert!((eigenvalues(&h).sum() - trace).abs() <= 1e-10 * (1.0 + h.norm_inf()));
    }

    #[test]
    fn sigma_is_homogeneous(lam in (1usize..=4).prop_flat_map(tuple), t in 0.1f64..3.0) {
        for k in 1..=lam.dim() {
            let a = sigma_k(&lam.scaled(t), k).unwrap();
            let b = t.powi(k as i32) * sigma_k(&lam, k).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn cone_is_closed_under_addition(
        (a, b) in (1usize..=4).prop_flat_map(|d| (tuple(d), tuple(d))),
        m in 1usize..=4,
    ) {
        let m = m.min(a.dim());
        let sa = a.shifted(cone_shift(&a, m) - 0.1);
        let sb = b.shifted(cone_shift(&b, m) - 0.1);
        prop_assert!(in_gamma_m(&sa, m, symm::default_slack(&sa)));
        prop_assert!(in_gamma_m(&sb, m, symm::default_slack(&sb)));
        let sum = sa.add(&sb);
        prop_assert!(in_gamma_m(&sum, m, symm::default_slack(&sum)));
    }

    #[test]
    fn cone_shift_lands_on_the_boundary(lam in (1usize..=4).prop_flat_map(tuple), m in 1usize..=4) {
        let m = m.min(lam.dim());
        let s = cone_shift(&lam, m);
        let edge = lam.shifted(s);
        prop_assert!(in_gamma_m(&edge, m, 1e-8));
        prop_assert!(pencil_sigma(&lam, m, s).abs() <= 1e-7 * (1.0 + lam.norm_inf().powi(m as i32)));
        prop_assert!(!in_gamma_m(&lam.shifted(s + 1e-3), m, 0.0));
    }

    #[test]
    fn target_shift_solves_the_pencil(lam in (1usize..=4).prop_flat_map(tuple), m in 1usize..=4, f in 0.0f64..5.0) {
        let m = m.min(lam.dim());
        let s = target_shift(&lam, m, f);
        prop_assert!(s <= cone_shift(&lam, m) + 1e-12);
        let got = pencil_sigma(&lam, m, s);
        prop_assert!((got - f).abs() <= 1e-8 * (1.0 + f));
    }

    #[test]
    fn discrete_hessian_is_exact_on_quadratics(a in hermitian(2)) {
        // u(z) = Σ a_jk z̄_j z_k, real because a is Hermitian.
        let dom = make_ball(2, 1.0, 1.0 / 6.0).unwrap();
        let u = ScalarField::from_fn(&dom, |x| {
            let z = [Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3])];
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..2 {
                for k in 0..2 {
                    s += z[j].conj() * a.get(j, k) * z[k];
                }
            }
            s.re
        });
        let want = eigenvalues(&a);
        let field = hess::complex_hessian(&u).unwrap();
        for form in field.forms() {
            let got = eigenvalues(form);
            for (x, y) in got.values().iter().zip(want.values()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn sigma_of_identity_is_binomial() {
    for n in 1..=4 {
        let lam = EigenTuple::new(&vec![1.0; n]);
        for k in 0..=n {
            assert_relative_eq!(sigma_k(&lam, k).unwrap(), symm::binomial(n, k));
        }
    }
}
