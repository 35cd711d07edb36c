use mhess_core::capacity::{ball_capacity_oracle, capacities, capacity};
use mhess_core::domain::{read_field, write_field};
use mhess_core::envelope::envelope_sweep;
use mhess_core::hess::is_msh;
use mhess_core::registry;
use mhess_core::solver::{comparison_check, solve_dirichlet};
use mhess_core::{compact_family, make_ball, make_box, DirichletProblem, FamilyKind, ScalarField, SweepOptions, SweepOrder};
use proptest::prelude::*;

fn quad(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() - 1.0
}

#[test]
fn quadratic_is_reproduced_on_the_disc() {
    let dom = make_ball(1, 1.0, 1.0 / 64.0).unwrap();
    let p = DirichletProblem::from_fns(&dom, 1, |_| 1.0, quad).unwrap();
    let r = solve_dirichlet(&p, &SweepOptions::with_tol(1e-12)).unwrap();
    assert!(r.converged);
    assert!(r.field.sup_distance(&ScalarField::from_fn(&dom, quad)) <= 1e-8);
}

#[test]
fn quadratic_is_reproduced_on_a_box() {
    let dom = make_box(1, &[1.0, 0.6], 1.0 / 32.0).unwrap();
    let g = |x: &[f64]| 2.0 * x[0] * x[0] + x[1] * x[1];
    // (1/4)Δ = (4 + 2) / 4
    let p = DirichletProblem::from_fns(&dom, 1, |_| 1.5, g).unwrap();
    let r = solve_dirichlet(&p, &SweepOptions::with_tol(1e-12)).unwrap();
    assert!(r.field.sup_distance(&ScalarField::from_fn(&dom, g)) <= 1e-8);
}

#[test]
fn colored_and_lexicographic_orders_agree() {
    let dom = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
    let p = DirichletProblem::from_fns(&dom, 1, |x| 1.0 + x[0] * x[0], |x| 0.1 * x[1]).unwrap();
    let lex = solve_dirichlet(&p, &SweepOptions::with_tol(1e-12)).unwrap();
    let col = solve_dirichlet(
        &p,
        &SweepOptions {
            order: SweepOrder::Colored,
            ..SweepOptions::with_tol(1e-12)
        },
    )
    .unwrap();
    assert!(lex.field.sup_distance(&col.field) <= 1e-9);
}

#[test]
fn solution_is_m_subharmonic() {
    let dom = make_ball(2, 1.0, 1.0 / 8.0).unwrap();
    let p = DirichletProblem::from_fns(&dom, 2, |x| 1.0 + x[0].abs(), |_| 0.0).unwrap();
    let r = solve_dirichlet(&p, &SweepOptions::with_tol(1e-10)).unwrap();
    assert!(r.converged);
    assert!(is_msh(&r.field, 2, 1e-6).unwrap().holds);
    assert!(r.measure_error <= 1e-6, "measure error {}", r.measure_error);
}

#[test]
fn envelope_stays_below_obstacle() {
    let dom = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
    let obs = registry::field("radial-bump", &dom).unwrap();
    let env = envelope_sweep(&obs, 1, &obs.boundary_values(), &SweepOptions::with_tol(1e-11)).unwrap();
    assert!(env.converged);
    for &i in dom.interior() {
        assert!(env.field.get(i) <= obs.get(i) + 1e-12);
    }
    assert!(is_msh(&env.field, 1, 1e-6).unwrap().holds);
    assert!(env.contact_count() > 0);
}

#[test]
fn disc_capacity_matches_log_formula() {
    let dom = make_ball(1, 1.0, 1.0 / 64.0).unwrap();
    let set = compact_family(&dom, &FamilyKind::Balls { radii: vec![0.4] }).unwrap().remove(0);
    let c = capacity(&set, 1, &SweepOptions::with_tol(1e-11)).unwrap();
    let exact = ball_capacity_oracle(1, 1, 0.4, 1.0).unwrap();
    assert!((c.value - exact).abs() <= 0.05 * exact, "{} vs {exact}", c.value);
}

#[test]
fn capacity_is_monotone_under_inclusion() {
    let dom = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
    let sets = compact_family(&dom, &FamilyKind::Balls { radii: vec![0.1, 0.2, 0.4, 0.6] }).unwrap();
    let caps = capacities(&sets, 1, &SweepOptions::with_tol(1e-10), true).unwrap();
    for w in caps.windows(2) {
        assert!(w[0].value < w[1].value);
    }
}

#[test]
fn field_dump_roundtrip() {
    let dom = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
    let u = ScalarField::from_fn(&dom, quad);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.fld");
    write_field(&u, &path).unwrap();
    let back = read_field(&path).unwrap();
    assert_eq!(back.dims, dom.dims());
    assert_eq!(back.h, dom.h());
    for &i in dom.interior() {
        assert_eq!(back.values[i].to_bits(), u.get(i).to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn comparison_orders_solutions(c in 0.0f64..1.0, drop in 0.0f64..0.2) {
        // Larger measure and smaller boundary data give a smaller solution.
        let dom = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let opts = SweepOptions::with_tol(1e-11);
        let big = solve_dirichlet(&DirichletProblem::from_fns(&dom, 1, |_| 1.0, |x| x[0] - drop).unwrap(), &opts).unwrap();
        let small = solve_dirichlet(&DirichletProblem::from_fns(&dom, 1, |_| c, |x| x[0]).unwrap(), &opts).unwrap();
        for &i in dom.interior() {
            prop_assert!(big.field.get(i) <= small.field.get(i) + 1e-9);
        }
        let rep = comparison_check(&big.field, &small.field, 1, 1e-8).unwrap();
        prop_assert!(rep.holds || rep.vacuous);
    }
}
