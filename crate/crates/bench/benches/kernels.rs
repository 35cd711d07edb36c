use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mhess_bench::{ball, random_forms, sampled};
use mhess_core::capacity::capacity;
use mhess_core::envelope::envelope_sweep;
use mhess_core::solver::solve_dirichlet;
use mhess_core::symm::{eigenvalues, sigma_k, target_shift};
use mhess_core::{compact_family, hess, DirichletProblem, FamilyKind, SweepOptions};

fn spectral(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral");
    for dim in 1..=4 {
        let forms = random_forms(dim, 256, 11);
        g.bench_with_input(BenchmarkId::new("eigen_sigma", dim), &forms, |b, forms| {
            b.iter(|| {
                let mut acc = 0.0;
                for h in forms {
                    let lam = eigenvalues(h);
                    acc += sigma_k(&lam, dim).unwrap();
                }
                black_box(acc)
            })
        });
        g.bench_with_input(BenchmarkId::new("target_shift", dim), &forms, |b, forms| {
            b.iter(|| {
                let mut acc = 0.0;
                for h in forms {
                    acc += target_shift(&eigenvalues(h), dim.min(2), 1.0);
                }
                black_box(acc)
            })
        });
    }
    g.finish();
}

fn hessian(c: &mut Criterion) {
    let mut g = c.benchmark_group("hessian_measure");
    for (n, h) in [(1, 1.0 / 128.0), (2, 1.0 / 12.0)] {
        let dom = ball(n, h);
        let u = sampled("quadratic", &dom);
        g.bench_function(BenchmarkId::new("n", n), |b| {
            b.iter(|| black_box(hess::hessian_measure(&u, n).unwrap().total()))
        });
    }
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("solvers");
    g.sample_size(10);
    let opts = SweepOptions::with_tol(1e-10);
    let disc = ball(1, 1.0 / 64.0);
    let quad = |x: &[f64]| x[0] * x[0] + x[1] * x[1] - 1.0;
    let p = DirichletProblem::from_fns(&disc, 1, |_| 1.0, quad).unwrap();
    g.bench_function("dirichlet_disc_64", |b| b.iter(|| black_box(solve_dirichlet(&p, &opts).unwrap().iterations)));
    let obstacle = sampled("radial-bump", &disc);
    let bc = obstacle.boundary_values();
    g.bench_function("envelope_disc_64", |b| {
        b.iter(|| black_box(envelope_sweep(&obstacle, 1, &bc, &opts).unwrap().iterations))
    });
    let dom = ball(2, 1.0 / 8.0);
    let set = compact_family(&dom, &FamilyKind::Balls { radii: vec![0.3] }).unwrap().remove(0);
    g.bench_function("capacity_ball4_8", |b| b.iter(|| black_box(capacity(&set, 1, &opts).unwrap().value)));
    g.finish();
}

criterion_group!(benches, spectral, hessian, solvers);
criterion_main!(benches);
