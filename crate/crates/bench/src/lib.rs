//! Fixtures shared by the kernel benchmarks.

use std::sync::Arc;

use mhess_core::{make_ball, registry, GridDomain, HermitianForm, ScalarField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random Hermitian forms with entries in `[-1, 1]`.
pub fn random_forms(dim: usize, count: usize, seed: u64) -> Vec<HermitianForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut h = HermitianForm::zeros(dim);
            for j in 0..dim {
                h.set(j, j, Complex64::new(rng.gen_range(-1.0..1.0), 0.0));
                for k in j + 1..dim {
                    h.set(j, k, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
            h
        })
        .collect()
}

/// Unit ball of `C^n` at spacing `h`.
pub fn ball(n: usize, h: f64) -> Arc<GridDomain> {
    make_ball(n, 1.0, h).expect("valid lattice")
}

/// Registry function sampled on `dom`.
pub fn sampled(name: &str, dom: &Arc<GridDomain>) -> ScalarField {
    registry::field(name, dom).expect("registered function")
}
