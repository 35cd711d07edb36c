//! Numerical toolkit for the complex m-Hessian equation
//! `(dd^c u)^m ∧ β^{n-m} = μ` on bounded domains in C^n, `n ∈ {1, 2}`.
//!
//! The crate discretizes balls and smoothed boxes on uniform lattices
//! ([`domain`]), evaluates the discrete complex Hessian and its measures
//! ([`hess`]), and builds solvers on a pointwise monotone update along the
//! Hessian pencil `H(t) = H_0 - (t/h²) I`: Dirichlet problems ([`solver`]),
//! m-subharmonic envelopes ([`envelope`]) and relative capacities
//! ([`capacity`]). [`smooth`] provides mollification and Hölder-modulus
//! measurement used by the verification experiments.

pub mod capacity;
pub mod domain;
pub mod envelope;
pub mod error;
pub mod fit;
pub mod hess;
pub mod registry;
pub mod smooth;
pub mod solver;
pub mod sweep;
pub mod symm;

pub use capacity::{CapacityResult, DominationFit};
pub use domain::{
    compact_family, make_ball, make_box, omega_delta, CompactSet, FamilyKind, GridDomain, NodeClass,
    ScalarField, Shape,
};
pub use envelope::EnvelopeResult;
pub use error::{Error, Result};
pub use hess::{kappa, DiscreteMeasure, HessianField, Side};
pub use smooth::{HolderWitness, Mollifier};
pub use solver::{DirichletProblem, SolveResult};
pub use sweep::{Relaxation, SweepOptions, SweepOrder};
pub use symm::{EigenTuple, HermitianForm};
