//! Relaxation driver shared by the Dirichlet solver and the envelope sweeps.
//!
//! A sweep visits every interior node and replaces its value `c` by
//! `min(cap, c + ω (t - c))`, where the rule supplies the pointwise target
//! `t` and the obstacle `cap`. With `ω = 1` this is the plain nonlinear
//! Gauss–Seidel update; `ω > 1` is (projected) over-relaxation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::GridDomain;

/// Relaxation factor choice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    GaussSeidel,
    Sor(f64),
    /// `ω = 2 / (1 + sin(π h / L))` with `L` the lattice diameter, reduced
    /// towards 1 whenever the update norm stalls.
    Auto,
}

/// Node visiting order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    /// Interior nodes in increasing lattice index; serial.
    Lexicographic,
    /// Nodes grouped by the parity vector of their indices (`2^{2n}`
    /// colours, taken in increasing binary order). No two nodes of one
    /// colour share a stencil, so each colour is updated in parallel.
    Colored,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Stop once the sup-norm of a sweep's update falls below `tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub relaxation: Relaxation,
    pub order: SweepOrder,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            tol: 1e-10,
            max_iter: 200_000,
            relaxation: Relaxation::Auto,
            order: SweepOrder::Lexicographic,
        }
    }
}

impl SweepOptions {
    pub fn with_tol(tol: f64) -> Self {
        SweepOptions {
            tol,
            ..Default::default()
        }
    }
}

/// Convergence record of a sweep run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub iterations: usize,
    pub final_update: f64,
    pub converged: bool,
    /// Sup-norm of the update after each sweep.
    pub history: Vec<f64>,
    /// Relaxation factor in force at the end.
    pub omega: f64,
}

const STALL_WINDOW: usize = 30;

fn initial_omega(dom: &GridDomain, relaxation: Relaxation) -> f64 {
    match relaxation {
        Relaxation::GaussSeidel => 1.0,
        Relaxation::Sor(w) => w,
        Relaxation::Auto => {
            let diameter = 2.0 * dom.outer_radius();
            2.0 / (1.0 + (std::f64::consts::PI * dom.h() / diameter).sin())
        }
    }
}

fn colour_classes(dom: &GridDomain) -> Vec<Vec<usize>> {
    let d = dom.axes();
    let mut classes = vec![Vec::new(); 1 << d];
    for &node in dom.interior() {
        let idx = dom.index_of(node);
        let c = idx
            .iter()
            .enumerate()
            .fold(0usize, |acc, (a, i)| acc | ((i.rem_euclid(2) as usize) << a));
        classes[c].push(node);
    }
    classes
}

/// Runs sweeps until convergence. `rule(values, node)` returns
/// `(target, cap)` for the node from the current values.
pub fn run<F>(dom: &GridDomain, values: &mut [f64], opts: &SweepOptions, rule: F) -> SweepOutcome
where
    F: Fn(&[f64], usize) -> (f64, f64) + Sync,
{
    let mut omega = initial_omega(dom, opts.relaxation);
    let adaptive = matches!(opts.relaxation, Relaxation::Auto);
    let colours = match opts.order {
        SweepOrder::Colored => colour_classes(dom),
        SweepOrder::Lexicographic => Vec::new(),
    };
    let mut history = Vec::new();
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut last = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        let update = match opts.order {
            SweepOrder::Lexicographic => {
                let mut sup = 0.0f64;
                for &node in dom.interior() {
                    let (t, cap) = rule(values, node);
                    let c = values[node];
                    let new = cap.min(c + omega * (t - c));
                    sup = sup.max((new - c).abs());
                    values[node] = new;
                }
                sup
            }
            SweepOrder::Colored => {
                let mut sup = 0.0f64;
                for class in &colours {
                    let snapshot: &[f64] = values;
                    let news: Vec<f64> = class
                        .par_iter()
                        .map(|&node| {
                            let (t, cap) = rule(snapshot, node);
                            let c = snapshot[node];
                            cap.min(c + omega * (t - c))
                        })
                        .collect();
                    for (&node, new) in class.iter().zip(news) {
                        sup = sup.max((new - values[node]).abs());
                        values[node] = new;
                    }
                }
                sup
            }
        };
        history.push(update);
        last = update;
        if !update.is_finite() {
            return SweepOutcome {
                iterations: iter,
                final_update: update,
                converged: false,
                history,
                omega,
            };
        }
        if update < opts.tol {
            return SweepOutcome {
                iterations: iter,
                final_update: update,
                converged: true,
                history,
                omega,
            };
        }
        if update < best {
            best = update;
            since_best = 0;
        } else {
            since_best += 1;
            if adaptive && since_best >= STALL_WINDOW && omega > 1.0 {
                omega = 1.0 + 0.5 * (omega - 1.0);
                if omega < 1.02 {
                    omega = 1.0;
                }
                since_best = 0;
                best = update;
            }
        }
    }
    SweepOutcome {
        iterations: opts.max_iter,
        final_update: last,
        converged: false,
        history,
        omega,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_ball;

    fn laplace_rule(dom: &GridDomain) -> impl Fn(&[f64], usize) -> (f64, f64) + Sync + '_ {
        move |v: &[f64], node: usize| {
            let s: f64 = dom
                .axis_offsets()
                .iter()
                .flat_map(|o| o.iter())
                .map(|&o| v[(node as isize + o) as usize])
                .sum();
            (s / (2 * dom.axes()) as f64, f64::INFINITY)
        }
    }

    #[test]
    fn harmonic_data_reproduced_by_all_modes() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let exact: Vec<f64> = (0..d.node_count())
            .map(|i| {
                let x = d.coords(i);
                x[0] * x[0] - x[1] * x[1] + 0.5 * x[0]
            })
            .collect();
        for (relaxation, order) in [
            (Relaxation::GaussSeidel, SweepOrder::Lexicographic),
            (Relaxation::Auto, SweepOrder::Lexicographic),
            (Relaxation::Auto, SweepOrder::Colored),
        ] {
            let mut v = exact.clone();
            for &i in d.interior() {
                v[i] = 0.0;
            }
            let opts = SweepOptions {
                tol: 1e-13,
                max_iter: 100_000,
                relaxation,
                order,
            };
            let out = run(&d, &mut v, &opts, laplace_rule(&d));
            assert!(out.converged);
            let err = d.interior().iter().map(|&i| (v[i] - exact[i]).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{relaxation:?} {order:?}: {err}");
        }
    }

    #[test]
    fn colored_run_is_deterministic() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let mut a = vec![0.0; d.node_count()];
        for &i in d.boundary() {
            a[i] = d.coords(i)[0];
        }
        let mut b = a.clone();
        let opts = SweepOptions {
            order: SweepOrder::Colored,
            ..SweepOptions::with_tol(1e-12)
        };
        run(&d, &mut a, &opts, laplace_rule(&d));
        run(&d, &mut b, &opts, laplace_rule(&d));
        assert_eq!(a, b);
    }

    #[test]
    fn cap_is_respected() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let mut v = vec![0.0; d.node_count()];
        for &i in d.boundary() {
            v[i] = 1.0;
        }
        let lap = laplace_rule(&d);
        let out = run(&d, &mut v, &SweepOptions::with_tol(1e-12), |vals, i| (lap(vals, i).0, 0.5));
        assert!(out.converged);
        assert!(d.interior().iter().all(|&i| v[i] <= 0.5));
    }
}
