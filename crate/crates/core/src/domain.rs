//! Lattice discretizations of balls and smoothed boxes in C^n, scalar fields
//! on them, and compact-set constructors.
//!
//! Coordinates are real: axis `2j` is `x_{j+1}` and axis `2j + 1` is
//! `y_{j+1}`, so a node of a domain in C^n has `2n` integer indices. Nodes
//! are stored row-major with the last axis fastest and the origin at the
//! centre of the lattice.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Geometric shape of a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `{|z| < radius}` with `ρ = |z|² - radius²`.
    Ball { radius: f64 },
    /// `{|x_a| < w_a}` (one half width per real axis) with the log-sum-exp
    /// smoothing of `max_a (x_a² - w_a²)` as defining function.
    Box { half_widths: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary,
    Exterior,
}

const NO_SLOT: u32 = u32::MAX;

/// A rectangular lattice over `R^{2n}` carrying a domain mask.
#[derive(Debug)]
pub struct GridDomain {
    n: usize,
    h: f64,
    shape: Shape,
    half_counts: Vec<usize>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    class: Vec<NodeClass>,
    rho: Vec<f64>,
    dist: Vec<f64>,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    slot: Vec<u32>,
    axis_offsets: Vec<[isize; 2]>,
    rho_normalization: f64,
}

impl GridDomain {
    /// Complex dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of real axes, `2n`.
    pub fn axes(&self) -> usize {
        2 * self.n
    }

    /// Lattice spacing.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Node counts per axis.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Half extents in nodes: axis `a` covers indices `-K_a..=K_a`.
    pub fn half_counts(&self) -> &[usize] {
        &self.half_counts
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn node_count(&self) -> usize {
        self.class.len()
    }

    pub fn class(&self, node: usize) -> NodeClass {
        self.class[node]
    }

    /// Defining function at a node.
    pub fn rho(&self, node: usize) -> f64 {
        self.rho[node]
    }

    pub fn rho_values(&self) -> &[f64] {
        &self.rho
    }

    /// Distance to `∂Ω` (zero on exterior nodes).
    pub fn dist(&self, node: usize) -> f64 {
        self.dist[node]
    }

    /// Interior nodes in sweep order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Boundary nodes; position `i` is the slot of the i-th Dirichlet datum.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    /// Position of an interior node in [`GridDomain::interior`].
    pub fn interior_slot(&self, node: usize) -> Option<usize> {
        match self.class[node] {
            NodeClass::Interior => Some(self.slot[node] as usize),
            _ => None,
        }
    }

    /// Position of a boundary node in [`GridDomain::boundary`].
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        match self.class[node] {
            NodeClass::Boundary => Some(self.slot[node] as usize),
            _ => None,
        }
    }

    /// `[minus, plus]` linear offsets of the unit step along each axis.
    pub fn axis_offsets(&self) -> &[[isize; 2]] {
        &self.axis_offsets
    }

    /// Linear offset of an integer displacement.
    pub fn offset(&self, delta: &[isize]) -> isize {
        delta
            .iter()
            .zip(&self.strides)
            .map(|(d, s)| d * *s as isize)
            .sum()
    }

    /// Signed integer indices of a node (origin at the lattice centre).
    pub fn index_of(&self, node: usize) -> Vec<isize> {
        let mut rem = node;
        let mut out = vec![0isize; self.dims.len()];
        for a in 0..self.dims.len() {
            out[a] = (rem / self.strides[a]) as isize - self.half_counts[a] as isize;
            rem %= self.strides[a];
        }
        out
    }

    /// Node at signed integer indices, if inside the lattice.
    pub fn node_at(&self, index: &[isize]) -> Option<usize> {
        let mut node = 0usize;
        for a in 0..self.dims.len() {
            let i = index[a] + self.half_counts[a] as isize;
            if i < 0 || i as usize >= self.dims[a] {
                return None;
            }
            node += i as usize * self.strides[a];
        }
        Some(node)
    }

    /// Real coordinates of a node.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.index_of(node)
            .into_iter()
            .map(|i| i as f64 * self.h)
            .collect()
    }

    /// `|z|²` at a node.
    pub fn norm_sq(&self, node: usize) -> f64 {
        let mut rem = node;
        let mut acc = 0.0;
        for a in 0..self.dims.len() {
            let i = (rem / self.strides[a]) as f64 - self.half_counts[a] as f64;
            rem %= self.strides[a];
            acc += i * i;
        }
        acc * self.h * self.h
    }

    /// Volume of one lattice cell, `h^{2n}`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.axes() as i32)
    }

    /// Largest distance from an interior point to `∂Ω`.
    pub fn inradius(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => *radius,
            Shape::Box { half_widths } => half_widths.iter().cloned().fold(f64::INFINITY, f64::min),
        }
    }

    /// Largest half extent of the bounding box.
    pub fn outer_radius(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius } => *radius,
            Shape::Box { half_widths } => half_widths.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// Factor `c` such that `ρ / c` satisfies `σ_k(ρ/c) >= 1` for all `k`
    /// on the interior nodes. `ρ` itself is stored unnormalized.
    pub fn rho_normalization(&self) -> f64 {
        self.rho_normalization
    }

    /// Exterior-free neighbours used by the Hessian stencil, as linear
    /// offsets: the `2·2n` axis neighbours, then for `n = 2` the 16 corners
    /// of the four mixed planes.
    pub fn stencil_offsets(&self) -> Vec<isize> {
        let d = self.axes();
        let mut out = Vec::new();
        for a in 0..d {
            out.extend_from_slice(&self.axis_offsets[a]);
        }
        if self.n == 2 {
            for &(a, b) in &MIXED_PAIRS {
                for sa in [-1isize, 1] {
                    for sb in [-1isize, 1] {
                        out.push(sa * self.strides[a] as isize + sb * self.strides[b] as isize);
                    }
                }
            }
        }
        out
    }
}

/// Real axis pairs `(x_1,x_2), (y_1,y_2), (x_1,y_2), (y_1,x_2)` entering the
/// mixed entry `∂²/∂z_1∂z̄_2`.
pub(crate) const MIXED_PAIRS: [(usize, usize); 4] = [(0, 2), (1, 3), (0, 3), (1, 2)];

fn check_common(n: usize, h: f64) -> Result<()> {
    if !(1..=2).contains(&n) {
        return Err(Error::Config(format!("complex dimension must be 1 or 2, got {n}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Config(format!("spacing must be positive, got {h}")));
    }
    Ok(())
}

/// Discretizes the ball `{|z| < radius}` in C^n.
pub fn make_ball(n: usize, radius: f64, h: f64) -> Result<Arc<GridDomain>> {
    check_common(n, h)?;
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Config(format!("radius must be positive, got {radius}")));
    }
    if h >= radius / 4.0 {
        return Err(Error::Config(format!(
            "spacing {h} too coarse for radius {radius} (need h < radius/4)"
        )));
    }
    let r2 = radius * radius;
    let shape = Shape::Ball { radius };
    build(
        n,
        h,
        shape,
        vec![radius; 2 * n],
        move |x| x.iter().map(|v| v * v).sum::<f64>() - r2,
        move |x| radius - x.iter().map(|v| v * v).sum::<f64>().sqrt(),
        1.0,
    )
}

/// Discretizes the box `{|x_a| < w_a}` in C^n, with `2n` half widths.
///
/// The defining function is `(1/p) ln Σ_a exp(p (x_a² - w_a²))` with
/// `p = 32 / min_a w_a²`; it is smooth, convex, negative inside and positive
/// outside, and its zero set lies within `ln(2n)/(p w_a)` of the faces.
pub fn make_box(n: usize, half_widths: &[f64], h: f64) -> Result<Arc<GridDomain>> {
    check_common(n, h)?;
    if half_widths.len() != 2 * n {
        return Err(Error::Config(format!(
            "box in C^{n} needs {} half widths, got {}",
            2 * n,
            half_widths.len()
        )));
    }
    if half_widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::Config("half widths must be positive".into()));
    }
    let wmin = half_widths.iter().cloned().fold(f64::INFINITY, f64::min);
    if h >= wmin / 4.0 {
        return Err(Error::Config(format!(
            "spacing {h} too coarse for half width {wmin} (need h < w/4)"
        )));
    }
    let p = 32.0 / (wmin * wmin);
    let w: Vec<f64> = half_widths.to_vec();
    let w2 = w.clone();
    let rho = move |x: &[f64]| {
        let terms: Vec<f64> = x.iter().zip(&w).map(|(v, wa)| p * (v * v - wa * wa)).collect();
        let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()) / p
    };
    let dist = move |x: &[f64]| {
        x.iter()
            .zip(&w2)
            .map(|(v, wa)| wa - v.abs())
            .fold(f64::INFINITY, f64::min)
    };
    // The complex Hessian of ρ dominates Σ_a π_a diag(...) with softmax
    // weights π_a; its smallest eigenvalue is evaluated on the lattice below.
    let shape = Shape::Box {
        half_widths: half_widths.to_vec(),
    };
    let mut dom = build(n, h, shape, half_widths.to_vec(), rho, dist, f64::NAN)?;
    let norm = box_rho_normalization(&dom);
    Arc::get_mut(&mut dom).expect("fresh domain").rho_normalization = norm;
    Ok(dom)
}

fn box_rho_normalization(dom: &GridDomain) -> f64 {
    let mut worst = f64::INFINITY;
    for &node in dom.interior() {
        let lam = crate::hess::node_eigenvalues(dom.rho_values(), dom, node);
        let e = crate::symm::sigma_all(lam.values());
        for k in 1..=dom.n() {
            worst = worst.min(e[k].max(0.0).powf(1.0 / k as f64));
        }
    }
    worst
}

fn build<R, D>(
    n: usize,
    h: f64,
    shape: Shape,
    extents: Vec<f64>,
    rho_fn: R,
    dist_fn: D,
    rho_normalization: f64,
) -> Result<Arc<GridDomain>>
where
    R: Fn(&[f64]) -> f64,
    D: Fn(&[f64]) -> f64,
{
    let d = 2 * n;
    let half_counts: Vec<usize> = extents.iter().map(|w| (w / h).ceil() as usize + 1).collect();
    let dims: Vec<usize> = half_counts.iter().map(|k| 2 * k + 1).collect();
    let mut strides = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        strides[a] = strides[a + 1] * dims[a + 1];
    }
    let total: usize = dims.iter().product();
    if total > 50_000_000 {
        return Err(Error::Config(format!("lattice with {total} nodes exceeds the size limit")));
    }

    let mut rho = vec![0.0; total];
    let mut dist = vec![0.0; total];
    let mut x = vec![0.0; d];
    for node in 0..total {
        let mut rem = node;
        for a in 0..d {
            x[a] = ((rem / strides[a]) as f64 - half_counts[a] as f64) * h;
            rem %= strides[a];
        }
        rho[node] = rho_fn(&x);
        dist[node] = dist_fn(&x);
    }

    let axis_offsets: Vec<[isize; 2]> = strides
        .iter()
        .map(|&s| [-(s as isize), s as isize])
        .collect();
    let mut dom = GridDomain {
        n,
        h,
        shape,
        half_counts,
        dims,
        strides,
        class: vec![NodeClass::Exterior; total],
        rho,
        dist,
        interior: Vec::new(),
        boundary: Vec::new(),
        slot: vec![NO_SLOT; total],
        axis_offsets,
        rho_normalization,
    };
    let stencil = dom.stencil_offsets();
    for node in 0..total {
        if dom.rho[node] >= 0.0 {
            dom.dist[node] = 0.0;
            continue;
        }
        // Nodes with ρ < 0 sit strictly inside the lattice because every
        // half count exceeds the extent by one node.
        let inside = stencil
            .iter()
            .all(|&o| dom.rho[(node as isize + o) as usize] < 0.0);
        dom.dist[node] = dom.dist[node].max(0.0);
        if inside {
            dom.class[node] = NodeClass::Interior;
            dom.slot[node] = dom.interior.len() as u32;
            dom.interior.push(node);
        } else {
            dom.class[node] = NodeClass::Boundary;
            dom.slot[node] = dom.boundary.len() as u32;
            dom.boundary.push(node);
        }
    }

    for a in 0..d {
        let mut idx = vec![0isize; d];
        let mut count = 0;
        for i in -(dom.half_counts[a] as isize)..=dom.half_counts[a] as isize {
            idx[a] = i;
            if let Some(node) = dom.node_at(&idx) {
                if dom.class[node] == NodeClass::Interior {
                    count += 1;
                }
            }
        }
        if count < 9 {
            return Err(Error::Config(format!(
                "spacing {h} leaves only {count} interior nodes along axis {a} (need 9)"
            )));
        }
    }
    Ok(Arc::new(dom))
}

/// Real values attached to the nodes of one domain.
///
/// Exterior entries hold `NaN` unless the field has been extended to the
/// whole lattice.
#[derive(Clone, Debug)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    /// Field equal to `value` on interior and boundary nodes.
    pub fn constant(domain: &Arc<GridDomain>, value: f64) -> Self {
        Self::from_fn(domain, |_| value)
    }

    /// Samples `f` on interior and boundary nodes.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(domain: &Arc<GridDomain>, f: F) -> Self {
        let mut values = vec![f64::NAN; domain.node_count()];
        for &node in domain.interior().iter().chain(domain.boundary()) {
            values[node] = f(&domain.coords(node));
        }
        ScalarField {
            domain: Arc::clone(domain),
            values,
        }
    }

    /// Samples `f` on every lattice node.
    pub fn from_fn_all<F: Fn(&[f64]) -> f64>(domain: &Arc<GridDomain>, f: F) -> Self {
        let values = (0..domain.node_count())
            .map(|node| f(&domain.coords(node)))
            .collect();
        ScalarField {
            domain: Arc::clone(domain),
            values,
        }
    }

    /// Wraps a full-lattice value vector.
    pub fn from_values(domain: &Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(Error::Domain(format!(
                "expected {} values, got {}",
                domain.node_count(),
                values.len()
            )));
        }
        Ok(ScalarField {
            domain: Arc::clone(domain),
            values,
        })
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn set(&mut self, node: usize, value: f64) {
        self.values[node] = value;
    }

    /// Values on the boundary nodes, in slot order.
    pub fn boundary_values(&self) -> Vec<f64> {
        self.domain.boundary().iter().map(|&i| self.values[i]).collect()
    }

    /// Values on the interior nodes, in sweep order.
    pub fn interior_values(&self) -> Vec<f64> {
        self.domain.interior().iter().map(|&i| self.values[i]).collect()
    }

    /// Nodes of `Ω̄` (interior then boundary).
    fn closure(&self) -> impl Iterator<Item = &usize> {
        self.domain.interior().iter().chain(self.domain.boundary())
    }

    /// `sup |u - v|` over interior and boundary nodes.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.closure()
            .map(|&i| (self.values[i] - other.values[i]).abs())
            .fold(0.0, f64::max)
    }

    /// `max u` over interior and boundary nodes.
    pub fn max(&self) -> f64 {
        self.closure().map(|&i| self.values[i]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `min u` over interior and boundary nodes.
    pub fn min(&self) -> f64 {
        self.closure().map(|&i| self.values[i]).fold(f64::INFINITY, f64::min)
    }

    /// Oscillation `max u - min u` over interior and boundary nodes.
    pub fn oscillation(&self) -> f64 {
        self.max() - self.min()
    }

    /// `∫_Ω |u| dλ` by the interior-node rule.
    pub fn l1_norm(&self) -> f64 {
        let s: f64 = self.domain.interior().iter().map(|&i| self.values[i].abs()).sum();
        s * self.domain.cell_volume()
    }

    /// `∫_Ω |u - v| dλ` by the interior-node rule.
    pub fn l1_distance(&self, other: &ScalarField) -> f64 {
        let s: f64 = self
            .domain
            .interior()
            .iter()
            .map(|&i| (self.values[i] - other.values[i]).abs())
            .sum();
        s * self.domain.cell_volume()
    }

    /// Pointwise map over interior and boundary nodes.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarField {
        let mut out = self.clone();
        for &i in self.closure() {
            out.values[i] = f(self.values[i]);
        }
        out
    }

    /// Pointwise combination over interior and boundary nodes.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &ScalarField, f: F) -> ScalarField {
        let mut out = self.clone();
        for &i in self.closure() {
            out.values[i] = f(self.values[i], other.values[i]);
        }
        out
    }

    /// True when interior and boundary entries are all finite.
    pub fn is_finite_on_closure(&self) -> bool {
        self.closure().all(|&i| self.values[i].is_finite())
    }
}

/// A set of interior nodes standing for a compact `K ⊂ Ω`.
#[derive(Clone, Debug)]
pub struct CompactSet {
    domain: Arc<GridDomain>,
    nodes: Vec<usize>,
    hausdorff_to_boundary: f64,
    volume: f64,
    label: String,
}

impl CompactSet {
    /// Builds a set from interior nodes; non-interior nodes are rejected.
    /// An empty node list gives the empty set.
    pub fn new(domain: &Arc<GridDomain>, mut nodes: Vec<usize>, label: impl Into<String>) -> Result<Self> {
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&bad) = nodes
            .iter()
            .find(|&&i| i >= domain.node_count() || domain.class(i) != NodeClass::Interior)
        {
            return Err(Error::Domain(format!("node {bad} is not an interior node")));
        }
        let hausdorff_to_boundary = nodes.iter().map(|&i| domain.dist(i)).fold(0.0, f64::max);
        let volume = nodes.len() as f64 * domain.cell_volume();
        Ok(CompactSet {
            domain: Arc::clone(domain),
            nodes,
            hausdorff_to_boundary,
            volume,
            label: label.into(),
        })
    }

    /// Interior nodes satisfying `pred(coords, dist)`.
    pub fn from_predicate<P>(domain: &Arc<GridDomain>, label: impl Into<String>, pred: P) -> Result<Self>
    where
        P: Fn(&[f64], f64) -> bool,
    {
        let nodes = domain
            .interior()
            .iter()
            .copied()
            .filter(|&i| pred(&domain.coords(i), domain.dist(i)))
            .collect();
        Self::new(domain, nodes, label)
    }

    pub fn domain(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    /// Sorted node indices.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.nodes.binary_search(&node).is_ok()
    }

    /// `δ_K(∂Ω) = sup_{z ∈ K} dist(z, ∂Ω)`.
    pub fn hausdorff_to_boundary(&self) -> f64 {
        self.hausdorff_to_boundary
    }

    /// Node count times `h^{2n}`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Membership mask over the whole lattice.
    pub fn mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.domain.node_count()];
        for &i in &self.nodes {
            m[i] = true;
        }
        m
    }

    pub fn is_subset_of(&self, other: &CompactSet) -> bool {
        self.nodes.iter().all(|&i| other.contains(i))
    }
}

/// Kinds of compact-set families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FamilyKind {
    /// Closed centred balls `{|z| <= s}`.
    Balls { radii: Vec<f64> },
    /// Closed shells `{a <= |z| <= b}`.
    Annuli { bands: Vec<(f64, f64)> },
    /// `{z ∈ Ω : dist(z, ∂Ω) <= w}`.
    BoundaryCollars { widths: Vec<f64> },
    /// Unions of random closed balls with centres drawn so the balls stay
    /// inside Ω.
    RandomUnions {
        count: usize,
        balls_per_set: usize,
        radius_range: (f64, f64),
        seed: u64,
    },
}

/// Builds a family of compact sets. Every member must be nonempty.
pub fn compact_family(domain: &Arc<GridDomain>, kind: &FamilyKind) -> Result<Vec<CompactSet>> {
    let outer = domain.outer_radius();
    let check_radius = |r: f64, what: &str| -> Result<()> {
        if !(r > 0.0 && r < outer) {
            return Err(Error::Parameter(format!("{what} {r} outside (0, {outer})")));
        }
        Ok(())
    };
    let sets: Vec<CompactSet> = match kind {
        FamilyKind::Balls { radii } => radii
            .iter()
            .map(|&s| {
                check_radius(s, "ball radius")?;
                let s2 = s * s;
                CompactSet::from_predicate(domain, format!("ball s={s}"), |x, _| {
                    x.iter().map(|v| v * v).sum::<f64>() <= s2 * (1.0 + 1e-12)
                })
            })
            .collect::<Result<_>>()?,
        FamilyKind::Annuli { bands } => bands
            .iter()
            .map(|&(a, b)| {
                check_radius(b, "annulus radius")?;
                if !(0.0..b).contains(&a) {
                    return Err(Error::Parameter(format!("annulus band ({a}, {b}) malformed")));
                }
                let (a2, b2) = (a * a * (1.0 - 1e-12), b * b * (1.0 + 1e-12));
                CompactSet::from_predicate(domain, format!("annulus {a}..{b}"), |x, _| {
                    let r2 = x.iter().map(|v| v * v).sum::<f64>();
                    r2 >= a2 && r2 <= b2
                })
            })
            .collect::<Result<_>>()?,
        FamilyKind::BoundaryCollars { widths } => widths
            .iter()
            .map(|&w| {
                check_radius(w, "collar width")?;
                CompactSet::from_predicate(domain, format!("collar w={w}"), |_, d| d <= w)
            })
            .collect::<Result<_>>()?,
        FamilyKind::RandomUnions {
            count,
            balls_per_set,
            radius_range,
            seed,
        } => {
            let (rlo, rhi) = *radius_range;
            if !(rlo > 0.0 && rlo <= rhi && rhi < domain.inradius()) || *balls_per_set == 0 {
                return Err(Error::Parameter(format!(
                    "random union radius range ({rlo}, {rhi}) must lie in (0, inradius)"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let d = domain.axes();
            let mut out = Vec::with_capacity(*count);
            for k in 0..*count {
                let mut balls = Vec::with_capacity(*balls_per_set);
                for _ in 0..*balls_per_set {
                    let r = if rhi > rlo { rng.gen_range(rlo..=rhi) } else { rlo };
                    let reach = domain.inradius() - r;
                    let centre = sample_in_region(&mut rng, domain, d, reach);
                    balls.push((centre, r));
                }
                let set = CompactSet::from_predicate(domain, format!("union #{k}"), |x, _| {
                    balls.iter().any(|(c, r)| {
                        x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= r * r
                    })
                })?;
                out.push(set);
            }
            out
        }
    };
    if let Some(empty) = sets.iter().find(|s| s.is_empty()) {
        return Err(Error::EmptySet(format!("family member '{}' has no nodes", empty.label())));
    }
    Ok(sets)
}

/// Uniform point in the centred ball (ball domains) or cube (box domains)
/// of the given reach.
fn sample_in_region(rng: &mut ChaCha8Rng, domain: &GridDomain, d: usize, reach: f64) -> Vec<f64> {
    match domain.shape() {
        Shape::Ball { .. } => loop {
            let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-reach..=reach)).collect();
            if c.iter().map(|v| v * v).sum::<f64>() <= reach * reach {
                return c;
            }
        },
        Shape::Box { half_widths } => half_widths
            .iter()
            .map(|w| {
                let lim = (w - (domain.inradius() - reach)).max(0.0);
                rng.gen_range(-lim..=lim)
            })
            .collect(),
    }
}

/// Interior nodes of `Ω_δ = {z ∈ Ω : dist(z, ∂Ω) > δ}`, as a lattice mask.
pub fn omega_delta(domain: &GridDomain, delta: f64) -> Result<Vec<bool>> {
    if !(delta >= 0.0) {
        return Err(Error::Parameter(format!("delta must be nonnegative, got {delta}")));
    }
    if delta >= domain.inradius() {
        return Err(Error::EmptySet(format!(
            "delta {delta} is not below the inradius {}",
            domain.inradius()
        )));
    }
    let mut mask = vec![false; domain.node_count()];
    let mut any = false;
    for &i in domain.interior() {
        if domain.dist(i) > delta {
            mask[i] = true;
            any = true;
        }
    }
    if !any {
        return Err(Error::EmptySet(format!("Ω_δ is empty at delta {delta}")));
    }
    Ok(mask)
}

/// Magic bytes opening a field dump.
pub const FIELD_MAGIC: &[u8; 8] = b"HESSFLD1";
const HEADER_LEN: usize = 64;

/// JSON sidecar written next to a field dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub shape: Shape,
    pub n: usize,
    pub h: f64,
    pub dims: Vec<usize>,
    pub half_counts: Vec<usize>,
    pub interior_nodes: usize,
    pub boundary_nodes: usize,
    pub rho_normalization: f64,
}

/// Contents of a field dump.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDump {
    pub n: usize,
    pub dims: Vec<usize>,
    pub h: f64,
    pub values: Vec<f64>,
}

/// Writes `field` as a binary dump at `path` and a JSON sidecar at
/// `path` with `.json` appended.
pub fn write_field(field: &ScalarField, path: &Path) -> Result<()> {
    let dom = field.domain();
    let mut header = [0u8; HEADER_LEN];
    header[0..8].copy_from_slice(FIELD_MAGIC);
    header[8..12].copy_from_slice(&(dom.n() as u32).to_le_bytes());
    header[12..16].copy_from_slice(&(dom.axes() as u32).to_le_bytes());
    for (a, &c) in dom.dims().iter().enumerate() {
        header[16 + 4 * a..20 + 4 * a].copy_from_slice(&(c as u32).to_le_bytes());
    }
    header[32..40].copy_from_slice(&dom.h().to_le_bytes());
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&header)?;
    for v in field.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;

    let sidecar = FieldSidecar {
        shape: dom.shape().clone(),
        n: dom.n(),
        h: dom.h(),
        dims: dom.dims().to_vec(),
        half_counts: dom.half_counts().to_vec(),
        interior_nodes: dom.interior().len(),
        boundary_nodes: dom.boundary().len(),
        rho_normalization: dom.rho_normalization(),
    };
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    std::fs::write(side, serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

/// Reads a binary field dump written by [`write_field`].
pub fn read_field(path: &Path) -> Result<FieldDump> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    if &header[0..8] != FIELD_MAGIC {
        return Err(Error::Domain("not a field dump (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
    let n = u32_at(8);
    let axes = u32_at(12);
    if axes > 4 || axes != 2 * n {
        return Err(Error::Domain(format!("corrupt header: n = {n}, axes = {axes}")));
    }
    let dims: Vec<usize> = (0..axes).map(|a| u32_at(16 + 4 * a)).collect();
    let h = f64::from_le_bytes(header[32..40].try_into().unwrap());
    let count: usize = dims.iter().product();
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FieldDump { n, dims, h, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn disc_node_count_and_centre() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let area_nodes = PI * 32.0 * 32.0;
        let count = d.interior().len() as f64;
        assert!((count - area_nodes).abs() / area_nodes < 0.1, "{count}");
        let centre = d.node_at(&[0, 0]).unwrap();
        assert_eq!(d.rho(centre), -1.0);
        assert_eq!(d.class(centre), NodeClass::Interior);
    }

    #[test]
    fn four_dimensional_ball_builds() {
        let d = make_ball(2, 1.0, 0.1).unwrap();
        assert_eq!(d.axes(), 4);
        assert!(!d.interior().is_empty());
        assert_eq!(d.rho_normalization(), 1.0);
    }

    #[test]
    fn coarse_grids_rejected() {
        assert!(matches!(make_ball(1, 1.0, 0.3), Err(Error::Config(_))));
        assert!(matches!(make_ball(1, 1.0, 0.2), Err(Error::Config(_))));
        assert!(matches!(make_ball(3, 1.0, 0.1), Err(Error::Config(_))));
        assert!(matches!(make_box(1, &[1.0], 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn box_sign_and_volume() {
        let d = make_box(1, &[1.0, 1.0], 1.0 / 16.0).unwrap();
        let inside = d.node_at(&[3, -2]).unwrap();
        assert!(d.rho(inside) < 0.0);
        let outside = d.node_at(&[17, 0]).unwrap();
        assert!(d.rho(outside) > 0.0);

        let d = make_box(1, &[1.0, 1.0], 1.0 / 32.0).unwrap();
        let n = d.interior().len() + d.boundary().len();
        let vol = n as f64 * d.cell_volume();
        assert!((vol - 4.0).abs() / 4.0 < 0.05, "{vol}");
        assert!(d.rho_normalization() > 0.0);
    }

    #[test]
    fn interior_stencils_stay_in_closure() {
        let d = make_ball(2, 1.0, 1.0 / 6.0).unwrap();
        let st = d.stencil_offsets();
        assert_eq!(st.len(), 24);
        for &i in d.interior() {
            for &o in &st {
                let j = (i as isize + o) as usize;
                assert_ne!(d.class(j), NodeClass::Exterior);
            }
        }
    }

    #[test]
    fn dist_matches_radius_minus_norm() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        for &i in d.interior().iter().chain(d.boundary()) {
            let r = d.norm_sq(i).sqrt();
            assert!((d.dist(i) - (1.0 - r)).abs() <= 2.0 * d.h());
        }
    }

    #[test]
    fn families() {
        let d = make_ball(1, 1.0, 1.0 / 64.0).unwrap();
        let balls = compact_family(&d, &FamilyKind::Balls { radii: vec![0.5] }).unwrap();
        assert!(balls[0].hausdorff_to_boundary() > 0.99);
        let collars = compact_family(&d, &FamilyKind::BoundaryCollars { widths: vec![0.1] }).unwrap();
        assert!(collars[0].hausdorff_to_boundary() <= 0.1);
        let ann = compact_family(&d, &FamilyKind::Annuli { bands: vec![(0.5, 0.8)] }).unwrap();
        let exact = PI * (0.64 - 0.25);
        assert!((ann[0].volume() - exact).abs() / exact < 0.03);
        assert_eq!(ann[0].volume(), ann[0].len() as f64 * d.cell_volume());
        let tiny = compact_family(&d, &FamilyKind::Balls { radii: vec![1e-3] });
        assert!(tiny.is_ok());
        let fam = FamilyKind::RandomUnions {
            count: 4,
            balls_per_set: 3,
            radius_range: (0.05, 0.2),
            seed: 7,
        };
        let a = compact_family(&d, &fam).unwrap();
        let b = compact_family(&d, &fam).unwrap();
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.nodes(), y.nodes());
        }
    }

    #[test]
    fn empty_family_member_rejected() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let r = compact_family(&d, &FamilyKind::Annuli { bands: vec![(0.501, 0.502)] });
        assert!(matches!(r, Err(Error::EmptySet(_))));
    }

    #[test]
    fn omega_delta_masks() {
        let d = make_ball(1, 1.0, 1.0 / 32.0).unwrap();
        let all = omega_delta(&d, 0.0).unwrap();
        assert_eq!(all.iter().filter(|&&b| b).count(), d.interior().len());
        let half = omega_delta(&d, 0.5).unwrap();
        for &i in d.interior() {
            if half[i] {
                assert!(d.norm_sq(i).sqrt() < 0.5 + d.h());
                assert!(all[i]);
            }
        }
        assert!(matches!(omega_delta(&d, 1.0), Err(Error::EmptySet(_))));
    }

    #[test]
    fn field_dump_round_trip() {
        let d = make_ball(1, 1.0, 1.0 / 16.0).unwrap();
        let f = ScalarField::from_fn(&d, |x| x[0] - 2.0 * x[1]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.fld");
        write_field(&f, &p).unwrap();
        let back = read_field(&p).unwrap();
        assert_eq!(back.n, 1);
        assert_eq!(back.dims, d.dims());
        assert_eq!(back.h, d.h());
        for (a, b) in back.values.iter().zip(f.values()) {
            assert!(a == b || (a.is_nan() && b.is_nan()));
        }
        let raw = std::fs::read(&p).unwrap();
        assert_eq!(&raw[0..8], FIELD_MAGIC);
        assert_eq!(raw.len(), 64 + 8 * d.node_count());
        let side: FieldSidecar =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("u.fld.json")).unwrap()).unwrap();
        assert_eq!(side.interior_nodes, d.interior().len());
    }
}
