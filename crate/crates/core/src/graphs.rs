//! Graph generators (seeded) and the dynamical operators derived from them:
//! normalized diffusion operator, normalized Laplacian and the random-walk
//! transition matrix.
//!
//! Seeded generators use ChaCha8 keyed by the caller's seed; within one build
//! they are bitwise deterministic.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::systems::AffineSystem;

/// Weighted directed graph stored as a dense nonnegative adjacency matrix;
/// `W(i,j)` is the weight of edge `(v_i, v_j)`.
#[derive(Debug, Clone)]
pub struct WeightedDigraph {
    w: Array2<f64>,
}

impl WeightedDigraph {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "adjacency must be square, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidArgument(
                "adjacency weights must be nonnegative and finite".into(),
            ));
        }
        Ok(Self { w })
    }

    pub fn vertex_count(&self) -> usize {
        self.w.nrows()
    }

    pub fn adjacency(&self) -> &Array2<f64> {
        &self.w
    }

    /// Out-degrees (row sums of the adjacency).
    pub fn degrees(&self) -> Array1<f64> {
        self.w.sum_axis(ndarray::Axis(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Diffusion,
    Laplacian,
    Transition,
}

/// A dense operator derived from a graph.
#[derive(Debug, Clone)]
pub struct GraphOperator {
    pub kind: OperatorKind,
    pub matrix: Array2<f64>,
}

/// Uniform random digraph: exactly `m_edges` distinct directed edges sampled
/// without replacement among off-diagonal pairs, all weights 1.
pub fn random_digraph(d: usize, m_edges: usize, seed: u64) -> Result<WeightedDigraph> {
    let slots = d * d.saturating_sub(1);
    if m_edges > slots {
        return Err(Error::InvalidArgument(format!(
            "m_edges = {m_edges} exceeds the {slots} off-diagonal slots"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Array2::<f64>::zeros((d, d));
    for idx in sample(&mut rng, slots, m_edges) {
        let i = idx / (d - 1);
        let mut j = idx % (d - 1);
        if j >= i {
            j += 1; // skip the diagonal slot
        }
        w[[i, j]] = 1.0;
    }
    WeightedDigraph::new(w)
}

/// Ring graph: `d` vertices on a cycle, each connected to the `k_neighbors/2`
/// nearest on each side (weight 1, symmetric). The adjacency is circulant.
pub fn ring_graph(d: usize, k_neighbors: usize) -> Result<WeightedDigraph> {
    if k_neighbors == 0 || k_neighbors % 2 != 0 {
        return Err(Error::InvalidArgument("k_neighbors must be even and positive".into()));
    }
    if k_neighbors >= d {
        return Err(Error::InvalidArgument(format!(
            "k_neighbors = {k_neighbors} must be smaller than d = {d}"
        )));
    }
    let mut w = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for step in 1..=k_neighbors / 2 {
            let fwd = (i + step) % d;
            let bwd = (i + d - step) % d;
            w[[i, fwd]] = 1.0;
            w[[i, bwd]] = 1.0;
        }
    }
    WeightedDigraph::new(w)
}

/// Symmetrized k-nearest-neighbor graph of `d` points sampled uniformly on the
/// unit sphere S^2.
pub fn knn_sphere_graph(d: usize, k: usize, seed: u64) -> Result<WeightedDigraph> {
    if k >= d {
        return Err(Error::InvalidArgument(format!("k = {k} must be smaller than d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(d);
    for _ in 0..d {
        // normalized Gaussian triple is uniform on the sphere
        loop {
            let p = [
                gaussian(&mut rng),
                gaussian(&mut rng),
                gaussian(&mut rng),
            ];
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if n > 1e-8 {
                points.push([p[0] / n, p[1] / n, p[2] / n]);
                break;
            }
        }
    }
    let mut w = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        let mut dists: Vec<(usize, f64)> = (0..d)
            .filter(|&j| j != i)
            .map(|j| {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                let dz = points[i][2] - points[j][2];
                (j, dx * dx + dy * dy + dz * dz)
            })
            .collect();
        dists.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        for &(j, _) in dists.iter().take(k) {
            w[[i, j]] = 1.0;
            w[[j, i]] = 1.0; // symmetrize
        }
    }
    WeightedDigraph::new(w)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random-walk transition matrix `P = D^+ W`; rows of zero-degree vertices are
/// replaced by the corresponding unit vector so every row sums to 1.
pub fn transition_matrix(g: &WeightedDigraph) -> GraphOperator {
    let d = g.vertex_count();
    let deg = g.degrees();
    let mut p = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        if deg[i] > 0.0 {
            for j in 0..d {
                p[[i, j]] = g.adjacency()[[i, j]] / deg[i];
            }
        } else {
            p[[i, i]] = 1.0;
        }
    }
    GraphOperator { kind: OperatorKind::Transition, matrix: p }
}

/// Normalized diffusion operator `D^{-1/2} W D^{-1/2}` with the pseudo-inverse
/// convention for zero degrees.
pub fn diffusion_operator(g: &WeightedDigraph) -> GraphOperator {
    let d = g.vertex_count();
    let deg = g.degrees();
    let dinv_sqrt: Vec<f64> = deg
        .iter()
        .map(|&x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 })
        .collect();
    let mut a = Array2::<f64>::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            a[[i, j]] = dinv_sqrt[i] * g.adjacency()[[i, j]] * dinv_sqrt[j];
        }
    }
    GraphOperator { kind: OperatorKind::Diffusion, matrix: a }
}

/// Normalized Laplacian `L = I - D^{-1/2} W D^{-1/2}`.
pub fn laplacian(g: &WeightedDigraph) -> GraphOperator {
    let a = diffusion_operator(g);
    let l = Array2::<f64>::eye(g.vertex_count()) - &a.matrix;
    GraphOperator { kind: OperatorKind::Laplacian, matrix: l }
}

/// Homogeneous random-walk system `x_{t+1} = P^T x_t` with initial
/// distribution `x0`.
pub fn random_walk_system(g: &WeightedDigraph, x0: &Array1<f64>) -> Result<AffineSystem> {
    let d = g.vertex_count();
    if x0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "x0 must have length {d}, got {}",
            x0.len()
        )));
    }
    if x0.iter().any(|&x| x < 0.0) || (x0.sum() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(
            "x0 must be a probability vector (nonnegative, summing to 1)".into(),
        ));
    }
    let p = transition_matrix(g);
    let a = p.matrix.t().mapv(|x| c64::new(x, 0.0));
    let b = x0.mapv(|x| c64::new(x, 0.0));
    AffineSystem::homogeneous(a, b)
}
