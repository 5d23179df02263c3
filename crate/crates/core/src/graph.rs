//! Sparse symmetric weighted graphs and their (p-)Laplacian operators.
//!
//! Edges are stored once in canonical orientation (`i < j`) and mirrored
//! into a compressed adjacency index so that every operator can walk the
//! neighbours of a node in ascending order. That fixed order makes all
//! reductions bit-reproducible.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The exponent of the p-Laplacian, restricted to `1 < p <= 2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PValue(f64);

impl PValue {
    pub const TWO: PValue = PValue(2.0);

    pub fn new(p: f64) -> Result<Self> {
        if p > 1.0 && p <= 2.0 {
            Ok(PValue(p))
        } else {
            Err(Error::InvalidP(p))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// `|x|^(p-1) sign(x)`.
#[inline]
pub fn phi_p(x: f64, p: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if p == 2.0 {
        x
    } else {
        x.abs().powf(p - 1.0).copysign(x)
    }
}

/// Immutable undirected graph with strictly positive weights.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
}

impl SparseGraph {
    /// Builds a graph on `n` nodes. Each undirected edge must appear once,
    /// in either orientation.
    pub fn from_edges(n: usize, edge_list: &[(usize, usize, f64)]) -> Result<Self> {
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(a, b, w) in edge_list {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositiveWeight { i: a, j: b, w });
            }
            edges.push((a.min(b), a.max(b), w));
        }
        edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        if let Some(pair) = edges
            .windows(2)
            .find(|pair| (pair[0].0, pair[0].1) == (pair[1].0, pair[1].1))
        {
            return Err(Error::DuplicateEdge(pair[0].0, pair[0].1));
        }

        let mut counts = vec![0usize; n + 1];
        for &(i, j, _) in &edges {
            counts[i + 1] += 1;
            counts[j + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        let mut weights = vec![0.0; 2 * edges.len()];
        // Edges are sorted by (i, j), so every row receives its neighbours in
        // ascending order: first the smaller ones (as j), then the larger (as i).
        for &(i, j, w) in &edges {
            neighbors[cursor[j]] = i;
            weights[cursor[j]] = w;
            cursor[j] += 1;
        }
        for &(i, j, w) in &edges {
            neighbors[cursor[i]] = j;
            weights[cursor[i]] = w;
            cursor[i] += 1;
        }
        let degrees = (0..n)
            .map(|v| weights[offsets[v]..offsets[v + 1]].iter().sum())
            .collect();

        Ok(SparseGraph {
            n,
            edges,
            offsets,
            neighbors,
            weights,
            degrees,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(i, j, w)` triples with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn degree(&self, v: usize) -> f64 {
        self.degrees[v]
    }

    /// Neighbours of `v` with their weights, in ascending index order.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[v]..self.offsets[v + 1];
        self.neighbors[range.clone()]
            .iter()
            .copied()
            .zip(self.weights[range].iter().copied())
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.neighbors[range.clone()].binary_search(&j) {
            Ok(pos) => self.weights[range.start + pos],
            Err(_) => 0.0,
        }
    }

    /// Fails with the first zero-degree node, if any.
    pub fn require_positive_degrees(&self) -> Result<()> {
        match self.degrees.iter().position(|&d| d <= 0.0) {
            Some(v) => Err(Error::ZeroDegreeNode(v)),
            None => Ok(()),
        }
    }

    /// Component id per node, numbered in order of first appearance.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut comp = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for (u, _) in self.neighbors(v) {
                    if comp[u] == usize::MAX {
                        comp[u] = count;
                        queue.push_back(u);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    pub fn is_connected(&self) -> bool {
        self.n == 0 || self.components().0 == 1
    }
}

fn check_len(g: &SparseGraph, u: &[f64]) -> Result<()> {
    if u.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: u.len(),
        });
    }
    Ok(())
}

/// `(Δ_p u)_i = Σ_j w_ij φ_p(u_i − u_j)`, optionally divided by `d_i`.
pub fn apply_p_laplacian(g: &SparseGraph, u: &[f64], p: PValue, normalized: bool) -> Result<Vec<f64>> {
    check_len(g, u)?;
    if normalized {
        g.require_positive_degrees()?;
    }
    let p = p.get();
    Ok((0..g.n())
        .map(|i| {
            let s: f64 = g.neighbors(i).map(|(j, w)| w * phi_p(u[i] - u[j], p)).sum();
            if normalized {
                s / g.degree(i)
            } else {
                s
            }
        })
        .collect())
}

/// `½ Σ_{i,j} w_ij |u_i − u_j|^p`, i.e. the sum over undirected edges.
pub fn quadratic_form(g: &SparseGraph, u: &[f64], p: PValue) -> Result<f64> {
    check_len(g, u)?;
    let p = p.get();
    Ok(g.edges().iter().map(|&(i, j, w)| w * (u[i] - u[j]).abs().powf(p)).sum())
}

/// Dense `D − W` (or `D⁻¹(D − W)`). Intended for small graphs only.
pub fn dense_laplacian(g: &SparseGraph, normalized: bool) -> Result<DMatrix<f64>> {
    if normalized {
        g.require_positive_degrees()?;
    }
    let n = g.n();
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        lap[(i, i)] = g.degree(i);
        for (j, w) in g.neighbors(i) {
            lap[(i, j)] -= w;
        }
    }
    if normalized {
        for i in 0..n {
            let d = g.degree(i);
            lap.row_mut(i).iter_mut().for_each(|x| *x /= d);
        }
    }
    Ok(lap)
}
