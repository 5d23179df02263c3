//! The multiway p-spectral objective
//!
//! ```text
//! F_p(U) = Σ_l  Σ_{(i,j) ∈ E} c_ij w_ij |u_i^l − u_j^l|^p / ‖u^l‖_p^p
//! ```
//!
//! with `c_ij = 1` for the ratio-cut functional and
//! `c_ij = (1/d_i + 1/d_j) / 2` for the normalized one, together with its
//! Euclidean gradient and a sparse Laplacian-structured Hessian
//! approximation. Each column is handled independently (and in parallel);
//! within a column, sums follow the graph's fixed neighbour order.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{phi_p, PValue, SparseGraph};

/// Tolerance on `UᵀU − I` for a valid embedding.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// An `n × k` matrix with orthonormal columns, standing for the subspace it
/// spans.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(DMatrix<f64>);

impl Embedding {
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        if u.ncols() == 0 || u.ncols() >= u.nrows() {
            return Err(Error::BadArgs(format!(
                "embedding must be n × k with 0 < k < n, got {} × {}",
                u.nrows(),
                u.ncols()
            )));
        }
        let dev = orthonormality_error(&u);
        if dev > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(dev));
        }
        Ok(Embedding(u))
    }

    /// Wraps a matrix already known to be orthonormal.
    pub(crate) fn new_unchecked(u: DMatrix<f64>) -> Self {
        debug_assert!(orthonormality_error(&u) <= 1e-8);
        Embedding(u)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn k(&self) -> usize {
        self.0.ncols()
    }
}

/// `max |(UᵀU − I)_ab|`.
pub fn orthonormality_error(u: &DMatrix<f64>) -> f64 {
    let gram = u.transpose() * u;
    let mut worst: f64 = 0.0;
    for a in 0..gram.nrows() {
        for b in 0..gram.ncols() {
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((gram[(a, b)] - target).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalConfig {
    pub p: PValue,
    pub normalized: bool,
    /// Floor on `|u_m − u_j|` before raising it to `p − 2` in the Hessian.
    pub hessian_floor: f64,
}

impl FunctionalConfig {
    pub const DEFAULT_HESSIAN_FLOOR: f64 = 1e-10;

    pub fn new(p: PValue, normalized: bool) -> Self {
        FunctionalConfig {
            p,
            normalized,
            hessian_floor: Self::DEFAULT_HESSIAN_FLOOR,
        }
    }

    pub fn with_p(self, p: PValue) -> Self {
        FunctionalConfig { p, ..self }
    }
}

fn validate(g: &SparseGraph, u: &DMatrix<f64>, cfg: &FunctionalConfig) -> Result<()> {
    if u.nrows() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: u.nrows(),
        });
    }
    if cfg.normalized {
        g.require_positive_degrees()?;
    }
    if !(cfg.hessian_floor > 0.0) {
        return Err(Error::BadArgs("hessian floor must be positive".into()));
    }
    Ok(())
}

/// Edge scaling `c_ij` of the chosen functional.
#[inline]
fn edge_factor(g: &SparseGraph, i: usize, j: usize, normalized: bool) -> f64 {
    if normalized {
        0.5 * (1.0 / g.degree(i) + 1.0 / g.degree(j))
    } else {
        1.0
    }
}

fn p_norm_pow(col: &[f64], p: f64) -> f64 {
    col.iter().map(|x| x.abs().powf(p)).sum()
}

fn column_terms(g: &SparseGraph, col: &[f64], cfg: &FunctionalConfig) -> (f64, f64) {
    let p = cfg.p.get();
    let energy: f64 = g
        .edges()
        .iter()
        .map(|&(i, j, w)| edge_factor(g, i, j, cfg.normalized) * w * (col[i] - col[j]).abs().powf(p))
        .sum();
    (energy, p_norm_pow(col, p))
}

fn column_value(g: &SparseGraph, col: &[f64], cfg: &FunctionalConfig, index: usize) -> Result<f64> {
    let (energy, norm) = column_terms(g, col, cfg);
    if norm == 0.0 {
        return Err(Error::ZeroColumn(index));
    }
    Ok(energy / norm)
}

/// Per-column values `F^l`; `f_p` is their sum.
pub fn column_values(g: &SparseGraph, u: &DMatrix<f64>, cfg: &FunctionalConfig) -> Result<Vec<f64>> {
    validate(g, u, cfg)?;
    (0..u.ncols())
        .into_par_iter()
        .map(|l| column_value(g, u.column(l).as_slice(), cfg, l))
        .collect()
}

pub fn f_p(g: &SparseGraph, u: &DMatrix<f64>, cfg: &FunctionalConfig) -> Result<f64> {
    Ok(column_values(g, u, cfg)?.iter().sum())
}

fn gradient_column(g: &SparseGraph, col: &[f64], value: f64, norm: f64, cfg: &FunctionalConfig) -> Vec<f64> {
    let p = cfg.p.get();
    let scale = p / norm;
    (0..g.n())
        .map(|m| {
            let edge: f64 = g
                .neighbors(m)
                .map(|(j, w)| edge_factor(g, m, j, cfg.normalized) * w * phi_p(col[m] - col[j], p))
                .sum();
            scale * (edge - phi_p(col[m], p) * value)
        })
        .collect()
}

/// Euclidean gradient, column `l` entry `m`:
/// `(p/‖u‖_p^p) [Σ_j c_mj w_mj φ_p(u_m − u_j) − φ_p(u_m) F^l]`.
pub fn euclidean_gradient(g: &SparseGraph, u: &DMatrix<f64>, cfg: &FunctionalConfig) -> Result<DMatrix<f64>> {
    Ok(value_and_gradient(g, u, cfg)?.1)
}

/// `f_p` and its gradient from a single pass per column.
pub fn value_and_gradient(g: &SparseGraph, u: &DMatrix<f64>, cfg: &FunctionalConfig) -> Result<(f64, DMatrix<f64>)> {
    validate(g, u, cfg)?;
    let columns: Vec<(f64, Vec<f64>)> = (0..u.ncols())
        .into_par_iter()
        .map(|l| {
            let col = u.column(l);
            let col = col.as_slice();
            let (energy, norm) = column_terms(g, col, cfg);
            if norm == 0.0 {
                return Err(Error::ZeroColumn(l));
            }
            let value = energy / norm;
            Ok((value, gradient_column(g, col, value, norm, cfg)))
        })
        .collect::<Result<_>>()?;
    let value = columns.iter().map(|(v, _)| v).sum();
    let mut grad = DMatrix::zeros(u.nrows(), u.ncols());
    for (l, (_, col)) in columns.into_iter().enumerate() {
        grad.column_mut(l).copy_from_slice(&col);
    }
    Ok((value, grad))
}

/// Edge weights of the per-column approximate Hessian,
/// `p(p−1) c_ij w_ij max(|u_i − u_j|, ε)^(p−2) / ‖u‖_p^p`, aligned with
/// `g.edges()`.
fn hessian_edge_weights(g: &SparseGraph, col: &[f64], cfg: &FunctionalConfig) -> Vec<f64> {
    let p = cfg.p.get();
    let scale = p * (p - 1.0) / p_norm_pow(col, p);
    g.edges()
        .iter()
        .map(|&(i, j, w)| {
            let c = edge_factor(g, i, j, cfg.normalized);
            let diff = if p == 2.0 {
                1.0
            } else {
                (col[i] - col[j]).abs().max(cfg.hessian_floor).powf(p - 2.0)
            };
            scale * c * w * diff
        })
        .collect()
}

fn laplacian_apply(g: &SparseGraph, weights: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.n()];
    for (&(i, j, _), &w) in g.edges().iter().zip(weights) {
        let flow = w * (v[i] - v[j]);
        out[i] += flow;
        out[j] -= flow;
    }
    out
}

/// The approximate Hessian of `F_p` at a fixed `U`, applied column-wise.
/// Edge weights are computed once so repeated products (as in CG) only cost
/// one sweep over the edges per column.
#[derive(Debug, Clone)]
pub struct HessianOperator<'g> {
    graph: &'g SparseGraph,
    weights: Vec<Vec<f64>>,
}

impl<'g> HessianOperator<'g> {
    pub fn new(g: &'g SparseGraph, u: &DMatrix<f64>, cfg: &FunctionalConfig) -> Result<Self> {
        validate(g, u, cfg)?;
        let weights = (0..u.ncols())
            .into_par_iter()
            .map(|l| {
                let col = u.column(l);
                if p_norm_pow(col.as_slice(), cfg.p.get()) == 0.0 {
                    return Err(Error::ZeroColumn(l));
                }
                Ok(hessian_edge_weights(g, col.as_slice(), cfg))
            })
            .collect::<Result<_>>()?;
        Ok(HessianOperator { graph: g, weights })
    }

    pub fn apply(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(v.shape(), (self.graph.n(), self.weights.len()));
        let cols: Vec<Vec<f64>> = (0..v.ncols())
            .into_par_iter()
            .map(|l| laplacian_apply(self.graph, &self.weights[l], v.column(l).as_slice()))
            .collect();
        let mut out = DMatrix::zeros(v.nrows(), v.ncols());
        for (l, col) in cols.into_iter().enumerate() {
            out.column_mut(l).copy_from_slice(&col);
        }
        out
    }
}

/// Diagonal curvature of the denominators, column `l` entry `m`:
/// `p(p−1) F^l max(|u_m|, ε)^(p−2) / ‖u‖_p^p`. Subtracting it from the
/// Laplacian part gives the full second variation along directions that
/// keep the column norms fixed; at `p = 2` it is `2 F^l`.
pub fn curvature_diagonal(g: &SparseGraph, u: &DMatrix<f64>, cfg: &FunctionalConfig) -> Result<DMatrix<f64>> {
    let values = column_values(g, u, cfg)?;
    let p = cfg.p.get();
    let mut out = DMatrix::zeros(u.nrows(), u.ncols());
    for (l, value) in values.iter().enumerate() {
        let col = u.column(l);
        let scale = p * (p - 1.0) * value / p_norm_pow(col.as_slice(), p);
        for (m, &x) in col.iter().enumerate() {
            let local = if p == 2.0 {
                1.0
            } else {
                x.abs().max(cfg.hessian_floor).powf(p - 2.0)
            };
            out[(m, l)] = scale * local;
        }
    }
    Ok(out)
}

pub fn hessian_vec(
    g: &SparseGraph,
    u: &DMatrix<f64>,
    v: &DMatrix<f64>,
    cfg: &FunctionalConfig,
) -> Result<DMatrix<f64>> {
    if v.shape() != u.shape() {
        return Err(Error::DimensionMismatch {
            expected: u.ncols(),
            got: v.ncols(),
        });
    }
    Ok(HessianOperator::new(g, u, cfg)?.apply(v))
}
