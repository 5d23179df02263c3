//! Self-tuning k-nearest-neighbour similarity graphs.
//!
//! Connectivity is the symmetrized kNN relation. Each point's bandwidth
//! `σ_i` is its distance to the `nn`-th neighbour, and an edge carries
//! `max(s_i(j), s_j(i))` with `s_i(j) = exp(−4 ‖x_i − x_j‖² / σ_i²)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;

/// Bandwidth floor guarding coincident points.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Row-major `n × d` matrix of finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointCloud {
    pub fn new(coords: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if coords.len() != n * d {
            return Err(Error::InvalidPoints(format!(
                "{} coordinates for {n} points of dimension {d}",
                coords.len()
            )));
        }
        if n < 2 || d == 0 {
            return Err(Error::InvalidPoints(format!(
                "need at least 2 points of positive dimension, got {n} × {d}"
            )));
        }
        if let Some(pos) = coords.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidPoints(format!(
                "non-finite coordinate in point {}",
                pos / d
            )));
        }
        Ok(PointCloud { coords, n, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.point(i)
            .iter()
            .zip(self.point(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// For every point, its `nn` nearest neighbours as `(index, squared
/// distance)`, ordered by distance then index.
fn nearest(pc: &PointCloud, nn: usize) -> Result<Vec<Vec<(usize, f64)>>> {
    if nn == 0 || nn >= pc.n() {
        return Err(Error::NNOutOfRange { nn, max: pc.n() - 1 });
    }
    Ok((0..pc.n())
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<(usize, f64)> = (0..pc.n()).filter(|&j| j != i).map(|j| (j, pc.sq_dist(i, j))).collect();
            row.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            row.truncate(nn);
            row
        })
        .collect())
}

fn symmetrize(lists: &[Vec<(usize, f64)>]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(j, _)| (i.min(j), i.max(j))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Symmetrized kNN relation as sorted `(i, j)` pairs with `i < j`.
pub fn knn_connectivity(pc: &PointCloud, nn: usize) -> Result<Vec<(usize, usize)>> {
    Ok(symmetrize(&nearest(pc, nn)?))
}

/// Per-point bandwidths: distance to the `nn`-th nearest neighbour.
pub fn local_scales(pc: &PointCloud, nn: usize) -> Result<Vec<f64>> {
    Ok(nearest(pc, nn)?.iter().map(|row| row[nn - 1].1.sqrt()).collect())
}

pub fn self_tuning_graph(pc: &PointCloud, nn: usize) -> Result<SparseGraph> {
    let lists = nearest(pc, nn)?;
    let sigma: Vec<f64> = lists.iter().map(|row| row[nn - 1].1.sqrt().max(SIGMA_FLOOR)).collect();
    let edges: Vec<(usize, usize, f64)> = symmetrize(&lists)
        .into_iter()
        .map(|(i, j)| {
            let d2 = pc.sq_dist(i, j);
            let s_ij = (-4.0 * d2 / (sigma[i] * sigma[i])).exp();
            let s_ji = (-4.0 * d2 / (sigma[j] * sigma[j])).exp();
            (i, j, s_ij.max(s_ji))
        })
        .collect();
    SparseGraph::from_edges(pc.n(), &edges)
}
