//! Turning an embedding into hard labels.
//!
//! Two routes are offered: Lloyd's k-means on the rows (restarted from
//! orthogonal and random seeds, the caller picks a winner by cut value),
//! and the rotation discretization which alternates between an orthogonal
//! Procrustes fit and non-maximum suppression to find the indicator matrix
//! closest to a rotation of the row-normalized embedding.

use std::collections::HashSet;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KMEANS_MAX_ITER: usize = 300;
pub const ROTATION_MAX_ITER: usize = 100;
pub const ROTATION_TOL: f64 = 1e-10;

/// Hard labels in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::BadArgs("k must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::BadArgs(format!("label {bad} outside 0..{k}")));
        }
        Ok(ClusterAssignment { labels, k })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn first_empty_cluster(&self) -> Option<usize> {
        self.sizes().iter().position(|&s| s == 0)
    }

    /// Relabels clusters in order of first appearance, so equal partitions
    /// compare equal regardless of label permutation.
    pub fn canonical(&self) -> ClusterAssignment {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        ClusterAssignment { labels, k: self.k }
    }
}

fn row_key(u: &DMatrix<f64>, r: usize) -> Vec<u64> {
    u.row(r).iter().map(|x| (x + 0.0).to_bits()).collect()
}

fn distinct_rows(u: &DMatrix<f64>) -> usize {
    (0..u.nrows()).map(|r| row_key(u, r)).collect::<HashSet<_>>().len()
}

fn row_sq_dist(u: &DMatrix<f64>, r: usize, center: &[f64]) -> f64 {
    u.row(r).iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Greedy near-orthogonal row selection: starting from `first`, repeatedly
/// add the row whose largest absolute cosine similarity to the rows picked
/// so far is smallest (ties to the lower index). Zero rows count as
/// maximally similar.
pub fn orthogonal_rows(u: &DMatrix<f64>, k: usize, first: usize) -> Vec<usize> {
    let n = u.nrows();
    let norms: Vec<f64> = (0..n).map(|r| u.row(r).norm()).collect();
    let cosine = |a: usize, b: usize| -> f64 {
        if norms[a] == 0.0 || norms[b] == 0.0 {
            1.0
        } else {
            (u.row(a).dot(&u.row(b)) / (norms[a] * norms[b])).abs()
        }
    };
    let mut chosen = vec![first];
    let mut worst: Vec<f64> = (0..n).map(|r| cosine(r, first)).collect();
    while chosen.len() < k {
        let mut best = None;
        for r in 0..n {
            if chosen.contains(&r) {
                continue;
            }
            if best.is_none_or(|(_, s)| worst[r] < s) {
                best = Some((r, worst[r]));
            }
        }
        let Some((next, _)) = best else { break };
        chosen.push(next);
        for r in 0..n {
            worst[r] = worst[r].max(cosine(r, next));
        }
    }
    chosen
}

/// Lloyd iterations from the given centres. A cluster that empties is
/// refilled from the worst-fitting point; `None` if that is impossible.
fn lloyd(u: &DMatrix<f64>, mut centers: Vec<Vec<f64>>) -> Option<ClusterAssignment> {
    let (n, dim, k) = (u.nrows(), u.ncols(), centers.len());
    let mut labels = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for r in 0..n {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = row_sq_dist(u, r, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if labels[r] != best.0 {
                labels[r] = best.0;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&l| counts[l] += 1);
        if counts.contains(&0) {
            if !refill_empty(u, &centers, &mut labels, &mut counts) {
                return None;
            }
            changed = true;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        for r in 0..n {
            for (s, x) in sums[labels[r]].iter_mut().zip(u.row(r).iter()) {
                *s += x;
            }
        }
        for ((center, sum), count) in centers.iter_mut().zip(sums).zip(&counts) {
            *center = sum.into_iter().map(|s| s / *count as f64).collect();
        }
        if !changed {
            break;
        }
    }
    Some(ClusterAssignment { labels, k })
}

/// Moves the point farthest from its centre (among clusters that can spare
/// one) into each empty cluster. Fails when no such point exists.
fn refill_empty(u: &DMatrix<f64>, centers: &[Vec<f64>], labels: &mut [usize], counts: &mut [usize]) -> bool {
    let mut moved = vec![false; labels.len()];
    for empty in 0..counts.len() {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for r in 0..labels.len() {
            let from = labels[r];
            if moved[r] || counts[from] < 2 {
                continue;
            }
            let d = row_sq_dist(u, r, &centers[from]);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((r, d));
            }
        }
        let Some((r, _)) = best else { return false };
        counts[labels[r]] -= 1;
        labels[r] = empty;
        counts[empty] = 1;
        moved[r] = true;
    }
    true
}

fn row_vec(u: &DMatrix<f64>, r: usize) -> Vec<f64> {
    u.row(r).iter().copied().collect()
}

/// k-means++ seeding: a uniformly random first row, then rows drawn with
/// probability proportional to their squared distance from the nearest
/// row already chosen. Rows equal to a chosen one have zero weight, so the
/// picks are distinct.
fn plus_plus_rows(u: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = u.nrows();
    let mut picked = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = (0..n).map(|r| row_sq_dist(u, r, &row_vec(u, picked[0]))).collect();
    while picked.len() < k {
        let total: f64 = nearest.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut next = None;
        for (r, &w) in nearest.iter().enumerate() {
            if w > 0.0 {
                next = Some(r);
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        let Some(next) = next else { break };
        picked.push(next);
        let center = row_vec(u, next);
        for (r, d) in nearest.iter_mut().enumerate() {
            *d = d.min(row_sq_dist(u, r, &center));
        }
    }
    picked
}

/// Runs `n_orth` orthogonally seeded and `n_rand` k-means++ seeded Lloyd
/// restarts on the rows of `u` and returns every candidate that ends with
/// `k` non-empty clusters, in restart order. Restart `i` draws from its own stream of the
/// seeded generator, so the result does not depend on scheduling.
pub fn kmeans_discretize(
    u: &DMatrix<f64>,
    k: usize,
    n_orth: usize,
    n_rand: usize,
    seed: u64,
) -> Result<Vec<ClusterAssignment>> {
    if k == 0 {
        return Err(Error::BadArgs("k must be positive".into()));
    }
    let distinct = distinct_rows(u);
    if distinct < k {
        return Err(Error::DegenerateRows { distinct, k });
    }
    let candidates: Vec<Option<ClusterAssignment>> = (0..n_orth + n_rand)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            let seeds = if restart < n_orth {
                let first = rng.random_range(0..u.nrows());
                orthogonal_rows(u, k, first)
            } else {
                plus_plus_rows(u, k, &mut rng)
            };
            let centers = seeds.iter().map(|&r| row_vec(u, r)).collect();
            lloyd(u, centers)
        })
        .collect();
    let survivors: Vec<ClusterAssignment> = candidates.into_iter().flatten().collect();
    if survivors.is_empty() {
        return Err(Error::AllCandidatesEmpty(k));
    }
    Ok(survivors)
}

#[derive(Debug, Clone)]
pub struct RotationResult {
    pub assignment: ClusterAssignment,
    pub rotation: DMatrix<f64>,
    /// `‖U_norm P − J‖_F` after every indicator update.
    pub objective: Vec<f64>,
}

/// Nearest orthogonal matrix (polar factor) via the SVD.
fn polar(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let (Some(left), Some(right_t)) = (svd.u, svd.v_t) else {
        unreachable!("requested both singular factors")
    };
    left * right_t
}

fn non_max_suppression(y: &DMatrix<f64>) -> Vec<usize> {
    (0..y.nrows())
        .map(|r| {
            let row = y.row(r);
            let mut best = 0;
            for c in 1..row.len() {
                if row[c] > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn indicator(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(labels.len(), k);
    for (r, &c) in labels.iter().enumerate() {
        j[(r, c)] = 1.0;
    }
    j
}

/// Rotation discretization of a `n × k` embedding. Deterministic; the first
/// seed row for the initial rotation is row 0.
pub fn rotation_discretize(u: &DMatrix<f64>, k: usize) -> Result<RotationResult> {
    if u.ncols() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: u.ncols(),
        });
    }
    if k == 0 || u.nrows() == 0 {
        return Err(Error::BadArgs("empty embedding".into()));
    }
    let mut normalized = u.clone();
    for r in 0..u.nrows() {
        let norm = u.row(r).norm();
        if norm == 0.0 {
            return Err(Error::ZeroRow(r));
        }
        normalized.row_mut(r).iter_mut().for_each(|x| *x /= norm);
    }

    let seeds = orthogonal_rows(&normalized, k, 0);
    let mut rotation = DMatrix::zeros(k, k);
    for (c, &r) in seeds.iter().enumerate() {
        rotation.set_column(c, &normalized.row(r).transpose());
    }
    let mut rotation = polar(&rotation);

    let mut objective = Vec::new();
    let mut labels;
    loop {
        let projected = &normalized * &rotation;
        labels = non_max_suppression(&projected);
        let j = indicator(&labels, k);
        let value = (&projected - &j).norm();
        let done = objective
            .last()
            .is_some_and(|&prev: &f64| (prev - value).abs() < ROTATION_TOL);
        objective.push(value);
        if done || objective.len() >= ROTATION_MAX_ITER {
            break;
        }
        rotation = polar(&(normalized.transpose() * j));
    }

    let assignment = ClusterAssignment { labels, k };
    if let Some(c) = assignment.first_empty_cluster() {
        return Err(Error::EmptyCluster(c));
    }
    Ok(RotationResult {
        assignment,
        rotation,
        objective,
    })
}
