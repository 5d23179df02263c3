#![allow(dead_code)]

use nalgebra::DMatrix;
use pgrass::{CutKind, SparseGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A connected weighted graph: a random spanning tree plus random chords.
pub fn random_connected_graph(n: usize, chord_prob: f64, seed: u64) -> SparseGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        seen.insert((u, v));
        edges.push((u, v, rng.random_range(0.2..2.0)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !seen.contains(&(i, j)) && rng.random_bool(chord_prob) {
                edges.push((i, j, rng.random_range(0.2..2.0)));
            }
        }
    }
    SparseGraph::from_edges(n, &edges).unwrap()
}

pub fn random_matrix(n: usize, k: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_rotation(k: usize, seed: u64) -> DMatrix<f64> {
    random_matrix(k, k, seed).qr().q()
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Symmetric matrix whose Rayleigh quotient is the normalized functional at
/// p = 2: a Laplacian with edge weights `w (1/d_i + 1/d_j) / 2`.
pub fn normalized_energy_matrix(g: &SparseGraph) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(g.n(), g.n());
    for &(i, j, w) in g.edges() {
        let c = 0.5 * w * (1.0 / g.degree(i) + 1.0 / g.degree(j));
        m[(i, j)] -= c;
        m[(j, i)] -= c;
        m[(i, i)] += c;
        m[(j, j)] += c;
    }
    m
}

/// Same-partition test up to a relabelling.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len() && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

pub fn brute_cut(g: &SparseGraph, labels: &[usize], k: usize, kind: CutKind) -> Option<f64> {
    let n = g.n();
    let mut w = vec![vec![0.0; n]; n];
    for &(i, j, x) in g.edges() {
        w[i][j] = x;
        w[j][i] = x;
    }
    let mut total = 0.0;
    for c in 0..k {
        let (mut cut, mut size, mut vol) = (0.0, 0, 0.0);
        for i in 0..n {
            if labels[i] != c {
                continue;
            }
            size += 1;
            for j in 0..n {
                vol += w[i][j];
                if labels[j] != c {
                    cut += w[i][j];
                }
            }
        }
        if size == 0 {
            return None;
        }
        total += match kind {
            CutKind::RCut => cut / size as f64,
            CutKind::NCut => cut / vol,
        };
    }
    Some(total)
}

pub fn all_labelings(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..k.pow(n as u32)).map(move |mut code| {
        (0..n)
            .map(|_| {
                let l = code % k;
                code /= k;
                l
            })
            .collect()
    })
}

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(k - 1) {
        for pos in 0..=perm.len() {
            let mut p = perm.clone();
            p.insert(pos, k - 1);
            out.push(p);
        }
    }
    out
}

pub fn brute_accuracy(pred: &[usize], truth: &[i64]) -> f64 {
    let top_truth = truth.iter().map(|&t| t as usize).max().unwrap();
    let k = 1 + top_truth.max(*pred.iter().max().unwrap());
    permutations(k)
        .iter()
        .map(|perm| pred.iter().zip(truth).filter(|(&p, &t)| perm[p] == t as usize).count())
        .max()
        .unwrap() as f64
        / pred.len() as f64
}

pub fn brute_nmi(pred: &[usize], truth: &[i64]) -> f64 {
    let n = pred.len() as f64;
    let mut table = std::collections::BTreeMap::new();
    let mut rows = std::collections::BTreeMap::new();
    let mut cols = std::collections::BTreeMap::new();
    for (&p, &t) in pred.iter().zip(truth) {
        *table.entry((p, t)).or_insert(0.0) += 1.0;
        *rows.entry(p).or_insert(0.0) += 1.0;
        *cols.entry(t).or_insert(0.0) += 1.0;
    }
    let entropy = |counts: Vec<f64>| -> f64 { counts.iter().map(|&c| -(c / n) * (c / n).ln()).sum() };
    let (hp, ht) = (
        entropy(rows.values().copied().collect()),
        entropy(cols.values().copied().collect()),
    );
    if hp == 0.0 && ht == 0.0 {
        return 1.0;
    }
    if hp == 0.0 || ht == 0.0 {
        return 0.0;
    }
    let mi: f64 = table
        .iter()
        .map(|(&(p, t), &c)| (c / n) * (c * n / (rows[&p] * cols[&t])).ln())
        .sum();
    mi / (hp * ht).sqrt()
}

pub fn planted_labels(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    labels
}

pub fn normalized_indicator(labels: &[usize], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(labels.len(), k);
    for (r, &c) in labels.iter().enumerate() {
        m[(r, c)] = 1.0;
    }
    m
}
