//! Balanced cut objectives, sweep cuts and label-agreement scores.

use std::collections::BTreeMap;

use pathfinding::prelude::{kuhn_munkres, Matrix};
use serde::{Deserialize, Serialize};

use crate::discretize::ClusterAssignment;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CutKind {
    /// `Σ_l cut(C_l, C̄_l) / |C_l|`
    #[serde(rename = "rcut")]
    RCut,
    /// `Σ_l cut(C_l, C̄_l) / vol(C_l)`
    #[serde(rename = "ncut")]
    NCut,
}

impl CutKind {
    pub fn name(self) -> &'static str {
        match self {
            CutKind::RCut => "rcut",
            CutKind::NCut => "ncut",
        }
    }

    /// The functional whose minimizers relax this cut.
    pub fn normalized(self) -> bool {
        matches!(self, CutKind::NCut)
    }
}

impl std::str::FromStr for CutKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rcut" => Ok(CutKind::RCut),
            "ncut" => Ok(CutKind::NCut),
            other => Err(Error::BadArgs(format!("unknown cut `{other}`"))),
        }
    }
}

/// Balanced cut of a labelling. Every cluster in `0..k` must be non-empty
/// (and, for NCut, have positive volume).
pub fn cut_value(g: &SparseGraph, a: &ClusterAssignment, kind: CutKind) -> Result<f64> {
    let labels = a.labels();
    if labels.len() != g.n() {
        return Err(Error::LengthMismatch(labels.len(), g.n()));
    }
    let k = a.k();
    let mut crossing = vec![0.0; k];
    let mut size = vec![0usize; k];
    let mut volume = vec![0.0; k];
    for (v, &c) in labels.iter().enumerate() {
        size[c] += 1;
        volume[c] += g.degree(v);
    }
    for &(i, j, w) in g.edges() {
        let (ci, cj) = (labels[i], labels[j]);
        if ci != cj {
            crossing[ci] += w;
            crossing[cj] += w;
        }
    }
    let mut total = 0.0;
    for c in 0..k {
        if size[c] == 0 {
            return Err(Error::EmptyCluster(c));
        }
        let denom = match kind {
            CutKind::RCut => size[c] as f64,
            CutKind::NCut => {
                if volume[c] <= 0.0 {
                    return Err(Error::ZeroVolume(c));
                }
                volume[c]
            }
        };
        total += crossing[c] / denom;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCut {
    /// Number of nodes (in sorted order) placed on the first side.
    pub threshold_index: usize,
    pub bipartition: ClusterAssignment,
    pub cut: f64,
}

/// Best of the `n − 1` threshold bipartitions along `v`. Nodes are sorted by
/// value then index; ties between thresholds go to the smallest prefix.
/// Prefixes that would separate equal values are skipped; if `v` is
/// constant the first prefix is returned.
pub fn sweep_cut(g: &SparseGraph, v: &[f64], kind: CutKind) -> Result<SweepCut> {
    let n = g.n();
    if v.len() != n {
        return Err(Error::LengthMismatch(v.len(), n));
    }
    if n < 2 {
        return Err(Error::BadArgs("sweep cut needs at least two nodes".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));

    let total_volume: f64 = g.degrees().iter().sum();
    let mut inside = vec![false; n];
    let mut cut = 0.0;
    let mut volume = 0.0;
    let mut best: Option<(usize, f64)> = None;
    for (pos, &x) in order[..n - 1].iter().enumerate() {
        let to_inside: f64 = g.neighbors(x).filter(|&(u, _)| inside[u]).map(|(_, w)| w).sum();
        cut += g.degree(x) - 2.0 * to_inside;
        inside[x] = true;
        volume += g.degree(x);
        let size = (pos + 1) as f64;
        let value = match kind {
            CutKind::RCut => cut / size + cut / (n as f64 - size),
            CutKind::NCut => {
                let rest = total_volume - volume;
                if volume <= 0.0 || rest <= 0.0 {
                    f64::INFINITY
                } else {
                    cut / volume + cut / rest
                }
            }
        };
        // Splitting between equal values is not a threshold.
        let genuine = v[x] < v[order[pos + 1]];
        if genuine && best.is_none_or(|(_, b)| value < b) {
            best = Some((pos + 1, value));
        }
    }
    let threshold_index = best.map_or(1, |(t, _)| t);
    let mut labels = vec![1usize; n];
    for &x in &order[..threshold_index] {
        labels[x] = 0;
    }
    let bipartition = ClusterAssignment::new(labels, 2)?;
    let cut = match cut_value(g, &bipartition, kind) {
        Ok(c) => c,
        Err(Error::ZeroVolume(_)) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    Ok(SweepCut {
        threshold_index,
        bipartition,
        cut,
    })
}

/// Relabels arbitrary integers as `0..m` in order of first appearance.
fn compact<T: Ord + Copy>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = ids.len();
        out.push(*ids.entry(l).or_insert(next));
    }
    (out, ids.len())
}

fn contingency(pred: &[usize], truth: &[i64]) -> Result<(Vec<Vec<usize>>, usize, usize)> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    let (p, kp) = compact(pred);
    let (t, kt) = compact(truth);
    let mut table = vec![vec![0usize; kt]; kp];
    for (a, b) in p.iter().zip(&t) {
        table[*a][*b] += 1;
    }
    Ok((table, kp, kt))
}

/// Fraction of nodes matched under the best one-to-one map between
/// predicted and true clusters (confusion matrix padded to square).
pub fn accuracy(pred: &[usize], truth: &[i64]) -> Result<f64> {
    let (table, kp, kt) = contingency(pred, truth)?;
    let n = pred.len();
    if n == 0 {
        return Ok(1.0);
    }
    let size = kp.max(kt);
    let weights = Matrix::from_fn(
        size,
        size,
        |(r, c)| {
            if r < kp && c < kt {
                table[r][c] as i64
            } else {
                0
            }
        },
    );
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / n as f64)
}

/// Mutual information normalized by the geometric mean of the entropies.
pub fn nmi(pred: &[usize], truth: &[i64]) -> Result<f64> {
    let (table, kp, kt) = contingency(pred, truth)?;
    let n = pred.len() as f64;
    let row: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64).collect();
    let col: Vec<f64> = (0..kt)
        .map(|c| table.iter().map(|r| r[c]).sum::<usize>() as f64)
        .collect();
    let entropy = |counts: &[f64]| -> f64 {
        counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| -(c / n) * (c / n).ln())
            .sum()
    };
    let (hp, ht) = (entropy(&row), entropy(&col));
    if hp == 0.0 || ht == 0.0 {
        return Ok(if kp <= 1 && kt <= 1 { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for r in 0..kp {
        for c in 0..kt {
            let nij = table[r][c] as f64;
            if nij > 0.0 {
                mi += (nij / n) * (n * nij / (row[r] * col[c])).ln();
            }
        }
    }
    Ok((mi / (hp * ht).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assign(labels: &[usize], k: usize) -> ClusterAssignment {
        ClusterAssignment::new(labels.to_vec(), k).unwrap()
    }

    fn diamond() -> SparseGraph {
        SparseGraph::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)]).unwrap()
    }

    #[test]
    fn diamond_cuts() {
        let a = assign(&[0, 0, 1, 1], 2);
        assert_eq!(cut_value(&diamond(), &a, CutKind::RCut).unwrap(), 3.0);
        assert!((cut_value(&diamond(), &a, CutKind::NCut).unwrap() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn component_partition_is_free() {
        let g = SparseGraph::from_edges(4, &[(0, 1, 1.0), (2, 3, 2.0)]).unwrap();
        let a = assign(&[1, 1, 0, 0], 2);
        assert_eq!(cut_value(&g, &a, CutKind::RCut).unwrap(), 0.0);
        assert_eq!(cut_value(&g, &a, CutKind::NCut).unwrap(), 0.0);
        assert_eq!(cut_value(&g, &assign(&[0; 4], 1), CutKind::NCut).unwrap(), 0.0);
    }

    #[test]
    fn cut_errors() {
        let g = SparseGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(
            cut_value(&g, &assign(&[0, 0, 0], 2), CutKind::RCut),
            Err(Error::EmptyCluster(1))
        ));
        assert!(matches!(
            cut_value(&g, &assign(&[0, 0, 1], 2), CutKind::NCut),
            Err(Error::ZeroVolume(1))
        ));
    }

    #[test]
    fn sweep_on_path() {
        let g = SparseGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let s = sweep_cut(&g, &[0.0, 1.0, 2.0, 3.0], CutKind::RCut).unwrap();
        assert_eq!(s.threshold_index, 2);
        assert_eq!(s.bipartition.labels(), &[0, 0, 1, 1]);
        assert_eq!(s.cut, 1.0);

        let flat = sweep_cut(&g, &[5.0; 4], CutKind::RCut).unwrap();
        assert_eq!(flat.bipartition.labels(), &[0, 1, 1, 1]);
        assert_eq!(flat.threshold_index, 1);
    }

    #[test]
    fn sweep_finds_components() {
        let g = SparseGraph::from_edges(5, &[(0, 3, 1.0), (1, 2, 1.0), (2, 4, 1.0)]).unwrap();
        let s = sweep_cut(&g, &[1.0, 0.0, 0.0, 1.0, 0.0], CutKind::NCut).unwrap();
        assert_eq!(s.cut, 0.0);
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 1, 2], &[0, 1, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 1, 0, 0], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.5);
        assert_eq!(accuracy(&[0, 1, 2, 3], &[7, 7, 7, 7]).unwrap(), 0.25);
        assert!(matches!(accuracy(&[0], &[0, 1]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[5, 5, 3, 3]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 0, 0], &[4, 4, 4]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap(), 0.0);
    }
}
