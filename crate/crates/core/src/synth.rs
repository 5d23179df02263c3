//! Seeded synthetic benchmarks: noisy high-dimensional two moons, Gaussian
//! blobs on a square grid, and planted block graphs.
//!
//! All generators draw from a ChaCha8 stream seeded from the `seed`
//! argument, so their output is a pure function of the arguments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::similarity::PointCloud;

/// Default distance between neighbouring grid means.
pub const GRID_SPACING: f64 = 1.5;
pub const GRID_VARIANCE: f64 = 0.055;
pub const GRID_PER_CLUSTER: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    pub points: PointCloud,
    pub labels: Vec<i64>,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(std_dev: f64) -> Normal<f64> {
    Normal::new(0.0, std_dev).expect("finite, non-negative standard deviation")
}

/// Two interleaved half circles of radius 1: the upper one centred at the
/// origin, the lower one centred at `(1, 0.5)` and reflected. The planar
/// coordinates occupy the first two of `dim` dimensions, then every
/// coordinate receives `N(0, noise_var)` noise.
pub fn two_moons(n: usize, noise_var: f64, dim: usize, seed: u64) -> Result<LabeledPoints> {
    if n < 4 || n % 2 != 0 {
        return Err(Error::BadArgs(format!("two moons needs an even n >= 4, got {n}")));
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::BadArgs(format!("noise variance {noise_var} must be >= 0")));
    }
    if dim < 2 {
        return Err(Error::BadArgs(format!("dimension {dim} must be >= 2")));
    }
    let half = n / 2;
    let mut coords = vec![0.0; n * dim];
    let mut labels = Vec::with_capacity(n);
    for moon in 0..2 {
        for s in 0..half {
            let t = std::f64::consts::PI * s as f64 / (half - 1) as f64;
            let (x, y) = if moon == 0 {
                (t.cos(), t.sin())
            } else {
                (1.0 - t.cos(), 0.5 - t.sin())
            };
            let row = moon * half + s;
            coords[row * dim] = x;
            coords[row * dim + 1] = y;
            labels.push(moon as i64);
        }
    }
    if noise_var > 0.0 {
        let mut rng = rng(seed);
        let noise = gaussian(noise_var.sqrt());
        for c in coords.iter_mut() {
            *c += noise.sample(&mut rng);
        }
    }
    Ok(LabeledPoints {
        points: PointCloud::new(coords, n, dim)?,
        labels,
    })
}

/// `k` isotropic 2-D Gaussian blobs whose means fill a `⌈√k⌉ × ⌈√k⌉`
/// grid row by row.
pub fn gaussian_grid(k: usize, per_cluster: usize, var: f64, spacing: f64, seed: u64) -> Result<LabeledPoints> {
    if k == 0 || per_cluster == 0 {
        return Err(Error::BadArgs("k and per_cluster must be positive".into()));
    }
    if k * per_cluster < 2 {
        return Err(Error::BadArgs("need at least two points".into()));
    }
    if !(var >= 0.0 && var.is_finite() && spacing.is_finite()) {
        return Err(Error::BadArgs(
            "variance and spacing must be finite, variance >= 0".into(),
        ));
    }
    let side = (k as f64).sqrt().ceil() as usize;
    let mut rng = rng(seed);
    let noise = gaussian(var.sqrt());
    let mut coords = Vec::with_capacity(2 * k * per_cluster);
    let mut labels = Vec::with_capacity(k * per_cluster);
    for c in 0..k {
        let (row, col) = (c / side, c % side);
        let mean = [col as f64 * spacing, row as f64 * spacing];
        for _ in 0..per_cluster {
            coords.push(mean[0] + noise.sample(&mut rng));
            coords.push(mean[1] + noise.sample(&mut rng));
            labels.push(c as i64);
        }
    }
    Ok(LabeledPoints {
        points: PointCloud::new(coords, k * per_cluster, 2)?,
        labels,
    })
}

/// Unit-weight stochastic block model: each pair is joined with probability
/// `p_in` inside a block and `p_out` across blocks.
pub fn planted_blocks(sizes: &[usize], p_in: f64, p_out: f64, seed: u64) -> Result<(SparseGraph, Vec<i64>)> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::BadArgs("block sizes must be positive".into()));
    }
    if !(0.0 <= p_out && p_out < p_in && p_in <= 1.0) {
        return Err(Error::BadArgs(format!(
            "need 0 <= p_out < p_in <= 1, got p_in = {p_in}, p_out = {p_out}"
        )));
    }
    let labels: Vec<i64> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b as i64, s))
        .collect();
    let n = labels.len();
    let mut rng = rng(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let prob = if labels[i] == labels[j] { p_in } else { p_out };
            if rng.random_bool(prob) {
                edges.push((i, j, 1.0));
            }
        }
    }
    Ok((SparseGraph::from_edges(n, &edges)?, labels))
}
