//! Direct multiway p-spectral clustering.
//!
//! A graph's p-Laplacian Rayleigh-quotient sum is minimized over the
//! Grassmann manifold of `k`-dimensional subspaces with a Riemannian Newton
//! method, starting at `p = 2` and warm-starting ever smaller `p`. Each
//! level's embedding is discretized into `k` clusters and the level with
//! the smallest ratio or normalized cut wins.
//!
//! ```no_run
//! use pgrass::{continuation, synth, similarity};
//!
//! let data = synth::two_moons(600, 0.02, 100, 1).unwrap();
//! let graph = similarity::self_tuning_graph(&data.points, 10).unwrap();
//! let cfg = continuation::RunConfig::new(2, pgrass::CutKind::NCut);
//! let out = continuation::run(&graph, &cfg, Some(&data.labels)).unwrap();
//! println!("best cut {}", out.trace.best().cut);
//! ```

pub mod continuation;
pub mod discretize;
pub mod error;
pub mod functional;
pub mod graph;
pub mod grassmann;
pub mod io;
pub mod metrics;
pub mod similarity;
pub mod synth;

pub use discretize::ClusterAssignment;
pub use error::{Error, ErrorKind, Result};
pub use functional::{Embedding, FunctionalConfig};
pub use graph::{PValue, SparseGraph};
pub use metrics::CutKind;
