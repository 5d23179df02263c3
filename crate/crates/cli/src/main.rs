//! `pgrass` command-line tool: synthetic data, clustering, evaluation and
//! embedding export.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pgrass::continuation::Discretizer;
use pgrass::ErrorKind;

use crate::config::RunArgs;

/// A bad argument or configuration detected by the front end itself.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Debug, Parser)]
#[command(
    name = "pgrass",
    version,
    about = "Multiway p-spectral clustering on the Grassmann manifold"
)]
struct Cli {
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, env = "PGRASS_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset
    Generate {
        #[command(subcommand)]
        dataset: Dataset,
        /// Existing directory for the output files
        #[arg(long, global = true, default_value = ".")]
        out: PathBuf,
    },
    /// Run the p-continuation and report the best partition
    Cluster {
        #[command(flatten)]
        run: RunArgs,
        /// kmeans or rotation (rotation requires ncut)
        #[arg(long)]
        discretize: Option<Discretizer>,
        /// JSON report path (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Labels of the best level, one per line
        #[arg(long)]
        labels_out: Option<PathBuf>,
    },
    /// Score a labelling against ground truth
    Eval {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Also report RCut and NCut on this graph
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Export the p = 2 and best-level embeddings with an f_p trace
    Embed {
        #[command(flatten)]
        run: RunArgs,
        /// Existing directory for the output files
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Subcommand)]
pub enum Dataset {
    /// Two noisy half circles in a high-dimensional space
    TwoMoons {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.02)]
        noise_var: f64,
        #[arg(long, default_value_t = 100)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Gaussian blobs on a square grid
    GaussianGrid {
        #[arg(long, default_value_t = 8)]
        k: usize,
        #[arg(long, default_value_t = pgrass::synth::GRID_PER_CLUSTER)]
        per_cluster: usize,
        #[arg(long, default_value_t = pgrass::synth::GRID_VARIANCE)]
        variance: f64,
        #[arg(long, default_value_t = pgrass::synth::GRID_SPACING)]
        spacing: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Planted-partition random graph
    Blocks {
        /// Block sizes, e.g. 100,100,80
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long)]
        p_in: f64,
        #[arg(long)]
        p_out: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<pgrass::Error>() {
        return match e.kind() {
            ErrorKind::Validation => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Io => 4,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return 4;
    }
    2
}

/// The error chain joined by `: `, skipping causes a message already quotes.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate { dataset, out } => commands::generate(&dataset, &out),
        Command::Cluster {
            run,
            discretize,
            out,
            labels_out,
        } => commands::cluster(&run, discretize, out, labels_out),
        Command::Eval { labels, truth, graph } => commands::eval(&labels, &truth, graph.as_deref()),
        Command::Embed { run, out_dir } => commands::embed(&run, out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| dispatch(cli)),
        Err(e) => Err(anyhow::Error::new(Usage(format!("thread pool: {e}")))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
