//! Run settings resolved from flags, an optional `key = value` file and
//! built-in defaults, in that order of precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::Args;
use pgrass::continuation::{Discretizer, RunConfig, Schedule, ScheduleMode};
use pgrass::grassmann::SolverConfig;
use pgrass::CutKind;
use serde::Serialize;

use crate::Usage;

/// Keys a config file may set. They mirror the long flag names.
const KNOWN_KEYS: &[&str] = &[
    "graph",
    "points",
    "label-column",
    "truth",
    "nn",
    "k",
    "objective",
    "discretize",
    "seed",
    "schedule",
    "p-levels",
    "kappa",
    "theta",
    "tol",
    "p-final",
    "max-newton",
    "grad-tol",
    "tcg-max",
    "hessian-floor",
    "kmeans-orthogonal",
    "kmeans-random",
    "out",
    "labels-out",
    "trace",
    "out-dir",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    path: PathBuf,
    values: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    /// The file named by `--config`, or an empty one.
    pub fn for_args(args: &RunArgs) -> Result<Self> {
        match &args.config {
            Some(path) => Self::load(path),
            None => Ok(Self::default()),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Usage(format!("{}:{}: {msg}", path.display(), idx + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(bad(format!("unknown key `{key}`")).into());
            }
            if values
                .insert(key.clone(), (idx + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(bad(format!("duplicate key `{key}`")).into());
            }
        }
        Ok(ConfigFile {
            path: path.to_path_buf(),
            values,
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse().map(Some).map_err(|e| {
                Usage(format!(
                    "{}:{line}: bad value `{raw}` for `{key}`: {e}",
                    self.path.display()
                ))
                .into()
            }),
        }
    }
}

/// Flag value, else config file value, else `None`.
pub fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

/// A comma-separated list of p-levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Levels(pub Vec<f64>);

impl FromStr for Levels {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad p-level `{x}`")))
            .collect::<std::result::Result<_, _>>()
            .map(Levels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Preset,
    Formula,
}

impl FromStr for ScheduleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        <Self as clap::ValueEnum>::from_str(s, true)
    }
}

/// Flags shared by `cluster` and `embed`. Every field is optional so that
/// an absent flag can fall back to the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// `key = value` file with defaults for any of these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Graph file (Matrix Market `.mtx`, otherwise a `i j w` edge list)
    #[arg(long, conflicts_with = "points")]
    pub graph: Option<PathBuf>,
    /// Points CSV; the graph is built from its `--nn` nearest neighbours
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Treat the last CSV column as the ground-truth label
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub label_column: Option<bool>,
    /// Ground-truth labels, one per line, for ACC/NMI
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub nn: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// rcut or ncut
    #[arg(long)]
    pub objective: Option<CutKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub schedule: Option<ScheduleKind>,
    /// Explicit p-levels, e.g. 2,1.9,1.71
    #[arg(long)]
    pub p_levels: Option<Levels>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub p_final: Option<f64>,
    #[arg(long)]
    pub max_newton: Option<usize>,
    /// Relative gradient-norm reduction that ends a Newton solve
    #[arg(long)]
    pub grad_tol: Option<f64>,
    #[arg(long)]
    pub tcg_max: Option<usize>,
    #[arg(long)]
    pub hessian_floor: Option<f64>,
    #[arg(long)]
    pub kmeans_orthogonal: Option<usize>,
    #[arg(long)]
    pub kmeans_random: Option<usize>,
    /// Write the Newton iteration trace here as JSON lines
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Input {
    #[serde(rename = "graph")]
    Graph(PathBuf),
    #[serde(rename = "points")]
    Points {
        path: PathBuf,
        nn: usize,
        label_column: bool,
    },
}

/// The fully resolved settings; echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Effective {
    pub input: Input,
    pub truth: Option<PathBuf>,
    pub k: usize,
    pub objective: CutKind,
    pub discretize: Discretizer,
    pub seed: u64,
    pub schedule: ScheduleKind,
    pub p_levels: Option<Vec<f64>>,
    pub kappa: f64,
    pub theta: f64,
    pub tol: f64,
    pub p_final: f64,
    pub max_newton: usize,
    pub grad_tol: f64,
    pub tcg_max: usize,
    pub hessian_floor: f64,
    pub kmeans_orthogonal: usize,
    pub kmeans_random: usize,
    #[serde(skip)]
    pub trace: Option<PathBuf>,
}

impl Effective {
    pub fn resolve(args: &RunArgs, discretize: Option<Discretizer>, file: &ConfigFile) -> Result<Self> {
        // An input flag of either kind overrides both input keys of the file.
        let from_flags = match (&args.graph, &args.points) {
            (Some(g), _) => Some((Some(g.clone()), None)),
            (None, Some(p)) => Some((None, Some(p.clone()))),
            (None, None) => None,
        };
        let (graph, points) = match from_flags {
            Some(pair) => pair,
            None => (file.get::<PathBuf>("graph")?, file.get::<PathBuf>("points")?),
        };
        let input = match (graph, points) {
            (Some(g), None) => Input::Graph(g),
            (None, Some(p)) => Input::Points {
                path: p,
                nn: pick(args.nn, file, "nn")?.unwrap_or(10),
                label_column: pick(args.label_column, file, "label-column")?.unwrap_or(false),
            },
            (Some(_), Some(_)) => return Err(Usage("config sets both `graph` and `points`".into()).into()),
            (None, None) => return Err(Usage("one of --graph or --points is required".into()).into()),
        };
        let k = pick(args.k, file, "k")?.ok_or_else(|| Usage("--k is required".into()))?;
        let defaults = Schedule::default();
        let solver = SolverConfig::default();
        let p_levels: Option<Levels> = pick(args.p_levels.clone(), file, "p-levels")?;
        let schedule = match pick(args.schedule, file, "schedule")? {
            Some(ScheduleKind::Formula) if p_levels.is_some() => {
                return Err(Usage("--p-levels cannot be combined with the formula schedule".into()).into())
            }
            Some(kind) => kind,
            None => ScheduleKind::Preset,
        };
        Ok(Effective {
            input,
            truth: pick(args.truth.clone(), file, "truth")?,
            k,
            objective: pick(args.objective, file, "objective")?.unwrap_or(CutKind::NCut),
            discretize: match discretize {
                Some(d) => d,
                None => file.get("discretize")?.unwrap_or(Discretizer::Kmeans),
            },
            seed: pick(args.seed, file, "seed")?.unwrap_or(0),
            schedule,
            p_levels: p_levels.map(|l| l.0),
            kappa: pick(args.kappa, file, "kappa")?.unwrap_or(defaults.kappa),
            theta: pick(args.theta, file, "theta")?.unwrap_or(defaults.theta),
            tol: pick(args.tol, file, "tol")?.unwrap_or(defaults.tol),
            p_final: pick(args.p_final, file, "p-final")?.unwrap_or(defaults.p_final),
            max_newton: pick(args.max_newton, file, "max-newton")?.unwrap_or(solver.max_newton),
            grad_tol: pick(args.grad_tol, file, "grad-tol")?.unwrap_or(solver.grad_rel_tol),
            tcg_max: pick(args.tcg_max, file, "tcg-max")?.unwrap_or(solver.tcg_max),
            hessian_floor: pick(args.hessian_floor, file, "hessian-floor")?
                .unwrap_or(pgrass::FunctionalConfig::DEFAULT_HESSIAN_FLOOR),
            kmeans_orthogonal: pick(args.kmeans_orthogonal, file, "kmeans-orthogonal")?.unwrap_or(10),
            kmeans_random: pick(args.kmeans_random, file, "kmeans-random")?.unwrap_or(20),
            trace: pick(args.trace.clone(), file, "trace")?,
        })
    }

    pub fn run_config(&self) -> RunConfig {
        let mode = match (&self.p_levels, self.schedule) {
            (Some(levels), _) => ScheduleMode::Preset(levels.clone()),
            (None, ScheduleKind::Formula) => ScheduleMode::Formula,
            (None, ScheduleKind::Preset) => Schedule::default().mode,
        };
        let mut cfg = RunConfig::new(self.k, self.objective);
        cfg.discretizer = self.discretize;
        cfg.schedule = Schedule {
            kappa: self.kappa,
            theta: self.theta,
            tol: self.tol,
            p_final: self.p_final,
            mode,
        };
        cfg.solver = SolverConfig {
            max_newton: self.max_newton,
            grad_rel_tol: self.grad_tol,
            tcg_max: self.tcg_max,
            seed: self.seed,
            ..SolverConfig::default()
        };
        cfg.hessian_floor = self.hessian_floor;
        cfg.kmeans_orthogonal = self.kmeans_orthogonal;
        cfg.kmeans_random = self.kmeans_random;
        cfg
    }
}
