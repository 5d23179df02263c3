use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pgrass::continuation::{run_traced, Discretizer, RunOutput};
use pgrass::functional::f_p;
use pgrass::io::{
    read_graph, read_labels, read_points_csv, write_labels, write_matrix_csv, write_matrix_market, write_points_csv,
};
use pgrass::metrics::{accuracy, cut_value, nmi};
use pgrass::similarity::self_tuning_graph;
use pgrass::synth::{gaussian_grid, planted_blocks, two_moons};
use pgrass::{ClusterAssignment, CutKind, FunctionalConfig, PValue, SparseGraph};
use serde::Serialize;

use crate::config::{pick, ConfigFile, Effective, Input, RunArgs};
use crate::{Dataset, Usage};

fn require_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        return Ok(());
    }
    let err = std::io::Error::new(std::io::ErrorKind::NotFound, "no such directory");
    Err(anyhow::Error::new(err).context(format!("output directory {}", dir.display())))
}

pub fn generate(dataset: &Dataset, out: &Path) -> Result<()> {
    require_dir(out)?;
    let labels_path = out.join("labels.txt");
    match *dataset {
        Dataset::TwoMoons {
            n,
            noise_var,
            dim,
            seed,
        } => {
            let data = two_moons(n, noise_var, dim, seed)?;
            write_points_csv(&out.join("points.csv"), &data.points)?;
            write_labels(&labels_path, &data.labels)?;
            println!("two-moons: {n} points in {dim} dimensions -> {}", out.display());
        }
        Dataset::GaussianGrid {
            k,
            per_cluster,
            variance,
            spacing,
            seed,
        } => {
            let data = gaussian_grid(k, per_cluster, variance, spacing, seed)?;
            write_points_csv(&out.join("points.csv"), &data.points)?;
            write_labels(&labels_path, &data.labels)?;
            println!(
                "gaussian-grid: {} points in {k} clusters -> {}",
                data.points.n(),
                out.display()
            );
        }
        Dataset::Blocks {
            ref sizes,
            p_in,
            p_out,
            seed,
        } => {
            let (g, labels) = planted_blocks(sizes, p_in, p_out, seed)?;
            write_matrix_market(&out.join("graph.mtx"), &g)?;
            write_labels(&labels_path, &labels)?;
            println!("blocks: {} nodes, {} edges -> {}", g.n(), g.num_edges(), out.display());
        }
    }
    Ok(())
}

fn load_input(eff: &Effective) -> Result<(SparseGraph, Option<Vec<i64>>)> {
    let (g, csv_labels) = match &eff.input {
        Input::Graph(path) => (read_graph(path)?, None),
        Input::Points { path, nn, label_column } => {
            let (points, labels) = read_points_csv(path, *label_column)?;
            (self_tuning_graph(&points, *nn)?, labels)
        }
    };
    let truth = match &eff.truth {
        Some(path) => Some(read_labels(path)?),
        None => csv_labels,
    };
    Ok((g, truth))
}

fn solve(g: &SparseGraph, eff: &Effective, truth: Option<&[i64]>) -> Result<RunOutput> {
    let cfg = eff.run_config();
    let Some(path) = &eff.trace else {
        return Ok(run_traced(g, &cfg, truth, &mut |_| {})?);
    };
    let file = File::create(path).with_context(|| format!("creating trace {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    let mut failure = None;
    let out = run_traced(g, &cfg, truth, &mut |rec| {
        if failure.is_none() {
            let line = serde_json::to_string(rec).expect("trace records serialize");
            failure = writeln!(writer, "{line}").err();
        }
    })?;
    if let Some(e) = failure {
        return Err(anyhow::Error::new(e).context(format!("writing trace {}", path.display())));
    }
    writer
        .flush()
        .with_context(|| format!("writing trace {}", path.display()))?;
    Ok(out)
}

/// `None` stands for an infinite cut, which JSON cannot represent.
fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Serialize)]
struct LevelReport {
    p: f64,
    cut: Option<f64>,
    acc: Option<f64>,
    nmi: Option<f64>,
    f_p: f64,
    newton_iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct BestReport {
    p: f64,
    cut: Option<f64>,
}

#[derive(Serialize)]
struct Report<'a> {
    n: usize,
    k: usize,
    objective: CutKind,
    levels: Vec<LevelReport>,
    best: BestReport,
    terminated: &'static str,
    labels: &'a [usize],
    config: &'a Effective,
}

impl<'a> Report<'a> {
    fn new(g: &SparseGraph, eff: &'a Effective, out: &'a RunOutput) -> Self {
        let levels = out
            .trace
            .levels
            .iter()
            .map(|l| LevelReport {
                p: l.p,
                cut: finite(l.cut),
                acc: l.acc,
                nmi: l.nmi,
                f_p: l.objective_value,
                newton_iterations: l.newton_iterations,
                converged: l.converged,
            })
            .collect();
        let best = out.trace.best();
        Report {
            n: g.n(),
            k: eff.k,
            objective: eff.objective,
            levels,
            best: BestReport {
                p: best.p,
                cut: finite(best.cut),
            },
            terminated: out.trace.terminated.name(),
            labels: out.assignment.labels(),
            config: eff,
        }
    }
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn cluster(
    args: &RunArgs,
    discretize: Option<Discretizer>,
    out: Option<PathBuf>,
    labels_out: Option<PathBuf>,
) -> Result<()> {
    let file = ConfigFile::for_args(args)?;
    let eff = Effective::resolve(args, discretize, &file)?;
    let out: Option<PathBuf> = pick(out, &file, "out")?;
    let labels_out: Option<PathBuf> = pick(labels_out, &file, "labels-out")?;

    let (g, truth) = load_input(&eff)?;
    let result = solve(&g, &eff, truth.as_deref())?;
    emit_json(&Report::new(&g, &eff, &result), out.as_deref())?;
    if let Some(path) = labels_out {
        write_labels(&path, result.assignment.labels())?;
    }
    Ok(())
}

/// Relabels arbitrary integers to `0..m` in order of first appearance.
fn compact(labels: &[i64]) -> (Vec<usize>, usize) {
    let mut seen = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = seen.len();
            *seen.entry(*l).or_insert(next)
        })
        .collect();
    (out, seen.len())
}

#[derive(Serialize)]
struct EvalReport {
    acc: f64,
    nmi: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rcut: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ncut: Option<f64>,
}

pub fn eval(labels: &Path, truth: &Path, graph: Option<&Path>) -> Result<()> {
    let pred = read_labels(labels)?;
    let truth = read_labels(truth)?;
    let (pred, m) = compact(&pred);
    let mut report = EvalReport {
        acc: accuracy(&pred, &truth)?,
        nmi: nmi(&pred, &truth)?,
        rcut: None,
        ncut: None,
    };
    if let Some(path) = graph {
        let g = read_graph(path)?;
        let assignment = ClusterAssignment::new(pred, m)?;
        report.rcut = Some(cut_value(&g, &assignment, CutKind::RCut)?);
        report.ncut = Some(cut_value(&g, &assignment, CutKind::NCut)?);
    }
    emit_json(&report, None)
}

#[derive(Serialize)]
struct EmbedLevel {
    p: f64,
    cut: Option<f64>,
    f_p: f64,
    f_p_of_p2_embedding: f64,
}

#[derive(Serialize)]
struct EmbedReport<'a> {
    n: usize,
    k: usize,
    best: BestReport,
    levels: Vec<EmbedLevel>,
    files: Vec<String>,
    config: &'a Effective,
}

pub fn embed(args: &RunArgs, out_dir: Option<PathBuf>) -> Result<()> {
    let file = ConfigFile::for_args(args)?;
    let eff = Effective::resolve(args, Some(Discretizer::Kmeans), &file)?;
    let dir: PathBuf = pick(out_dir, &file, "out-dir")?.unwrap_or_else(|| PathBuf::from("."));
    require_dir(&dir)?;

    let (g, truth) = load_input(&eff)?;
    let result = solve(&g, &eff, truth.as_deref())?;
    let p2 = result
        .embeddings
        .first()
        .ok_or_else(|| Usage("no levels were run".into()))?;
    let mut levels = Vec::with_capacity(result.trace.levels.len());
    for level in &result.trace.levels {
        let cfg = FunctionalConfig::new(PValue::new(level.p)?, eff.objective.normalized());
        levels.push(EmbedLevel {
            p: level.p,
            cut: finite(level.cut),
            f_p: level.objective_value,
            f_p_of_p2_embedding: f_p(&g, p2.matrix(), &cfg)?,
        });
    }

    let names = ["embedding_p2.csv", "embedding_best.csv", "fp_trace.csv"];
    write_matrix_csv(&dir.join(names[0]), p2.matrix())?;
    write_matrix_csv(&dir.join(names[1]), result.best_embedding().matrix())?;
    let mut csv = String::from("p,cut,f_p,f_p_of_p2_embedding\n");
    for l in &levels {
        let cut = l.cut.map_or("inf".to_string(), |c| c.to_string());
        csv.push_str(&format!("{},{cut},{},{}\n", l.p, l.f_p, l.f_p_of_p2_embedding));
    }
    let trace_path = dir.join(names[2]);
    std::fs::write(&trace_path, csv).with_context(|| format!("writing {}", trace_path.display()))?;

    let best = result.trace.best();
    let report = EmbedReport {
        n: g.n(),
        k: eff.k,
        best: BestReport {
            p: best.p,
            cut: finite(best.cut),
        },
        levels,
        files: names.iter().map(|n| dir.join(n).display().to_string()).collect(),
        config: &eff,
    };
    emit_json(&report, None)
}
