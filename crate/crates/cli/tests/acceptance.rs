//! The twelve acceptance criteria, each reported as one PASS/FAIL line.
//!
//! Run with `cargo test -p pgrass-cli --test acceptance -- --nocapture`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, DVector};
use pgrass::continuation::{next_p, run, Discretizer, RunConfig, RunTrace, Schedule, PRESET_LEVELS};
use pgrass::discretize::{kmeans_discretize, rotation_discretize};
use pgrass::functional::{f_p, hessian_vec, value_and_gradient};
use pgrass::graph::dense_laplacian;
use pgrass::grassmann::{newton_solve, p2_initialize, random_embedding, SolverConfig};
use pgrass::metrics::{accuracy, cut_value, nmi};
use pgrass::similarity::self_tuning_graph;
use pgrass::synth::{gaussian_grid, planted_blocks, two_moons};
use pgrass::{ClusterAssignment, CutKind, Embedding, FunctionalConfig, PValue};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const PS: [f64; 4] = [2.0, 1.8, 1.4, 1.1];

fn fcfg(p: f64, normalized: bool) -> FunctionalConfig {
    FunctionalConfig::new(PValue::new(p).unwrap(), normalized)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn gradient_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..10u64 {
        let n = 10 + (seed as usize * 4) % 41;
        let k = 1 + seed as usize % 4;
        let g = random_connected_graph(n, 0.15, seed);
        let u = random_matrix(n, k, 100 + seed);
        let noise = random_matrix(n, k, 200 + seed);
        for p in PS {
            for normalized in [false, true] {
                let c = fcfg(p, normalized);
                let (f0, grad) = value_and_gradient(&g, &u, &c).unwrap();
                let eta = 1e-6 * (&grad / grad.norm() + 0.5 * &noise / noise.norm());
                let ratio = (f_p(&g, &(&u + &eta), &c).unwrap() - f0) / eta.dot(&grad);
                worst = worst.max((ratio - 1.0).abs());
                ensure!(
                    (ratio - 1.0).abs() <= 1e-4,
                    "seed {seed} p {p} normalized {normalized}: ratio {ratio}"
                );
            }
        }
    }
    Ok(format!("max |ratio - 1| = {worst:.2e}"))
}

fn p2_oracle() -> Outcome {
    let (mut worst, mut worst_resid): (f64, f64) = (0.0, 0.0);
    for seed in 0..10u64 {
        let n = 15 + (seed as usize * 7) % 46;
        let k = 2 + seed as usize % 3;
        let g = random_connected_graph(n, 0.08, seed + 300);
        for normalized in [false, true] {
            let m = if normalized {
                normalized_energy_matrix(&g)
            } else {
                dense_laplacian(&g, false).unwrap()
            };
            let target: f64 = sorted_eigenvalues(m)[..k].iter().sum();
            let sc = SolverConfig {
                seed,
                ..Default::default()
            };
            let res = p2_initialize(&g, k, normalized, &sc).unwrap();
            let err = (res.value - target).abs();
            worst = worst.max(err);
            ensure!(
                err <= 1e-6,
                "seed {seed} normalized {normalized}: {} vs {target}",
                res.value
            );
            let u = res.embedding.matrix();
            let e = DVector::from_element(n, 1.0);
            let resid = (&e - u * (u.transpose() * &e)).norm() / e.norm();
            worst_resid = worst_resid.max(resid);
            ensure!(resid <= 1e-3, "seed {seed}: constant residual {resid}");
        }
    }
    Ok(format!(
        "max |F2 - eig sum| = {worst:.2e}, max residual = {worst_resid:.2e}"
    ))
}

fn cut_oracle() -> Outcome {
    let mut checked = 0usize;
    for seed in 0..50u64 {
        let n = 3 + seed as usize % 6;
        let g = random_connected_graph(n, 0.4, seed);
        for k in [2, 3] {
            for labels in all_labelings(n, k) {
                let a = ClusterAssignment::new(labels.clone(), k).unwrap();
                for kind in [CutKind::RCut, CutKind::NCut] {
                    match (brute_cut(&g, &labels, k, kind), cut_value(&g, &a, kind)) {
                        (Some(want), Ok(got)) => {
                            ensure!((want - got).abs() <= 1e-12, "{labels:?}: {want} vs {got}");
                            checked += 1;
                        }
                        (None, Err(_)) => {}
                        (want, got) => return Err(format!("{labels:?}: {want:?} vs {got:?}")),
                    }
                }
            }
        }
    }
    Ok(format!("{checked} labelings agree"))
}

fn schedule_fidelity() -> Outcome {
    let formula = Schedule::formula();
    ensure!(next_p(2.0, &formula) == 1.9, "next_p(2) = {}", next_p(2.0, &formula));
    let (levels, _) = Schedule::default().levels();
    ensure!(levels == PRESET_LEVELS, "preset levels {levels:?}");
    ensure!(levels.len() == 8, "{} preset levels", levels.len());
    let (levels, _) = formula.levels();
    ensure!(
        levels.windows(2).all(|w| w[1] < w[0]),
        "formula not decreasing: {levels:?}"
    );
    ensure!(*levels.last().unwrap() == 1.1, "formula ends at {:?}", levels.last());
    let mut p = 2.0;
    for _ in 0..100 {
        p = next_p(p, &formula);
        ensure!(p >= 1.1, "formula went below the floor: {p}");
    }
    ensure!(p == 1.1, "formula does not clamp: {p}");
    Ok(format!("formula levels {levels:?}"))
}

/// Every run made while checking the other criteria, for the contract check.
#[derive(Default)]
struct Runs(Vec<(String, RunTrace)>);

impl Runs {
    fn run(&mut self, tag: String, g: &pgrass::SparseGraph, cfg: &RunConfig, truth: &[i64]) -> RunTrace {
        let out = run(g, cfg, Some(truth)).unwrap();
        assert!((cut_value(g, &out.assignment, cfg.objective).unwrap() - out.trace.best().cut).abs() <= 1e-12);
        self.0.push((tag, out.trace.clone()));
        out.trace
    }
}

fn contract(runs: &mut Runs) -> Outcome {
    for seed in 0..4u64 {
        let (g, truth) = planted_blocks(&[30, 30, 30], 0.4, 0.03, seed).unwrap();
        for (kind, disc) in [
            (CutKind::RCut, Discretizer::Kmeans),
            (CutKind::NCut, Discretizer::Kmeans),
            (CutKind::NCut, Discretizer::Rotation),
        ] {
            for schedule in [Schedule::default(), Schedule::formula()] {
                let mut cfg = RunConfig::new(3, kind);
                cfg.discretizer = disc;
                cfg.schedule = schedule;
                cfg.solver.seed = seed;
                runs.run(format!("blocks seed {seed} {kind:?} {disc:?}"), &g, &cfg, &truth);
            }
        }
    }
    let mut ascents = 0;
    for (tag, trace) in &runs.0 {
        trace.check_contract().map_err(|e| format!("{tag}: {e}"))?;
        ascents += usize::from(trace.terminated.name() == "cut_ascent");
    }
    Ok(format!("{} runs, {ascents} ended by cut ascent", runs.0.len()))
}

fn two_moons_reproduction(runs: &mut Runs) -> Outcome {
    let (mut accs, mut nmis) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let data = two_moons(600, 0.02, 100, seed).unwrap();
        let g = self_tuning_graph(&data.points, 10).unwrap();
        let mut cfg = RunConfig::new(2, CutKind::NCut);
        cfg.solver.seed = seed;
        let trace = runs.run(format!("two-moons seed {seed}"), &g, &cfg, &data.labels);
        accs.push(trace.best().acc.unwrap());
        nmis.push(trace.best().nmi.unwrap());
    }
    let (acc, nmi) = (median(accs.clone()), median(nmis.clone()));
    let detail = format!("median ACC {acc:.3} (need 0.95), median NMI {nmi:.3} (need 0.80); ACC {accs:.3?}");
    ensure!(acc >= 0.95 && nmi >= 0.80, "{detail}");
    Ok(detail)
}

fn gaussian_grid_reproduction(runs: &mut Runs) -> Outcome {
    let mut report = Vec::new();
    for kind in [CutKind::RCut, CutKind::NCut] {
        let mut nmis = Vec::new();
        for seed in 0..5u64 {
            let data = gaussian_grid(5, 400, 0.055, pgrass::synth::GRID_SPACING, seed).unwrap();
            let g = self_tuning_graph(&data.points, 10).unwrap();
            let mut cfg = RunConfig::new(5, kind);
            cfg.solver.seed = seed;
            let trace = runs.run(format!("grid seed {seed} {kind:?}"), &g, &cfg, &data.labels);
            nmis.push(trace.best().nmi.unwrap());
        }
        let m = median(nmis);
        ensure!(m >= 0.95, "{kind:?}: median NMI {m:.3}");
        report.push(format!("{kind:?} median NMI {m:.3}"));
    }
    Ok(report.join(", "))
}

fn hessian_properties() -> Outcome {
    for seed in 0..8u64 {
        let n = 8 + seed as usize * 4;
        let g = random_connected_graph(n, 0.2, seed);
        let u = random_matrix(n, 3, seed + 50);
        let v = random_matrix(n, 3, seed + 60);
        let w = random_matrix(n, 3, seed + 70);
        let ones = DMatrix::from_element(n, 3, 1.0);
        for p in PS {
            for normalized in [false, true] {
                let c = fcfg(p, normalized);
                let hv = hessian_vec(&g, &u, &v, &c).unwrap();
                let hw = hessian_vec(&g, &u, &w, &c).unwrap();
                let asym = (w.dot(&hv) - v.dot(&hw)).abs();
                let scale = (hv.norm() * w.norm() + hw.norm() * v.norm()).max(1.0);
                ensure!(asym <= 1e-9 * scale, "seed {seed} p {p}: asymmetry {asym}");
                let null = hessian_vec(&g, &u, &ones, &c).unwrap().amax();
                ensure!(null <= 1e-10, "seed {seed} p {p}: constant image {null}");
                ensure!(v.dot(&hv) >= -1e-10, "seed {seed} p {p}: negative form {}", v.dot(&hv));
            }
        }
        let lap = dense_laplacian(&g, false).unwrap();
        let h = hessian_vec(&g, &u, &v, &fcfg(2.0, false)).unwrap();
        for l in 0..3 {
            let expected = (2.0 / u.column(l).norm_squared()) * &lap * v.column(l);
            let err = (h.column(l) - expected).amax();
            ensure!(err <= 1e-10, "seed {seed}: p = 2 mismatch {err}");
        }
    }
    Ok("8 graphs, n ≤ 40".into())
}

fn discretizer_recovery() -> Outcome {
    for seed in 0..10u64 {
        let k = 2 + seed as usize % 4;
        let labels = planted_labels(40, k, seed);
        let ind = normalized_indicator(&labels, k);
        for u in [ind.clone(), &ind * random_rotation(k, seed + 1)] {
            let res = rotation_discretize(&u, k).unwrap();
            ensure!(
                same_partition(res.assignment.labels(), &labels),
                "rotation seed {seed} k {k}"
            );
            let obj = *res.objective.last().unwrap();
            ensure!(obj <= 1e-8, "rotation seed {seed}: objective {obj}");
        }
    }
    for seed in 0..20u64 {
        let labels = planted_labels(90, 3, seed);
        let u = DMatrix::from_fn(90, 3, |r, c| if labels[r] == c { 10.0 } else { 0.0 })
            + 0.5 * random_matrix(90, 3, seed + 7);
        let candidates = kmeans_discretize(&u, 3, 10, 20, seed).unwrap();
        ensure!(candidates.len() == 30, "seed {seed}: {} candidates", candidates.len());
        let good = candidates
            .iter()
            .filter(|c| same_partition(c.labels(), &labels))
            .count();
        ensure!(good == 30, "kmeans seed {seed}: {good}/30 restarts recovered");
    }
    Ok("rotation 10 planted partitions, kmeans 20 x 30 restarts".into())
}

fn invariances() -> Outcome {
    for seed in 0..5u64 {
        let g = random_connected_graph(30, 0.1, seed);
        let u = random_matrix(30, 3, seed);
        let scaled = &u * DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -0.25, 17.0]));
        for p in PS {
            for normalized in [false, true] {
                let c = fcfg(p, normalized);
                let (a, b) = (f_p(&g, &u, &c).unwrap(), f_p(&g, &scaled, &c).unwrap());
                ensure!((a - b).abs() <= 1e-12 * a.abs(), "seed {seed} p {p}: {a} vs {b}");
                let (_, grad) = value_and_gradient(&g, &u, &c).unwrap();
                for l in 0..3 {
                    let (gc, uc) = (grad.column(l), u.column(l));
                    let rel = gc.dot(&uc).abs() / (gc.norm() * uc.norm());
                    ensure!(rel <= 1e-9, "seed {seed} p {p}: <g, u> relative {rel}");
                }
            }
        }
    }
    for seed in 0..4u64 {
        let g = random_connected_graph(30, 0.1, seed + 500);
        let u0 = random_embedding(30, 3, seed).unwrap();
        let u1 = Embedding::new(u0.matrix() * random_rotation(3, seed)).unwrap();
        let sc = SolverConfig::default();
        for normalized in [false, true] {
            let c = fcfg(2.0, normalized);
            let a = newton_solve(&g, &u0, &c, &sc).unwrap().value;
            let b = newton_solve(&g, &u1, &c, &sc).unwrap().value;
            ensure!((a - b).abs() <= 1e-6, "seed {seed}: newton {a} vs {b}");
        }
    }
    Ok("scale, Euler and rotation checks hold".into())
}

fn metric_sanity() -> Outcome {
    ensure!(accuracy(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap() == 0.5, "two-vs-one ACC");
    ensure!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap() == 0.0, "single-cluster NMI");
    let (pred, truth) = ([0, 0, 1, 1, 2, 2], [0, 0, 0, 1, 1, 1]);
    let contingency = (2.0 / 3.0) * 2f64.ln() / (3f64.ln() * 2f64.ln()).sqrt();
    ensure!(
        (nmi(&pred, &truth).unwrap() - contingency).abs() <= 1e-12,
        "contingency NMI"
    );

    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(9);
    use rand::Rng;
    for _ in 0..200 {
        let n = rng.random_range(2..12);
        let (kp, kt) = (rng.random_range(1..4), rng.random_range(1..4));
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..kp)).collect();
        let truth: Vec<i64> = (0..n).map(|_| rng.random_range(0..kt) as i64).collect();
        let acc = accuracy(&pred, &truth).unwrap();
        ensure!(
            (acc - brute_accuracy(&pred, &truth)).abs() <= 1e-12,
            "ACC {pred:?} {truth:?}"
        );
        let value = nmi(&pred, &truth).unwrap();
        ensure!(
            (value - brute_nmi(&pred, &truth)).abs() <= 1e-12,
            "NMI {pred:?} {truth:?}"
        );

        let perm = &permutations(3)[rng.random_range(0..6)];
        let relabeled: Vec<usize> = pred.iter().map(|&p| perm[p]).collect();
        ensure!(
            (accuracy(&relabeled, &truth).unwrap() - acc).abs() <= 1e-12,
            "ACC permutation"
        );
        let as_truth: Vec<i64> = pred.iter().map(|&p| p as i64).collect();
        ensure!(
            (nmi(&relabeled, &as_truth).unwrap() - 1.0).abs() <= 1e-12,
            "NMI of a relabelling"
        );
        let truth_usize: Vec<usize> = truth.iter().map(|&t| t as usize).collect();
        ensure!(
            ((value - 1.0).abs() <= 1e-12) == same_partition(&pred, &truth_usize),
            "NMI = 1 iff identical"
        );
    }
    Ok("200 random labelings against contingency oracles".into())
}

fn pgrass(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_pgrass")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn determinism(dir: &Path) -> Outcome {
    let d = dir.to_str().unwrap();
    pgrass(&["generate", "two-moons", "--n", "400", "--seed", "3", "--out", d]);
    let points = format!("{d}/points.csv");
    let truth = format!("{d}/labels.txt");
    let base = [
        "cluster", "--points", &points, "--truth", &truth, "--k", "2", "--seed", "5",
    ];
    let first = pgrass(&base);
    ensure!(first == pgrass(&base), "two identical runs differ");
    let one = pgrass(&[&base[..], &["--threads", "1"]].concat());
    let four = pgrass(&[&base[..], &["--threads", "4"]].concat());
    ensure!(one == four, "--threads 1 and --threads 4 differ");
    ensure!(one == first, "explicit thread count changed the output");
    Ok(format!("{} identical bytes", first.len()))
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Runs::default();
    let mut results: Vec<(usize, &str, Outcome, Duration, Duration)> = Vec::new();
    let mut check = |id: usize, name: &'static str, budget: u64, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        results.push((id, name, outcome, start.elapsed(), Duration::from_secs(budget)));
    };

    check(1, "gradient correctness", 10, &mut gradient_correctness);
    check(2, "p = 2 spectral oracle", 30, &mut p2_oracle);
    check(3, "cut-metric oracle", 20, &mut cut_oracle);
    check(4, "schedule fidelity", 1, &mut schedule_fidelity);
    check(6, "two-moons reproduction", 180, &mut || {
        two_moons_reproduction(&mut runs)
    });
    check(7, "Gaussian-grid reproduction", 300, &mut || {
        gaussian_grid_reproduction(&mut runs)
    });
    check(5, "monotonic-best contract", 60, &mut || contract(&mut runs));
    check(8, "Hessian operator properties", 10, &mut hessian_properties);
    check(9, "discretizer recovery", 10, &mut discretizer_recovery);
    check(10, "scale and rotation invariances", 10, &mut invariances);
    check(11, "metric sanity", 5, &mut metric_sanity);
    check(12, "determinism", 60, &mut || determinism(tmp.path()));

    results.sort_by_key(|r| r.0);
    let mut failed = Vec::new();
    for (id, name, outcome, took, budget) in &results {
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.1?}, budget {budget:?}")),
            other => other.clone(),
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {id:>2} {name}: {detail} [{took:.2?}]"),
            Err(why) => {
                println!("FAIL criterion {id:>2} {name}: {why} [{took:.2?}]");
                failed.push(*id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
