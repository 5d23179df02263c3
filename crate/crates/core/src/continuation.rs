//! The p-continuation driver.
//!
//! Solve at `p = 2`, discretize, then repeatedly lower `p`, warm-start the
//! Newton solver from the previous level's subspace, discretize again and
//! keep the labelling with the smallest cut. The loop stops when the
//! schedule runs out or when a level's cut rises more than 5% above the
//! previous level's.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::discretize::{kmeans_discretize, rotation_discretize, ClusterAssignment};
use crate::error::{Error, Result};
use crate::functional::{Embedding, FunctionalConfig};
use crate::graph::{PValue, SparseGraph};
use crate::grassmann::{newton_solve_traced, p2_initialize_traced, IterationRecord, SolverConfig};
use crate::metrics::{accuracy, cut_value, nmi, CutKind};

/// Relative cut increase that ends the continuation.
pub const ASCENT_FACTOR: f64 = 1.05;
/// Absolute ascent threshold used when the previous cut is exactly zero.
pub const ZERO_BASELINE_TOL: f64 = 1e-12;
/// The eight levels used for the published experiments.
pub const PRESET_LEVELS: [f64; 8] = [2.0, 1.9, 1.71, 1.539, 1.3851, 1.2466, 1.171, 1.1];

const LEVEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Levels generated by [`next_p`].
    Formula,
    /// An explicit, strictly decreasing list starting at 2.
    Preset(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kappa: f64,
    pub theta: f64,
    pub tol: f64,
    pub p_final: f64,
    pub mode: ScheduleMode,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            kappa: 0.9,
            theta: 1.25,
            tol: 0.1,
            p_final: 1.1,
            mode: ScheduleMode::Preset(PRESET_LEVELS.to_vec()),
        }
    }
}

impl Schedule {
    pub fn formula() -> Self {
        Schedule {
            mode: ScheduleMode::Formula,
            ..Schedule::default()
        }
    }

    pub fn preset(levels: Vec<f64>) -> Self {
        Schedule {
            mode: ScheduleMode::Preset(levels),
            ..Schedule::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadArgs(format!("schedule: {msg}")));
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad(format!("kappa = {} must lie in (0, 1)", self.kappa));
        }
        if !(self.theta > 1.0 && self.theta < 2.0) {
            return bad(format!("theta = {} must lie in (1, 2)", self.theta));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol = {} must lie in (0, 1)", self.tol));
        }
        if !(self.p_final > 1.0 && self.p_final <= 2.0) {
            return bad(format!("p_final = {} must lie in (1, 2]", self.p_final));
        }
        if let ScheduleMode::Preset(levels) = &self.mode {
            if levels.first() != Some(&2.0) {
                return bad("preset levels must start at 2".into());
            }
            if levels.windows(2).any(|w| !(w[1] < w[0])) {
                return bad("preset levels must be strictly decreasing".into());
            }
            if levels.iter().any(|&p| !(p > 1.0)) {
                return bad("preset levels must exceed 1".into());
            }
        }
        Ok(())
    }

    /// The p-levels this schedule visits if no cut ascent intervenes, and
    /// the reason it would stop.
    pub fn levels(&self) -> (Vec<f64>, Termination) {
        match &self.mode {
            ScheduleMode::Formula => {
                let mut levels = vec![2.0];
                let mut p = 2.0;
                loop {
                    let next = next_p(p, self);
                    if !(next < p - LEVEL_EPS) || next < self.p_final - LEVEL_EPS {
                        return (levels, Termination::PFloor);
                    }
                    levels.push(next);
                    p = next;
                }
            }
            ScheduleMode::Preset(list) => {
                let mut levels = Vec::with_capacity(list.len());
                for &p in list {
                    if p < self.p_final - LEVEL_EPS {
                        return (levels, Termination::PFloor);
                    }
                    levels.push(p);
                }
                (levels, Termination::LevelExhausted)
            }
        }
    }
}

/// `1 + max(tol, min(κ(p − 1), (p − 1)^θ))`.
pub fn next_p(p: f64, s: &Schedule) -> f64 {
    let excess = p - 1.0;
    1.0 + s.tol.max((s.kappa * excess).min(excess.powf(s.theta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretizer {
    Kmeans,
    Rotation,
}

impl std::str::FromStr for Discretizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kmeans" => Ok(Discretizer::Kmeans),
            "rotation" => Ok(Discretizer::Rotation),
            other => Err(Error::BadArgs(format!("unknown discretizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub k: usize,
    pub objective: CutKind,
    pub discretizer: Discretizer,
    pub schedule: Schedule,
    pub solver: SolverConfig,
    pub hessian_floor: f64,
    pub kmeans_orthogonal: usize,
    pub kmeans_random: usize,
}

impl RunConfig {
    pub fn new(k: usize, objective: CutKind) -> Self {
        RunConfig {
            k,
            objective,
            discretizer: Discretizer::Kmeans,
            schedule: Schedule::default(),
            solver: SolverConfig::default(),
            hessian_floor: FunctionalConfig::DEFAULT_HESSIAN_FLOOR,
            kmeans_orthogonal: 10,
            kmeans_random: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::BadArgs(format!("k = {} must be at least 2", self.k)));
        }
        if self.discretizer == Discretizer::Rotation && self.objective != CutKind::NCut {
            return Err(Error::RotationRequiresNCut);
        }
        if self.discretizer == Discretizer::Kmeans && self.kmeans_orthogonal + self.kmeans_random == 0 {
            return Err(Error::BadArgs("at least one k-means restart is required".into()));
        }
        if !(self.hessian_floor > 0.0) {
            return Err(Error::BadArgs("hessian floor must be positive".into()));
        }
        self.schedule.validate()?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    PFloor,
    CutAscent,
    LevelExhausted,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::PFloor => "p_floor",
            Termination::CutAscent => "cut_ascent",
            Termination::LevelExhausted => "level_exhausted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub p: f64,
    /// `+∞` when no valid partition was found at this level.
    pub cut: f64,
    pub labels: Option<ClusterAssignment>,
    pub acc: Option<f64>,
    pub nmi: Option<f64>,
    /// Objective value of the converged embedding.
    pub objective_value: f64,
    pub newton_iterations: usize,
    pub converged: bool,
    pub line_search_failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    pub levels: Vec<LevelRecord>,
    pub best_index: usize,
    pub terminated: Termination,
}

impl RunTrace {
    pub fn best(&self) -> &LevelRecord {
        &self.levels[self.best_index]
    }

    /// Checks the bookkeeping contract: the best level holds the minimum
    /// cut, is no worse than `p = 2`, and the termination reason reflects
    /// whether an ascent occurred.
    pub fn check_contract(&self) -> std::result::Result<(), String> {
        let best = self.best().cut;
        let min = self.levels.iter().map(|l| l.cut).fold(f64::INFINITY, f64::min);
        if !(best == min || (best.is_infinite() && min.is_infinite())) {
            return Err(format!("best cut {best} differs from trace minimum {min}"));
        }
        if !(best <= self.levels[0].cut || self.levels[0].cut.is_infinite()) {
            return Err(format!("best cut {best} exceeds the p = 2 cut {}", self.levels[0].cut));
        }
        let ascended = self.levels.windows(2).any(|w| is_ascent(w[1].cut, w[0].cut));
        if ascended != (self.terminated == Termination::CutAscent) {
            return Err(format!(
                "termination {:?} inconsistent with ascent = {ascended}",
                self.terminated
            ));
        }
        Ok(())
    }
}

/// The continuation guard: `r_new > 1.05 r_old`, or any increase beyond
/// [`ZERO_BASELINE_TOL`] over a zero baseline.
pub fn is_ascent(r_new: f64, r_old: f64) -> bool {
    if r_old == 0.0 {
        r_new > ZERO_BASELINE_TOL
    } else {
        r_new > ASCENT_FACTOR * r_old
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub assignment: ClusterAssignment,
    pub trace: RunTrace,
    /// Converged embedding of every visited level, aligned with
    /// `trace.levels`.
    pub embeddings: Vec<Embedding>,
}

impl RunOutput {
    pub fn best_embedding(&self) -> &Embedding {
        &self.embeddings[self.trace.best_index]
    }
}

fn level_seed(seed: u64, level: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(level as u64 + 1)
}

/// Discretizes and returns the lowest-cut labelling, or `None` when every
/// attempt produced an empty cluster.
fn discretize_level(
    g: &SparseGraph,
    u: &Embedding,
    cfg: &RunConfig,
    level: usize,
) -> Result<Option<(ClusterAssignment, f64)>> {
    let candidates = match cfg.discretizer {
        Discretizer::Kmeans => match kmeans_discretize(
            u.matrix(),
            cfg.k,
            cfg.kmeans_orthogonal,
            cfg.kmeans_random,
            level_seed(cfg.solver.seed, level),
        ) {
            Ok(c) => c,
            Err(Error::AllCandidatesEmpty(_)) | Err(Error::DegenerateRows { .. }) => Vec::new(),
            Err(e) => return Err(e),
        },
        Discretizer::Rotation => match rotation_discretize(u.matrix(), cfg.k) {
            Ok(r) => vec![r.assignment],
            Err(Error::EmptyCluster(_)) | Err(Error::ZeroRow(_)) => Vec::new(),
            Err(e) => return Err(e),
        },
    };
    let mut best: Option<(ClusterAssignment, f64)> = None;
    for cand in candidates {
        let cut = match cut_value(g, &cand, cfg.objective) {
            Ok(c) => c,
            Err(Error::EmptyCluster(_)) | Err(Error::ZeroVolume(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(_, b)| cut < *b) {
            best = Some((cand, cut));
        }
    }
    if best.is_none() {
        warn!("no valid partition at level {level}");
    }
    Ok(best)
}

pub fn run(g: &SparseGraph, cfg: &RunConfig, truth: Option<&[i64]>) -> Result<RunOutput> {
    run_traced(g, cfg, truth, &mut |_| {})
}

pub fn run_traced(
    g: &SparseGraph,
    cfg: &RunConfig,
    truth: Option<&[i64]>,
    trace: &mut dyn FnMut(&IterationRecord),
) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.k >= g.n() {
        return Err(Error::BadArgs(format!("k = {} must be below n = {}", cfg.k, g.n())));
    }
    if cfg.objective == CutKind::NCut {
        g.require_positive_degrees()?;
    }
    if let Some(t) = truth {
        if t.len() != g.n() {
            return Err(Error::LengthMismatch(t.len(), g.n()));
        }
    }
    if !g.is_connected() {
        warn!("graph has {} connected components", g.components().0);
    }

    let normalized = cfg.objective.normalized();
    let (levels, exhausted) = cfg.schedule.levels();
    let mut records: Vec<LevelRecord> = Vec::with_capacity(levels.len());
    let mut embeddings: Vec<Embedding> = Vec::with_capacity(levels.len());
    let mut terminated = exhausted;

    for (index, &p) in levels.iter().enumerate() {
        let solved = if index == 0 {
            p2_initialize_traced(g, cfg.k, normalized, &cfg.solver, trace)?
        } else {
            let fcfg = FunctionalConfig {
                p: PValue::new(p)?,
                normalized,
                hessian_floor: cfg.hessian_floor,
            };
            newton_solve_traced(g, &embeddings[index - 1], &fcfg, &cfg.solver, trace)?
        };
        let discrete = discretize_level(g, &solved.embedding, cfg, index)?;
        let (labels, cut) = match discrete {
            Some((a, c)) => (Some(a), c),
            None => (None, f64::INFINITY),
        };
        let (acc, nmi_value) = match (truth, &labels) {
            (Some(t), Some(a)) => (Some(accuracy(a.labels(), t)?), Some(nmi(a.labels(), t)?)),
            _ => (None, None),
        };
        info!(
            "p = {p:.4}: cut = {cut:.6}, f = {:.6e}, newton = {}",
            solved.value, solved.iterations
        );
        records.push(LevelRecord {
            p,
            cut,
            labels,
            acc,
            nmi: nmi_value,
            objective_value: solved.value,
            newton_iterations: solved.iterations,
            converged: solved.converged,
            line_search_failed: solved.line_search_failed,
        });
        embeddings.push(solved.embedding);

        if index > 0 && is_ascent(cut, records[index - 1].cut) {
            terminated = Termination::CutAscent;
            break;
        }
    }

    let mut best_index = 0;
    for (i, rec) in records.iter().enumerate() {
        if rec.cut < records[best_index].cut {
            best_index = i;
        }
    }
    let assignment = records[best_index].labels.clone().ok_or(Error::NoValidPartition)?;
    let trace = RunTrace {
        levels: records,
        best_index,
        terminated,
    };
    debug_assert_eq!(trace.check_contract(), Ok(()));
    Ok(RunOutput {
        assignment,
        trace,
        embeddings,
    })
}
