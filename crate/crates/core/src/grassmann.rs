//! Riemannian Newton minimization of `F_p` over the Grassmann manifold.
//!
//! Points are orthonormal `n × k` bases; tangent vectors at `U` satisfy
//! `UᵀΞ = 0`. The Newton equation is solved inexactly by truncated
//! conjugate gradients and globalized with Armijo backtracking along the
//! retracted step.

use log::{debug, warn};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{curvature_diagonal, value_and_gradient, Embedding, FunctionalConfig, HessianOperator};
use crate::graph::{PValue, SparseGraph};

/// Absolute gradient-norm floor; the relative test is meaningless when the
/// starting gradient is already zero.
pub const GRAD_ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_newton: usize,
    pub grad_rel_tol: f64,
    pub tcg_max: usize,
    pub armijo_c: f64,
    pub armijo_max_backtracks: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_newton: 20,
            grad_rel_tol: 1e-6,
            tcg_max: 100,
            armijo_c: 1e-4,
            armijo_max_backtracks: 25,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::BadArgs(format!("solver config: {what}")));
        if self.max_newton == 0 {
            return bad("max_newton must be positive");
        }
        if !(self.grad_rel_tol > 0.0 && self.grad_rel_tol < 1.0) {
            return bad("grad_rel_tol must lie in (0, 1)");
        }
        if self.tcg_max == 0 {
            return bad("tcg_max must be positive");
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if self.armijo_max_backtracks == 0 {
            return bad("armijo_max_backtracks must be positive");
        }
        Ok(())
    }
}

/// A matrix in the tangent space at some base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector(DMatrix<f64>);

impl TangentVector {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn inner(&self, other: &TangentVector) -> f64 {
        self.0.dot(&other.0)
    }
}

/// `Z − U(UᵀZ)`.
pub fn project_tangent(u: &Embedding, z: &DMatrix<f64>) -> TangentVector {
    TangentVector(project(u.matrix(), z))
}

fn project(u: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    let coeffs = u.transpose() * z;
    z - u * coeffs
}

/// Orthonormal factor of `U + Ξ` with a positive-diagonal triangular
/// factor, computed through the Cholesky factor of the Gram matrix
/// `(U+Ξ)ᵀ(U+Ξ) = I + ΞᵀΞ`. A zero step returns `U` unchanged.
pub fn retract(u: &Embedding, xi: &TangentVector) -> Result<Embedding> {
    if xi.0.iter().all(|&x| x == 0.0) {
        return Ok(u.clone());
    }
    let mut y = u.matrix() + xi.matrix();
    // One pass is accurate to roughly cond(I + ΞᵀΞ)·ε; a second pass cleans
    // up large steps.
    for _ in 0..2 {
        y = cholesky_orthonormalize(y)?;
        if crate::functional::orthonormality_error(&y) <= 1e-13 {
            break;
        }
    }
    Ok(Embedding::new_unchecked(y))
}

fn cholesky_orthonormalize(y: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = y.transpose() * &y;
    let chol = gram.cholesky().ok_or(Error::RankDeficientStep)?;
    let r = chol.l().transpose();
    let smallest = r.diagonal().iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let largest = r.diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
    if !(smallest > 1e-12 * largest) {
        return Err(Error::RankDeficientStep);
    }
    // Q = Y R⁻¹, i.e. solve Rᵀ Qᵀ = Yᵀ.
    let qt = r
        .transpose()
        .solve_lower_triangular(&y.transpose())
        .ok_or(Error::RankDeficientStep)?;
    Ok(qt.transpose())
}

/// A seeded random orthonormal `n × k` basis.
pub fn random_embedding(n: usize, k: usize, seed: u64) -> Result<Embedding> {
    if k == 0 || k >= n {
        return Err(Error::BadArgs(format!("need 0 < k < n, got k = {k}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    let q = z.qr().q();
    let y = cholesky_orthonormalize(q)?;
    Ok(Embedding::new_unchecked(y))
}

/// First- and second-order information at a fixed base point.
pub struct LocalModel<'g> {
    base: Embedding,
    value: f64,
    euclidean_grad: DMatrix<f64>,
    /// `Uᵀ ∇F`, the coupling term of the Grassmann Hessian.
    coupling: DMatrix<f64>,
    gradient: TangentVector,
    hessian: HessianOperator<'g>,
    shift: DMatrix<f64>,
}

impl<'g> LocalModel<'g> {
    pub fn new(g: &'g SparseGraph, u: &Embedding, cfg: &FunctionalConfig) -> Result<Self> {
        let (value, euclidean_grad) = value_and_gradient(g, u.matrix(), cfg)?;
        let coupling = u.matrix().transpose() * &euclidean_grad;
        let gradient = project_tangent(u, &euclidean_grad);
        let hessian = HessianOperator::new(g, u.matrix(), cfg)?;
        let shift = curvature_diagonal(g, u.matrix(), cfg)?;
        Ok(LocalModel {
            base: u.clone(),
            value,
            euclidean_grad,
            coupling,
            gradient,
            hessian,
            shift,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &TangentVector {
        &self.gradient
    }

    pub fn euclidean_gradient(&self) -> &DMatrix<f64> {
        &self.euclidean_grad
    }

    /// `P_U( H[Ξ] − D∘Ξ − Ξ (Uᵀ∇F) )` with `D` the denominator curvature.
    pub fn hessian_apply(&self, xi: &DMatrix<f64>) -> DMatrix<f64> {
        let ambient = self.hessian.apply(xi) - self.shift.component_mul(xi) - xi * &self.coupling;
        project(self.base.matrix(), &ambient)
    }
}

pub fn riemannian_gradient(g: &SparseGraph, u: &Embedding, cfg: &FunctionalConfig) -> Result<TangentVector> {
    let (_, grad) = value_and_gradient(g, u.matrix(), cfg)?;
    Ok(project_tangent(u, &grad))
}

pub fn riemannian_hessian_vec(
    g: &SparseGraph,
    u: &Embedding,
    xi: &TangentVector,
    cfg: &FunctionalConfig,
) -> Result<TangentVector> {
    let model = LocalModel::new(g, u, cfg)?;
    Ok(TangentVector(model.hessian_apply(xi.matrix())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TcgStop {
    Residual,
    MaxIterations,
    NegativeCurvature,
}

#[derive(Debug, Clone)]
pub struct TcgResult {
    pub step: TangentVector,
    pub iterations: usize,
    pub stop: TcgStop,
}

/// Steihaug-style truncated CG for `Hess[Ξ] = −grad`, started from zero.
///
/// Stops when the residual drops below `forcing · ‖grad‖`, after `max_iter`
/// iterations, or on a direction of non-positive curvature. In the last
/// case the current iterate is returned, or `−grad` if no step was taken.
pub fn truncated_cg<H>(hess: H, grad: &TangentVector, forcing: f64, max_iter: usize) -> TcgResult
where
    H: Fn(&DMatrix<f64>) -> DMatrix<f64>,
{
    let g = grad.matrix();
    let steepest = || TangentVector(-g);
    let grad_norm = g.norm();
    let target = forcing * grad_norm;

    let mut x = DMatrix::zeros(g.nrows(), g.ncols());
    let mut r = g.clone();
    let mut d = -g;
    let mut rr = r.norm_squared();
    let mut stop = TcgStop::MaxIterations;
    let mut iterations = 0;
    for it in 0..max_iter {
        let hd = hess(&d);
        let curvature = d.dot(&hd);
        if !(curvature > 0.0) {
            stop = TcgStop::NegativeCurvature;
            if it == 0 {
                return TcgResult {
                    step: steepest(),
                    iterations: 0,
                    stop,
                };
            }
            break;
        }
        let alpha = rr / curvature;
        x += alpha * &d;
        r += alpha * &hd;
        iterations = it + 1;
        let rr_next = r.norm_squared();
        if rr_next.sqrt() <= target {
            stop = TcgStop::Residual;
            break;
        }
        let beta = rr_next / rr;
        rr = rr_next;
        d = -&r + beta * d;
    }
    if !(x.dot(g) < 0.0) {
        return TcgResult {
            step: steepest(),
            iterations,
            stop,
        };
    }
    TcgResult {
        step: TangentVector(x),
        iterations,
        stop,
    }
}

/// One line of the optional iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub p: f64,
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub embedding: Embedding,
    pub value: f64,
    pub grad_norm: f64,
    pub initial_grad_norm: f64,
    /// Accepted Newton steps.
    pub iterations: usize,
    pub converged: bool,
    /// Set when backtracking failed to find a decrease; the incumbent is
    /// returned.
    pub line_search_failed: bool,
    /// Objective value after each accepted step, starting with the initial
    /// value.
    pub values: Vec<f64>,
}

pub fn newton_solve(
    g: &SparseGraph,
    u0: &Embedding,
    cfg: &FunctionalConfig,
    sc: &SolverConfig,
) -> Result<NewtonResult> {
    newton_solve_traced(g, u0, cfg, sc, &mut |_| {})
}

pub fn newton_solve_traced(
    g: &SparseGraph,
    u0: &Embedding,
    cfg: &FunctionalConfig,
    sc: &SolverConfig,
    trace: &mut dyn FnMut(&IterationRecord),
) -> Result<NewtonResult> {
    sc.validate()?;
    if u0.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: u0.n(),
        });
    }
    let mut u = u0.clone();
    let mut model = LocalModel::new(g, &u, cfg)?;
    let g0 = model.gradient().norm();
    let mut values = vec![model.value()];
    let mut iterations = 0;
    let mut line_search_failed = false;
    let mut converged;

    loop {
        let grad_norm = model.gradient().norm();
        trace(&IterationRecord {
            p: cfg.p.get(),
            iteration: iterations,
            value: model.value(),
            grad_norm,
        });
        converged = grad_norm <= GRAD_ABS_FLOOR || grad_norm < sc.grad_rel_tol * g0;
        if converged || iterations == sc.max_newton {
            break;
        }

        let forcing = (grad_norm / g0).sqrt().min(0.5);
        let tcg = truncated_cg(|d| model.hessian_apply(d), model.gradient(), forcing, sc.tcg_max);
        let slope = tcg.step.inner(model.gradient());
        debug!(
            "p={} it={} f={:.6e} |g|={:.3e} tcg={} ({:?})",
            cfg.p.get(),
            iterations,
            model.value(),
            grad_norm,
            tcg.iterations,
            tcg.stop
        );

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..sc.armijo_max_backtracks {
            let trial = TangentVector(tcg.step.matrix() * step);
            if let Ok(candidate) = retract(&u, &trial) {
                let next = LocalModel::new(g, &candidate, cfg)?;
                if next.value() <= model.value() + sc.armijo_c * step * slope {
                    accepted = Some((candidate, next));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((candidate, next)) => {
                u = candidate;
                model = next;
                iterations += 1;
                values.push(model.value());
            }
            None => {
                warn!(
                    "line search failed at p = {} after {} Newton steps",
                    cfg.p.get(),
                    iterations
                );
                line_search_failed = true;
                break;
            }
        }
    }

    Ok(NewtonResult {
        value: model.value(),
        grad_norm: model.gradient().norm(),
        initial_grad_norm: g0,
        embedding: u,
        iterations,
        converged,
        line_search_failed,
        values,
    })
}

/// Minimizes `F₂` (or its normalized form) from a seeded random start.
pub fn p2_initialize(g: &SparseGraph, k: usize, normalized: bool, sc: &SolverConfig) -> Result<NewtonResult> {
    p2_initialize_traced(g, k, normalized, sc, &mut |_| {})
}

pub fn p2_initialize_traced(
    g: &SparseGraph,
    k: usize,
    normalized: bool,
    sc: &SolverConfig,
    trace: &mut dyn FnMut(&IterationRecord),
) -> Result<NewtonResult> {
    if !g.is_connected() {
        warn!("graph is disconnected; the zero eigenvalue is repeated per component");
    }
    let u0 = random_embedding(g.n(), k, sc.seed)?;
    let cfg = FunctionalConfig::new(PValue::TWO, normalized);
    newton_solve_traced(g, &u0, &cfg, sc, trace)
}
