//! Riemannian nonlinear conjugate gradient (Hestenes–Stiefel, clamped at
//! zero) and steepest descent with Armijo backtracking, for either the
//! preconditioned quotient geometry or the Euclidean product baseline.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{
    euclid_project_tangent, retract, QuotientGeometry, TuckerPoint, TuckerTangent,
};
use crate::problem::{CompletionProblem, DataSet};
use crate::scalar::Real;
use crate::smallmat::{polar_factor, COUPLED_MAX_ITER, COUPLED_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Nonlinear conjugate gradient.
    Ncg,
    /// Steepest descent.
    Sd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    /// Metric scaled by `G_d G_d^T`, with horizontal projection.
    Preconditioned,
    /// Unscaled product metric; the quotient structure is ignored.
    Euclidean,
}

/// Largest tolerated `‖U_d^T U_d − I‖_F` before an iterate is
/// re-orthonormalized.
pub const ORTHO_DRIFT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iter: usize,
    /// Stop once the training MSE falls to this value.
    pub train_mse_tol: f64,
    /// Stop once `‖grad‖` falls below this fraction of its initial value.
    pub grad_norm_tol: f64,
    pub armijo_c: f64,
    pub armijo_contraction: f64,
    pub max_backtracks: usize,
    /// Restart with steepest descent when
    /// `g(d, −grad) ≤ threshold · ‖d‖ · ‖grad‖`.
    pub cg_restart_threshold: f64,
    pub method: Method,
    pub geometry: GeometryKind,
    pub early_stop_on_validation: bool,
    /// Consecutive validation-MSE increases that trigger early stopping.
    pub validation_patience: usize,
    /// Regularize degenerate cores instead of failing.
    pub ridge: bool,
    pub coupled_tol: f64,
    pub coupled_max_iter: usize,
    /// Record wall time in the trace; disable for byte-reproducible traces.
    pub record_wall_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 250,
            train_mse_tol: 1e-12,
            grad_norm_tol: 1e-12,
            armijo_c: 1e-4,
            armijo_contraction: 0.5,
            max_backtracks: 25,
            cg_restart_threshold: 1e-6,
            method: Method::Ncg,
            geometry: GeometryKind::Preconditioned,
            early_stop_on_validation: false,
            validation_patience: 3,
            ridge: false,
            coupled_tol: COUPLED_TOL,
            coupled_max_iter: COUPLED_MAX_ITER,
            record_wall_time: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(Error::invalid("armijo_c", "must lie in (0, 1)"));
        }
        if !(self.armijo_contraction > 0.0 && self.armijo_contraction < 1.0) {
            return Err(Error::invalid("armijo_contraction", "must lie in (0, 1)"));
        }
        if !(self.train_mse_tol >= 0.0) {
            return Err(Error::invalid("train_mse_tol", "must be non-negative"));
        }
        if !(self.grad_norm_tol >= 0.0) {
            return Err(Error::invalid("grad_norm_tol", "must be non-negative"));
        }
        if !(self.coupled_tol > 0.0) {
            return Err(Error::invalid("coupled_tol", "must be positive"));
        }
        if self.validation_patience == 0 {
            return Err(Error::invalid("validation_patience", "must be at least 1"));
        }
        Ok(())
    }

    fn quotient(&self) -> QuotientGeometry {
        QuotientGeometry {
            ridge: self.ridge,
            coupled_tol: self.coupled_tol,
            coupled_max_iter: self.coupled_max_iter,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "reason")]
pub enum RunStatus {
    Converged,
    MaxIter,
    ValidationStop,
    Error(String),
}

impl RunStatus {
    pub fn is_error(&self) -> bool {
        matches!(self, RunStatus::Error(_))
    }
}

/// One accepted iteration (iteration 0 is the starting point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
    pub validation_mse: Option<f64>,
    pub grad_norm: f64,
    pub step: f64,
    pub backtracks: usize,
    pub time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub status: RunStatus,
}

/// Column header of trace CSV files.
pub const TRACE_COLUMNS: &str = "iter,train_mse,test_mse,grad_norm,step,backtracks,time_s";

/// Formats a float so that parsing it back gives the same bits.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

impl RunTrace {
    /// Number of accepted iterations.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }

    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// First iteration whose training MSE is at or below `tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.train_mse <= tol).map(|r| r.iter)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRACE_COLUMNS}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.iter,
                fmt_f64(r.train_mse),
                fmt_f64(r.test_mse.unwrap_or(f64::NAN)),
                fmt_f64(r.grad_norm),
                fmt_f64(r.step),
                r.backtracks,
                fmt_f64(r.time_s)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec");
        String::from_utf8(buf).expect("ASCII output")
    }
}

/// Geometry-dependent pieces of one iteration.
struct Ops<'a, T: Real> {
    problem: &'a CompletionProblem<T>,
    kind: GeometryKind,
    quotient: QuotientGeometry,
}

impl<T: Real> Ops<'_, T> {
    fn cost_and_grad(&self, x: &TuckerPoint<T>) -> Result<(T, TuckerTangent<T>)> {
        match self.kind {
            GeometryKind::Preconditioned => self.problem.cost_and_grad(x, &self.quotient),
            GeometryKind::Euclidean => self.problem.cost_and_euclid_grad(x),
        }
    }

    fn inner(&self, x: &TuckerPoint<T>, a: &TuckerTangent<T>, b: &TuckerTangent<T>) -> Result<T> {
        match self.kind {
            GeometryKind::Preconditioned => self.quotient.metric(x, a, b),
            GeometryKind::Euclidean => Ok(a.euclid_dot(b)),
        }
    }

    fn transport_to(&self, y: &TuckerPoint<T>, xi: &TuckerTangent<T>) -> Result<TuckerTangent<T>> {
        match self.kind {
            GeometryKind::Preconditioned => self.quotient.transport_to(y, xi),
            GeometryKind::Euclidean => euclid_project_tangent(y, xi),
        }
    }
}

struct Observer<'a, T: Real> {
    problem: &'a CompletionProblem<T>,
    start: Instant,
    timed: bool,
}

impl<T: Real> Observer<'_, T> {
    fn record(
        &self,
        x: &TuckerPoint<T>,
        iter: usize,
        cost: T,
        grad_norm: T,
        step: T,
        backtracks: usize,
    ) -> Result<IterRecord> {
        let opt = |which| -> Result<Option<f64>> {
            match self.problem.set(which) {
                Some(_) => Ok(Some(self.problem.mse_on(x, which)?.to_f64_lossy())),
                None => Ok(None),
            }
        };
        Ok(IterRecord {
            iter,
            train_mse: cost.to_f64_lossy(),
            test_mse: opt(DataSet::Test)?,
            validation_mse: opt(DataSet::Validation)?,
            grad_norm: grad_norm.to_f64_lossy(),
            step: step.to_f64_lossy(),
            backtracks,
            time_s: if self.timed { self.start.elapsed().as_secs_f64() } else { 0.0 },
        })
    }
}

/// Runs the configured method from `x0`.
///
/// Invalid inputs are returned as `Err`. Numerical failures during the run
/// (line search exhaustion, degenerate core) end the run with
/// [`RunStatus::Error`] and return the last accepted point.
pub fn solve<T: Real>(
    problem: &CompletionProblem<T>,
    x0: &TuckerPoint<T>,
    cfg: &SolverConfig,
) -> Result<(TuckerPoint<T>, RunTrace)> {
    cfg.validate()?;
    if x0.dims() != problem.dims() || x0.ranks() != problem.ranks() {
        return Err(Error::mismatch(format!(
            "initial point dims {:?} ranks {:?}, problem dims {:?} ranks {:?}",
            x0.dims(),
            x0.ranks(),
            problem.dims(),
            problem.ranks()
        )));
    }
    let ops = Ops {
        problem,
        kind: cfg.geometry,
        quotient: cfg.quotient(),
    };
    let obs = Observer {
        problem,
        start: Instant::now(),
        timed: cfg.record_wall_time,
    };
    let mut records = Vec::new();
    let mut x = x0.clone();

    let (mut cost, mut grad) = match ops.cost_and_grad(&x) {
        Ok(v) => v,
        Err(e) => {
            return Ok((
                x,
                RunTrace {
                    records,
                    status: RunStatus::Error(e.to_string()),
                },
            ))
        }
    };
    let mut gnorm = ops.inner(&x, &grad, &grad)?.max(T::zero()).sqrt();
    let g0 = gnorm;
    records.push(obs.record(&x, 0, cost, gnorm, T::zero(), 0)?);

    let mut dir = grad.scale(-T::one());
    let mut last_step: Option<T> = None;
    let mut val_best = records[0].validation_mse;
    let mut val_increases = 0usize;
    let mut iter = 0usize;

    let status = loop {
        if cost <= T::of(cfg.train_mse_tol) {
            break RunStatus::Converged;
        }
        if gnorm == T::zero() || gnorm <= T::of(cfg.grad_norm_tol) * g0 {
            break RunStatus::Converged;
        }
        if iter >= cfg.max_iter {
            break RunStatus::MaxIter;
        }

        match step(&ops, cfg, &x, cost, &grad, gnorm, &mut dir, &mut last_step) {
            Ok(Outcome::Accepted(accepted)) => {
                iter += 1;
                x = accepted.point;
                cost = accepted.cost;
                let prev_grad = std::mem::replace(&mut grad, accepted.grad);
                gnorm = accepted.grad_norm;
                records.push(obs.record(&x, iter, cost, gnorm, accepted.step, accepted.backtracks)?);

                let next = match next_direction(&ops, cfg, &x, &grad, &prev_grad, &dir, accepted.step) {
                    Ok(d) => d,
                    Err(e) => break RunStatus::Error(e.to_string()),
                };
                dir = next;

                if cfg.early_stop_on_validation {
                    if let Some(v) = records.last().and_then(|r| r.validation_mse) {
                        match val_best {
                            Some(prev) if v > prev => val_increases += 1,
                            _ => val_increases = 0,
                        }
                        val_best = Some(v);
                        if val_increases >= cfg.validation_patience {
                            break RunStatus::ValidationStop;
                        }
                    }
                }
            }
            Ok(Outcome::Stalled) => {
                log::info!("line search stalled at working precision; stopping");
                break RunStatus::Converged;
            }
            Ok(Outcome::Failed) => {
                break RunStatus::Error(format!(
                    "Armijo line search failed after {} backtracks",
                    cfg.max_backtracks
                ))
            }
            Err(e) => break RunStatus::Error(e.to_string()),
        }
    };
    Ok((x, RunTrace { records, status }))
}

struct Accepted<T: Real> {
    point: TuckerPoint<T>,
    cost: T,
    grad: TuckerTangent<T>,
    grad_norm: T,
    step: T,
    backtracks: usize,
}

enum Outcome<T: Real> {
    Accepted(Accepted<T>),
    /// No decrease possible at working precision.
    Stalled,
    Failed,
}

/// Predicted decrease, relative to the cost, below which a failed line
/// search counts as stationarity at working precision.
const STALL_REL_DECREASE: f64 = 1e-10;

/// One line search along `dir` (reset to `−grad` when it is not a
/// sufficient descent direction).
#[allow(clippy::too_many_arguments)]
fn step<T: Real>(
    ops: &Ops<'_, T>,
    cfg: &SolverConfig,
    x: &TuckerPoint<T>,
    cost: T,
    grad: &TuckerTangent<T>,
    gnorm: T,
    dir: &mut TuckerTangent<T>,
    last_step: &mut Option<T>,
) -> Result<Outcome<T>> {
    let mut slope = ops.inner(x, grad, dir)?;
    let dnorm = ops.inner(x, dir, dir)?.max(T::zero()).sqrt();
    if !(-slope > T::of(cfg.cg_restart_threshold) * dnorm * gnorm) {
        *dir = grad.scale(-T::one());
        slope = -gnorm * gnorm;
    }

    let guess = ops.problem.stepsize_guess(x, dir).ok().filter(|s| *s > T::zero() && s.is_finite());
    let mut t = guess.or(*last_step).unwrap_or(T::one());
    let t0 = t;
    let c = T::of(cfg.armijo_c);
    let shrink = T::of(cfg.armijo_contraction);

    let mut backtracks = 0;
    let candidate = loop {
        let y = retract(x, &dir.scale(t))?;
        let cy = ops.problem.cost(&y)?;
        if cy <= cost + c * t * slope {
            break y;
        }
        if backtracks >= cfg.max_backtracks {
            // Even the first trial step promised a negligible decrease: the
            // iterate is stationary to working precision.
            let floor = T::of(STALL_REL_DECREASE).max(T::of(64.0) * T::eps());
            let stalled = t0 * -slope <= floor * cost.abs();
            return Ok(if stalled { Outcome::Stalled } else { Outcome::Failed });
        }
        t *= shrink;
        backtracks += 1;
    };
    *last_step = Some(t);

    let point = keep_orthonormal(candidate)?;
    let (new_cost, new_grad) = ops.cost_and_grad(&point)?;
    let grad_norm = ops.inner(&point, &new_grad, &new_grad)?.max(T::zero()).sqrt();
    Ok(Outcome::Accepted(Accepted {
        point,
        cost: new_cost,
        grad: new_grad,
        grad_norm,
        step: t,
        backtracks,
    }))
}

fn keep_orthonormal<T: Real>(x: TuckerPoint<T>) -> Result<TuckerPoint<T>> {
    if x.orthonormality_error() <= T::of(ORTHO_DRIFT_TOL) {
        return Ok(x);
    }
    log::warn!("factor orthonormality drifted to {:e}; re-orthonormalizing", x.orthonormality_error());
    let (factors, core) = x.into_parts();
    let [u1, u2, u3] = factors;
    TuckerPoint::from_parts([polar_factor(&u1)?, polar_factor(&u2)?, polar_factor(&u3)?], core)
}

/// `−grad + β T(d)` with Hestenes–Stiefel `β`, clamped at zero; steepest
/// descent when configured.
fn next_direction<T: Real>(
    ops: &Ops<'_, T>,
    cfg: &SolverConfig,
    y: &TuckerPoint<T>,
    grad: &TuckerTangent<T>,
    prev_grad: &TuckerTangent<T>,
    prev_dir: &TuckerTangent<T>,
    _step: T,
) -> Result<TuckerTangent<T>> {
    let steepest = grad.scale(-T::one());
    if cfg.method == Method::Sd {
        return Ok(steepest);
    }
    let moved_grad = ops.transport_to(y, prev_grad)?;
    let moved_dir = ops.transport_to(y, prev_dir)?;
    let diff = grad.sub(&moved_grad);
    let num = ops.inner(y, grad, &diff)?;
    let den = ops.inner(y, &moved_dir, &diff)?;
    let beta = if den > T::zero() && (num / den).is_finite() {
        (num / den).max(T::zero())
    } else {
        T::zero()
    };
    Ok(steepest.axpy(beta, &moved_dir))
}
