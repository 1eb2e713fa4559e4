//! Reweighted-l1 (IRL1) and reweighted least-squares (IRLS) baselines.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::isd::{IterationDiagnostics, ReconReport};
use crate::linop::SensingOperator;
use crate::util::{norm2, rel_l2};
use crate::wl1::{solve_weighted_l1, SolverConfig, SolverError, SolverState, Weights};

#[derive(Debug, Error)]
pub enum ReweightError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("IRLS needs an operator with explicit dense entries")]
    DenseRequired,
    #[error("A Q A^T is numerically singular")]
    SingularSystem,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Relative-change threshold used to trigger the next smoothing reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrlsEpsSchedule {
    /// sqrt(zeta)/100.
    Default,
    /// 10^{-3/2} sqrt(zeta).
    PowerLaw,
    /// sqrt(zeta)/10.
    Bernoulli,
}

impl IrlsEpsSchedule {
    pub fn eps(&self, zeta: f64) -> f64 {
        match self {
            IrlsEpsSchedule::Default => zeta.sqrt() / 100.0,
            IrlsEpsSchedule::PowerLaw => zeta.sqrt() * 10f64.powf(-1.5),
            IrlsEpsSchedule::Bernoulli => zeta.sqrt() / 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReweightConfig {
    pub outer_iters: usize,
    pub eta0: f64,
    pub eta_decay: f64,
    pub zeta0: f64,
    pub zeta_decay: f64,
    pub zeta_floor: f64,
    pub eps_schedule: IrlsEpsSchedule,
    pub eps_final: f64,
    /// Inner tolerance for each IRL1 weighted solve.
    pub inner_tol: f64,
    pub max_inner: usize,
}

impl Default for ReweightConfig {
    fn default() -> Self {
        Self {
            outer_iters: 9,
            eta0: 1.0,
            eta_decay: 0.5,
            zeta0: 1.0,
            zeta_decay: 0.1,
            zeta_floor: 1e-8,
            eps_schedule: IrlsEpsSchedule::Default,
            eps_final: 1e-6,
            inner_tol: 1e-6,
            max_inner: 10_000,
        }
    }
}

impl ReweightConfig {
    pub fn irls_power_law() -> Self {
        Self {
            eps_schedule: IrlsEpsSchedule::PowerLaw,
            zeta_floor: 1e-9,
            ..Self::default()
        }
    }

    pub fn irls_bernoulli() -> Self {
        Self {
            eps_schedule: IrlsEpsSchedule::Bernoulli,
            zeta_floor: 1e-10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ReweightError> {
        for (name, v) in [("eta_decay", self.eta_decay), ("zeta_decay", self.zeta_decay)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ReweightError::InvalidConfig(format!(
                    "{name} must lie in (0, 1), got {v}"
                )));
            }
        }
        if !(self.zeta_floor > 0.0) {
            return Err(ReweightError::InvalidConfig("zeta_floor must be positive".into()));
        }
        if !(self.eta0 > 0.0 && self.zeta0 > 0.0) {
            return Err(ReweightError::InvalidConfig("smoothing starts must be positive".into()));
        }
        Ok(())
    }
}

/// IRL1 weights for exponent p = 0: w_i = (|x_i| + eta)^{-1}.
pub fn irl1_weights(x: &[f64], eta: f64) -> Result<Weights, SolverError> {
    Weights::new(x.iter().map(|v| 1.0 / (v.abs() + eta)).collect())
}

fn diag(x: &[f64], truth: Option<&[f64]>) -> IterationDiagnostics {
    IterationDiagnostics {
        det: 0,
        total: truth.map(|t| t.iter().filter(|v| v.abs() > 0.0).count()),
        c_det: truth.map(|_| 0),
        w_det: truth.map(|_| 0),
        err: truth.map(|t| rel_l2(x, t)),
    }
}

/// Iteratively reweighted l1: plain BP first, then `outer_iters` weighted
/// solves with w = (|x| + eta)^{-1}, halving eta after each.
pub fn irl1_run(
    op: &SensingOperator,
    b: &[f64],
    cfg: &ReweightConfig,
    rho: f64,
    truth: Option<&[f64]>,
) -> Result<ReconReport, ReweightError> {
    cfg.validate()?;
    let start = Instant::now();
    let n = op.n();
    let solver_cfg = SolverConfig {
        rho,
        tol: cfg.inner_tol,
        max_inner: cfg.max_inner,
        ..SolverConfig::default()
    };
    let mut per_iter = Vec::new();
    let mut inner_total = 0usize;

    let out = solve_weighted_l1(op, b, &Weights::ones(n), &solver_cfg, None)?;
    inner_total += out.iters;
    let mut state: Option<SolverState> = Some(out.state);
    let mut x = out.x;
    per_iter.push(diag(&x, truth));

    let mut eta = cfg.eta0;
    for _ in 0..cfg.outer_iters {
        let w = irl1_weights(&x, eta)?;
        // Rescale so max w = 1: the minimizer is scale-invariant, but the
        // dual box |A'y| <= w conditions the solver much better when the
        // weights fit in [0, 1] instead of growing like 1/eta.
        let wmax = w.as_slice().iter().cloned().fold(0.0f64, f64::max);
        let w = Weights::new(w.as_slice().iter().map(|v| v / wmax).collect())?;
        let out = solve_weighted_l1(op, b, &w, &solver_cfg, state.take())?;
        inner_total += out.iters;
        state = Some(out.state);
        x = out.x;
        per_iter.push(diag(&x, truth));
        eta *= cfg.eta_decay;
    }

    Ok(ReconReport {
        x_final: x,
        outer_iters: cfg.outer_iters,
        inner_iters_total: inner_total,
        per_iter,
        support_history: Vec::new(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Minimum-norm solution A^T (A A^T)^{-1} b.
pub fn min_norm_solution(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, ReweightError> {
    let gram = a * a.transpose();
    let chol = spd_factor(gram)?;
    Ok(a.transpose() * chol.solve(b))
}

fn spd_factor(mat: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>, ReweightError> {
    let chol = Cholesky::new(mat).ok_or(ReweightError::SingularSystem)?;
    let diag = chol.l_dirty();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..diag.nrows() {
        let d = diag[(i, i)];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    // Reciprocal-condition gate on the factor's diagonal.
    if !(lo > 0.0) || (lo / hi).powi(2) < 1e-14 {
        return Err(ReweightError::SingularSystem);
    }
    Ok(chol)
}

fn irls_step(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    x: &DVector<f64>,
    zeta: f64,
) -> Result<DVector<f64>, ReweightError> {
    let n = a.ncols();
    let q: Vec<f64> = (0..n).map(|i| x[i] * x[i] + zeta).collect();
    // A Q A^T without forming Q.
    let mut aq = a.clone();
    for j in 0..n {
        for i in 0..a.nrows() {
            aq[(i, j)] *= q[j];
        }
    }
    let chol = spd_factor(&aq * a.transpose())?;
    let y = chol.solve(b);
    let mut out = a.transpose() * y;
    for i in 0..n {
        out[i] *= q[i];
    }
    Ok(out)
}

const IRLS_ITER_CAP: usize = 1000;

/// Iteratively reweighted least squares with p = 0: exact solves of the
/// weighted normal equations, smoothing zeta divided by 10 whenever the
/// relative change passes the schedule threshold, finishing at eps_final
/// once zeta reaches its floor.
pub fn irls_run(
    op: &SensingOperator,
    b: &[f64],
    cfg: &ReweightConfig,
    truth: Option<&[f64]>,
) -> Result<ReconReport, ReweightError> {
    cfg.validate()?;
    let start = Instant::now();
    let entries = op.dense_entries().ok_or(ReweightError::DenseRequired)?;
    let a = DMatrix::from_row_slice(op.m(), op.n(), entries);
    let bv = DVector::from_column_slice(b);

    let mut x = min_norm_solution(&a, &bv)?;
    let mut per_iter = vec![diag(x.as_slice(), truth)];
    let mut zeta = cfg.zeta0;
    let mut outer = 0usize;
    for _ in 0..IRLS_ITER_CAP {
        let xn = irls_step(&a, &bv, &x, zeta)?;
        let rel = (&xn - &x).norm() / norm2(x.as_slice()).max(1e-300);
        x = xn;
        outer += 1;
        per_iter.push(diag(x.as_slice(), truth));
        let at_floor = zeta <= cfg.zeta_floor * (1.0 + 1e-12);
        let eps = if at_floor {
            cfg.eps_final
        } else {
            cfg.eps_schedule.eps(zeta)
        };
        if rel <= eps {
            if at_floor {
                break;
            }
            zeta = (zeta * cfg.zeta_decay).max(cfg.zeta_floor);
        }
    }

    Ok(ReconReport {
        x_final: x.as_slice().to_vec(),
        outer_iters: outer,
        inner_iters_total: outer,
        per_iter,
        support_history: Vec::new(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
