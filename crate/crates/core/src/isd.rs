//! Iterative support detection: alternate truncated weighted-l1 solves with
//! threshold-based support detection until the support stabilizes.
//!
//! Iteration 0 detects nothing, so the first solve is plain basis pursuit;
//! detected indices then drop out of the objective and the solver restarts
//! warm from the previous primal/dual state at a tightened tolerance.

use std::time::Instant;

use crate::linop::SensingOperator;
use crate::util::{kth_largest_magnitude, norm_inf, rel_l2};
use crate::wl1::{solve_weighted_l1, SolverConfig, SolverError, SolverState, Weights};

#[derive(Debug, Clone, PartialEq)]
pub enum DetectionRule {
    /// Threshold eps = ||x||_inf / beta^{s+1}.
    Geometric { beta: f64 },
    /// Fixed per-iteration counts of largest-magnitude entries.
    Toll { cardinality_schedule: Vec<usize> },
    /// First gap above tau in the ascending magnitude profile.
    FirstJump {
        kappa: f64,
        conservative_mult: f64,
        conservative_iters: usize,
    },
}

impl DetectionRule {
    pub fn first_jump_gaussian() -> Self {
        DetectionRule::FirstJump {
            kappa: 1.0,
            conservative_mult: 6.0,
            conservative_iters: 5,
        }
    }

    pub fn first_jump_wavelet() -> Self {
        DetectionRule::FirstJump {
            kappa: 1.0,
            conservative_mult: 8.0,
            conservative_iters: 8,
        }
    }

    /// Divisor class keyed on the decay rate of power-law signals.
    pub fn first_jump_power_law(lambda: f64) -> Self {
        let kappa = if lambda <= 0.5 {
            20.0
        } else if lambda <= 1.0 {
            5.0
        } else {
            2.0
        };
        DetectionRule::FirstJump {
            kappa,
            conservative_mult: 8.0,
            conservative_iters: 8,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        match self {
            DetectionRule::Geometric { beta } => {
                if !(*beta > 1.0) {
                    return Err(SolverError::InvalidConfig("geometric beta must be > 1".into()));
                }
            }
            DetectionRule::Toll {
                cardinality_schedule,
            } => {
                if cardinality_schedule.is_empty()
                    || cardinality_schedule.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(SolverError::InvalidConfig(
                        "toll schedule must be nonempty and strictly increasing".into(),
                    ));
                }
            }
            DetectionRule::FirstJump { kappa, .. } => {
                if !(*kappa >= 1.0) {
                    return Err(SolverError::InvalidConfig("first-jump kappa must be >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    SupportStable,
    HalfMRank,
    Both,
}

#[derive(Debug, Clone)]
pub struct IsdConfig {
    pub max_outer: usize,
    pub tol_first: f64,
    pub tol_middle: f64,
    pub tol_final: f64,
    pub stop_rule: StopRule,
    pub max_inner: usize,
}

impl Default for IsdConfig {
    fn default() -> Self {
        Self {
            max_outer: 9,
            tol_first: 1e-1,
            tol_middle: 1e-2,
            tol_final: 1e-6,
            stop_rule: StopRule::Both,
            max_inner: 10_000,
        }
    }
}

impl IsdConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_outer == 0 {
            return Err(SolverError::InvalidConfig("max_outer must be >= 1".into()));
        }
        if !(self.tol_final <= self.tol_middle && self.tol_middle <= self.tol_first) {
            return Err(SolverError::InvalidConfig(
                "need tol_final <= tol_middle <= tol_first".into(),
            ));
        }
        Ok(())
    }
}

/// Per-outer-iteration counts; the truth-relative fields are `None` when the
/// true signal was not supplied.
#[derive(Debug, Clone)]
pub struct IterationDiagnostics {
    pub det: usize,
    pub total: Option<usize>,
    pub c_det: Option<usize>,
    pub w_det: Option<usize>,
    pub err: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ReconReport {
    pub x_final: Vec<f64>,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub per_iter: Vec<IterationDiagnostics>,
    pub support_history: Vec<Vec<usize>>,
    pub wall_seconds: f64,
}

/// Jump threshold for the first-jump rule: base ||x||_inf / (m kappa), scaled
/// up by mult/(s+1) during the conservative early iterations.
pub fn tau_schedule(
    kappa: f64,
    conservative_mult: f64,
    conservative_iters: usize,
    s: usize,
    m: usize,
    xinf: f64,
) -> f64 {
    let base = xinf / (m as f64 * kappa);
    if s < conservative_iters {
        base * conservative_mult / (s + 1) as f64
    } else {
        base
    }
}

/// Detected index set for iterate `x` at outer iteration `s`.
pub fn detect_support(x: &[f64], rule: &DetectionRule, s: usize, m: usize) -> Vec<usize> {
    match rule {
        DetectionRule::Geometric { beta } => {
            let eps = norm_inf(x) / beta.powi(s as i32 + 1);
            (0..x.len()).filter(|&i| x[i].abs() > eps).collect()
        }
        DetectionRule::Toll {
            cardinality_schedule,
        } => {
            let count = *cardinality_schedule
                .get(s)
                .or_else(|| cardinality_schedule.last())
                .unwrap_or(&0);
            let mut idx = crate::util::indices_by_desc_magnitude(x);
            idx.truncate(count.min(x.len()));
            idx.sort_unstable();
            idx
        }
        DetectionRule::FirstJump {
            kappa,
            conservative_mult,
            conservative_iters,
        } => {
            let tau = tau_schedule(*kappa, *conservative_mult, *conservative_iters, s, m, norm_inf(x));
            let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
            mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let eps = mags
                .windows(2)
                .find(|w| w[1] - w[0] > tau)
                .map(|w| w[0]);
            match eps {
                Some(eps) => (0..x.len()).filter(|&i| x[i].abs() > eps).collect(),
                None => Vec::new(),
            }
        }
    }
}

/// Stopping decision from the support history, the running record of
/// (floor(m/2)+1)-th largest magnitudes, and the current iterate.
///
/// `feasible` says whether the iterate satisfies the measurements to final
/// accuracy; the half-m "tiny" test is only meaningful then. Coarse-tolerance
/// iterates can be artificially sparse (coordinates the dual has not reached
/// yet are exactly zero), which would otherwise stop the loop after one round.
pub fn stop_check(
    support_history: &[Vec<usize>],
    halfm_history: &[f64],
    x: &[f64],
    m: usize,
    feasible: bool,
    cfg: &IsdConfig,
) -> bool {
    let support_stable = {
        let h = support_history;
        if h.len() >= 3 {
            let k = h.len();
            h[k - 1] == h[k - 2] && h[k - 2] == h[k - 3]
        } else if h.len() == 2 && cfg.max_outer <= 3 {
            // No room for a third look; settle for two.
            h[1] == h[0]
        } else {
            false
        }
    };
    let halfm_rank = {
        let val = kth_largest_magnitude(x, m / 2 + 1);
        let tiny = feasible && val <= 1e-10 * norm_inf(x);
        let stagnant = halfm_history.len() >= 3 && {
            let k = halfm_history.len();
            halfm_history[k - 1] >= halfm_history[k - 3] * (1.0 - 1e-12)
                && halfm_history[k - 1] >= halfm_history[k - 2] * (1.0 - 1e-12)
        };
        tiny || stagnant
    };
    match cfg.stop_rule {
        StopRule::SupportStable => support_stable,
        StopRule::HalfMRank => halfm_rank,
        StopRule::Both => support_stable || halfm_rank,
    }
}

fn diagnostics(x: &[f64], detected: &[usize], truth: Option<&[f64]>) -> IterationDiagnostics {
    match truth {
        None => IterationDiagnostics {
            det: detected.len(),
            total: None,
            c_det: None,
            w_det: None,
            err: None,
        },
        Some(t) => {
            let supp: Vec<bool> = t.iter().map(|v| v.abs() > 0.0).collect();
            let c_det = detected.iter().filter(|&&i| supp[i]).count();
            IterationDiagnostics {
                det: detected.len(),
                total: Some(supp.iter().filter(|&&s| s).count()),
                c_det: Some(c_det),
                w_det: Some(detected.len() - c_det),
                err: Some(rel_l2(x, t)),
            }
        }
    }
}

/// Full ISD run. `sigma > 0` switches the inner solver to the denoising model
/// with rho = sigma * sqrt(m).
pub fn isd_run(
    op: &SensingOperator,
    b: &[f64],
    rule: &DetectionRule,
    cfg: &IsdConfig,
    sigma: f64,
    truth: Option<&[f64]>,
) -> Result<ReconReport, SolverError> {
    cfg.validate()?;
    rule.validate()?;
    let start = Instant::now();
    let (m, n) = (op.m(), op.n());
    let rho = if sigma > 0.0 {
        sigma * (m as f64).sqrt()
    } else {
        0.0
    };

    let mut state: Option<SolverState> = None;
    let mut detected: Vec<usize> = Vec::new();
    let mut weights = Weights::ones(n);
    let mut per_iter = Vec::new();
    let mut support_history: Vec<Vec<usize>> = Vec::new();
    let mut halfm_history: Vec<f64> = Vec::new();
    let mut inner_total = 0usize;
    let mut x = vec![0.0; n];
    let mut outer_iters = 0usize;

    for s in 0..cfg.max_outer {
        let tol = if s == 0 { cfg.tol_first } else { cfg.tol_middle };
        weights = Weights::truncated(n, &detected);
        let inner_cfg = SolverConfig {
            rho,
            tol,
            max_inner: cfg.max_inner,
            ..SolverConfig::default()
        };
        let out = solve_weighted_l1(op, b, &weights, &inner_cfg, state.take())?;
        inner_total += out.iters;
        state = Some(out.state);
        x = out.x;

        detected = detect_support(&x, rule, s, m);
        detected.sort_unstable();
        per_iter.push(diagnostics(&x, &detected, truth));
        support_history.push(detected.clone());
        // The first solve runs at the loose tolerance; its half-m value is not
        // comparable with the later ones and is left out of the stagnation
        // record.
        if s > 0 || cfg.tol_first == cfg.tol_middle {
            halfm_history.push(kth_largest_magnitude(&x, m / 2 + 1));
        }
        let ax = op.apply(&x)?;
        let resid: f64 = ax
            .iter()
            .zip(b)
            .map(|(u, v)| (u - v) * (u - v))
            .sum::<f64>()
            .sqrt();
        let b_norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let feasible = resid <= 1e-6 * b_norm.max(1e-12);
        outer_iters = s + 1;
        if stop_check(&support_history, &halfm_history, &x, m, feasible, cfg) {
            break;
        }
    }

    // Resume the last solve to full accuracy: same truncated objective, warm
    // state, tightened tolerance.
    let final_cfg = SolverConfig {
        rho,
        tol: cfg.tol_final,
        max_inner: cfg.max_inner,
        ..SolverConfig::default()
    };
    let out = solve_weighted_l1(op, b, &weights, &final_cfg, state)?;
    inner_total += out.iters;
    let x_final = out.x;
    if let (Some(t), Some(last)) = (truth, per_iter.last_mut()) {
        last.err = Some(rel_l2(&x_final, t));
    }
    let _ = x;

    Ok(ReconReport {
        x_final,
        outer_iters,
        inner_iters_total: inner_total,
        per_iter,
        support_history,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
