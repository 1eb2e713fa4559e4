//! Experiment runner: seeded trial fan-out over (m, rep, algorithm), metric
//! evaluation, and CSV/JSON emission.

use std::io::Write;
use std::time::Instant;

use isd_core::isd::{isd_run, DetectionRule, IsdConfig};
use isd_core::linop::{SensingOperator, SynthesisTransform};
use isd_core::reweighted::{irl1_run, irls_run, IrlsEpsSchedule, ReweightConfig};
use isd_core::rng::derive_seed;
use isd_core::signal::{add_noise, gen_signal, shepp_logan, sparsify_top_k, Signal, SignalKind};
use isd_core::util::{rel_l1, rel_l2};
use isd_core::wl1::{solve_weighted_l1, SolverConfig, Weights};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("truth signal has zero norm")]
    ZeroTruth,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization failed: {0}")]
    Serde(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Bp,
    Isd,
    Irl1,
    Irls,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::Bp => "bp",
            Algo::Isd => "isd",
            Algo::Irl1 => "irl1",
            Algo::Irls => "irls",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        match s {
            "bp" => Ok(Algo::Bp),
            "isd" => Ok(Algo::Isd),
            "irl1" => Ok(Algo::Irl1),
            "irls" => Ok(Algo::Irls),
            other => Err(ExperimentError::InvalidSpec(format!(
                "unknown algorithm: {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorChoice {
    Gaussian,
    PartialDct,
    /// Partial DCT composed with 2-D Haar synthesis (image pipeline).
    PartialDctHaar,
}

/// Inclusive m sweep `start:step:stop`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MRange {
    pub start: usize,
    pub step: usize,
    pub stop: usize,
}

impl MRange {
    pub fn single(m: usize) -> Self {
        Self {
            start: m,
            step: 1,
            stop: m,
        }
    }

    pub fn values(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut m = self.start;
        while m <= self.stop {
            out.push(m);
            m += self.step.max(1);
        }
        out
    }

    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| ExperimentError::InvalidSpec(format!("bad m-range component: {t}")))
        };
        match parts.as_slice() {
            [one] => Ok(Self::single(num(one)?)),
            [start, step, stop] => Ok(Self {
                start: num(start)?,
                step: num(step)?,
                stop: num(stop)?,
            }),
            _ => Err(ExperimentError::InvalidSpec(format!(
                "m-range must be `m` or `start:step:stop`, got {s}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalChoice {
    Gaussian,
    Bernoulli,
    PowerLawSparse,
    PowerLawCompressible,
    Phantom,
}

/// Tolerance / smoothing schedule preset, per test-set family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Noise-free sparse sets: ISD (1e-1, 1e-2, 1e-6), IRLS default schedule.
    Noiseless,
    /// Noisy measurements: final tolerance sqrt(sigma)/100 for every solver.
    Noisy,
    /// Power-law signals: IRLS eps 10^{-3/2} sqrt(zeta), floor 1e-9.
    PowerLaw,
    /// Sparse Bernoulli: IRLS eps sqrt(zeta)/10, floor 1e-10.
    Bernoulli,
    /// Image pipeline: final tolerance max(1e-4, sigma/10).
    Image,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub testset: String,
    pub algos: Vec<Algo>,
    pub operator: OperatorChoice,
    pub signal: SignalChoice,
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub m_range: MRange,
    pub reps: usize,
    pub master_seed: u64,
    pub success_threshold: f64,
    pub preset: Preset,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.reps == 0 {
            return Err(ExperimentError::InvalidSpec("reps must be >= 1".into()));
        }
        if self.algos.is_empty() {
            return Err(ExperimentError::InvalidSpec("need at least one algorithm".into()));
        }
        if self.m_range.start == 0 || self.m_range.stop > self.n {
            return Err(ExperimentError::InvalidSpec(format!(
                "m-range {}..{} out of [1, n={}]",
                self.m_range.start, self.m_range.stop, self.n
            )));
        }
        if self.k > self.n {
            return Err(ExperimentError::InvalidSpec("k exceeds n".into()));
        }
        if self.signal == SignalChoice::Phantom {
            let side = (self.n as f64).sqrt() as usize;
            if side * side != self.n || side % 8 != 0 {
                return Err(ExperimentError::InvalidSpec(
                    "phantom runs need n = side^2 with side divisible by 8".into(),
                ));
            }
        }
        Ok(())
    }

    /// Built-in desk-scale test sets 1-5.
    pub fn preset_testset(id: usize) -> Result<Self, ExperimentError> {
        let all = vec![Algo::Bp, Algo::Isd, Algo::Irl1, Algo::Irls];
        let no_irls = vec![Algo::Bp, Algo::Isd, Algo::Irl1];
        let base = |testset: &str| ExperimentSpec {
            testset: testset.to_string(),
            algos: all.clone(),
            operator: OperatorChoice::Gaussian,
            signal: SignalChoice::Gaussian,
            n: 600,
            k: 40,
            lambda: 0.0,
            sigma: 0.0,
            m_range: MRange::single(220),
            reps: 20,
            master_seed: 1,
            success_threshold: 1e-3,
            preset: Preset::Noiseless,
        };
        let spec = match id {
            1 => ExperimentSpec {
                m_range: MRange {
                    start: 100,
                    step: 30,
                    stop: 220,
                },
                ..base("1")
            },
            2 => ExperimentSpec {
                n: 3000,
                k: 100,
                m_range: MRange {
                    start: 200,
                    step: 100,
                    stop: 800,
                },
                reps: 5,
                algos: no_irls.clone(),
                ..base("2")
            },
            3 => ExperimentSpec {
                n: 2000,
                k: 100,
                sigma: 1e-3,
                m_range: MRange::single(325),
                preset: Preset::Noisy,
                algos: no_irls.clone(),
                ..base("3")
            },
            4 => ExperimentSpec {
                signal: SignalChoice::PowerLawSparse,
                lambda: 2.0,
                m_range: MRange {
                    start: 100,
                    step: 30,
                    stop: 220,
                },
                reps: 10,
                preset: Preset::PowerLaw,
                ..base("4")
            },
            5 => ExperimentSpec {
                operator: OperatorChoice::PartialDctHaar,
                signal: SignalChoice::Phantom,
                n: 32 * 32,
                k: 0,
                m_range: MRange::single(410),
                reps: 10,
                algos: no_irls,
                preset: Preset::Image,
                ..base("5")
            },
            other => {
                return Err(ExperimentError::InvalidSpec(format!(
                    "test set id must be 1-5, got {other}"
                )))
            }
        };
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRow {
    pub testset: String,
    pub algo: String,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub sigma: f64,
    pub seed: u64,
    pub rel_err_l2: f64,
    pub rel_err_l1: f64,
    pub success: bool,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub wall_seconds: f64,
    pub det: usize,
    pub c_det: usize,
    pub w_det: usize,
}

pub const CSV_HEADER: &str = "testset,algo,n,m,k,sigma,seed,rel_err_l2,rel_err_l1,success,outer_iters,inner_iters,wall_seconds,det,c_det,w_det";

#[derive(Debug, Clone)]
pub struct Metrics {
    pub rel_err_l2: f64,
    pub rel_err_l1: f64,
    pub success: bool,
    pub total: usize,
    pub det: usize,
    pub c_det: usize,
    pub w_det: usize,
}

/// Error metrics and support quadruplet for a solution against the truth.
pub fn evaluate(
    x: &[f64],
    truth: &Signal,
    threshold: f64,
    detected: Option<&[usize]>,
) -> Result<Metrics, ExperimentError> {
    if x.len() != truth.n() {
        return Err(ExperimentError::InvalidSpec("length mismatch".into()));
    }
    if truth.values.iter().all(|&v| v == 0.0) {
        return Err(ExperimentError::ZeroTruth);
    }
    let rel2 = rel_l2(x, &truth.values);
    let rel1 = rel_l1(x, &truth.values);
    let in_supp = |i: usize| truth.values[i].abs() > 0.0;
    let (det, c_det) = match detected {
        Some(set) => (set.len(), set.iter().filter(|&&i| in_supp(i)).count()),
        None => (0, 0),
    };
    Ok(Metrics {
        rel_err_l2: rel2,
        rel_err_l1: rel1,
        success: rel2 <= threshold,
        total: truth.true_support.len(),
        det,
        c_det,
        w_det: det - c_det,
    })
}

fn solver_tolerances(preset: Preset, sigma: f64) -> (f64, f64) {
    // (intermediate, final) inner tolerances.
    match preset {
        Preset::Noiseless | Preset::PowerLaw | Preset::Bernoulli => (1e-2, 1e-6),
        Preset::Noisy => {
            let eps = sigma.max(0.0).sqrt() / 100.0;
            (1e-2, eps.max(1e-8))
        }
        Preset::Image => (1e-2, (sigma / 10.0).max(1e-4)),
    }
}

fn detection_rule(spec: &ExperimentSpec) -> DetectionRule {
    match spec.signal {
        SignalChoice::Gaussian | SignalChoice::Bernoulli => DetectionRule::first_jump_gaussian(),
        SignalChoice::PowerLawSparse | SignalChoice::PowerLawCompressible => {
            DetectionRule::first_jump_power_law(spec.lambda)
        }
        SignalChoice::Phantom => DetectionRule::first_jump_wavelet(),
    }
}

fn reweight_config(spec: &ExperimentSpec, tol_final: f64) -> ReweightConfig {
    let mut cfg = match spec.preset {
        Preset::PowerLaw => ReweightConfig::irls_power_law(),
        Preset::Bernoulli => ReweightConfig::irls_bernoulli(),
        _ => ReweightConfig::default(),
    };
    if spec.signal == SignalChoice::Bernoulli {
        cfg.eps_schedule = IrlsEpsSchedule::Bernoulli;
        cfg.zeta_floor = 1e-10;
    }
    cfg.eps_final = tol_final;
    cfg.inner_tol = tol_final;
    cfg
}

/// Operator + true coefficient vector + measurements for one trial.
fn build_instance(
    spec: &ExperimentSpec,
    m: usize,
    rep: usize,
) -> Result<(SensingOperator, Signal, Vec<f64>, u64), ExperimentError> {
    let trial_seed = derive_seed(spec.master_seed, &[m as u64, rep as u64]);
    let op_seed = derive_seed(trial_seed, &[1]);
    let sig_seed = derive_seed(trial_seed, &[2]);
    let noise_seed = derive_seed(trial_seed, &[3]);
    let bad = |e: String| ExperimentError::InvalidSpec(e);

    let (op, truth) = match spec.signal {
        SignalChoice::Phantom => {
            let side = (spec.n as f64).sqrt() as usize;
            let levels = 3;
            let image = shepp_logan(side);
            let transform = SynthesisTransform::haar2d(side, levels)
                .map_err(|e| bad(e.to_string()))?;
            let coeffs = transform.analyze(&image).map_err(|e| bad(e.to_string()))?;
            // Tail-removed coefficients: the reference phantom's wavelet
            // magnitudes drop sharply at about a tenth of the dimension, so
            // the scaled-down truth keeps that proportion (or spec.k if set).
            let keep = if spec.k > 0 {
                spec.k
            } else {
                (spec.n * 1600) / 16384
            };
            let coeffs = sparsify_top_k(&coeffs, keep);
            let inner = match spec.operator {
                OperatorChoice::PartialDctHaar | OperatorChoice::PartialDct => {
                    SensingOperator::partial_dct(spec.n, m, op_seed)
                }
                OperatorChoice::Gaussian => SensingOperator::gaussian(m, spec.n, op_seed),
            }
            .map_err(|e| bad(e.to_string()))?;
            let op = SensingOperator::compose_synthesis(inner, transform)
                .map_err(|e| bad(e.to_string()))?;
            let true_support = (0..coeffs.len()).filter(|&i| coeffs[i] != 0.0).collect();
            let k = coeffs.iter().filter(|v| v.abs() > 0.0).count();
            let truth = Signal {
                values: coeffs,
                true_support,
                kind: SignalKind::Gaussian,
                k,
                seed: sig_seed,
            };
            (op, truth)
        }
        _ => {
            let kind = match spec.signal {
                SignalChoice::Gaussian => SignalKind::Gaussian,
                SignalChoice::Bernoulli => SignalKind::Bernoulli,
                SignalChoice::PowerLawSparse => SignalKind::PowerLaw {
                    lambda: spec.lambda,
                    sparse: true,
                },
                SignalChoice::PowerLawCompressible => SignalKind::PowerLaw {
                    lambda: spec.lambda,
                    sparse: false,
                },
                SignalChoice::Phantom => unreachable!(),
            };
            let truth = gen_signal(kind, spec.n, spec.k, sig_seed).map_err(|e| bad(e.to_string()))?;
            let op = match spec.operator {
                OperatorChoice::Gaussian => SensingOperator::gaussian(m, spec.n, op_seed),
                OperatorChoice::PartialDct | OperatorChoice::PartialDctHaar => {
                    SensingOperator::partial_dct(spec.n, m, op_seed)
                }
            }
            .map_err(|e| bad(e.to_string()))?;
            (op, truth)
        }
    };
    let clean = op.apply(&truth.values).map_err(|e| bad(e.to_string()))?;
    let b = add_noise(&clean, spec.sigma, noise_seed);
    Ok((op, truth, b, trial_seed))
}

fn failure_row(spec: &ExperimentSpec, algo: Algo, m: usize, seed: u64) -> ResultRow {
    ResultRow {
        testset: spec.testset.clone(),
        algo: algo.name().to_string(),
        n: spec.n,
        m,
        k: spec.k,
        sigma: spec.sigma,
        seed,
        rel_err_l2: f64::NAN,
        rel_err_l1: f64::NAN,
        success: false,
        outer_iters: 0,
        inner_iters: 0,
        wall_seconds: 0.0,
        det: 0,
        c_det: 0,
        w_det: 0,
    }
}

fn run_one(
    spec: &ExperimentSpec,
    algo: Algo,
    op: &SensingOperator,
    truth: &Signal,
    b: &[f64],
    seed: u64,
    m: usize,
) -> ResultRow {
    let (tol_mid, tol_final) = solver_tolerances(spec.preset, spec.sigma);
    let rho = if spec.sigma > 0.0 {
        spec.sigma * (m as f64).sqrt()
    } else {
        0.0
    };
    let start = Instant::now();
    let outcome: Result<(Vec<f64>, usize, usize, Vec<usize>), String> = match algo {
        Algo::Bp => {
            let cfg = SolverConfig {
                rho,
                tol: tol_final,
                ..SolverConfig::default()
            };
            solve_weighted_l1(op, b, &Weights::ones(op.n()), &cfg, None)
                .map(|out| (out.x, 1, out.iters, Vec::new()))
                .map_err(|e| e.to_string())
        }
        Algo::Isd => {
            let cfg = IsdConfig {
                tol_middle: tol_mid,
                tol_final,
                ..IsdConfig::default()
            };
            isd_run(op, b, &detection_rule(spec), &cfg, spec.sigma, Some(&truth.values))
                .map(|rep| {
                    let detected = rep.support_history.last().cloned().unwrap_or_default();
                    (rep.x_final, rep.outer_iters, rep.inner_iters_total, detected)
                })
                .map_err(|e| e.to_string())
        }
        Algo::Irl1 => {
            let cfg = reweight_config(spec, tol_final);
            irl1_run(op, b, &cfg, rho, Some(&truth.values))
                .map(|rep| (rep.x_final, rep.outer_iters, rep.inner_iters_total, Vec::new()))
                .map_err(|e| e.to_string())
        }
        Algo::Irls => {
            let cfg = reweight_config(spec, tol_final);
            irls_run(op, b, &cfg, Some(&truth.values))
                .map(|rep| (rep.x_final, rep.outer_iters, rep.inner_iters_total, Vec::new()))
                .map_err(|e| e.to_string())
        }
    };
    let wall = start.elapsed().as_secs_f64();
    match outcome {
        Err(_) => failure_row(spec, algo, m, seed),
        Ok((x, outer, inner, detected)) => {
            match evaluate(&x, truth, spec.success_threshold, Some(&detected)) {
                Err(_) => failure_row(spec, algo, m, seed),
                Ok(metrics) => ResultRow {
                    testset: spec.testset.clone(),
                    algo: algo.name().to_string(),
                    n: spec.n,
                    m,
                    k: spec.k,
                    sigma: spec.sigma,
                    seed,
                    rel_err_l2: metrics.rel_err_l2,
                    rel_err_l1: metrics.rel_err_l1,
                    success: metrics.success,
                    outer_iters: outer,
                    inner_iters: inner,
                    wall_seconds: wall,
                    det: metrics.det,
                    c_det: metrics.c_det,
                    w_det: metrics.w_det,
                },
            }
        }
    }
}

/// Runs every (m, rep, algo) trial, fanning out over `jobs` workers; rows come
/// back sorted by (m, rep, algo) so parallelism never reorders output.
pub fn run_experiment(spec: &ExperimentSpec, jobs: usize) -> Result<Vec<ResultRow>, ExperimentError> {
    spec.validate()?;
    let mut trials: Vec<(usize, usize)> = Vec::new();
    for m in spec.m_range.values() {
        for rep in 0..spec.reps {
            trials.push((m, rep));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
    let mut rows: Vec<((usize, usize, usize), ResultRow)> = pool.install(|| {
        trials
            .par_iter()
            .flat_map(|&(m, rep)| {
                let per_trial: Vec<((usize, usize, usize), ResultRow)> = match build_instance(
                    spec, m, rep,
                ) {
                    Err(_) => spec
                        .algos
                        .iter()
                        .enumerate()
                        .map(|(ai, &algo)| ((m, rep, ai), failure_row(spec, algo, m, 0)))
                        .collect(),
                    Ok((op, truth, b, seed)) => spec
                        .algos
                        .iter()
                        .enumerate()
                        .map(|(ai, &algo)| {
                            ((m, rep, ai), run_one(spec, algo, &op, &truth, &b, seed, m))
                        })
                        .collect(),
                };
                per_trial
            })
            .collect()
    });
    rows.sort_by_key(|(key, _)| *key);
    Ok(rows.into_iter().map(|(_, row)| row).collect())
}

/// Success frequency per (m, algo) from a set of rows.
pub fn success_frequency(rows: &[ResultRow], algo: Algo, m: usize) -> f64 {
    let matching: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.algo == algo.name() && r.m == m)
        .collect();
    if matching.is_empty() {
        return 0.0;
    }
    matching.iter().filter(|r| r.success).count() as f64 / matching.len() as f64
}

pub fn write_csv<W: Write>(out: &mut W, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    writeln!(out, "{CSV_HEADER}")?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in rows {
        w.serialize(row)
            .map_err(|e| ExperimentError::Serde(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct JsonReport {
    pub manifest: Manifest,
    pub rows: Vec<ResultRow>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: ExperimentSpec,
    pub package_version: String,
    pub master_seed: u64,
}

pub fn write_json<W: Write>(
    out: &mut W,
    spec: &ExperimentSpec,
    rows: &[ResultRow],
) -> Result<(), ExperimentError> {
    let report = JsonReport {
        manifest: Manifest {
            spec: spec.clone(),
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: spec.master_seed,
        },
        rows: rows.to_vec(),
    };
    serde_json::to_writer_pretty(&mut *out, &report)
        .map_err(|e| ExperimentError::Serde(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}
