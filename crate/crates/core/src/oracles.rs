//! Exact small-scale oracles and null-space-property calculators.
//!
//! Everything here is enumeration-based and hard-capped in problem size:
//! these functions certify the iterative solvers on tiny instances rather
//! than scale to real ones.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;


#[derive(Debug, Error)]
pub enum OracleError {
    #[error("problem size exceeds the exhaustive-oracle cap: {0}")]
    SizeLimit(String),
    #[error("no feasible point found")]
    Infeasible,
    #[error("gamma_bar = {0} >= 1: stability constant undefined")]
    GammaTooLarge(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

// ---------------------------------------------------------------------------
// Null space basis
// ---------------------------------------------------------------------------

/// Orthonormal basis of the null space of A, built by completing an
/// orthonormal basis of the row space (modified Gram-Schmidt, applied twice
/// so residual row-space components stay at rounding level).
#[derive(Debug, Clone)]
pub struct NullSpaceBasis {
    n: usize,
    columns: Vec<DVector<f64>>,
}

const RANK_TOL: f64 = 1e-10;

impl NullSpaceBasis {
    pub fn compute(a: &DMatrix<f64>) -> Self {
        let n = a.ncols();
        let mut row_basis: Vec<DVector<f64>> = Vec::new();
        for i in 0..a.nrows() {
            let mut v: DVector<f64> = a.row(i).transpose();
            let scale = v.norm().max(1.0);
            reorthogonalize(&mut v, &row_basis);
            if v.norm() > RANK_TOL * scale {
                let nv = v.norm();
                row_basis.push(v / nv);
            }
        }
        let mut columns: Vec<DVector<f64>> = Vec::new();
        for j in 0..n {
            let mut v = DVector::zeros(n);
            v[j] = 1.0;
            reorthogonalize(&mut v, &row_basis);
            reorthogonalize(&mut v, &columns);
            if v.norm() > 1e-8 {
                let nv = v.norm();
                columns.push(v / nv);
            }
        }
        Self { n, columns }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn columns(&self) -> &[DVector<f64>] {
        &self.columns
    }

    /// Linear combination of basis vectors with coefficients `w`.
    pub fn vector(&self, w: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (c, &wi) in self.columns.iter().zip(w) {
            out.axpy(wi, c, 1.0);
        }
        out
    }
}

fn reorthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let coef = v.dot(q);
            v.axpy(-coef, q, 1.0);
        }
    }
}

// ---------------------------------------------------------------------------
// Truncated basis pursuit LP oracle
// ---------------------------------------------------------------------------

const LP_N_CAP: usize = 12;
const LP_M_CAP: usize = 6;

/// Exact minimizer of `sum_{i in T} |x_i|  s.t. Ax = b` on tiny instances.
///
/// Splits x = u - v with u, v >= 0 and enumerates all column subsets of the
/// 2n-column system of size up to m; every basic feasible point is examined
/// and a minimizing vertex returned together with the optimal objective.
pub fn lp_truncated_bp(
    a: &DMatrix<f64>,
    b: &[f64],
    t_set: &[usize],
) -> Result<(Vec<f64>, f64), OracleError> {
    let (m, n) = (a.nrows(), a.ncols());
    if n > LP_N_CAP || m > LP_M_CAP {
        return Err(OracleError::SizeLimit(format!(
            "lp_truncated_bp caps at n <= {LP_N_CAP}, m <= {LP_M_CAP}; got {m}x{n}"
        )));
    }
    if b.len() != m {
        return Err(OracleError::InvalidArgument("b length != m".into()));
    }
    if t_set.iter().any(|&i| i >= n) {
        return Err(OracleError::InvalidArgument("T index out of range".into()));
    }
    let mut in_t = vec![false; n];
    for &i in t_set {
        in_t[i] = true;
    }
    let bv = DVector::from_column_slice(b);
    let b_norm = bv.norm();
    let feas_tol = 1e-9 * (1.0 + b_norm);

    let mut best: Option<(Vec<f64>, f64)> = None;
    let cols: Vec<usize> = (0..2 * n).collect();
    let mut subset: Vec<usize> = Vec::with_capacity(m);
    enumerate_subsets(&cols, m, &mut subset, &mut |sel: &[usize]| {
        if sel.is_empty() {
            if b_norm <= feas_tol {
                best = Some((vec![0.0; n], 0.0));
            }
            return;
        }
        // Columns j and n + j are negatives of each other; skip singular picks.
        for w in 0..sel.len() {
            for w2 in w + 1..sel.len() {
                if sel[w] % n == sel[w2] % n {
                    return;
                }
            }
        }
        let k = sel.len();
        let mut sub = DMatrix::zeros(m, k);
        for (c, &col) in sel.iter().enumerate() {
            let (j, sign) = if col < n { (col, 1.0) } else { (col - n, -1.0) };
            for r in 0..m {
                sub[(r, c)] = sign * a[(r, j)];
            }
        }
        let svd = sub.clone().svd(true, true);
        let sol = match svd.solve(&bv, 1e-12) {
            Ok(s) => s,
            Err(_) => return,
        };
        let resid = (&sub * &sol - &bv).norm();
        if resid > feas_tol {
            return;
        }
        if sol.iter().any(|&v| v < -1e-9) {
            return;
        }
        let mut x = vec![0.0; n];
        let mut obj = 0.0;
        for (c, &col) in sel.iter().enumerate() {
            let val = sol[c].max(0.0);
            let (j, sign) = if col < n { (col, 1.0) } else { (col - n, -1.0) };
            x[j] += sign * val;
            if in_t[j] {
                obj += val;
            }
        }
        match &best {
            Some((_, best_obj)) if obj >= *best_obj => {}
            _ => best = Some((x, obj)),
        }
    });
    best.ok_or(OracleError::Infeasible)
}

/// Calls `f` on every subset of `items` of size 0..=max_size.
fn enumerate_subsets<F: FnMut(&[usize])>(
    items: &[usize],
    max_size: usize,
    current: &mut Vec<usize>,
    f: &mut F,
) {
    f(current);
    if current.len() == max_size {
        return;
    }
    let start = current
        .last()
        .map(|&l| items.iter().position(|&x| x == l).unwrap() + 1)
        .unwrap_or(0);
    for idx in start..items.len() {
        current.push(items[idx]);
        enumerate_subsets(items, max_size, current, f);
        current.pop();
    }
}

// ---------------------------------------------------------------------------
// l0 oracle
// ---------------------------------------------------------------------------

const L0_N_CAP: usize = 20;
const L0_K_CAP: usize = 4;

/// Sparsest solution of Ax = b with support size up to `kmax`, by exhaustive
/// support enumeration; `None` when no support of that size fits.
///
/// Supports are scanned in lexicographic order per size, so ties resolve to
/// the lowest-lexicographic support.
pub fn l0_oracle(
    a: &DMatrix<f64>,
    b: &[f64],
    kmax: usize,
) -> Result<Option<(Vec<f64>, Vec<usize>)>, OracleError> {
    let (m, n) = (a.nrows(), a.ncols());
    if n > L0_N_CAP || kmax > L0_K_CAP {
        return Err(OracleError::SizeLimit(format!(
            "l0_oracle caps at n <= {L0_N_CAP}, kmax <= {L0_K_CAP}"
        )));
    }
    if b.len() != m {
        return Err(OracleError::InvalidArgument("b length != m".into()));
    }
    let bv = DVector::from_column_slice(b);
    let tol = 1e-9 * (1.0 + bv.norm());
    if bv.norm() <= tol {
        return Ok(Some((vec![0.0; n], Vec::new())));
    }
    for k in 1..=kmax.min(n) {
        let cols: Vec<usize> = (0..n).collect();
        let mut found: Option<(Vec<f64>, Vec<usize>)> = None;
        let mut subset = Vec::with_capacity(k);
        enumerate_fixed_size(&cols, k, 0, &mut subset, &mut |sel: &[usize]| {
            if found.is_some() {
                return;
            }
            let mut sub = DMatrix::zeros(m, sel.len());
            for (c, &j) in sel.iter().enumerate() {
                for r in 0..m {
                    sub[(r, c)] = a[(r, j)];
                }
            }
            let svd = sub.clone().svd(true, true);
            let sol = match svd.solve(&bv, 1e-12) {
                Ok(s) => s,
                Err(_) => return,
            };
            if (&sub * &sol - &bv).norm() <= tol {
                let mut x = vec![0.0; n];
                for (c, &j) in sel.iter().enumerate() {
                    x[j] = sol[c];
                }
                found = Some((x, sel.to_vec()));
            }
        });
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

fn enumerate_fixed_size<F: FnMut(&[usize])>(
    items: &[usize],
    size: usize,
    start: usize,
    current: &mut Vec<usize>,
    f: &mut F,
) {
    if current.len() == size {
        f(current);
        return;
    }
    let remaining = size - current.len();
    for idx in start..=items.len().saturating_sub(remaining) {
        current.push(items[idx]);
        enumerate_fixed_size(items, size, idx + 1, current, f);
        current.pop();
    }
}

// ---------------------------------------------------------------------------
// Truncated null space property constant
// ---------------------------------------------------------------------------

const TNSP_N_CAP: usize = 10;
const TNSP_NULLDIM_CAP: usize = 4;
const TNSP_ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum GammaBar {
    Bounded(f64),
    Unbounded,
}

impl GammaBar {
    pub fn value(&self) -> Option<f64> {
        match self {
            GammaBar::Bounded(g) => Some(*g),
            GammaBar::Unbounded => None,
        }
    }
}

/// Witness (T, S, eta) attaining the reported ratio.
#[derive(Debug, Clone)]
pub struct TnspWitness {
    pub t_set: Vec<usize>,
    pub s_set: Vec<usize>,
    pub eta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TnspReport {
    pub t: usize,
    pub l: usize,
    pub gamma_bar: GammaBar,
    pub witness: Option<TnspWitness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TnspMode {
    /// Full (T, S) enumeration with cross-polytope-section vertex search.
    Exact,
    /// Random null-space probes with local refinement; a lower bound.
    Sampled { probes: usize, seed: u64 },
}

/// Evaluates the witness ratio ||eta_S||_1 / ||eta_{T \ S}||_1.
pub fn tnsp_ratio(eta: &[f64], t_set: &[usize], s_set: &[usize]) -> Option<f64> {
    let num: f64 = s_set.iter().map(|&i| eta[i].abs()).sum();
    let den: f64 = t_set
        .iter()
        .filter(|i| !s_set.contains(i))
        .map(|&i| eta[i].abs())
        .sum();
    if den <= 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// gamma_bar for the t-NSP of order `l` at window size `t`: the supremum of
/// ||eta_S||_1 / ||eta_{T cap S^c}||_1 over windows |T| = t, subsets S of T
/// with |S| <= l, and nonzero null vectors eta.
pub fn tnsp_gamma(
    a: &DMatrix<f64>,
    t: usize,
    l: usize,
    mode: TnspMode,
) -> Result<TnspReport, OracleError> {
    let n = a.ncols();
    if t == 0 || t > n {
        return Err(OracleError::InvalidArgument(format!(
            "need 1 <= t <= n, got t={t}, n={n}"
        )));
    }
    if l == 0 {
        return Err(OracleError::InvalidArgument("need L >= 1".into()));
    }
    let ns = NullSpaceBasis::compute(a);
    if ns.dim() == 0 {
        return Ok(TnspReport {
            t,
            l,
            gamma_bar: GammaBar::Bounded(0.0),
            witness: None,
        });
    }
    match mode {
        TnspMode::Exact => {
            if n > TNSP_N_CAP || ns.dim() > TNSP_NULLDIM_CAP {
                return Err(OracleError::SizeLimit(format!(
                    "exact tnsp_gamma caps at n <= {TNSP_N_CAP}, null dim <= {TNSP_NULLDIM_CAP}; \
                     got n={n}, dim={}",
                    ns.dim()
                )));
            }
            Ok(tnsp_gamma_exact(&ns, t, l))
        }
        TnspMode::Sampled { probes, seed } => Ok(tnsp_gamma_sampled(&ns, t, l, probes, seed)),
    }
}

fn tnsp_gamma_exact(ns: &NullSpaceBasis, t: usize, l: usize) -> TnspReport {
    let n = ns.n();
    let d = ns.dim();
    let mut best: Option<(f64, TnspWitness)> = None;

    let all: Vec<usize> = (0..n).collect();
    let mut t_subset = Vec::with_capacity(t);
    let mut unbounded: Option<TnspWitness> = None;
    enumerate_fixed_size(&all, t, 0, &mut t_subset, &mut |t_sel: &[usize]| {
        if unbounded.is_some() {
            return;
        }
        let smax = l.min(t);
        for s_size in 1..=smax {
            let mut s_subset = Vec::with_capacity(s_size);
            let t_items: Vec<usize> = t_sel.to_vec();
            enumerate_fixed_size(&t_items, s_size, 0, &mut s_subset, &mut |s_sel: &[usize]| {
                if unbounded.is_some() {
                    return;
                }
                let r_set: Vec<usize> = t_sel.iter().copied().filter(|i| !s_sel.contains(i)).collect();
                // Rows of the null basis restricted to R.
                let m_r = restrict_rows(ns, &r_set);
                // Directions with eta_R = 0: unbounded ratio unless eta_S = 0 too.
                for w in kernel_directions(&m_r, d) {
                    let eta = ns.vector(w.as_slice());
                    let num: f64 = s_sel.iter().map(|&i| eta[i].abs()).sum();
                    if num > TNSP_ZERO_TOL {
                        unbounded = Some(TnspWitness {
                            t_set: t_sel.to_vec(),
                            s_set: s_sel.to_vec(),
                            eta: eta.iter().copied().collect(),
                        });
                        return;
                    }
                    // eta zero on both S and R: degenerate 0/0, skipped.
                }
                // Vertices of {w : ||(Bw)_R||_1 <= 1}: directions w spanning
                // the one-dimensional kernels of row subsets of m_r.
                for w in section_vertex_directions(&m_r, d) {
                    let eta = ns.vector(w.as_slice());
                    let den: f64 = r_set.iter().map(|&i| eta[i].abs()).sum();
                    if den <= TNSP_ZERO_TOL {
                        continue;
                    }
                    let num: f64 = s_sel.iter().map(|&i| eta[i].abs()).sum();
                    let ratio = num / den;
                    if best.as_ref().map_or(true, |(b, _)| ratio > *b) {
                        best = Some((
                            ratio,
                            TnspWitness {
                                t_set: t_sel.to_vec(),
                                s_set: s_sel.to_vec(),
                                eta: eta.iter().copied().collect(),
                            },
                        ));
                    }
                }
            });
        }
    });
    if let Some(w) = unbounded {
        return TnspReport {
            t,
            l,
            gamma_bar: GammaBar::Unbounded,
            witness: Some(w),
        };
    }
    match best {
        Some((g, w)) => TnspReport {
            t,
            l,
            gamma_bar: GammaBar::Bounded(g),
            witness: Some(w),
        },
        // Every (T, S) pair degenerate; nothing constrains gamma.
        None => TnspReport {
            t,
            l,
            gamma_bar: GammaBar::Bounded(0.0),
            witness: None,
        },
    }
}

/// Rows of the null basis matrix B (n x d) restricted to `rows`.
fn restrict_rows(ns: &NullSpaceBasis, rows: &[usize]) -> DMatrix<f64> {
    let d = ns.dim();
    let mut m = DMatrix::zeros(rows.len(), d);
    for (r, &i) in rows.iter().enumerate() {
        for (c, col) in ns.columns().iter().enumerate() {
            m[(r, c)] = col[i];
        }
    }
    m
}

/// Orthonormal basis of the kernel of a small matrix (kernel in column space).
fn kernel_directions(m: &DMatrix<f64>, d: usize) -> Vec<DVector<f64>> {
    if m.nrows() == 0 {
        return (0..d)
            .map(|j| {
                let mut v = DVector::zeros(d);
                v[j] = 1.0;
                v
            })
            .collect();
    }
    let ns = NullSpaceBasis::compute(m);
    ns.columns().to_vec()
}

/// Candidate vertex directions of the section {w : ||M w||_1 <= 1}: for each
/// subset Z of rows, any one-dimensional kernel of M_Z. Every vertex of the
/// section arises this way; extra candidates are feasible and harmless since
/// the target is a maximum of a convex function.
fn section_vertex_directions(m: &DMatrix<f64>, d: usize) -> Vec<DVector<f64>> {
    let r = m.nrows();
    let mut out = Vec::new();
    // Subsets of rows encoded in a bitmask; r <= t <= 10 keeps this small.
    for mask in 0u32..(1u32 << r) {
        let rows: Vec<usize> = (0..r).filter(|i| mask & (1 << i) != 0).collect();
        // Kernel dimension is at least d - |Z|; only |Z| >= d - 1 can yield 1.
        if d > 0 && rows.len() + 1 < d {
            continue;
        }
        let sub = if rows.is_empty() {
            DMatrix::zeros(0, d)
        } else {
            let mut s = DMatrix::zeros(rows.len(), d);
            for (ri, &i) in rows.iter().enumerate() {
                for c in 0..d {
                    s[(ri, c)] = m[(i, c)];
                }
            }
            s
        };
        let dirs = kernel_directions(&sub, d);
        if dirs.len() == 1 {
            out.push(dirs.into_iter().next().unwrap());
        }
    }
    out
}

fn tnsp_gamma_sampled(
    ns: &NullSpaceBasis,
    t: usize,
    l: usize,
    probes: usize,
    seed: u64,
) -> TnspReport {
    use rand_distr::{Distribution, StandardNormal};
    let d = ns.dim();
    let mut rng = crate::rng::rng_from_seed(seed);
    let mut best: Option<(f64, TnspWitness)> = None;
    for _ in 0..probes.max(1) {
        let mut w: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        normalize(&mut w);
        let mut current = eval_probe(ns, &w, t, l);
        // Local refinement: coordinate perturbations on the unit sphere (the
        // ratio is scale-invariant). Bounded rounds; shrink on stagnation.
        let mut step = 0.5;
        let mut rounds = 0;
        while step > 1e-4 && rounds < 200 {
            rounds += 1;
            let mut improved = false;
            for j in 0..d {
                for dir in [step, -step] {
                    let mut w2 = w.clone();
                    w2[j] += dir;
                    normalize(&mut w2);
                    let cand = eval_probe(ns, &w2, t, l);
                    let better = match (&cand, &current) {
                        (Some(c), Some(b)) => c.0 > b.0 * (1.0 + 1e-10),
                        (Some(_), None) => true,
                        _ => false,
                    };
                    if better {
                        w = w2;
                        current = cand;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if let Some((ratio, witness)) = current {
            if best.as_ref().map_or(true, |(b, _)| ratio > *b) {
                best = Some((ratio, witness));
            }
        }
    }
    match best {
        Some((g, w)) => TnspReport {
            t,
            l,
            gamma_bar: GammaBar::Bounded(g),
            witness: Some(w),
        },
        None => TnspReport {
            t,
            l,
            gamma_bar: GammaBar::Bounded(0.0),
            witness: None,
        },
    }
}

fn normalize(w: &mut [f64]) {
    let n: f64 = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in w.iter_mut() {
            *v /= n;
        }
    }
}

/// Best (T, S) for a fixed null vector: S takes the largest magnitudes, the
/// rest of T the smallest, which maximizes the ratio for that vector.
fn eval_probe(
    ns: &NullSpaceBasis,
    w: &[f64],
    t: usize,
    l: usize,
) -> Option<(f64, TnspWitness)> {
    let eta = ns.vector(w);
    let s_size = l.min(t.saturating_sub(1));
    if s_size == 0 {
        return None;
    }
    let order = crate::util::indices_by_desc_magnitude(eta.as_slice());
    let s_set: Vec<usize> = order[..s_size].to_vec();
    let mut rest: Vec<usize> = order[s_size..].to_vec();
    rest.reverse(); // ascending magnitude
    let r_set: Vec<usize> = rest[..(t - s_size).min(rest.len())].to_vec();
    let num: f64 = s_set.iter().map(|&i| eta[i].abs()).sum();
    let den: f64 = r_set.iter().map(|&i| eta[i].abs()).sum();
    if den <= TNSP_ZERO_TOL || num <= TNSP_ZERO_TOL {
        return None;
    }
    let mut t_set = s_set.clone();
    t_set.extend(&r_set);
    t_set.sort_unstable();
    Some((
        num / den,
        TnspWitness {
            t_set,
            s_set,
            eta: eta.iter().copied().collect(),
        },
    ))
}

// ---------------------------------------------------------------------------
// k(d) profile
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct KdParams {
    pub c: f64,
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct KdProfile {
    pub k: f64,
    pub k_prime: f64,
    /// c / (1 + log(n/m)) < 1/2.
    pub premise_holds: bool,
    /// -1 < k'(d) < 0.
    pub k_prime_in_unit_interval: bool,
    /// k(0) < k(d) + d/2.
    pub detection_gain: bool,
}

/// Sparsity capacity after d detections: k(d) = c (m-d) / (1 + log((n-d)/(m-d)))
/// and its closed-form derivative, with the qualitative flags derived from them.
pub fn kd_profile(p: KdParams) -> Result<KdProfile, OracleError> {
    if !(p.d < p.m && p.m < p.n) {
        return Err(OracleError::InvalidArgument(format!(
            "need 0 <= d < m < n, got d={}, m={}, n={}",
            p.d, p.m, p.n
        )));
    }
    if !(p.c > 0.0) {
        return Err(OracleError::InvalidArgument("need c > 0".into()));
    }
    let (n, m) = (p.n as f64, p.m as f64);
    let k_at = |d: f64| p.c * (m - d) / (1.0 + ((n - d) / (m - d)).ln());
    let k = k_at(p.d as f64);
    let d = p.d as f64;
    let denom = 1.0 + ((n - d) / (m - d)).ln();
    let k_prime = -p.c * (1.0 / denom + (n - m) / (denom * denom * (n - d)));
    let premise_holds = p.c / (1.0 + (n / m).ln()) < 0.5;
    let k_prime_in_unit_interval = k_prime > -1.0 && k_prime < 0.0;
    let detection_gain = k_at(0.0) < k + d / 2.0;
    Ok(KdProfile {
        k,
        k_prime,
        premise_holds,
        k_prime_in_unit_interval,
        detection_gain,
    })
}

// ---------------------------------------------------------------------------
// Stability bound
// ---------------------------------------------------------------------------

/// C_T = (1 + (1 + max{1, |T^c|/L}) gamma_bar) / (1 - gamma_bar).
pub fn c_t_constant(gamma_bar: f64, tc_size: usize, l: usize) -> Result<f64, OracleError> {
    if gamma_bar >= 1.0 {
        return Err(OracleError::GammaTooLarge(gamma_bar));
    }
    if l == 0 {
        return Err(OracleError::InvalidArgument("need L >= 1".into()));
    }
    let ratio = (tc_size as f64 / l as f64).max(1.0);
    Ok((1.0 + (1.0 + ratio) * gamma_bar) / (1.0 - gamma_bar))
}

#[derive(Debug, Clone, Copy)]
pub struct StabilityCheck {
    pub c_t: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Checks the l1 stability bound ||x* - x_bar||_1 <= 2 C_T sigma_L(x_bar_T)
/// for a truncated-BP solution x* against the true signal.
pub fn stability_bound(
    gamma_bar: f64,
    l: usize,
    t_set: &[usize],
    x_bar: &[f64],
    x_star: &[f64],
) -> Result<StabilityCheck, OracleError> {
    if x_bar.len() != x_star.len() {
        return Err(OracleError::InvalidArgument(
            "x_bar and x_star lengths differ".into(),
        ));
    }
    let n = x_bar.len();
    let tc_size = n - t_set.len();
    let c_t = c_t_constant(gamma_bar, tc_size, l)?;
    let x_bar_t: Vec<f64> = t_set.iter().map(|&i| x_bar[i]).collect();
    let bound = 2.0 * c_t * sigma_l(&x_bar_t, l);
    let err: f64 = x_bar.iter().zip(x_star).map(|(a, b)| (a - b).abs()).sum();
    Ok(StabilityCheck {
        c_t,
        bound,
        holds: err <= bound + 1e-8,
    })
}

/// Best-L-term approximation error: l1 mass of all but the L largest entries.
pub fn sigma_l(x: &[f64], l: usize) -> f64 {
    if l >= x.len() {
        return 0.0;
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    mags[l..].iter().sum()
}
