//! Matrix-free sensing operators with verified adjoints.
//!
//! Three kinds: dense Gaussian ensembles (explicitly stored), partial
//! orthonormal DCT-II matrices (computed transform-style, never
//! materialized), and composition of a measurement operator with Haar
//! wavelet synthesis for transform-sparse signals.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::haar;
use crate::rng::rng_from_seed;

#[derive(Debug, Error)]
pub enum LinopError {
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid shape: {0}")]
    InvalidShape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Dense,
    PartialDct,
    ComposedSynthesis,
}

/// Orthonormal 2-D Haar synthesis transform over a `side x side` grid.
#[derive(Debug, Clone)]
pub struct SynthesisTransform {
    side: usize,
    levels: u32,
}

impl SynthesisTransform {
    pub fn haar2d(side: usize, levels: u32) -> Result<Self, LinopError> {
        if side == 0 || side % (1usize << levels) != 0 {
            return Err(LinopError::InvalidShape(format!(
                "side {side} not divisible by 2^{levels}"
            )));
        }
        Ok(Self { side, levels })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Coefficients to image (inverse transform).
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>, LinopError> {
        haar::synthesize(coeffs, self.side, self.levels)
    }

    /// Image to coefficients (forward transform).
    pub fn analyze(&self, image: &[f64]) -> Result<Vec<f64>, LinopError> {
        haar::analyze(image, self.side, self.levels)
    }
}

#[derive(Debug)]
enum Repr {
    /// Row-major m x n entry grid.
    Dense { entries: Vec<f64> },
    /// Selected rows of the n x n orthonormal DCT-II matrix, plus a cosine
    /// table of cos(pi * t / (2n)) for t in 0..4n so no m x n grid is formed.
    PartialDct { rows: Vec<usize>, costab: Vec<f64> },
    Composed {
        inner: Box<SensingOperator>,
        transform: SynthesisTransform,
    },
}

/// An m x n measurement map with `apply` and `adjoint`.
#[derive(Debug)]
pub struct SensingOperator {
    m: usize,
    n: usize,
    seed: u64,
    repr: Repr,
    gram: OnceLock<DMatrix<f64>>,
}

impl SensingOperator {
    /// Dense matrix with i.i.d. standard normal entries, reproducible from `seed`.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self, LinopError> {
        check_underdetermined(m, n)?;
        let mut rng = rng_from_seed(seed);
        let entries: Vec<f64> = (0..m * n)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Ok(Self {
            m,
            n,
            seed,
            repr: Repr::Dense { entries },
            gram: OnceLock::new(),
        })
    }

    /// Dense operator from explicit row-major entries.
    pub fn from_dense(m: usize, n: usize, entries: Vec<f64>) -> Result<Self, LinopError> {
        if entries.len() != m * n {
            return Err(LinopError::LengthMismatch {
                expected: m * n,
                got: entries.len(),
            });
        }
        check_underdetermined(m, n)?;
        Ok(Self {
            m,
            n,
            seed: 0,
            repr: Repr::Dense { entries },
            gram: OnceLock::new(),
        })
    }

    /// Partial DCT: row 0 always kept, the other m-1 rows sampled without
    /// replacement from {1, ..., n-1}; rows stored sorted.
    pub fn partial_dct(n: usize, m: usize, seed: u64) -> Result<Self, LinopError> {
        check_underdetermined(m, n)?;
        let mut rng = rng_from_seed(seed);
        let mut pool: Vec<usize> = (1..n).collect();
        let mut rows = vec![0usize];
        // Partial Fisher-Yates for the remaining m-1 rows.
        for i in 0..m - 1 {
            let j = i + rand::Rng::gen_range(&mut rng, 0..pool.len() - i);
            pool.swap(i, j);
            rows.push(pool[i]);
        }
        rows.sort_unstable();
        let costab: Vec<f64> = (0..4 * n)
            .map(|t| (std::f64::consts::PI * t as f64 / (2.0 * n as f64)).cos())
            .collect();
        Ok(Self {
            m,
            n,
            seed,
            repr: Repr::PartialDct { rows, costab },
            gram: OnceLock::new(),
        })
    }

    /// Composition: measures `inner.apply(synthesize(coeffs))`, so the
    /// unknown becomes the coefficient vector of the transform.
    pub fn compose_synthesis(
        inner: SensingOperator,
        transform: SynthesisTransform,
    ) -> Result<Self, LinopError> {
        let n = transform.side() * transform.side();
        if inner.n != n {
            return Err(LinopError::LengthMismatch {
                expected: n,
                got: inner.n,
            });
        }
        Ok(Self {
            m: inner.m,
            n,
            seed: inner.seed,
            repr: Repr::Composed {
                inner: Box::new(inner),
                transform,
            },
            gram: OnceLock::new(),
        })
    }

    pub fn kind(&self) -> OperatorKind {
        match self.repr {
            Repr::Dense { .. } => OperatorKind::Dense,
            Repr::PartialDct { .. } => OperatorKind::PartialDct,
            Repr::Composed { .. } => OperatorKind::ComposedSynthesis,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Selected DCT row indices (partial-dct only).
    pub fn rows(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::PartialDct { rows, .. } => Some(rows),
            _ => None,
        }
    }

    /// Row-major entry grid (dense only).
    pub fn dense_entries(&self) -> Option<&[f64]> {
        match &self.repr {
            Repr::Dense { entries } => Some(entries),
            _ => None,
        }
    }

    /// True when A A^T = I holds structurally (orthonormal DCT rows, possibly
    /// composed with an orthonormal synthesis transform).
    pub fn has_orthonormal_rows(&self) -> bool {
        match &self.repr {
            Repr::Dense { .. } => false,
            Repr::PartialDct { .. } => true,
            Repr::Composed { inner, .. } => inner.has_orthonormal_rows(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, LinopError> {
        if x.len() != self.n {
            return Err(LinopError::LengthMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(match &self.repr {
            Repr::Dense { entries } => (0..self.m)
                .map(|i| {
                    let row = &entries[i * self.n..(i + 1) * self.n];
                    crate::util::dot(row, x)
                })
                .collect(),
            Repr::PartialDct { rows, costab } => {
                let n = self.n;
                rows.iter()
                    .map(|&k| dct_row_dot(k, x, n, costab))
                    .collect()
            }
            Repr::Composed { inner, transform } => {
                let image = transform.synthesize(x)?;
                inner.apply(&image)?
            }
        })
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>, LinopError> {
        if y.len() != self.m {
            return Err(LinopError::LengthMismatch {
                expected: self.m,
                got: y.len(),
            });
        }
        Ok(match &self.repr {
            Repr::Dense { entries } => {
                let mut out = vec![0.0; self.n];
                for i in 0..self.m {
                    let row = &entries[i * self.n..(i + 1) * self.n];
                    let yi = y[i];
                    for (o, &a) in out.iter_mut().zip(row) {
                        *o += yi * a;
                    }
                }
                out
            }
            Repr::PartialDct { rows, costab } => {
                let n = self.n;
                let mut out = vec![0.0; n];
                for (&k, &yi) in rows.iter().zip(y) {
                    let scale = dct_row_scale(k, n);
                    let step = 2 * k;
                    let mut t = k % (4 * n);
                    for o in out.iter_mut() {
                        *o += yi * scale * costab[t];
                        t += step;
                        if t >= 4 * n {
                            t -= 4 * n;
                        }
                    }
                }
                out
            }
            Repr::Composed { inner, transform } => {
                let image = inner.adjoint(y)?;
                transform.analyze(&image)?
            }
        })
    }

    /// Lazily computed m x m Gram matrix A A^T for operators whose rows are
    /// not orthonormal. Returns `None` when A A^T = I structurally.
    pub fn gram(&self) -> Option<&DMatrix<f64>> {
        if self.has_orthonormal_rows() {
            return None;
        }
        Some(self.gram.get_or_init(|| {
            let m = self.m;
            let mut g = DMatrix::zeros(m, m);
            let mut e = vec![0.0; m];
            for i in 0..m {
                e[i] = 1.0;
                let row = self.adjoint(&e).expect("length checked");
                let col = self.apply(&row).expect("length checked");
                e[i] = 0.0;
                for (j, v) in col.iter().enumerate() {
                    g[(j, i)] = *v;
                }
            }
            // Symmetrize against rounding.
            for i in 0..m {
                for j in 0..i {
                    let v = 0.5 * (g[(i, j)] + g[(j, i)]);
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
            g
        }))
    }

    /// Materialize the full matrix; intended for oracles and small problems.
    pub fn to_dense_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.m, self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            let col = self.apply(&e).expect("length checked");
            e[j] = 0.0;
            for (i, v) in col.iter().enumerate() {
                a[(i, j)] = *v;
            }
        }
        a
    }
}

fn check_underdetermined(m: usize, n: usize) -> Result<(), LinopError> {
    if m == 0 || n == 0 || m > n {
        return Err(LinopError::InvalidShape(format!(
            "need 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    Ok(())
}

fn dct_row_scale(k: usize, n: usize) -> f64 {
    if k == 0 {
        (1.0 / n as f64).sqrt()
    } else {
        (2.0 / n as f64).sqrt()
    }
}

/// Dot product of DCT-II row k with x: scale_k * sum_j cos(pi k (2j+1) / 2n) x_j.
fn dct_row_dot(k: usize, x: &[f64], n: usize, costab: &[f64]) -> f64 {
    let scale = dct_row_scale(k, n);
    let step = 2 * k;
    let mut t = k % (4 * n);
    let mut acc = 0.0;
    for &xj in x {
        acc += xj * costab[t];
        t += step;
        if t >= 4 * n {
            t -= 4 * n;
        }
    }
    scale * acc
}
