//! Test-signal generators, noise injection, and a small analytic phantom.

use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::rng::rng_from_seed;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed signal file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalKind {
    Gaussian,
    Bernoulli,
    /// Magnitudes i^{-1/lambda}; `sparse` keeps k terms, otherwise all n.
    PowerLaw { lambda: f64, sparse: bool },
}

impl SignalKind {
    fn token(&self) -> String {
        match self {
            SignalKind::Gaussian => "gaussian".into(),
            SignalKind::Bernoulli => "bernoulli".into(),
            SignalKind::PowerLaw { sparse: true, .. } => "power-law-sparse".into(),
            SignalKind::PowerLaw { sparse: false, .. } => "power-law-compressible".into(),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            SignalKind::PowerLaw { lambda, .. } => *lambda,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Signal {
    pub values: Vec<f64>,
    pub true_support: Vec<usize>,
    pub kind: SignalKind,
    pub k: usize,
    pub seed: u64,
}

impl Signal {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

/// Draws a test signal: k nonzeros at a uniformly permuted index set, with
/// per-kind values (standard normal, +-1, or normalized power-law decay).
pub fn gen_signal(kind: SignalKind, n: usize, k: usize, seed: u64) -> Result<Signal, SignalError> {
    if k > n {
        return Err(SignalError::InvalidParameter(format!("k={k} > n={n}")));
    }
    if let SignalKind::PowerLaw { lambda, .. } = kind {
        if !(lambda > 0.0) {
            return Err(SignalError::InvalidParameter(format!(
                "power-law decay lambda must be positive, got {lambda}"
            )));
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut values = vec![0.0; n];
    match kind {
        SignalKind::Gaussian => {
            for &i in perm.iter().take(k) {
                values[i] = StandardNormal.sample(&mut rng);
            }
        }
        SignalKind::Bernoulli => {
            for &i in perm.iter().take(k) {
                values[i] = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            }
        }
        SignalKind::PowerLaw { lambda, sparse } => {
            let terms = if sparse { k } else { n };
            let mut mags: Vec<f64> = (1..=terms)
                .map(|i| (i as f64).powf(-1.0 / lambda))
                .collect();
            let max = mags.iter().cloned().fold(0.0, f64::max);
            if max > 0.0 {
                for v in &mut mags {
                    *v /= max;
                }
            }
            for (t, &i) in perm.iter().take(terms).enumerate() {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                values[i] = sign * mags[t];
            }
        }
    }
    let true_support: Vec<usize> = (0..n).filter(|&i| values[i] != 0.0).collect();
    Ok(Signal {
        values,
        true_support,
        kind,
        k,
        seed,
    })
}

/// b + sigma * (i.i.d. standard normal), reproducible from the seed.
pub fn add_noise(b: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return b.to_vec();
    }
    let mut rng = rng_from_seed(seed);
    b.iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma * z
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Shepp-Logan phantom
// ---------------------------------------------------------------------------

// (intensity, a, b, x0, y0, phi in degrees) — modified contrast table.
const PHANTOM_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Intensity at a point of [-1,1]^2: sum over ellipses containing it.
pub fn phantom_point(x: f64, y: f64) -> f64 {
    let mut v = 0.0;
    for &(inten, a, b, x0, y0, phi_deg) in &PHANTOM_ELLIPSES {
        let phi = phi_deg.to_radians();
        let (dx, dy) = (x - x0, y - y0);
        let u = dx * phi.cos() + dy * phi.sin();
        let w = -dx * phi.sin() + dy * phi.cos();
        if (u / a).powi(2) + (w / b).powi(2) <= 1.0 {
            v += inten;
        }
    }
    v
}

/// N x N analytic phantom sampled at pixel centers, row-major, row 0 at y ~ 1.
pub fn shepp_logan(n_side: usize) -> Vec<f64> {
    let mut img = vec![0.0; n_side * n_side];
    for i in 0..n_side {
        let y = 1.0 - (2.0 * i as f64 + 1.0) / n_side as f64;
        for j in 0..n_side {
            let x = (2.0 * j as f64 + 1.0) / n_side as f64 - 1.0;
            img[i * n_side + j] = phantom_point(x, y);
        }
    }
    img
}

// ---------------------------------------------------------------------------
// Signal file format
// ---------------------------------------------------------------------------

/// `# isd-signal v1 kind=<k> n=<n> k=<k> lambda=<l> seed=<s>` then one value
/// per line at full precision.
pub fn write_signal<W: Write>(out: &mut W, signal: &Signal) -> io::Result<()> {
    writeln!(
        out,
        "# isd-signal v1 kind={} n={} k={} lambda={} seed={}",
        signal.kind.token(),
        signal.n(),
        signal.k,
        signal.kind.lambda(),
        signal.seed
    )?;
    for v in &signal.values {
        writeln!(out, "{v:.16e}")?;
    }
    Ok(())
}

pub fn read_signal<R: BufRead>(input: R) -> Result<Signal, SignalError> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| SignalError::Parse("empty file".into()))??;
    let rest = header
        .strip_prefix("# isd-signal v1 ")
        .ok_or_else(|| SignalError::Parse(format!("bad header: {header}")))?;
    let mut kind_tok = None;
    let mut n = None;
    let mut k = None;
    let mut lambda = 0.0;
    let mut seed = 0u64;
    for field in rest.split_whitespace() {
        let (key, val) = field
            .split_once('=')
            .ok_or_else(|| SignalError::Parse(format!("bad header field: {field}")))?;
        match key {
            "kind" => kind_tok = Some(val.to_string()),
            "n" => n = Some(parse_num::<usize>(val)?),
            "k" => k = Some(parse_num::<usize>(val)?),
            "lambda" => lambda = parse_num::<f64>(val)?,
            "seed" => seed = parse_num::<u64>(val)?,
            _ => return Err(SignalError::Parse(format!("unknown header key: {key}"))),
        }
    }
    let (n, k) = match (n, k) {
        (Some(n), Some(k)) => (n, k),
        _ => return Err(SignalError::Parse("header missing n or k".into())),
    };
    let kind = match kind_tok.as_deref() {
        Some("gaussian") => SignalKind::Gaussian,
        Some("bernoulli") => SignalKind::Bernoulli,
        Some("power-law-sparse") => SignalKind::PowerLaw {
            lambda,
            sparse: true,
        },
        Some("power-law-compressible") => SignalKind::PowerLaw {
            lambda,
            sparse: false,
        },
        other => {
            return Err(SignalError::Parse(format!(
                "unknown signal kind: {other:?}"
            )))
        }
    };
    let mut values = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(parse_num::<f64>(line.trim())?);
    }
    if values.len() != n {
        return Err(SignalError::Parse(format!(
            "expected {n} values, found {}",
            values.len()
        )));
    }
    let true_support = (0..n).filter(|&i| values[i] != 0.0).collect();
    Ok(Signal {
        values,
        true_support,
        kind,
        k,
        seed,
    })
}

/// Tail removal: keep the `k` largest-magnitude entries, zero the rest.
/// Ties break toward the lowest index so the result is deterministic.
pub fn sparsify_top_k(values: &[f64], k: usize) -> Vec<f64> {
    let n = values.len();
    if k >= n {
        return values.to_vec();
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .abs()
            .partial_cmp(&values[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut out = vec![0.0; n];
    for &i in idx.iter().take(k) {
        out[i] = values[i];
    }
    out
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, SignalError> {
    s.parse()
        .map_err(|_| SignalError::Parse(format!("bad number: {s}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_values_and_count() {
        let s = gen_signal(SignalKind::Bernoulli, 50, 12, 3).unwrap();
        assert_eq!(s.true_support.len(), 12);
        for &i in &s.true_support {
            assert!(s.values[i] == 1.0 || s.values[i] == -1.0);
        }
    }

    #[test]
    fn gaussian_support_size_and_determinism() {
        let a = gen_signal(SignalKind::Gaussian, 40, 7, 9).unwrap();
        let b = gen_signal(SignalKind::Gaussian, 40, 7, 9).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.true_support.len(), 7);
        let c = gen_signal(SignalKind::Gaussian, 40, 7, 10).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn power_law_compressible_magnitudes() {
        let lambda = 0.8;
        let s = gen_signal(
            SignalKind::PowerLaw {
                lambda,
                sparse: false,
            },
            30,
            5,
            4,
        )
        .unwrap();
        let mut mags: Vec<f64> = s.values.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((mags[0] - 1.0).abs() <= 1e-15);
        for (idx, &m) in mags.iter().enumerate() {
            let expected = ((idx + 1) as f64).powf(-1.0 / lambda);
            assert!((m - expected).abs() <= 1e-12, "rank {idx}");
        }
    }

    #[test]
    fn power_law_sparse_strictly_decreasing() {
        let s = gen_signal(
            SignalKind::PowerLaw {
                lambda: 2.0,
                sparse: true,
            },
            20,
            6,
            1,
        )
        .unwrap();
        assert_eq!(s.true_support.len(), 6);
        let mut mags: Vec<f64> = s
            .true_support
            .iter()
            .map(|&i| s.values[i].abs())
            .collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for w in mags.windows(2) {
            assert!(w[0] > w[1]);
        }
    }

    #[test]
    fn zero_sparsity_and_bad_params() {
        let s = gen_signal(SignalKind::Gaussian, 10, 0, 0).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        assert!(s.true_support.is_empty());
        assert!(gen_signal(SignalKind::Gaussian, 5, 6, 0).is_err());
        assert!(gen_signal(
            SignalKind::PowerLaw {
                lambda: 0.0,
                sparse: true
            },
            5,
            2,
            0
        )
        .is_err());
    }

    #[test]
    fn noise_zero_sigma_is_identity() {
        let b = vec![1.0, -2.0, 3.0];
        assert_eq!(add_noise(&b, 0.0, 5), b);
    }

    #[test]
    fn noise_moments() {
        let m = 100_000;
        let b = vec![0.5; m];
        let sigma = 0.3;
        let noisy = add_noise(&b, sigma, 12);
        let diffs: Vec<f64> = noisy.iter().zip(&b).map(|(a, c)| a - c).collect();
        let mean: f64 = diffs.iter().sum::<f64>() / m as f64;
        assert!((mean / sigma).abs() <= 0.02, "mean {mean}");
        let var: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / m as f64;
        assert!(
            (var - sigma * sigma).abs() <= 0.05 * sigma * sigma,
            "var {var}"
        );
    }

    #[test]
    fn phantom_basics() {
        let n = 32;
        let img = shepp_logan(n);
        assert_eq!(img.len(), n * n);
        assert!(img.iter().all(|v| v.is_finite()));
        assert_eq!(img[0], 0.0, "corner outside all ellipses");
        assert_eq!(img[n - 1], 0.0);
        assert_eq!(img[n * n - 1], 0.0);
        // Center pixel against the analytic point evaluation.
        let i = n / 2;
        let y = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
        let x = (2.0 * i as f64 + 1.0) / n as f64 - 1.0;
        assert_eq!(img[i * n + i], phantom_point(x, y));
        // Near the exact center the two big ellipses overlap: 1 - 0.8 = 0.2.
        assert!((phantom_point(0.0, 0.0) - 0.2).abs() <= 1e-12);
    }

    #[test]
    fn file_round_trip() {
        let s = gen_signal(
            SignalKind::PowerLaw {
                lambda: 0.8,
                sparse: true,
            },
            16,
            4,
            77,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_signal(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# isd-signal v1 kind=power-law-sparse n=16 k=4 lambda=0.8 seed=77"));
        let back = read_signal(io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(back.values, s.values);
        assert_eq!(back.true_support, s.true_support);
        assert_eq!(back.kind, s.kind);
        assert_eq!(back.seed, 77);
    }
}
