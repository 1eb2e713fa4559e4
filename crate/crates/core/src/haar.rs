//! Orthonormal multi-level 2-D Haar wavelet transform.
//!
//! Images are flattened row-major `side x side` grids. The analysis
//! transform is orthogonal, so synthesis is its transpose and Parseval
//! holds exactly up to rounding.

use crate::linop::LinopError;

fn haar_step_rows(data: &mut [f64], side: usize, block: usize, buf: &mut [f64]) {
    let half = block / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for r in 0..block {
        let row = &mut data[r * side..r * side + block];
        for j in 0..half {
            buf[j] = s * (row[2 * j] + row[2 * j + 1]);
            buf[half + j] = s * (row[2 * j] - row[2 * j + 1]);
        }
        row.copy_from_slice(&buf[..block]);
    }
}

fn haar_step_cols(data: &mut [f64], side: usize, block: usize, buf: &mut [f64]) {
    let half = block / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for c in 0..block {
        for j in 0..half {
            let a = data[(2 * j) * side + c];
            let b = data[(2 * j + 1) * side + c];
            buf[j] = s * (a + b);
            buf[half + j] = s * (a - b);
        }
        for j in 0..block {
            data[j * side + c] = buf[j];
        }
    }
}

fn inv_haar_step_rows(data: &mut [f64], side: usize, block: usize, buf: &mut [f64]) {
    let half = block / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for r in 0..block {
        let row = &mut data[r * side..r * side + block];
        for j in 0..half {
            buf[2 * j] = s * (row[j] + row[half + j]);
            buf[2 * j + 1] = s * (row[j] - row[half + j]);
        }
        row.copy_from_slice(&buf[..block]);
    }
}

fn inv_haar_step_cols(data: &mut [f64], side: usize, block: usize, buf: &mut [f64]) {
    let half = block / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for c in 0..block {
        for j in 0..half {
            let a = data[j * side + c];
            let d = data[(half + j) * side + c];
            buf[2 * j] = s * (a + d);
            buf[2 * j + 1] = s * (a - d);
        }
        for j in 0..block {
            data[j * side + c] = buf[j];
        }
    }
}

/// Forward transform: image grid to wavelet coefficients, `levels` stages.
pub fn analyze(image: &[f64], side: usize, levels: u32) -> Result<Vec<f64>, LinopError> {
    check_dims(image.len(), side, levels)?;
    let mut data = image.to_vec();
    let mut buf = vec![0.0; side];
    let mut block = side;
    for _ in 0..levels {
        haar_step_rows(&mut data, side, block, &mut buf);
        haar_step_cols(&mut data, side, block, &mut buf);
        block /= 2;
    }
    Ok(data)
}

/// Inverse transform: wavelet coefficients back to the image grid.
pub fn synthesize(coeffs: &[f64], side: usize, levels: u32) -> Result<Vec<f64>, LinopError> {
    check_dims(coeffs.len(), side, levels)?;
    let mut data = coeffs.to_vec();
    let mut buf = vec![0.0; side];
    let mut block = side >> levels;
    for _ in 0..levels {
        block *= 2;
        inv_haar_step_cols(&mut data, side, block, &mut buf);
        inv_haar_step_rows(&mut data, side, block, &mut buf);
    }
    Ok(data)
}

fn check_dims(len: usize, side: usize, levels: u32) -> Result<(), LinopError> {
    if side == 0 || len != side * side {
        return Err(LinopError::LengthMismatch {
            expected: side * side,
            got: len,
        });
    }
    let div = 1usize << levels;
    if side % div != 0 {
        return Err(LinopError::InvalidShape(format!(
            "side {side} not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn constant_block_single_level() {
        // Constant 2x2 image of ones: one approximation coefficient of 2.
        let coeffs = analyze(&[1.0, 1.0, 1.0, 1.0], 2, 1).unwrap();
        assert!((coeffs[0] - 2.0).abs() < 1e-12);
        for &c in &coeffs[1..] {
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = rng_from_seed(11);
        let image: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for levels in 0..=3 {
            let coeffs = analyze(&image, 8, levels).unwrap();
            let back = synthesize(&coeffs, 8, levels).unwrap();
            let max_err = image
                .iter()
                .zip(&back)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(max_err <= 1e-12, "round trip at levels {levels}");
            let e1: f64 = image.iter().map(|x| x * x).sum();
            let e2: f64 = coeffs.iter().map(|x| x * x).sum();
            assert!((e1.sqrt() - e2.sqrt()).abs() <= 1e-10, "parseval");
        }
    }

    #[test]
    fn rejects_bad_side() {
        assert!(analyze(&[0.0; 36], 6, 2).is_err());
        assert!(analyze(&[0.0; 9], 4, 1).is_err());
    }
}
