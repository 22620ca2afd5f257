//! Exhaustive maximum-likelihood references.
//!
//! Both searches walk the 2^K info words in Gray-code order so each candidate
//! differs from the previous one in a single info bit, and only the code bits
//! on that bit's generator column get touched.

use nalgebra::{DMatrix, DVector};

use crate::codes::LinearCode;
use crate::{Error, Result};

const MAX_EXHAUSTIVE_K: usize = 24;

fn check_k(code: &LinearCode) -> Result<()> {
    if code.k() > MAX_EXHAUSTIVE_K {
        return Err(Error::UnsupportedSize(format!(
            "k = {} info bits is beyond the 2^{MAX_EXHAUSTIVE_K} enumeration budget",
            code.k()
        )));
    }
    Ok(())
}

fn bits_from_mask(mask: u64, k: usize) -> Vec<u8> {
    (0..k).map(|c| ((mask >> c) & 1) as u8).collect()
}

/// Generator columns as codeword-bit masks: flipping info bit `c` flips the
/// codeword bits in `cols[c]`.
fn generator_columns(code: &LinearCode) -> Vec<u64> {
    let mut cols = vec![0u64; code.k()];
    for (j, &g) in code.g_rows().iter().enumerate() {
        let mut m = g;
        while m != 0 {
            cols[m.trailing_zeros() as usize] |= 1 << j;
            m &= m - 1;
        }
    }
    cols
}

/// Exact joint detection and decoding: minimize `|y - A (-1)^(G u)|^2` over
/// all 2^K info words. Ties resolve to the smallest integer encoding of `u`.
pub fn ml_joint_detect(y: &DVector<f64>, a: &DMatrix<f64>, code: &LinearCode) -> Result<Vec<u8>> {
    check_k(code)?;
    if y.len() != a.nrows() || code.n() != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "shapes: y is {}, A is {}x{}, code length {}",
            y.len(),
            a.nrows(),
            a.ncols(),
            code.n()
        )));
    }
    let m = a.nrows();
    let n = code.n();
    let cols = generator_columns(code);

    // u = 0 encodes to the zero codeword: all-ones symbols.
    let mut x = vec![1.0f64; n];
    let mut r = DVector::zeros(m);
    for j in 0..n {
        r += a.column(j);
    }
    let score = |r: &DVector<f64>| -> f64 { (y - r).norm_squared() };

    let mut best_score = score(&r);
    let mut best_u = 0u64;
    for i in 1u64..(1 << code.k()) {
        let flip = i.trailing_zeros() as usize;
        let mut mask = cols[flip];
        while mask != 0 {
            let j = mask.trailing_zeros() as usize;
            // x_j flips sign: r += A_j (x_new - x_old) = -2 x_old A_j
            let delta = -2.0 * x[j];
            r += a.column(j) * delta;
            x[j] = -x[j];
            mask &= mask - 1;
        }
        let u_gray = i ^ (i >> 1);
        let s = score(&r);
        if s < best_score || (s == best_score && u_gray < best_u) {
            best_score = s;
            best_u = u_gray;
        }
    }
    Ok(bits_from_mask(best_u, code.k()))
}

/// Exact codeword decoding of a soft symbol estimate: maximize `<l, x(u)>`,
/// equivalent to minimizing `|l - x(u)|^2` since BPSK words share their norm.
pub fn ml_decode_codeword(l: &[f64], code: &LinearCode) -> Result<Vec<u8>> {
    check_k(code)?;
    if l.len() != code.n() {
        return Err(Error::InvalidArgument(format!(
            "estimate length {} != n = {}",
            l.len(),
            code.n()
        )));
    }
    let cols = generator_columns(code);
    let mut x = vec![1.0f64; code.n()];
    let mut dot: f64 = l.iter().sum();

    let mut best_dot = dot;
    let mut best_u = 0u64;
    for i in 1u64..(1 << code.k()) {
        let flip = i.trailing_zeros() as usize;
        let mut mask = cols[flip];
        while mask != 0 {
            let j = mask.trailing_zeros() as usize;
            dot -= 2.0 * l[j] * x[j];
            x[j] = -x[j];
            mask &= mask - 1;
        }
        let u_gray = i ^ (i >> 1);
        if dot > best_dot || (dot == best_dot && u_gray < best_u) {
            best_dot = dot;
            best_u = u_gray;
        }
    }
    Ok(bits_from_mask(best_u, code.k()))
}
