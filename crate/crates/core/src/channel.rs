//! Linear channel synthesis and BPSK transmission.
//!
//! The channel is `y = A x + w` with `A = U diag(s) Vᵀ`, `U` and `V`
//! Haar-random orthogonal, the singular values normalized so they sum to `N`,
//! and `w` i.i.d. Gaussian with variance `sigma2` per real dimension. Symbols
//! are BPSK images of codewords, `x_i = (-1)^{v_i}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::codes::LinearCode;
use crate::{Error, Result};

/// One synthesized linear channel: the matrix, its orthogonal factors and the
/// per-dimension noise variance.
#[derive(Debug, Clone)]
pub struct ChannelInstance {
    a: DMatrix<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    singular_values: Vec<f64>,
    sigma2: f64,
    m: usize,
    n: usize,
}

impl ChannelInstance {
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Debug dump: header line `M,N,sigma2,seed` followed by the rows of `A`.
    /// Not a stability contract.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W, seed: u64) -> Result<()> {
        writeln!(w, "{},{},{},{}", self.m, self.n, self.sigma2, seed)?;
        for i in 0..self.m {
            let row: Vec<String> = (0..self.n).map(|j| format!("{}", self.a[(i, j)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// One transmitted frame: info bits, codeword, BPSK symbols, noise and the
/// received vector. `y = A x + w` holds exactly by construction.
#[derive(Debug, Clone)]
pub struct TransmitFrame {
    pub u: Vec<u8>,
    pub v: Vec<u8>,
    pub x: Vec<f64>,
    pub y: DVector<f64>,
    pub w: DVector<f64>,
}

/// Map code bits to BPSK symbols, `b -> (-1)^b`.
pub fn bpsk(v: &[u8]) -> Vec<f64> {
    v.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

/// Draw an `n x n` orthogonal matrix from the Haar measure.
///
/// QR of an i.i.d. standard-normal matrix, with each column of Q negated when
/// the corresponding diagonal entry of R is negative. The sign correction is
/// what makes the distribution exactly Haar rather than QR-convention biased.
pub fn sample_haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidDimension(
            "orthogonal matrix dimension must be positive".into(),
        ));
    }
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

/// Singular-value profile: all equal for `cond = 1`, geometrically spaced with
/// extreme ratio `cond` otherwise, rescaled so the sum is `n`.
fn singular_profile(m: usize, n: usize, cond: f64) -> Vec<f64> {
    if m == 1 || cond == 1.0 {
        return vec![n as f64 / m as f64; m];
    }
    let ratio = cond.powf(1.0 / (m as f64 - 1.0));
    let mut s: Vec<f64> = (0..m).map(|i| ratio.powi(i as i32)).collect();
    let sum: f64 = s.iter().sum();
    let scale = n as f64 / sum;
    for v in &mut s {
        *v *= scale;
    }
    s.reverse(); // largest first
    s
}

/// Synthesize a channel with `m` observations, `n` symbols, a target condition
/// number and noise variance `sigma2`.
pub fn build_channel<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    cond: f64,
    sigma2: f64,
    rng: &mut R,
) -> Result<ChannelInstance> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimension("channel dimensions must be positive".into()));
    }
    if m > n {
        return Err(Error::UnsupportedShape(format!(
            "m = {m} > n = {n}: receivers with more observations than symbols are not modeled"
        )));
    }
    if cond < 1.0 {
        return Err(Error::InvalidArgument(format!("condition number {cond} < 1")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
    }

    let u = sample_haar_orthogonal(m, rng)?;
    let v = sample_haar_orthogonal(n, rng)?;
    let s = singular_profile(m, n, cond);

    // A = U diag(s) Vᵀ with the rectangular M x N diagonal.
    let mut sv = DMatrix::zeros(m, n);
    for (i, &si) in s.iter().enumerate() {
        sv[(i, i)] = si;
    }
    let a = &u * sv * v.transpose();

    Ok(ChannelInstance { a, u, v, singular_values: s, sigma2, m, n })
}

fn transmit_inner(
    ch: &ChannelInstance,
    code: &LinearCode,
    u: &[u8],
    w: DVector<f64>,
) -> Result<TransmitFrame> {
    if code.n() != ch.n {
        return Err(Error::InvalidArgument(format!(
            "code length {} does not match channel width {}",
            code.n(),
            ch.n
        )));
    }
    let v = code.encode(u)?;
    let x = bpsk(&v);
    let xv = DVector::from_column_slice(&x);
    let y = &ch.a * xv + &w;
    Ok(TransmitFrame { u: u.to_vec(), v, x, y, w })
}

/// Encode `u`, modulate and push the frame through the channel with fresh
/// Gaussian noise of variance `sigma2`.
pub fn transmit<R: Rng + ?Sized>(
    ch: &ChannelInstance,
    code: &LinearCode,
    u: &[u8],
    rng: &mut R,
) -> Result<TransmitFrame> {
    let sd = ch.sigma2.sqrt();
    let w = DVector::from_fn(ch.m, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
    transmit_inner(ch, code, u, w)
}

/// Same as [`transmit`] but with the noise forced to zero.
pub fn transmit_noiseless(ch: &ChannelInstance, code: &LinearCode, u: &[u8]) -> Result<TransmitFrame> {
    transmit_inner(ch, code, u, DVector::zeros(ch.m))
}

/// Reported SNR convention for unit-energy BPSK: `-10 log10(sigma2)`.
pub fn snr_db_from_sigma2(sigma2: f64) -> f64 {
    -10.0 * sigma2.log10()
}

/// Inverse of [`snr_db_from_sigma2`].
pub fn sigma2_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
    }

    #[test]
    fn haar_1x1_is_plus_or_minus_one() {
        for seed in 0..20 {
            let q = sample_haar_orthogonal(1, &mut rng(seed)).unwrap();
            assert!((q[(0, 0)].abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_orthogonality() {
        for &n in &[2usize, 3, 7, 20] {
            let q = sample_haar_orthogonal(n, &mut rng(42 + n as u64)).unwrap();
            let err = &q.transpose() * &q - DMatrix::<f64>::identity(n, n);
            assert!(max_abs(&err) < 1e-10, "n = {n}: {}", max_abs(&err));
        }
    }

    #[test]
    fn haar_zero_dimension_rejected() {
        assert!(matches!(
            sample_haar_orthogonal(0, &mut rng(0)),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn haar_entry_mean_is_centered() {
        // Monte Carlo check of column symmetry: E[Q_11] = 0, Var[Q_11] = 1/n.
        let mut r = rng(7);
        let samples = 10_000;
        let mut sum = 0.0;
        for _ in 0..samples {
            sum += sample_haar_orthogonal(3, &mut r).unwrap()[(0, 0)];
        }
        let mean = sum / samples as f64;
        let sigma_of_mean = (1.0 / 3.0 / samples as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma_of_mean, "mean {mean}, 3σ {}", 3.0 * sigma_of_mean);
    }

    #[test]
    fn channel_cond1_square_has_unit_singular_values() {
        let ch = build_channel(20, 20, 1.0, 0.1, &mut rng(1)).unwrap();
        for &s in ch.singular_values() {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_one_by_one() {
        let ch = build_channel(1, 1, 1.0, 0.5, &mut rng(3)).unwrap();
        assert!((ch.a()[(0, 0)].abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn channel_19x20_singular_values() {
        let ch = build_channel(19, 20, 1.0, 0.1, &mut rng(5)).unwrap();
        for &s in ch.singular_values() {
            assert!((s - 20.0 / 19.0).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_invariants() {
        for (m, n, cond) in [(20, 20, 1.0), (19, 20, 1.0), (10, 16, 4.0), (5, 5, 2.0)] {
            let ch = build_channel(m, n, cond, 0.1, &mut rng(100 + m as u64)).unwrap();
            // A = U diag(s) Vᵀ
            let mut sv = DMatrix::zeros(m, n);
            for (i, &si) in ch.singular_values().iter().enumerate() {
                sv[(i, i)] = si;
            }
            let rebuilt = ch.u() * sv * ch.v().transpose();
            assert!(max_abs(&(rebuilt - ch.a())) < 1e-10);
            // orthogonality
            let eu = ch.u().transpose() * ch.u() - DMatrix::<f64>::identity(m, m);
            let ev = ch.v().transpose() * ch.v() - DMatrix::<f64>::identity(n, n);
            assert!(max_abs(&eu) < 1e-10 && max_abs(&ev) < 1e-10);
            // sum of singular values = N
            let sum: f64 = ch.singular_values().iter().sum();
            assert!((sum - n as f64).abs() < 1e-10);
            // condition number
            let smax = ch.singular_values().iter().cloned().fold(f64::MIN, f64::max);
            let smin = ch.singular_values().iter().cloned().fold(f64::MAX, f64::min);
            if m > 1 {
                assert!((smax / smin - cond).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn channel_m_greater_than_n_rejected() {
        assert!(matches!(
            build_channel(21, 20, 1.0, 0.1, &mut rng(0)),
            Err(Error::UnsupportedShape(_))
        ));
    }

    #[test]
    fn cond1_square_a_is_scaled_orthogonal() {
        let ch = build_channel(20, 20, 1.0, 0.1, &mut rng(9)).unwrap();
        let gram = ch.a().transpose() * ch.a();
        let err = gram - DMatrix::<f64>::identity(20, 20);
        assert!(max_abs(&err) < 1e-9);
    }

    #[test]
    fn transmit_zero_word_noiseless() {
        let code = codes::toy::code_4_2();
        let ch = build_channel(4, 4, 1.0, 0.01, &mut rng(11)).unwrap();
        let frame = transmit_noiseless(&ch, &code, &[0, 0]).unwrap();
        // zero codeword maps to the all-ones BPSK vector
        let ones = DVector::from_element(4, 1.0);
        let expect = ch.a() * ones;
        assert!((frame.y.clone() - expect).amax() < 1e-12);
        assert_eq!(frame.x, vec![1.0; 4]);
    }

    #[test]
    fn transmit_identity_channel_returns_symbols() {
        // Hand-built identity channel.
        let n = 4;
        let code = codes::toy::code_4_2();
        let ch = ChannelInstance {
            a: DMatrix::identity(n, n),
            u: DMatrix::identity(n, n),
            v: DMatrix::identity(n, n),
            singular_values: vec![1.0; n],
            sigma2: 0.1,
            m: n,
            n,
        };
        let frame = transmit_noiseless(&ch, &code, &[1, 0]).unwrap();
        for j in 0..n {
            assert!((frame.y[j] - frame.x[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn transmit_noise_variance_matches() {
        let code = codes::toy::code_4_2();
        let ch = build_channel(4, 4, 1.0, 0.25, &mut rng(13)).unwrap();
        let mut r = rng(14);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut count = 0usize;
        // 25_000 frames x 4 noise draws = 1e5 samples
        for _ in 0..25_000 {
            let frame = transmit(&ch, &code, &[0, 1], &mut r).unwrap();
            for i in 0..4 {
                sum += frame.w[i];
                sum2 += frame.w[i] * frame.w[i];
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sum2 / count as f64 - mean * mean;
        assert!((var - 0.25).abs() < 0.25 * 0.01, "sample variance {var}");
    }

    #[test]
    fn transmit_dimension_mismatch() {
        let code = codes::toy::code_4_2();
        let ch = build_channel(5, 5, 1.0, 0.1, &mut rng(15)).unwrap();
        assert!(matches!(
            transmit_noiseless(&ch, &code, &[0, 0]),
            Err(Error::InvalidArgument(_))
        ));
        let ch = build_channel(4, 4, 1.0, 0.1, &mut rng(15)).unwrap();
        assert!(matches!(
            transmit_noiseless(&ch, &code, &[0, 0, 0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn transmit_is_deterministic() {
        let code = codes::toy::code_4_2();
        let ch = build_channel(4, 4, 1.0, 0.3, &mut rng(21)).unwrap();
        let f1 = transmit(&ch, &code, &[1, 1], &mut rng(77)).unwrap();
        let f2 = transmit(&ch, &code, &[1, 1], &mut rng(77)).unwrap();
        assert_eq!(f1.y.as_slice(), f2.y.as_slice());
        assert_eq!(f1.w.as_slice(), f2.w.as_slice());
    }

    #[test]
    fn bpsk_energy_is_n() {
        let code = codes::toy::code_4_2();
        let ch = build_channel(4, 4, 1.0, 0.3, &mut rng(23)).unwrap();
        let mut r = rng(24);
        for _ in 0..50 {
            let u = [r.random_range(0..2u8), r.random_range(0..2u8)];
            let frame = transmit(&ch, &code, &u, &mut r).unwrap();
            let energy: f64 = frame.x.iter().map(|v| v * v).sum();
            assert_eq!(energy, 4.0);
        }
    }

    #[test]
    fn cond_profile_geometric() {
        let s = singular_profile(4, 8, 8.0);
        let sum: f64 = s.iter().sum();
        assert!((sum - 8.0).abs() < 1e-12);
        assert!((s[0] / s[3] - 8.0).abs() < 1e-9);
        // geometric: constant ratio between neighbors
        let r0 = s[0] / s[1];
        let r1 = s[1] / s[2];
        assert!((r0 - r1).abs() < 1e-9);
    }

    #[test]
    fn snr_conversion_round_trip() {
        for snr in [-3.0, 0.0, 4.5, 10.0] {
            assert!((snr_db_from_sigma2(sigma2_from_snr_db(snr)) - snr).abs() < 1e-12);
        }
    }
}
