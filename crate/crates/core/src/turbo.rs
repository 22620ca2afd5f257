//! The turbo receiver: an orthogonal-AMP linear detector, the circuit decoder
//! supplying extrinsic log-likelihood ratios, and an MMSE nonlinear stage
//! fusing the two.
//!
//! One iteration runs
//!   linear:   l = p + W (y - A p),  W the trace-normalized LMMSE gain
//!   decode:   L_ext from the decoder driven by (l, tau2)
//!   nonlinear: p_i = tanh(l_i / tau2 + L_ext_i / 2),  v2 = mean(1 - p^2)
//! with p = 0, v2 = 1 (the BPSK prior) at the start.

use nalgebra::{DMatrix, DVector};

use crate::codes::LinearCode;
use crate::l2l::{run_l2l_episode_from, run_soft_bits_episode, LstmStack, StackKind};
use crate::{Error, Result};

/// Saturating cap for every log-likelihood ratio in the loop. At 40 the
/// implied probability is within 4e-18 of certainty; past that, doubles
/// cannot tell the difference but `atanh` can overflow.
pub const LLR_CAP: f64 = 40.0;

/// Lower floor on the linear-estimate error variance, against division by an
/// exact zero in the noiseless limit.
pub const TAU2_FLOOR: f64 = 1e-12;

/// Floor on the nonlinear-estimate error variance, against a singular LMMSE
/// stage at high certainty.
pub const V2_FLOOR: f64 = 1e-9;

fn cap_llr(v: f64) -> f64 {
    v.clamp(-LLR_CAP, LLR_CAP)
}

/// Hard decision from an LLR; zero resolves to bit 0, matching the
/// hard-decision map used for syndromes.
pub fn llr_to_bit(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

/// Per-iteration detector state kept for diagnostics.
#[derive(Debug, Clone)]
pub struct TurboState {
    /// Nonlinear (decoder-fused) symbol estimate, entries in (-1, 1).
    pub p: Vec<f64>,
    /// Linear symbol estimate.
    pub l: Vec<f64>,
    /// Per-symbol prior pair (q(+1), q(-1)) implied by the decoder extrinsic.
    pub q: Vec<(f64, f64)>,
    pub tau2: f64,
    pub v2: f64,
    /// 1-based iteration index.
    pub t: usize,
    /// The decoder's info-bit LLRs at this iteration, when a decoder ran.
    pub info_llrs: Option<Vec<f64>>,
}

/// The de-correlated LMMSE gain: `W = (N / tr(Ŵ A)) Ŵ` with
/// `Ŵ = v2 Aᵀ (v2 A Aᵀ + σ² I)⁻¹`. `tr(W A) = N` holds by construction.
pub(crate) fn oamp_gain_matrix(a: &DMatrix<f64>, v2: f64, sigma2: f64) -> Result<DMatrix<f64>> {
    let m = a.nrows();
    let n = a.ncols();
    let mut b = a * a.transpose() * v2;
    for i in 0..m {
        b[(i, i)] += sigma2;
    }
    let chol = b.clone().cholesky().ok_or_else(|| {
        let diag_min = (0..m).map(|i| b[(i, i)]).fold(f64::MAX, f64::min);
        Error::Numerical(format!(
            "regularized Gram matrix is not positive definite \
             (v2 = {v2}, sigma2 = {sigma2}, min diagonal = {diag_min})"
        ))
    })?;
    let w_hat = a.transpose() * chol.inverse() * v2;

    let mut trace = 0.0;
    for i in 0..n {
        for j in 0..m {
            trace += w_hat[(i, j)] * a[(j, i)];
        }
    }
    if trace.abs() < 1e-300 {
        return Err(Error::Numerical("tr(Ŵ A) vanished; cannot normalize the gain".into()));
    }
    Ok(w_hat * (n as f64 / trace))
}

/// Linear detection step. Returns the updated estimate `l` and its error
/// variance `tau2`. The first iteration uses `p = 0`, `v2 = 1`.
pub fn oamp_linear_step(
    y: &DVector<f64>,
    a: &DMatrix<f64>,
    p: &[f64],
    v2: f64,
    sigma2: f64,
) -> Result<(Vec<f64>, f64)> {
    let m = a.nrows();
    let n = a.ncols();
    if y.len() != m || p.len() != n {
        return Err(Error::InvalidArgument(format!(
            "shapes: y is {}, p is {}, A is {m}x{n}",
            y.len(),
            p.len()
        )));
    }
    if !(v2 > 0.0) {
        return Err(Error::InvalidArgument(format!("v2 must be positive, got {v2}")));
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidArgument(format!("sigma2 must be nonnegative, got {sigma2}")));
    }

    let w = oamp_gain_matrix(a, v2, sigma2)?;
    let pv = DVector::from_column_slice(p);
    let residual = y - a * &pv;
    let l = &pv + &w * residual;

    let wa = &w * a;
    let mut fro_iwa = 0.0;
    for i in 0..n {
        for j in 0..n {
            let e = f64::from(i == j) - wa[(i, j)];
            fro_iwa += e * e;
        }
    }
    let fro_w: f64 = w.iter().map(|v| v * v).sum();
    let tau2 = v2 / n as f64 * fro_iwa + sigma2 / n as f64 * fro_w;

    if !tau2.is_finite() || l.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("linear step produced non-finite values".into()));
    }
    Ok((l.iter().cloned().collect(), tau2))
}

/// Nonlinear detection step with decoder extrinsic priors. For BPSK the
/// posterior-mean estimator reduces to `p_i = tanh(l_i/tau2 + L_ext_i/2)`;
/// the error variance is the empirical `mean(1 - p^2)`, floored.
pub fn mmse_nonlinear_step(l: &[f64], tau2: f64, ext_llr: &[f64]) -> Result<(Vec<f64>, f64)> {
    if l.len() != ext_llr.len() {
        return Err(Error::InvalidArgument(format!(
            "estimate length {} vs extrinsic length {}",
            l.len(),
            ext_llr.len()
        )));
    }
    if !(tau2 > 0.0) {
        return Err(Error::InvalidArgument(format!("tau2 must be positive, got {tau2}")));
    }
    let p: Vec<f64> =
        l.iter().zip(ext_llr).map(|(&li, &ei)| (li / tau2 + ei / 2.0).tanh()).collect();
    let v2 = p.iter().map(|pi| 1.0 - pi * pi).sum::<f64>() / p.len() as f64;
    Ok((p, v2.max(V2_FLOOR)))
}

/// Decoder soft outputs: info-bit LLRs, codeword-bit LLRs and the extrinsic
/// actually returned to the detector.
#[derive(Debug, Clone)]
pub struct SoftDecodeOutput {
    pub info_llrs: Vec<f64>,
    pub code_llrs: Vec<f64>,
    pub extrinsic: Vec<f64>,
}

/// Turn per-info-bit soft values (Z expectations or tanh outputs, in [-1,1])
/// into codeword LLRs and extrinsic information.
///
/// Info LLR: `L_i = log((1 + u^_i) / (1 - u^_i))`, the measurement-basis
/// log-odds of bit 0 over bit 1. Codeword LLR: the product update
/// `L'_j = 2 atanh( prod_{i in G_j} tanh(L_i / 2) )`. Extrinsic:
/// `L_ext_j = L'_j - 2 l_j / tau2`. Everything capped at ±40.
pub fn llrs_from_soft_bits(
    code: &LinearCode,
    u_hat: &[f64],
    l: &[f64],
    tau2: f64,
) -> Result<SoftDecodeOutput> {
    if u_hat.len() != code.k() || l.len() != code.n() {
        return Err(Error::InvalidArgument(format!(
            "got {} soft bits and {} symbols for a [{}, {}] code",
            u_hat.len(),
            l.len(),
            code.n(),
            code.k()
        )));
    }
    if !(tau2 > 0.0) {
        return Err(Error::InvalidArgument(format!("tau2 must be positive, got {tau2}")));
    }
    const EPS: f64 = 1e-12;
    let info_llrs: Vec<f64> = u_hat
        .iter()
        .map(|&u| {
            let u = u.clamp(-1.0 + EPS, 1.0 - EPS);
            cap_llr(((1.0 + u) / (1.0 - u)).ln())
        })
        .collect();
    let half_tanh: Vec<f64> = info_llrs.iter().map(|li| (li / 2.0).tanh()).collect();

    let mut code_llrs = Vec::with_capacity(code.n());
    let mut extrinsic = Vec::with_capacity(code.n());
    for (&g, &lj_in) in code.g_rows().iter().zip(l) {
        let mut prod = 1.0;
        let mut mask = g;
        while mask != 0 {
            prod *= half_tanh[mask.trailing_zeros() as usize];
            mask &= mask - 1;
        }
        let lj = cap_llr(2.0 * prod.clamp(-1.0 + EPS, 1.0 - EPS).atanh());
        code_llrs.push(lj);
        extrinsic.push(cap_llr(lj - 2.0 * lj_in / tau2));
    }
    Ok(SoftDecodeOutput { info_llrs, code_llrs, extrinsic })
}

/// Codeword LLRs and extrinsic from per-code-bit flip scores in [-1, 1]
/// (+1 = the hard decision on `l` is right, -1 = flipped). The sign of `l`
/// folds back in: the soft symbol is `sign(l_j) * score_j`.
pub fn llrs_from_flip_scores(
    flip_scores: &[f64],
    l: &[f64],
    tau2: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if flip_scores.len() != l.len() {
        return Err(Error::InvalidArgument(format!(
            "{} flip scores for {} symbols",
            flip_scores.len(),
            l.len()
        )));
    }
    if !(tau2 > 0.0) {
        return Err(Error::InvalidArgument(format!("tau2 must be positive, got {tau2}")));
    }
    const EPS: f64 = 1e-12;
    let mut code_llrs = Vec::with_capacity(l.len());
    let mut extrinsic = Vec::with_capacity(l.len());
    for (&score, &lj) in flip_scores.iter().zip(l) {
        let sign = if lj < 0.0 { -1.0 } else { 1.0 };
        let soft = (sign * score).clamp(-1.0 + EPS, 1.0 - EPS);
        let llr = cap_llr(2.0 * soft.atanh());
        code_llrs.push(llr);
        extrinsic.push(cap_llr(llr - 2.0 * lj / tau2));
    }
    Ok((code_llrs, extrinsic))
}

/// Run the circuit decoder on a linear estimate and return the extrinsic
/// LLRs for the detector. An untrained (zero) stack is permitted; it yields
/// zero codeword LLRs and the pure prior-removal term.
pub fn vqc_decode_extrinsic(
    code: &LinearCode,
    l: &[f64],
    tau2: f64,
    stack: &LstmStack,
    t_steps: usize,
) -> Result<Vec<f64>> {
    let trace = crate::l2l::run_l2l_episode(code, l, tau2, stack, t_steps)?;
    let u_hat = trace.u_hat.last().expect("episode has at least one step");
    Ok(llrs_from_soft_bits(code, u_hat, l, tau2)?.extrinsic)
}

/// Which decoder sits in the loop.
#[derive(Debug, Clone, Copy)]
pub enum DecoderKind<'a> {
    /// The circuit decoder with its angle-emitting stack.
    Vqc(&'a LstmStack),
    /// The classical soft-bit LSTM decoder.
    SoftBits(&'a LstmStack),
    /// No decoder: zero extrinsic, plain OAMP.
    Null,
}

#[derive(Debug, Clone)]
pub struct TurboOptions {
    pub n_iters: usize,
    /// Keep the circuit angles warm across turbo iterations instead of
    /// reinitializing each decoder call.
    pub persist_angles: bool,
    /// Override the stack's trained step count.
    pub t_steps: Option<usize>,
}

impl Default for TurboOptions {
    fn default() -> Self {
        TurboOptions { n_iters: 3, persist_angles: false, t_steps: None }
    }
}

/// Receiver output: hard info bits (absent for the decoder-less loop), the
/// final decoder LLRs, the final linear estimate and the per-iteration trace.
#[derive(Debug, Clone)]
pub struct TurboRun {
    pub info_bits: Option<Vec<u8>>,
    pub info_llrs: Option<Vec<f64>>,
    pub final_l: Vec<f64>,
    pub final_tau2: f64,
    pub trace: Vec<TurboState>,
}

/// Full turbo loop with a pluggable decoder.
pub fn run_turbo_with(
    y: &DVector<f64>,
    a: &DMatrix<f64>,
    code: &LinearCode,
    sigma2: f64,
    decoder: DecoderKind,
    opts: &TurboOptions,
) -> Result<TurboRun> {
    if opts.n_iters == 0 {
        return Err(Error::InvalidArgument("need at least one turbo iteration".into()));
    }
    if code.n() != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "code length {} does not match channel width {}",
            code.n(),
            a.ncols()
        )));
    }
    let n = code.n();
    let mut p = vec![0.0; n];
    let mut v2 = 1.0;
    let mut trace = Vec::with_capacity(opts.n_iters);
    let mut warm_angles: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut last_info: Option<Vec<f64>> = None;
    let mut final_l = vec![0.0; n];
    let mut final_tau2 = TAU2_FLOOR;

    for t in 1..=opts.n_iters {
        let (l, tau2_raw) = oamp_linear_step(y, a, &p, v2, sigma2)?;
        let tau2 = tau2_raw.max(TAU2_FLOOR);

        let (ext, info_llrs) = match decoder {
            DecoderKind::Vqc(stack) => {
                let steps = opts.t_steps.unwrap_or_else(|| stack.t_steps());
                let ep = match (&warm_angles, opts.persist_angles) {
                    (Some((g, b)), true) => {
                        run_l2l_episode_from(code, &l, tau2, stack, steps, (g, b))?
                    }
                    _ => crate::l2l::run_l2l_episode(code, &l, tau2, stack, steps)?,
                };
                if opts.persist_angles {
                    warm_angles = Some((
                        ep.gamma.last().expect("nonempty").clone(),
                        ep.beta.last().expect("nonempty").clone(),
                    ));
                }
                let out = llrs_from_soft_bits(code, ep.u_hat.last().expect("nonempty"), &l, tau2)?;
                (out.extrinsic, Some(out.info_llrs))
            }
            DecoderKind::SoftBits(stack) => {
                let steps = opts.t_steps.unwrap_or_else(|| stack.t_steps());
                let ep = run_soft_bits_episode(code, &l, tau2, stack, steps)?;
                let (_, ext) =
                    llrs_from_flip_scores(ep.u_hat.last().expect("nonempty"), &l, tau2)?;
                (ext, None)
            }
            DecoderKind::Null => (vec![0.0; n], None),
        };

        let (p_new, v2_new) = mmse_nonlinear_step(&l, tau2, &ext)?;
        let q: Vec<(f64, f64)> =
            ext.iter().map(|&e| (1.0 / (1.0 + (-e).exp()), 1.0 / (1.0 + e.exp()))).collect();

        trace.push(TurboState {
            p: p_new.clone(),
            l: l.clone(),
            q,
            tau2,
            v2: v2_new,
            t,
            info_llrs: info_llrs.clone(),
        });
        p = p_new;
        v2 = v2_new;
        last_info = info_llrs;
        final_l = l;
        final_tau2 = tau2;
    }

    let info_bits = last_info.as_ref().map(|llrs| llrs.iter().map(|&v| llr_to_bit(v)).collect());
    Ok(TurboRun { info_bits, info_llrs: last_info, final_l, final_tau2, trace })
}

/// The standard receiver: circuit decoder, angles reinitialized per call,
/// hard info bits from the last iteration's info LLRs.
pub fn run_turbo(
    y: &DVector<f64>,
    a: &DMatrix<f64>,
    code: &LinearCode,
    sigma2: f64,
    stack: &LstmStack,
    n_iters: usize,
) -> Result<(Vec<u8>, Vec<TurboState>)> {
    if !matches!(stack.kind(), StackKind::Angles { .. }) {
        return Err(Error::InvalidArgument("run_turbo expects an angle-emitting stack".into()));
    }
    let run = run_turbo_with(
        y,
        a,
        code,
        sigma2,
        DecoderKind::Vqc(stack),
        &TurboOptions { n_iters, ..TurboOptions::default() },
    )?;
    Ok((run.info_bits.expect("circuit decoder always yields info bits"), run.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{self, bpsk};
    use crate::codes;
    use crate::l2l::{train_l2l, TrainerConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn orthogonal_channel_linear_step_is_matched_filter() {
        let mut r = rng(1);
        let code = codes::build_ldpc_regular(20, 2, 4, &mut r).unwrap();
        let ch = channel::build_channel(20, 20, 1.0, 0.25, &mut r).unwrap();
        let u: Vec<u8> = (0..code.k()).map(|_| r.random_range(0..2u8)).collect();
        let frame = channel::transmit(&ch, &code, &u, &mut r).unwrap();

        let (l, tau2) = oamp_linear_step(&frame.y, ch.a(), &[0.0; 20], 1.0, 0.25).unwrap();
        // cond-1 square channel: W = Aᵀ exactly, so l = Aᵀ y and tau2 = σ²
        let expect = ch.a().transpose() * &frame.y;
        for j in 0..20 {
            assert!((l[j] - expect[j]).abs() < 1e-10);
        }
        assert!((tau2 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn noiseless_invertible_channel_recovers_symbols() {
        let mut r = rng(2);
        let code = codes::build_ldpc_regular(16, 2, 4, &mut r).unwrap();
        let ch = channel::build_channel(16, 16, 3.0, 1e-12, &mut r).unwrap();
        let frame = channel::transmit_noiseless(&ch, &code, &vec![0u8; code.k()]).unwrap();
        let (l, tau2) = oamp_linear_step(&frame.y, ch.a(), &[0.0; 16], 1.0, 0.0).unwrap();
        for j in 0..16 {
            assert!((l[j] - frame.x[j]).abs() < 1e-8, "symbol {j}: {} vs {}", l[j], frame.x[j]);
        }
        assert!(tau2.abs() < 1e-10);
    }

    #[test]
    fn gain_matrix_is_trace_normalized() {
        let mut r = rng(3);
        for (m, n, cond) in [(20, 20, 1.0), (19, 20, 1.0), (10, 16, 4.0)] {
            let ch = channel::build_channel(m, n, cond, 0.1, &mut r).unwrap();
            for v2 in [1.0, 0.3, 1e-6] {
                let w = oamp_gain_matrix(ch.a(), v2, 0.1).unwrap();
                let wa = &w * ch.a();
                let trace: f64 = (0..n).map(|i| wa[(i, i)]).sum();
                assert!((trace - n as f64).abs() < 1e-8, "m={m} n={n} v2={v2}: tr={trace}");
            }
        }
    }

    #[test]
    fn reported_tau2_matches_empirical_error() {
        // Monte Carlo consistency: Var(l - x) tracks the reported tau2.
        let mut r = rng(4);
        let code = codes::build_ldpc_regular(20, 2, 4, &mut r).unwrap();
        let sigma2 = 0.2;
        let mut sum2 = 0.0;
        let mut count = 0usize;
        let mut tau2_reported = 0.0;
        let frames = 5000;
        for _ in 0..frames {
            let ch = channel::build_channel(20, 20, 1.0, sigma2, &mut r).unwrap();
            let u: Vec<u8> = (0..code.k()).map(|_| r.random_range(0..2u8)).collect();
            let frame = channel::transmit(&ch, &code, &u, &mut r).unwrap();
            let (l, tau2) = oamp_linear_step(&frame.y, ch.a(), &[0.0; 20], 1.0, sigma2).unwrap();
            tau2_reported = tau2;
            for j in 0..20 {
                let e = l[j] - frame.x[j];
                sum2 += e * e;
                count += 1;
            }
        }
        let empirical = sum2 / count as f64;
        assert!(
            (empirical - tau2_reported).abs() < 0.03 * tau2_reported,
            "empirical {empirical} vs reported {tau2_reported}"
        );
    }

    #[test]
    fn mmse_without_priors_is_plain_denoiser() {
        let l = [0.4, -1.2, 0.05];
        let (p, _) = mmse_nonlinear_step(&l, 0.5, &[0.0; 3]).unwrap();
        for j in 0..3 {
            assert!((p[j] - (l[j] / 0.5).tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn mmse_decoder_certainty_dominates() {
        let (p, _) = mmse_nonlinear_step(&[0.0], 1.0, &[LLR_CAP]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        let (p, _) = mmse_nonlinear_step(&[0.0], 1.0, &[-LLR_CAP]).unwrap();
        assert!((p[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn mmse_hand_example() {
        let (p, _) = mmse_nonlinear_step(&[0.5], 1.0, &[1.0]).unwrap();
        assert!((p[0] - 1.0f64.tanh()).abs() < 1e-15);
        assert!((p[0] - 0.7615941559557649).abs() < 1e-12);
    }

    #[test]
    fn mmse_tanh_form_equals_symbol_sum_form() {
        // Direct evaluation of the posterior-mean estimator as a ratio of
        // sums over the symbol set {+1, -1}, with the extrinsic realized as
        // q(+1) = 1/(1+e^-L).
        let mut r = rng(5);
        for _ in 0..1000 {
            let l: f64 = r.random_range(-3.0..3.0);
            let tau2: f64 = r.random_range(0.05..2.0);
            let ext: f64 = r.random_range(-8.0..8.0);
            let q_plus = 1.0 / (1.0 + (-ext).exp());
            let q_minus = 1.0 - q_plus;
            let lik = |r_s: f64| (-(l - r_s) * (l - r_s) / (2.0 * tau2)).exp();
            let num = q_plus * lik(1.0) - q_minus * lik(-1.0);
            let den = q_plus * lik(1.0) + q_minus * lik(-1.0);
            let direct = num / den;
            let (p, _) = mmse_nonlinear_step(&[l], tau2, &[ext]).unwrap();
            assert!((p[0] - direct).abs() < 1e-12, "l={l} tau2={tau2} ext={ext}");
        }
    }

    #[test]
    fn uninformative_soft_bits_reduce_to_prior_removal() {
        let code = codes::toy::code_4_2();
        let l = [0.5, -0.75, 1.5, -0.25];
        let tau2 = 0.5;
        let out = llrs_from_soft_bits(&code, &[0.0; 2], &l, tau2).unwrap();
        for j in 0..4 {
            assert_eq!(out.code_llrs[j], 0.0);
            assert!((out.extrinsic[j] - cap_llr(-2.0 * l[j] / tau2)).abs() < 1e-12);
        }
        // and through the zero-weight circuit stack
        let stack = crate::l2l::LstmStack::new_l2l(2, 2, code.s(), code.n(), 3).unwrap();
        let ext = vqc_decode_extrinsic(&code, &l, tau2, &stack, 3).unwrap();
        for j in 0..4 {
            assert!((ext[j] - out.extrinsic[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_factor_product_update_is_identity() {
        // repetition code: each codeword bit depends on the single info bit,
        // so L'_j = L_1 for both bits
        let code = codes::toy::repetition_2_1();
        let u_hat = [1.0f64.tanh()]; // L_1 = 2 atanh(u) = 2
        let out = llrs_from_soft_bits(&code, &u_hat, &[0.1, 0.1], 1.0).unwrap();
        assert!((out.info_llrs[0] - 2.0).abs() < 1e-12);
        assert!((out.code_llrs[0] - 2.0).abs() < 1e-12);
        assert!((out.code_llrs[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn confident_soft_bits_sign_code_llrs_correctly() {
        let code =
            codes::LinearCode::from_file(concat!(env!("CARGO_MANIFEST_DIR"), "/data/bklc_20_11.code"))
                .unwrap();
        let mut r = rng(6);
        for _ in 0..50 {
            let u: Vec<u8> = (0..code.k()).map(|_| r.random_range(0..2u8)).collect();
            let v = code.encode(&u).unwrap();
            let u_hat: Vec<f64> =
                u.iter().map(|&b| if b == 0 { 1.0 - 1e-6 } else { -1.0 + 1e-6 }).collect();
            let out = llrs_from_soft_bits(&code, &u_hat, &bpsk(&v), 1.0).unwrap();
            for j in 0..code.n() {
                let want_positive = v[j] == 0;
                assert_eq!(out.code_llrs[j] > 0.0, want_positive, "bit {j}");
            }
        }
    }

    #[test]
    fn llrs_always_within_cap() {
        let code = codes::toy::code_4_2();
        let mut r = rng(7);
        for _ in 0..200 {
            let u_hat: Vec<f64> = (0..2).map(|_| r.random_range(-1.0..=1.0)).collect();
            let l: Vec<f64> = (0..4).map(|_| r.random_range(-50.0..50.0)).collect();
            let tau2 = r.random_range(1e-6..2.0);
            let out = llrs_from_soft_bits(&code, &u_hat, &l, tau2).unwrap();
            for v in out.info_llrs.iter().chain(&out.code_llrs).chain(&out.extrinsic) {
                assert!(v.abs() <= LLR_CAP && v.is_finite());
            }
        }
    }

    fn trained_toy_stack() -> (codes::LinearCode, crate::l2l::LstmStack) {
        let code = codes::toy::code_4_2();
        let cfg = TrainerConfig {
            t_steps: 5,
            qaoa_depth: 4,
            lstm_depth: 2,
            batch_size: 8,
            epochs: 400,
            heldout_size: 8,
            seed: 9,
            snr_range_db: (2.0, 10.0),
            eval_every: 200,
            ..TrainerConfig::default()
        };
        let (stack, _) = train_l2l(&code, &cfg).unwrap();
        (code, stack)
    }

    #[test]
    fn turbo_recovers_noiseless_frames() {
        let (code, stack) = trained_toy_stack();
        let mut r = rng(8);
        for trial in 0..20 {
            let ch = channel::build_channel(4, 4, 1.0, 1e-9, &mut r).unwrap();
            let u: Vec<u8> = (0..code.k()).map(|_| r.random_range(0..2u8)).collect();
            let frame = channel::transmit_noiseless(&ch, &code, &u).unwrap();
            let (bits, _) = run_turbo(&frame.y, ch.a(), &code, 1e-9, &stack, 3).unwrap();
            assert_eq!(bits, u, "trial {trial}");
        }
    }

    #[test]
    fn turbo_run_is_deterministic() {
        let (code, stack) = trained_toy_stack();
        let mut r = rng(10);
        let ch = channel::build_channel(4, 4, 1.0, 0.3, &mut r).unwrap();
        let frame = channel::transmit(&ch, &code, &[1, 0], &mut r).unwrap();
        let (b1, t1) = run_turbo(&frame.y, ch.a(), &code, 0.3, &stack, 3).unwrap();
        let (b2, t2) = run_turbo(&frame.y, ch.a(), &code, 0.3, &stack, 3).unwrap();
        assert_eq!(b1, b2);
        for (a, b) in t1.iter().zip(&t2) {
            assert_eq!(a.l, b.l);
            assert_eq!(a.p, b.p);
            assert_eq!(a.tau2, b.tau2);
        }
    }

    #[test]
    fn turbo_trace_invariants() {
        let (code, stack) = trained_toy_stack();
        let mut r = rng(11);
        for _ in 0..20 {
            let ch = channel::build_channel(4, 4, 1.0, 0.5, &mut r).unwrap();
            let u: Vec<u8> = (0..code.k()).map(|_| r.random_range(0..2u8)).collect();
            let frame = channel::transmit(&ch, &code, &u, &mut r).unwrap();
            let (_, trace) = run_turbo(&frame.y, ch.a(), &code, 0.5, &stack, 3).unwrap();
            assert_eq!(trace.len(), 3);
            for state in &trace {
                assert!(state.tau2 > 0.0 && state.v2 > 0.0);
                for &(qp, qm) in &state.q {
                    assert!((qp + qm - 1.0).abs() < 1e-12);
                    assert!((0.0..=1.0).contains(&qp) && (0.0..=1.0).contains(&qm));
                }
                for &pi in &state.p {
                    assert!(pi > -1.0 && pi < 1.0);
                }
                for llr in state.info_llrs.as_ref().unwrap() {
                    assert!(llr.abs() <= LLR_CAP);
                }
            }
        }
    }

    #[test]
    fn persisted_angles_change_later_iterations() {
        let (code, stack) = trained_toy_stack();
        let mut r = rng(12);
        let ch = channel::build_channel(4, 4, 1.0, 0.4, &mut r).unwrap();
        let frame = channel::transmit(&ch, &code, &[1, 1], &mut r).unwrap();
        let cold = run_turbo_with(
            &frame.y,
            ch.a(),
            &code,
            0.4,
            DecoderKind::Vqc(&stack),
            &TurboOptions { n_iters: 2, persist_angles: false, t_steps: None },
        )
        .unwrap();
        let warm = run_turbo_with(
            &frame.y,
            ch.a(),
            &code,
            0.4,
            DecoderKind::Vqc(&stack),
            &TurboOptions { n_iters: 2, persist_angles: true, t_steps: None },
        )
        .unwrap();
        // first iterations agree, second differ through the warm start
        assert_eq!(cold.trace[0].l, warm.trace[0].l);
        assert_ne!(
            cold.trace[1].info_llrs.as_ref().unwrap(),
            warm.trace[1].info_llrs.as_ref().unwrap()
        );
    }
}
