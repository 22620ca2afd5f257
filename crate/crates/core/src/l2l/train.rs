//! End-to-end training: backpropagation through time across the LSTM steps,
//! chained with adjoint-mode circuit gradients at every step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::sigma2_from_snr_db;
use crate::codes::LinearCode;
use crate::qsim::QaoaParams;
use crate::{Error, Result};

use super::stack::{LstmStack, StackKind};
use super::{episode_loss, episode_loss_grad, run_angles_episode_inner, run_soft_bits_episode_inner, EpisodeRecord};

/// Training hyper-parameters. The defaults are the ones used for the length-20
/// experiments: decay 0.6, learning rate 0.008, three LSTM layers, Adamax.
#[derive(Debug, Clone)]
pub struct TrainerConfig {
    /// Exponential decay of the per-step cross-entropy.
    pub xi: f64,
    pub learning_rate: f64,
    /// LSTM/circuit refinement steps per decode.
    pub t_steps: usize,
    /// Circuit depth D (angle stacks only).
    pub qaoa_depth: usize,
    pub lstm_depth: usize,
    /// Episodes per gradient update.
    pub batch_size: usize,
    /// Number of gradient updates.
    pub epochs: usize,
    /// Training noise is drawn at an SNR uniform in this range (dB).
    pub snr_range_db: (f64, f64),
    pub seed: u64,
    /// Fixed evaluation set size.
    pub heldout_size: usize,
    /// Held-out loss is evaluated every this many epochs (plus first/last).
    pub eval_every: usize,
    /// Global-norm gradient clip.
    pub grad_clip: f64,
    /// Emit angle increments instead of absolute angles.
    pub emit_increments: bool,
    /// When set, the stack is saved here every `checkpoint_every` epochs.
    pub checkpoint_path: Option<std::path::PathBuf>,
    pub checkpoint_every: usize,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            xi: 0.6,
            learning_rate: 0.008,
            t_steps: 19,
            qaoa_depth: 22,
            lstm_depth: 3,
            batch_size: 32,
            epochs: 500,
            snr_range_db: (2.0, 10.0),
            seed: 1,
            heldout_size: 64,
            eval_every: 10,
            grad_clip: 10.0,
            emit_increments: false,
            checkpoint_path: None,
            checkpoint_every: 0,
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub train_loss: Vec<f64>,
    /// (epoch, mean held-out loss), sampled every `eval_every` epochs.
    pub heldout_loss: Vec<(usize, f64)>,
}

/// Adamax: first moment plus an infinity-norm second moment.
#[derive(Debug, Clone)]
pub struct Adamax {
    m: Vec<f64>,
    u: Vec<f64>,
    t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl Adamax {
    pub fn new(dim: usize, lr: f64) -> Self {
        Adamax { m: vec![0.0; dim], u: vec![0.0; dim], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8, lr }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let correction = 1.0 - self.beta1.powi(self.t as i32);
        for i in 0..theta.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.u[i] = (self.beta2 * self.u[i]).max(grad[i].abs());
            theta[i] -= self.lr / correction * self.m[i] / (self.u[i] + self.eps);
        }
    }
}

/// A training sample: a synthetic post-detector estimate `l = x + noise(tau2)`
/// (the AWGN-equivalent channel the decoder sees) and the loss targets — the
/// info bits for angle stacks, the hard-decision flip pattern for the
/// soft-bit decoder.
#[derive(Debug, Clone)]
pub(crate) struct Sample {
    pub targets: Vec<u8>,
    pub l: Vec<f64>,
    pub tau2: f64,
}

fn draw_sample<R: Rng + ?Sized>(
    code: &LinearCode,
    kind: StackKind,
    snr_range: (f64, f64),
    rng: &mut R,
) -> Sample {
    let u: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
    let v = code.encode(&u).expect("dimensions checked");
    let snr = rng.random_range(snr_range.0..=snr_range.1);
    let tau2 = sigma2_from_snr_db(snr);
    let sd = tau2.sqrt();
    let x: Vec<f64> = v.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
    let l: Vec<f64> = x.iter().map(|&xj| xj + sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let targets = match kind {
        StackKind::Angles { .. } => u,
        // flip = 1 where the hard decision on l disagrees with the symbol
        StackKind::SoftBits { .. } => {
            l.iter().zip(&x).map(|(&lj, &xj)| u8::from((lj < 0.0) != (xj < 0.0))).collect()
        }
    };
    Sample { targets, l, tau2 }
}

/// Forward + backward over one episode; returns the loss and the flat
/// parameter gradient.
pub(crate) fn sample_gradient(
    stack: &LstmStack,
    code: &LinearCode,
    sample: &Sample,
    xi: f64,
    t_steps: usize,
) -> Result<(f64, Vec<f64>)> {
    loss_and_gradient(code, stack, &sample.targets, &sample.l, sample.tau2, xi, t_steps)
}

/// Episode loss and its exact gradient with respect to every stack parameter
/// (flat, in the canonical serialization order). `targets` are the info bits
/// for angle stacks and the per-symbol flip pattern for soft-bit stacks.
/// This is the gradient-checking entry point.
pub fn loss_and_gradient(
    code: &LinearCode,
    stack: &LstmStack,
    targets: &[u8],
    l: &[f64],
    tau2: f64,
    xi: f64,
    t_steps: usize,
) -> Result<(f64, Vec<f64>)> {
    let record = match stack.kind() {
        StackKind::Angles { .. } => {
            run_angles_episode_inner(code, l, tau2, stack, t_steps, None, true)?
        }
        StackKind::SoftBits { .. } => {
            run_soft_bits_episode_inner(code, l, tau2, stack, t_steps, true)?
        }
    };
    let loss = episode_loss(&record.trace, targets, xi)?;
    let grads = backprop_episode(stack, &record, targets, xi)?;
    Ok((loss, grads))
}

fn backprop_episode(
    stack: &LstmStack,
    record: &EpisodeRecord,
    u: &[u8],
    xi: f64,
) -> Result<Vec<f64>> {
    let t_steps = record.trace.u_hat.len();
    let du_hat = episode_loss_grad(&record.trace, u, xi);
    let mut grads = stack.grads_zeros();
    let hidden = stack.hidden();
    let depth_l = stack.lstm_depth();
    let mut dh_carry = vec![vec![0.0; hidden]; depth_l];
    let mut dc_carry = vec![vec![0.0; hidden]; depth_l];

    // adjoints of this step's circuit outputs coming from later steps
    let mut next_dcost = 0.0;
    let mut next_dparams: Vec<f64> = Vec::new();

    for i in (0..t_steps).rev() {
        let demission: Vec<f64> = match stack.kind() {
            StackKind::Angles { qaoa_depth } => {
                let circuit = record.circuit.as_ref().expect("angle episodes carry a circuit");
                let params = QaoaParams::new(
                    record.trace.gamma[i].clone(),
                    record.trace.beta[i].clone(),
                )?;
                let (dg, db) =
                    circuit.gradient_weighted_from(&record.states[i], &params, &du_hat[i], next_dcost)?;
                let mut d: Vec<f64> = Vec::with_capacity(2 * qaoa_depth);
                d.extend_from_slice(&dg);
                d.extend_from_slice(&db);
                if !next_dparams.is_empty() {
                    for (slot, v) in d.iter_mut().zip(&next_dparams) {
                        *slot += v;
                    }
                }
                d
            }
            StackKind::SoftBits { .. } => {
                // u_hat = tanh(out)
                record.trace.u_hat[i]
                    .iter()
                    .zip(&du_hat[i])
                    .map(|(&uh, &d)| d * (1.0 - uh * uh))
                    .collect()
            }
        };

        let (dcost_in, dparams_in) =
            stack.backward_step(&record.caches[i], &demission, &mut dh_carry, &mut dc_carry, &mut grads);
        next_dcost = dcost_in;
        next_dparams = dparams_in;
        if stack.emit_increments() {
            // identity path: params_i = params_{i-1} + out_i
            for (slot, v) in next_dparams.iter_mut().zip(&demission) {
                *slot += v;
            }
        }
    }

    // flatten in the canonical parameter order
    let mut flat = Vec::with_capacity(stack.param_count());
    for l in &grads.layers {
        flat.extend_from_slice(&l.w_x.data);
        flat.extend_from_slice(&l.w_h.data);
        flat.extend_from_slice(&l.b);
    }
    flat.extend_from_slice(&grads.w_out.data);
    flat.extend_from_slice(&grads.b_out);
    Ok(flat)
}

fn heldout_loss(stack: &LstmStack, code: &LinearCode, set: &[Sample], xi: f64, t: usize) -> Result<f64> {
    let mut total = 0.0;
    for s in set {
        let trace = match stack.kind() {
            StackKind::Angles { .. } => {
                run_angles_episode_inner(code, &s.l, s.tau2, stack, t, None, false)?.trace
            }
            StackKind::SoftBits { .. } => {
                run_soft_bits_episode_inner(code, &s.l, s.tau2, stack, t, false)?.trace
            }
        };
        total += episode_loss(&trace, &s.targets, xi)?;
    }
    Ok(total / set.len() as f64)
}

fn train_stack(
    code: &LinearCode,
    mut stack: LstmStack,
    cfg: &TrainerConfig,
    mut progress: impl FnMut(usize, f64, Option<f64>),
) -> Result<(LstmStack, TrainingLog)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    stack.init_random(&mut rng);

    let kind = stack.kind();
    let heldout: Vec<Sample> =
        (0..cfg.heldout_size).map(|_| draw_sample(code, kind, cfg.snr_range_db, &mut rng)).collect();

    let mut theta = stack.to_flat();
    let mut opt = Adamax::new(theta.len(), cfg.learning_rate);
    let mut log = TrainingLog::default();

    for epoch in 1..=cfg.epochs {
        let batch: Vec<Sample> =
            (0..cfg.batch_size).map(|_| draw_sample(code, kind, cfg.snr_range_db, &mut rng)).collect();

        // episodes evaluated independently, reduced in index order so the
        // result does not depend on scheduling
        let results: Vec<Result<(f64, Vec<f64>)>> = batch
            .par_iter()
            .map(|s| sample_gradient(&stack, code, s, cfg.xi, cfg.t_steps))
            .collect();

        let mut grad = vec![0.0; theta.len()];
        let mut loss_sum = 0.0;
        for r in results {
            let (loss, g) = r?;
            loss_sum += loss;
            for (slot, v) in grad.iter_mut().zip(&g) {
                *slot += v;
            }
        }
        let scale = 1.0 / cfg.batch_size as f64;
        for g in &mut grad {
            *g *= scale;
        }
        let mean_loss = loss_sum * scale;
        if !mean_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite training loss at epoch {epoch} (lr = {}, clip = {}); \
                 inspect the learning rate or the probability clamp",
                cfg.learning_rate, cfg.grad_clip
            )));
        }

        let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > cfg.grad_clip {
            let s = cfg.grad_clip / norm;
            for g in &mut grad {
                *g *= s;
            }
        }
        opt.step(&mut theta, &grad);
        stack.set_from_flat(&theta)?;
        log.train_loss.push(mean_loss);

        let mut heldout_now = None;
        if epoch == 1 || epoch == cfg.epochs || epoch % cfg.eval_every == 0 {
            let hl = heldout_loss(&stack, code, &heldout, cfg.xi, cfg.t_steps)?;
            log.heldout_loss.push((epoch, hl));
            heldout_now = Some(hl);
        }
        progress(epoch, mean_loss, heldout_now);
        if let Some(path) = &cfg.checkpoint_path {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                stack.save(path)?;
            }
        }
    }
    Ok((stack, log))
}

/// Train the angle-emitting stack end-to-end through the circuit.
pub fn train_l2l(code: &LinearCode, cfg: &TrainerConfig) -> Result<(LstmStack, TrainingLog)> {
    train_l2l_with_progress(code, cfg, |_, _, _| {})
}

/// [`train_l2l`] with a per-epoch callback `(epoch, train_loss, heldout)`.
pub fn train_l2l_with_progress(
    code: &LinearCode,
    cfg: &TrainerConfig,
    progress: impl FnMut(usize, f64, Option<f64>),
) -> Result<(LstmStack, TrainingLog)> {
    let mut stack =
        LstmStack::new_l2l(cfg.qaoa_depth, cfg.lstm_depth, code.s(), code.n(), cfg.t_steps)?;
    stack.set_emit_increments(cfg.emit_increments);
    train_stack(code, stack, cfg, progress)
}

/// Train the classical soft-bit decoder on the same data and loss; `hidden`
/// is free here (the published baseline uses 150).
pub fn train_soft_bits(
    code: &LinearCode,
    hidden: usize,
    cfg: &TrainerConfig,
) -> Result<(LstmStack, TrainingLog)> {
    train_soft_bits_with_progress(code, hidden, cfg, |_, _, _| {})
}

/// [`train_soft_bits`] with a per-epoch callback.
pub fn train_soft_bits_with_progress(
    code: &LinearCode,
    hidden: usize,
    cfg: &TrainerConfig,
    progress: impl FnMut(usize, f64, Option<f64>),
) -> Result<(LstmStack, TrainingLog)> {
    let stack =
        LstmStack::new_soft_bits(code.n(), hidden, cfg.lstm_depth, code.s(), code.n(), cfg.t_steps)?;
    train_stack(code, stack, cfg, progress)
}
