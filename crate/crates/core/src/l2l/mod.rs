//! The learned optimizer that drives the circuit: a stacked LSTM maps
//! (previous cost, previous angles, weighted syndromes, normalized |l|) to a
//! fresh set of rotation angles, `T` times per decode. Training runs
//! end-to-end through the statevector simulator with an exponentially
//! decaying cross-entropy on the per-step Z expectations, so the measured
//! qubits act directly as soft bit estimates.

mod stack;
mod train;

pub use stack::{param_count_formula, LstmStack, LstmState, StackKind};
pub use train::{
    loss_and_gradient, train_l2l, train_l2l_with_progress, train_soft_bits,
    train_soft_bits_with_progress, Adamax, TrainerConfig, TrainingLog,
};

use crate::codes::{self, LinearCode};
use crate::qsim::{CompiledCircuit, CostHamiltonian, QaoaParams};
use crate::{Error, Result};

/// Starting value for every rotation angle at the first step of an episode.
/// Small and nonzero so the first circuit application already breaks the
/// gamma/beta symmetry.
pub const INIT_ANGLE: f64 = 0.01;

/// Probability clamp for the cross-entropy loss.
pub const PROB_CLAMP: f64 = 1e-12;

/// One step's worth of network input.
#[derive(Debug, Clone)]
pub struct L2lInput {
    pub cost: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub weighted_syndromes: Vec<f64>,
    pub abs_l: Vec<f64>,
}

/// Everything an episode produced, step by step.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    /// Emitted angles per step (empty vectors for soft-bit stacks).
    pub gamma: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    /// Per-qubit Z expectations per step, each entry in [-1, 1].
    pub u_hat: Vec<Vec<f64>>,
    /// Cost expectation per step (zero for soft-bit stacks).
    pub cost: Vec<f64>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.u_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_hat.is_empty()
    }
}

/// One LSTM step of an angle stack: feed an [`L2lInput`], get updated angles
/// and the advanced recurrent state.
pub fn lstm_forward(
    stack: &LstmStack,
    input: &L2lInput,
    state: &LstmState,
) -> Result<(Vec<f64>, Vec<f64>, LstmState)> {
    let StackKind::Angles { qaoa_depth } = stack.kind() else {
        return Err(Error::InvalidArgument("lstm_forward expects an angle-emitting stack".into()));
    };
    if input.gamma.len() != qaoa_depth || input.beta.len() != qaoa_depth {
        return Err(Error::InvalidArgument(format!(
            "angle inputs must have length {qaoa_depth}"
        )));
    }
    if !input.cost.is_finite() {
        return Err(Error::InvalidArgument("cost input is not finite".into()));
    }
    let mut params = Vec::with_capacity(2 * qaoa_depth);
    params.extend_from_slice(&input.gamma);
    params.extend_from_slice(&input.beta);
    let mut new_state = state.clone();
    let out = stack.step(
        input.cost,
        &params,
        &input.weighted_syndromes,
        &input.abs_l,
        &mut new_state,
        None,
    )?;
    let (mut gamma, mut beta) = (out[..qaoa_depth].to_vec(), out[qaoa_depth..].to_vec());
    if stack.emit_increments() {
        for (g, p) in gamma.iter_mut().zip(&input.gamma) {
            *g += p;
        }
        for (b, p) in beta.iter_mut().zip(&input.beta) {
            *b += p;
        }
    }
    Ok((gamma, beta, new_state))
}

/// Shared per-episode conditioning: raw weighted syndromes and |l| scaled by
/// its maximum.
fn conditioning(code: &LinearCode, l: &[f64], tau2: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(tau2 > 0.0) || !tau2.is_finite() {
        return Err(Error::InvalidArgument(format!("tau2 must be positive and finite, got {tau2}")));
    }
    let max = l.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Err(Error::DegenerateInput("channel estimate is identically zero".into()));
    }
    if l.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("channel estimate contains non-finite values".into()));
    }
    let syndromes = codes::weighted_syndrome(code, l)?;
    let abs_l: Vec<f64> = l.iter().map(|v| v.abs() / max).collect();
    Ok((syndromes, abs_l))
}

pub(crate) struct EpisodeRecord {
    pub trace: EpisodeTrace,
    pub caches: Vec<stack::StepCache>,
    pub circuit: Option<CompiledCircuit>,
    /// Final circuit state per step, kept so the backward pass can skip its
    /// own forward evolution.
    pub states: Vec<crate::qsim::Statevector>,
}

pub(crate) fn run_angles_episode_inner(
    code: &LinearCode,
    l: &[f64],
    tau2: f64,
    stack: &LstmStack,
    t_steps: usize,
    init: Option<(&[f64], &[f64])>,
    with_caches: bool,
) -> Result<EpisodeRecord> {
    let StackKind::Angles { qaoa_depth } = stack.kind() else {
        return Err(Error::InvalidArgument("expected an angle-emitting stack".into()));
    };
    if t_steps == 0 {
        return Err(Error::InvalidArgument("episode needs at least one step".into()));
    }
    if stack.s_dim() != code.s() || stack.n_dim() != code.n() {
        return Err(Error::WeightMismatch(format!(
            "stack conditioned on (s={}, n={}) but code has (s={}, n={})",
            stack.s_dim(),
            stack.n_dim(),
            code.s(),
            code.n()
        )));
    }
    let (syndromes, abs_l) = conditioning(code, l, tau2)?;
    let hc = CostHamiltonian::build(code, l)?;
    let circuit = CompiledCircuit::new(&hc);

    let mut params: Vec<f64> = match init {
        Some((g, b)) => {
            if g.len() != qaoa_depth || b.len() != qaoa_depth {
                return Err(Error::InvalidArgument("initial angles have the wrong depth".into()));
            }
            g.iter().chain(b.iter()).cloned().collect()
        }
        None => vec![INIT_ANGLE; 2 * qaoa_depth],
    };
    let mut cost = 0.0;
    let mut state = LstmState::zeros(stack);
    let mut trace = EpisodeTrace {
        gamma: Vec::with_capacity(t_steps),
        beta: Vec::with_capacity(t_steps),
        u_hat: Vec::with_capacity(t_steps),
        cost: Vec::with_capacity(t_steps),
    };
    let mut caches = Vec::with_capacity(if with_caches { t_steps } else { 0 });
    let mut states = Vec::with_capacity(if with_caches { t_steps } else { 0 });

    for _ in 0..t_steps {
        let mut cache = with_caches.then(|| stack::StepCache {
            xs: Vec::new(),
            h_prev: Vec::new(),
            c_prev: Vec::new(),
            gates: Vec::new(),
            c: Vec::new(),
            tanh_c: Vec::new(),
            h: Vec::new(),
            out: Vec::new(),
        });
        let out = stack.step(cost, &params, &syndromes, &abs_l, &mut state, cache.as_mut())?;
        if stack.emit_increments() {
            for (p, o) in params.iter_mut().zip(&out) {
                *p += o;
            }
        } else {
            params.copy_from_slice(&out);
        }
        let qp = QaoaParams::new(params[..qaoa_depth].to_vec(), params[qaoa_depth..].to_vec())?;
        let sv = circuit.apply(&qp)?;
        let (u_hat, c) = circuit.expectations(&sv);
        cost = c;
        trace.gamma.push(qp.gamma);
        trace.beta.push(qp.beta);
        trace.u_hat.push(u_hat);
        trace.cost.push(c);
        if let Some(cache) = cache {
            caches.push(cache);
            states.push(sv);
        }
    }

    Ok(EpisodeRecord { trace, caches, circuit: Some(circuit), states })
}

pub(crate) fn run_soft_bits_episode_inner(
    code: &LinearCode,
    l: &[f64],
    tau2: f64,
    stack: &LstmStack,
    t_steps: usize,
    with_caches: bool,
) -> Result<EpisodeRecord> {
    let StackKind::SoftBits { out_dim } = stack.kind() else {
        return Err(Error::InvalidArgument("expected a soft-bit stack".into()));
    };
    if out_dim != code.n() {
        return Err(Error::WeightMismatch(format!(
            "stack emits {out_dim} flip scores but code has n = {}",
            code.n()
        )));
    }
    if t_steps == 0 {
        return Err(Error::InvalidArgument("episode needs at least one step".into()));
    }
    if stack.s_dim() != code.s() || stack.n_dim() != code.n() {
        return Err(Error::WeightMismatch(format!(
            "stack conditioned on (s={}, n={}) but code has (s={}, n={})",
            stack.s_dim(),
            stack.n_dim(),
            code.s(),
            code.n()
        )));
    }
    let (syndromes, abs_l) = conditioning(code, l, tau2)?;

    let mut state = LstmState::zeros(stack);
    let mut trace = EpisodeTrace {
        gamma: Vec::new(),
        beta: Vec::new(),
        u_hat: Vec::with_capacity(t_steps),
        cost: Vec::with_capacity(t_steps),
    };
    let mut caches = Vec::new();
    for _ in 0..t_steps {
        let mut cache = with_caches.then(|| stack::StepCache {
            xs: Vec::new(),
            h_prev: Vec::new(),
            c_prev: Vec::new(),
            gates: Vec::new(),
            c: Vec::new(),
            tanh_c: Vec::new(),
            h: Vec::new(),
            out: Vec::new(),
        });
        let out = stack.step(0.0, &[], &syndromes, &abs_l, &mut state, cache.as_mut())?;
        trace.u_hat.push(out.iter().map(|v| v.tanh()).collect());
        trace.cost.push(0.0);
        if let Some(cache) = cache {
            caches.push(cache);
        }
    }
    Ok(EpisodeRecord { trace, caches, circuit: None, states: Vec::new() })
}

/// Run one decode episode: `T` rounds of LSTM emission followed by a circuit
/// application, recording angles, Z expectations and cost per step.
pub fn run_l2l_episode(
    code: &LinearCode,
    l: &[f64],
    tau2: f64,
    stack: &LstmStack,
    t_steps: usize,
) -> Result<EpisodeTrace> {
    run_angles_episode_inner(code, l, tau2, stack, t_steps, None, false).map(|r| r.trace)
}

/// Like [`run_l2l_episode`] but starting from caller-supplied angles, for
/// receivers that keep angles warm across turbo iterations.
pub fn run_l2l_episode_from(
    code: &LinearCode,
    l: &[f64],
    tau2: f64,
    stack: &LstmStack,
    t_steps: usize,
    init: (&[f64], &[f64]),
) -> Result<EpisodeTrace> {
    run_angles_episode_inner(code, l, tau2, stack, t_steps, Some(init), false).map(|r| r.trace)
}

/// Episode for the classical soft-bit decoder stack.
pub fn run_soft_bits_episode(
    code: &LinearCode,
    l: &[f64],
    tau2: f64,
    stack: &LstmStack,
    t_steps: usize,
) -> Result<EpisodeTrace> {
    run_soft_bits_episode_inner(code, l, tau2, stack, t_steps, false).map(|r| r.trace)
}

/// Exponentially decaying cross-entropy over the episode:
///
/// `F = -sum_i sum_j xi^(T-i) [ u_j log((1-u^_j^i)/2) + (1-u_j) log((1+u^_j^i)/2) ]`
///
/// with the probabilities clamped away from zero. Later steps weigh more.
pub fn episode_loss(trace: &EpisodeTrace, u: &[u8], xi: f64) -> Result<f64> {
    if !(xi > 0.0 && xi <= 1.0) {
        return Err(Error::InvalidArgument(format!("decay must be in (0, 1], got {xi}")));
    }
    let t_steps = trace.u_hat.len();
    let mut loss = 0.0;
    for (i, u_hat) in trace.u_hat.iter().enumerate() {
        if u_hat.len() != u.len() {
            return Err(Error::InvalidArgument(format!(
                "step {i}: {} soft bits vs {} info bits",
                u_hat.len(),
                u.len()
            )));
        }
        let weight = xi.powi((t_steps - 1 - i) as i32);
        for (&uh, &bit) in u_hat.iter().zip(u) {
            if !(-1.0..=1.0).contains(&uh) {
                return Err(Error::InvalidArgument(format!(
                    "soft value {uh} outside [-1, 1] at step {i}"
                )));
            }
            let p_one = ((1.0 - uh) / 2.0).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let p_zero = ((1.0 + uh) / 2.0).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            loss -= weight
                * if bit == 1 { p_one.ln() } else { p_zero.ln() };
        }
    }
    Ok(loss)
}

/// d(loss)/d(u_hat) for every step, with the same clamping as the loss.
pub(crate) fn episode_loss_grad(trace: &EpisodeTrace, u: &[u8], xi: f64) -> Vec<Vec<f64>> {
    let t_steps = trace.u_hat.len();
    trace
        .u_hat
        .iter()
        .enumerate()
        .map(|(i, u_hat)| {
            let weight = xi.powi((t_steps - 1 - i) as i32);
            u_hat
                .iter()
                .zip(u)
                .map(|(&uh, &bit)| {
                    let uh = uh.clamp(-1.0 + 2.0 * PROB_CLAMP, 1.0 - 2.0 * PROB_CLAMP);
                    if bit == 1 {
                        weight / (1.0 - uh)
                    } else {
                        -weight / (1.0 + uh)
                    }
                })
                .collect()
        })
        .collect()
}
