//! Benchmarking harness: decoder baselines, the Monte Carlo BER sweep and its
//! configuration format.
//!
//! Frames are simulated in fixed-size chunks; each frame draws its own RNG
//! stream from (master seed, SNR-point index, frame index), so results do not
//! depend on how many workers process a chunk and identical configs produce
//! identical numbers.

mod ml;

pub use ml::{ml_decode_codeword, ml_joint_detect};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::channel::{build_channel, sigma2_from_snr_db, transmit};
use crate::codes::{build_ldpc_regular, LinearCode};
use crate::l2l::{self, LstmStack, StackKind, TrainerConfig, TrainingLog};
use crate::turbo::{run_turbo_with, DecoderKind, TurboOptions};
use crate::{Error, Result};

/// Frames simulated between stopping-rule checks.
const CHUNK: u64 = 256;

/// The decoder under test in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderSelect {
    /// Turbo loop with the circuit decoder; info-bit errors.
    VqcTd,
    /// One-shot exact joint detection and decoding; info-bit errors.
    Ml,
    /// Turbo loop with the classical LSTM decoder supplying extrinsic, final
    /// decision by exact codeword decoding of the last linear estimate;
    /// info-bit errors.
    LstmBaseline,
    /// Turbo loop with no decoder; symbol (codeword-bit) errors off the final
    /// linear estimate.
    UncodedOamp,
}

/// Code selection: a code file on disk, or a freshly built regular LDPC.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CodeSpec {
    File { file: PathBuf },
    Ldpc { ldpc: LdpcSpec },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpcSpec {
    pub n: usize,
    pub dv: usize,
    pub dc: usize,
    pub seed: u64,
}

impl CodeSpec {
    pub fn load(&self) -> Result<LinearCode> {
        match self {
            CodeSpec::File { file } => LinearCode::from_file(file),
            CodeSpec::Ldpc { ldpc } => {
                let mut rng: ChaCha8Rng = rand::SeedableRng::seed_from_u64(ldpc.seed);
                build_ldpc_regular(ldpc.n, ldpc.dv, ldpc.dc, &mut rng)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelShape {
    pub m: usize,
    pub n: usize,
    #[serde(default = "default_cond")]
    pub cond: f64,
}

fn default_cond() -> f64 {
    1.0
}

fn default_min_frames() -> u64 {
    1_000
}

fn default_min_bit_errors() -> u64 {
    100
}

fn default_max_frames() -> u64 {
    1_000_000
}

fn default_n_iters() -> usize {
    3
}

/// A full sweep description; parsed from TOML with unknown keys rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub decoder: DecoderSelect,
    /// Strictly increasing SNR grid, in dB (`SNR = -10 log10 sigma2`).
    pub snr_db: Vec<f64>,
    #[serde(default = "default_min_frames")]
    pub min_frames: u64,
    #[serde(default = "default_min_bit_errors")]
    pub min_bit_errors: u64,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
    #[serde(default = "default_n_iters")]
    pub n_turbo_iters: usize,
    /// Weight container for the decoders that need one.
    #[serde(default)]
    pub weights: Option<PathBuf>,
    #[serde(default)]
    pub persist_angles: bool,
    pub code: CodeSpec,
    pub channel: ChannelShape,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("sweep config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_empty() {
            return Err(Error::InvalidArgument("snr_db grid is empty".into()));
        }
        if self.snr_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("snr_db grid must be strictly increasing".into()));
        }
        if self.min_frames == 0 {
            return Err(Error::InvalidArgument("min_frames must be at least 1".into()));
        }
        if self.n_turbo_iters == 0 {
            return Err(Error::InvalidArgument("n_turbo_iters must be at least 1".into()));
        }
        if self.channel.cond < 1.0 {
            return Err(Error::InvalidArgument("condition number must be >= 1".into()));
        }
        Ok(())
    }
}

/// One sweep point's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub frame_errors: u64,
    pub fer: f64,
    pub wall_time_s: f64,
}

/// CSV header for sweep artifacts; the column order is the plotting contract.
pub const CSV_HEADER: &str = "snr_db,frames,bit_errors,ber,frame_errors,fer,wall_time_s";

pub fn records_to_csv(records: &[BerRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{:e},{},{:e},{:.3}\n",
            r.snr_db, r.frames, r.bit_errors, r.ber, r.frame_errors, r.fer, r.wall_time_s
        ));
    }
    out
}

/// The CSV with the wall-time column removed: every byte of this projection
/// is a pure function of the config and seed.
pub fn csv_without_timing(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rfind(',') {
            Some(idx) => &line[..idx],
            None => line,
        })
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent, reproducible stream for one frame of one sweep point.
fn frame_rng(seed: u64, point: u64, frame: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ point) ^ frame);
    rand::SeedableRng::seed_from_u64(mixed)
}

struct FrameOutcome {
    bit_errors: u64,
    frame_error: bool,
}

fn run_frame(
    cfg: &SweepConfig,
    code: &LinearCode,
    stack: Option<&LstmStack>,
    sigma2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<FrameOutcome> {
    let ch = build_channel(cfg.channel.m, cfg.channel.n, cfg.channel.cond, sigma2, rng)?;
    let u: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
    let frame = transmit(&ch, code, &u, rng)?;
    let opts = TurboOptions {
        n_iters: cfg.n_turbo_iters,
        persist_angles: cfg.persist_angles,
        t_steps: None,
    };

    let bit_errors = match cfg.decoder {
        DecoderSelect::Ml => {
            let decided = ml_joint_detect(&frame.y, ch.a(), code)?;
            decided.iter().zip(&u).filter(|(a, b)| a != b).count() as u64
        }
        DecoderSelect::VqcTd => {
            let stack = stack.expect("checked at startup");
            let run =
                run_turbo_with(&frame.y, ch.a(), code, sigma2, DecoderKind::Vqc(stack), &opts)?;
            let decided = run.info_bits.expect("decoder present");
            decided.iter().zip(&u).filter(|(a, b)| a != b).count() as u64
        }
        DecoderSelect::LstmBaseline => {
            let stack = stack.expect("checked at startup");
            let run = run_turbo_with(
                &frame.y,
                ch.a(),
                code,
                sigma2,
                DecoderKind::SoftBits(stack),
                &opts,
            )?;
            let decided = ml_decode_codeword(&run.final_l, code)?;
            decided.iter().zip(&u).filter(|(a, b)| a != b).count() as u64
        }
        DecoderSelect::UncodedOamp => {
            let run = run_turbo_with(&frame.y, ch.a(), code, sigma2, DecoderKind::Null, &opts)?;
            run.final_l
                .iter()
                .zip(&frame.x)
                .filter(|(&l, &x)| if l >= 0.0 { x < 0.0 } else { x > 0.0 })
                .count() as u64
        }
    };
    Ok(FrameOutcome { bit_errors, frame_error: bit_errors > 0 })
}

/// Load and sanity-check the weights a decoder needs, before any simulation.
fn load_stack(cfg: &SweepConfig, code: &LinearCode) -> Result<Option<LstmStack>> {
    let needs = matches!(cfg.decoder, DecoderSelect::VqcTd | DecoderSelect::LstmBaseline);
    if !needs {
        return Ok(None);
    }
    let path = cfg.weights.as_ref().ok_or_else(|| {
        Error::InvalidArgument("this decoder needs a `weights` entry in the config".into())
    })?;
    let stack = LstmStack::load(path)?;
    match (cfg.decoder, stack.kind()) {
        (DecoderSelect::VqcTd, StackKind::Angles { .. }) => {}
        (DecoderSelect::LstmBaseline, StackKind::SoftBits { .. }) => {}
        (d, k) => {
            return Err(Error::WeightMismatch(format!(
                "decoder {d:?} cannot use a {k:?} weight container"
            )))
        }
    }
    if stack.s_dim() != code.s() || stack.n_dim() != code.n() {
        return Err(Error::WeightMismatch(format!(
            "weights conditioned on (s={}, n={}) but code has (s={}, n={})",
            stack.s_dim(),
            stack.n_dim(),
            code.s(),
            code.n()
        )));
    }
    Ok(Some(stack))
}

/// Run the Monte Carlo sweep. Per SNR point, frames are simulated until the
/// minimum frame count is reached and either enough bit errors accumulated or
/// the frame cap hit.
pub fn ber_sweep(cfg: &SweepConfig) -> Result<Vec<BerRecord>> {
    cfg.validate()?;
    let code = cfg.code.load()?;
    if code.n() != cfg.channel.n {
        return Err(Error::InvalidArgument(format!(
            "code length {} does not match channel width {}",
            code.n(),
            cfg.channel.n
        )));
    }
    let stack = load_stack(cfg, &code)?;
    let bits_per_frame = match cfg.decoder {
        DecoderSelect::UncodedOamp => code.n() as u64,
        _ => code.k() as u64,
    };

    let mut records = Vec::with_capacity(cfg.snr_db.len());
    for (point, &snr_db) in cfg.snr_db.iter().enumerate() {
        let sigma2 = sigma2_from_snr_db(snr_db);
        let start = Instant::now();
        let mut frames = 0u64;
        let mut bit_errors = 0u64;
        let mut frame_errors = 0u64;

        loop {
            let chunk: Vec<u64> = (frames..frames + CHUNK).collect();
            let outcomes: Vec<Result<FrameOutcome>> = chunk
                .par_iter()
                .map(|&f| {
                    let mut rng = frame_rng(cfg.seed, point as u64, f);
                    run_frame(cfg, &code, stack.as_ref(), sigma2, &mut rng)
                })
                .collect();
            for o in outcomes {
                let o = o?;
                bit_errors += o.bit_errors;
                frame_errors += o.frame_error as u64;
            }
            frames += CHUNK;
            if frames >= cfg.min_frames
                && (bit_errors >= cfg.min_bit_errors || frames >= cfg.max_frames)
            {
                break;
            }
        }

        records.push(BerRecord {
            snr_db,
            frames,
            bit_errors,
            ber: bit_errors as f64 / (frames * bits_per_frame) as f64,
            frame_errors,
            fer: frame_errors as f64 / frames as f64,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(records)
}

/// Run the classical LSTM decoder once: same extrinsic contract as the
/// circuit decoder, drop-in for the turbo loop.
pub fn lstm_baseline_decode(
    code: &LinearCode,
    l: &[f64],
    tau2: f64,
    stack: &LstmStack,
) -> Result<Vec<f64>> {
    let StackKind::SoftBits { .. } = stack.kind() else {
        return Err(Error::WeightMismatch(
            "baseline decoding needs a soft-bit weight container".into(),
        ));
    };
    let trace = l2l::run_soft_bits_episode(code, l, tau2, stack, stack.t_steps())?;
    let scores = trace.u_hat.last().expect("nonempty episode");
    let (_, ext) = crate::turbo::llrs_from_flip_scores(scores, l, tau2)?;
    Ok(ext)
}

/// Train the classical syndrome-driven LSTM decoder baseline (three layers,
/// seven steps and 150 hidden units in the published configuration).
pub fn train_baseline(
    code: &LinearCode,
    hidden: usize,
    cfg: &TrainerConfig,
) -> Result<(LstmStack, TrainingLog)> {
    l2l::train_soft_bits(code, hidden, cfg)
}
