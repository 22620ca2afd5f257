//! Command-line front end: train decoder weights, run BER sweeps, inspect
//! gate counts and debug single frames.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::PathBuf;

use qturbo::bench::{ber_sweep, records_to_csv, SweepConfig};
use qturbo::channel::{build_channel, sigma2_from_snr_db, transmit};
use qturbo::codes::{build_ldpc_regular, LinearCode};
use qturbo::l2l::{
    train_l2l_with_progress, train_soft_bits_with_progress, LstmStack, TrainerConfig,
};
use qturbo::qsim::{apply_qaoa, count_gates, expect_z, sample_z, CostHamiltonian, QaoaParams};
use qturbo::turbo::{llr_to_bit, run_turbo_with, DecoderKind, TurboOptions};

#[derive(Parser)]
#[command(name = "qturbo", about = "Coded-MIMO receiver simulation with a learned circuit decoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train decoder weights.
    Train(TrainArgs),
    /// Run a Monte Carlo BER sweep from a TOML config.
    Sweep(SweepArgs),
    /// Print the circuit gate accounting for a code and depth.
    Gatecount(GatecountArgs),
    /// Decode a single random frame and dump the per-iteration trace.
    DecodeOne(DecodeOneArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    /// Angle-emitting stack driving the circuit decoder.
    VqcTd,
    /// Classical flip-predicting LSTM decoder.
    LstmBaseline,
}

#[derive(Args)]
struct CodeSource {
    /// Code file (text format: N K S, then H rows, then G rows).
    #[arg(long)]
    code: Option<PathBuf>,
    /// Build a regular LDPC instead: "n,dv,dc,seed".
    #[arg(long, value_name = "N,DV,DC,SEED", conflicts_with = "code")]
    ldpc: Option<String>,
}

impl CodeSource {
    fn load(&self) -> Result<LinearCode> {
        if let Some(path) = &self.code {
            return LinearCode::from_file(path).with_context(|| format!("loading {path:?}"));
        }
        if let Some(spec) = &self.ldpc {
            let parts: Vec<u64> = spec
                .split(',')
                .map(|t| t.trim().parse().context("LDPC spec must be n,dv,dc,seed"))
                .collect::<Result<_>>()?;
            let [n, dv, dc, seed] = parts[..] else { bail!("LDPC spec must be n,dv,dc,seed") };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            return Ok(build_ldpc_regular(n as usize, dv as usize, dc as usize, &mut rng)?);
        }
        bail!("pass either --code <file> or --ldpc n,dv,dc,seed")
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "vqc-td")]
    model: Model,
    #[command(flatten)]
    code: CodeSource,
    /// Circuit depth D (vqc-td only).
    #[arg(long, default_value_t = 22)]
    depth: usize,
    /// LSTM/circuit refinement steps per decode.
    #[arg(long, default_value_t = 19)]
    time_steps: usize,
    #[arg(long, default_value_t = 0.008)]
    lr: f64,
    /// Exponential decay of the per-step loss.
    #[arg(long, default_value_t = 0.6)]
    xi: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 3)]
    lstm_depth: usize,
    /// Hidden width of the baseline decoder.
    #[arg(long, default_value_t = 150)]
    hidden: usize,
    /// Training SNR range in dB, "lo:hi".
    #[arg(long, default_value = "2:10")]
    snr_range: String,
    #[arg(long, default_value_t = 64)]
    heldout: usize,
    #[arg(long, default_value_t = 10)]
    eval_every: usize,
    /// Emit angle increments instead of absolute angles.
    #[arg(long)]
    emit_increments: bool,
    /// Output weight container.
    #[arg(long)]
    out: PathBuf,
    /// Checkpoint the weights to --out every this many epochs (0 = off).
    #[arg(long, default_value_t = 25)]
    checkpoint_every: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GatecountArgs {
    #[command(flatten)]
    code: CodeSource,
    #[arg(long)]
    depth: usize,
}

#[derive(Args)]
struct DecodeOneArgs {
    #[command(flatten)]
    code: CodeSource,
    /// Weight container; omit to run the decoder-less loop.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 6.0)]
    snr: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    iters: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    cond: f64,
    /// Keep circuit angles warm across turbo iterations.
    #[arg(long)]
    persist_angles: bool,
    /// Also report shot-sampled measurements of the final circuit state.
    #[arg(long)]
    shots: Option<u64>,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace_out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (lo, hi) = s.split_once(':').context("range must be lo:hi")?;
    Ok((lo.trim().parse()?, hi.trim().parse()?))
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let code = args.code.load()?;
    let cfg = TrainerConfig {
        xi: args.xi,
        learning_rate: args.lr,
        t_steps: args.time_steps,
        qaoa_depth: args.depth,
        lstm_depth: args.lstm_depth,
        batch_size: args.batch_size,
        epochs: args.epochs,
        snr_range_db: parse_range(&args.snr_range)?,
        seed: args.seed,
        heldout_size: args.heldout,
        eval_every: args.eval_every,
        grad_clip: 10.0,
        emit_increments: args.emit_increments,
        checkpoint_path: Some(args.out.clone()),
        checkpoint_every: args.checkpoint_every,
    };
    eprintln!(
        "training {:?} on [{}, {}] code (s = {}), {} epochs x {} episodes",
        args.model,
        code.n(),
        code.k(),
        code.s(),
        cfg.epochs,
        cfg.batch_size
    );
    let progress = |epoch: usize, train: f64, heldout: Option<f64>| {
        match heldout {
            Some(h) => eprintln!("epoch {epoch:5}  train {train:.4}  heldout {h:.4}"),
            None => {
                if epoch % 5 == 0 {
                    eprintln!("epoch {epoch:5}  train {train:.4}");
                }
            }
        }
        std::io::stderr().flush().ok();
    };
    let (stack, log) = match args.model {
        Model::VqcTd => train_l2l_with_progress(&code, &cfg, progress)?,
        Model::LstmBaseline => train_soft_bits_with_progress(&code, args.hidden, &cfg, progress)?,
    };
    stack.save(&args.out)?;
    eprintln!(
        "saved {} parameters to {:?} (final heldout loss {:.4})",
        stack.param_count(),
        args.out,
        log.heldout_loss.last().map(|&(_, l)| l).unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let cfg = SweepConfig::from_file(&args.config)?;
    let records = ber_sweep(&cfg)?;
    for r in &records {
        eprintln!(
            "snr {:5.2} dB  frames {:8}  ber {:.3e}  fer {:.3e}  ({:.1} s)",
            r.snr_db, r.frames, r.ber, r.fer, r.wall_time_s
        );
    }
    std::fs::write(&args.out, records_to_csv(&records))?;
    eprintln!("wrote {:?}", args.out);
    Ok(())
}

fn cmd_gatecount(args: GatecountArgs) -> Result<()> {
    let code = args.code.load()?;
    let hc = CostHamiltonian::build(&code, &vec![1.0; code.n()])?;
    let gc = count_gates(&hc, args.depth);
    println!("multi_z_rotations: {}", gc.multi_z_rotations);
    println!("avg_multi_z_arity: {:.4}", gc.avg_multi_z_arity);
    println!("rx_count: {}", gc.rx_count);
    println!("hadamard_count: {}", gc.hadamard_count);
    println!("trainable_params: {}", gc.trainable_params);
    Ok(())
}

fn cmd_decode_one(args: DecodeOneArgs) -> Result<()> {
    let code = args.code.load()?;
    let n = args.n.unwrap_or(code.n());
    let m = args.m.unwrap_or(n);
    let sigma2 = sigma2_from_snr_db(args.snr);
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let ch = build_channel(m, n, args.cond, sigma2, &mut rng)?;
    let u: Vec<u8> = (0..code.k()).map(|_| rand::Rng::random_range(&mut rng, 0..2u8)).collect();
    let frame = transmit(&ch, &code, &u, &mut rng)?;

    let stack = args.weights.as_ref().map(LstmStack::load).transpose()?;
    let decoder = match &stack {
        Some(s) => match s.kind() {
            qturbo::l2l::StackKind::Angles { .. } => DecoderKind::Vqc(s),
            qturbo::l2l::StackKind::SoftBits { .. } => DecoderKind::SoftBits(s),
        },
        None => DecoderKind::Null,
    };
    let opts =
        TurboOptions { n_iters: args.iters, persist_angles: args.persist_angles, t_steps: None };
    let run = run_turbo_with(&frame.y, ch.a(), &code, sigma2, decoder, &opts)?;

    let mut trace_csv = String::from("iteration,tau2,v2,bit_errors\n");
    for state in &run.trace {
        let errors = match &state.info_llrs {
            Some(llrs) => {
                llrs.iter().zip(&u).filter(|(&l, &b)| llr_to_bit(l) != b).count()
            }
            None => state
                .l
                .iter()
                .zip(&frame.x)
                .filter(|(&l, &x)| if l >= 0.0 { x < 0.0 } else { x > 0.0 })
                .count(),
        };
        trace_csv.push_str(&format!("{},{:e},{:e},{}\n", state.t, state.tau2, state.v2, errors));
    }
    print!("{trace_csv}");
    if let Some(path) = &args.trace_out {
        std::fs::write(path, &trace_csv)?;
    }

    match &run.info_bits {
        Some(bits) => {
            let errors = bits.iter().zip(&u).filter(|(a, b)| a != b).count();
            println!("decoded with {errors} bit errors (sent {u:?}, got {bits:?})");
        }
        None => {
            let errors = run
                .final_l
                .iter()
                .zip(&frame.x)
                .filter(|(&l, &x)| if l >= 0.0 { x < 0.0 } else { x > 0.0 })
                .count();
            println!("no decoder: {errors} symbol errors off the final linear estimate");
        }
    }

    if let (Some(shots), Some(stack)) = (args.shots, &stack) {
        if let qturbo::l2l::StackKind::Angles { .. } = stack.kind() {
            // rebuild the final decode episode and compare exact measurement
            // statistics against shot-sampled ones
            let ep = qturbo::l2l::run_l2l_episode(
                &code,
                &run.final_l,
                run.final_tau2,
                stack,
                stack.t_steps(),
            )?;
            let hc = CostHamiltonian::build(&code, &run.final_l)?;
            let params = QaoaParams::new(
                ep.gamma.last().unwrap().clone(),
                ep.beta.last().unwrap().clone(),
            )?;
            let sv = apply_qaoa(&hc, &params)?;
            let exact = expect_z(&sv);
            let sampled = sample_z(&sv, shots, &mut rng)?;
            println!("qubit, exact <Z>, sampled <Z> ({shots} shots)");
            for i in 0..exact.len() {
                println!("{i}, {:+.4}, {:+.4}", exact[i], sampled[i]);
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    if let Ok(threads) = std::env::var("QTURBO_THREADS") {
        let threads: usize = threads.parse().context("QTURBO_THREADS must be an integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    }
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Gatecount(args) => cmd_gatecount(args),
        Command::DecodeOne(args) => cmd_decode_one(args),
    }
}
