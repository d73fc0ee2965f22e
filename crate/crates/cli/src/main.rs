mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfcn::network::CausalityMode;

/// Speech enhancement with temporal-frequential convolutional networks.
#[derive(Debug, Parser)]
#[command(name = "tfcn", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute per-bin normalization statistics of the noisy training audio.
    Stats(StatsArgs),
    /// Train a model as described by a run configuration.
    Train(TrainArgs),
    /// Enhance one WAV file.
    Enhance(EnhanceArgs),
    /// Print parameter count, receptive field and padding plan.
    Report(ReportArgs),
    /// Check that a checkpoint respects its look-ahead.
    Probe(ProbeArgs),
    /// Generate a synthetic paired corpus.
    Synth(SynthArgs),
    /// Score a checkpoint on a paired corpus.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Corpus manifest; defaults to `paths.train_manifest` of `--config`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Output file; defaults to `paths.stats` of `--config`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Continue from a `latest.ckpt` written by an earlier run.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub segment_samples: Option<usize>,
    /// `non-causal`, `causal` or `semi:<frames>`.
    #[arg(long)]
    pub causality: Option<CausalityMode>,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Normalizer file; by default the one stored in the checkpoint.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Run frame by frame, as a live stream would.
    #[arg(long)]
    pub streaming: bool,
    pub input: PathBuf,
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Take the model from a run configuration.
    #[arg(long, conflicts_with_all = ["checkpoint", "variant"])]
    pub config: Option<PathBuf>,
    /// Take the model from a checkpoint.
    #[arg(long, conflicts_with = "variant")]
    pub checkpoint: Option<PathBuf>,
    /// `TFCN`, `TFCN_D` or `TCN_LPS`; the default is `TFCN`.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long)]
    pub causality: Option<CausalityMode>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub blocks_per_repeat: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Allowed future context in frames.
    #[arg(long)]
    pub look_ahead: usize,
    #[arg(long, default_value_t = 64)]
    pub frames: usize,
    #[arg(long, default_value_t = 4)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub n_utts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub min_secs: Option<f64>,
    #[arg(long)]
    pub max_secs: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_target(false)
        .init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
