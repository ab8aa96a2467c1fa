//! `dsff` — batch front end for the conversion pipeline.
//!
//! Exit codes: 0 success, 2 usage (from clap), 3 config trouble,
//! 4 file/format trouble, 5 bad data (dimensions, unknown speakers,
//! rank-deficient fits, ...).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsff_core::config::PipelineConfig;

mod analysis;
mod commands;
mod weights;

#[derive(Parser)]
#[command(
    name = "dsff",
    version,
    about = "Multi-source feature fusion pipeline: prosody, conversion, evaluation, benchmarks"
)]
struct Cli {
    /// Pipeline config (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the config seed for every PRNG-initialized weight.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for per-utterance stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Print the effective config as TOML and exit.
    #[arg(long)]
    dump_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus: WAVs, source features, manifests.
    GenFixtures(GenFixturesArgs),
    /// Analyze one utterance: F0 (+voicing), energy, and log-mel files.
    ExtractProsody(ExtractProsodyArgs),
    /// Project source features onto a common grid and add them.
    Fuse(FuseArgs),
    /// Fit conditioning weights and the decoder over a training manifest.
    Fit(FitArgs),
    /// Convert utterances from a manifest using a fitted weights directory.
    Convert(ConvertArgs),
    /// Score converted utterances against references; writes a CSV report.
    Evaluate(EvaluateArgs),
    /// Compare resampling vs cross-attention alignment (RTX/RTF/quality).
    Bench(BenchArgs),
}

#[derive(Args)]
pub struct GenFixturesArgs {
    /// Corpus root to create.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 8)]
    pub utterances: usize,
    #[arg(long, default_value_t = 2)]
    pub speakers: usize,
    /// Length of each utterance.
    #[arg(long, default_value_t = 2.0)]
    pub seconds: f64,
}

#[derive(Args)]
pub struct ExtractProsodyArgs {
    /// Input WAV (mono, 16/24-bit PCM).
    #[arg(long, value_name = "FILE")]
    pub audio: PathBuf,
    /// Output stem; writes STEM.f0.dsff, STEM.f0.voicing.dsff,
    /// STEM.energy.dsff, STEM.mel.dsff.
    #[arg(long, value_name = "STEM")]
    pub out_stem: PathBuf,
}

#[derive(Args)]
pub struct FuseArgs {
    /// Source feature files to fuse.
    #[arg(required = true, value_name = "DSFF")]
    pub sources: Vec<PathBuf>,
    /// Target grid length in frames.
    #[arg(long, conflicts_with = "rate")]
    pub frames: Option<usize>,
    /// Target frame rate; the length comes from the first source's duration.
    /// Defaults to model.target_frame_rate when --frames is absent too.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Fitted weights directory holding the per-source projections; falls
    /// back to paths.weights_dir. Without either, projections are seeded
    /// fresh from the config seed.
    #[arg(long, value_name = "DIR")]
    pub weights_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FitArgs {
    /// Training manifest: label|speaker|audio.wav|src_a.dsff;src_b.dsff
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Where to write the fitted state; falls back to paths.weights_dir.
    #[arg(long, value_name = "DIR")]
    pub weights_dir: Option<PathBuf>,
    /// Override ridge strength (relative to the Gram diagonal mean).
    #[arg(long)]
    pub lambda_rel: Option<f64>,
}

#[derive(Args)]
pub struct ConvertArgs {
    /// Conversion manifest: label|audio.wav|target_speaker|src_a.dsff;...
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Fitted weights directory from `fit`; falls back to paths.weights_dir.
    #[arg(long, value_name = "DIR")]
    pub weights_dir: Option<PathBuf>,
    /// Output directory; writes LABEL.mel.dsff plus transposed F0 files.
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Evaluation manifest; see the README for the nine-field layout.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// CSV report destination.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Align mel frames with dynamic time warping instead of trimming.
    #[arg(long)]
    pub dtw: bool,
    /// F0 error unit: hz or cents.
    #[arg(long, default_value = "hz")]
    pub f0_unit: String,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Run the small smoke workload instead of the reference one.
    #[arg(long)]
    pub quick: bool,
    /// Timed runs per measurement (median is reported).
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
    /// Time utterances on per-utterance clocks across worker threads.
    #[arg(long)]
    pub parallel: bool,
    /// Also write the comparison as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

/// A diagnosed failure: what to print and how to exit.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<dsff_core::Error> for Failure {
    fn from(e: dsff_core::Error) -> Self {
        let code = match &e {
            dsff_core::Error::Io(_) | dsff_core::Error::Format(_) => 4,
            _ => 5,
        };
        Failure { code, message: e.to_string() }
    }
}

fn effective_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.model.seed = seed;
    }
    cfg.validate().map_err(|e| Failure::config(e.to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = effective_config(&cli)?;
    if cli.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    if cli.jobs != 1 {
        // Zero means "let rayon pick"; any later duplicate init is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global();
    }
    let Some(command) = cli.command else {
        return Err(Failure {
            code: 2,
            message: "missing subcommand; run with --help".into(),
        });
    };
    match command {
        Command::GenFixtures(args) => commands::gen_fixtures(&args, &cfg)?,
        Command::ExtractProsody(args) => commands::extract_prosody(&args, &cfg)?,
        Command::Fuse(args) => commands::fuse(&args, &cfg)?,
        Command::Fit(args) => commands::fit(&args, &cfg)?,
        Command::Convert(args) => commands::convert(&args, &cfg)?,
        Command::Evaluate(args) => commands::evaluate(&args, &cfg)?,
        Command::Bench(args) => commands::bench(&args, &cfg)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dsff: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
