//! `ecggan`: synthesis, corruption, training, evaluation and sweeps from
//! the command line. Every subcommand writes CSV or binary containers and
//! reports failures as one `error:` line with a nonzero exit code.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ecggan",
    version,
    about = "ECG synthesis, GAN training and denoising"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthModel {
    Mcsharry,
    Gan,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrainTarget {
    Gan,
    Inception,
    Denoiser,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Variant {
    Baseline,
    PhaseShuffle,
    Pretrained,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EvalMethod {
    None,
    Bandpass,
    Wavelet,
    Denoiser,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CompositionArg {
    RealOnly,
    SyntheticOnly,
    Mixed,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset of clean signals.
    Synth {
        #[arg(long, value_enum)]
        model: SynthModel,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        /// Heart rate in bpm (McSharry).
        #[arg(long, default_value_t = 60.0)]
        hr: f64,
        /// Draw each rate uniformly from `[hr, hr_max]` instead (McSharry).
        #[arg(long)]
        hr_max: Option<f64>,
        #[arg(long, default_value_t = 500.0)]
        rate: f64,
        /// Signal length in samples.
        #[arg(long, default_value_t = 5000)]
        length: usize,
        /// Generator checkpoint (GAN).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Corrupt a clean dataset into clean/noisy pairs.
    Noise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train one of the networks; writes checkpoints and log CSVs to `out`.
    Train {
        #[arg(value_enum)]
        target: TrainTarget,
        /// Real signals (gan), labelled signals (inception) or pairs (denoiser).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "baseline")]
        variant: Variant,
        /// Critic checkpoint for the pretrained denoiser.
        #[arg(long)]
        critic: Option<PathBuf>,
        /// Classifier checkpoint for inception-score model selection (gan).
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    /// Score denoising methods on a pairs file.
    Eval {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum, required_unless_present = "all")]
        method: Option<EvalMethod>,
        /// Every reference method, then one row per denoiser checkpoint.
        #[arg(long, conflicts_with = "method")]
        all: bool,
        /// Denoiser checkpoint; repeat for several variants.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score denoisers over training-set compositions and sizes.
    Sweep {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        #[arg(long)]
        real_test: PathBuf,
        #[arg(long)]
        synthetic_test: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(
            long,
            value_enum,
            value_delimiter = ',',
            default_value = "real-only,synthetic-only,mixed"
        )]
        compositions: Vec<CompositionArg>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            eprintln!(
                "{}",
                rendered.lines().next().unwrap_or("error: bad arguments")
            );
            return ExitCode::from(2);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
