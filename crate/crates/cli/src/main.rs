use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Audio spike encoder: Gammatone matching pursuit plus intensity-to-place coding.
#[derive(Debug, Parser)]
#[command(name = "spiketrum", version, about)]
struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct EncoderFlags {
    /// Codes per segment.
    #[arg(long)]
    sps: Option<usize>,
    /// Rate (Hz) input audio is resampled to.
    #[arg(long)]
    sample_rate: Option<u32>,
    /// Level table CSV.
    #[arg(long, value_name = "CSV")]
    levels: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a WAV file into `<out>.codes` and `<out>.events`.
    Encode {
        input: PathBuf,
        /// Output prefix.
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        encoder: EncoderFlags,
    },
    /// Reconstruct a waveform from a code or event file.
    Decode {
        input: PathBuf,
        /// Output WAV (32-bit float).
        #[arg(short, long)]
        output: PathBuf,
        /// Original audio; enables the error report.
        #[arg(long, value_name = "WAV")]
        reference: Option<PathBuf>,
        /// Also write the report (one JSON line) to this file.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        #[command(flatten)]
        encoder: EncoderFlags,
    },
    /// Calibrate a level table from a corpus of WAV files or directories.
    Calibrate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        encoder: EncoderFlags,
        /// Worker threads.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Sparsity, spectral entropy and information gain of event files.
    Metrics {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Bin width in seconds.
        #[arg(long)]
        bin_width: Option<f64>,
        /// Clamp bin counts to 1 before computing entropies.
        #[arg(long)]
        binarize: bool,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: ReportFormat,
        /// Write to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare Spiketrum with the spectrogram and Lauscher-style encoders.
    Bench {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        encoder: EncoderFlags,
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed for SOM training.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write the kernel bank as CSV.
    DumpBank {
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        sample_rate: Option<u32>,
    },
    /// Nearest-centroid probe: train on one labelled corpus, test on another.
    /// Labels come from the file-name prefix before the first `_`.
    Probe {
        #[arg(long, required = true, num_args = 1..)]
        train: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        test: Vec<PathBuf>,
        #[command(flatten)]
        encoder: EncoderFlags,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
