//! `rdvk`: encode, decode, compete, score and report.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rdvk", version, about = "Block-based video codec with per-sequence coding-option competition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Geometry for headerless I420 input.
#[derive(Args, Clone, Default)]
pub struct RawGeometry {
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Frame rate, `N` or `N/D`.
    #[arg(long)]
    pub fps: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a video into an .rdv stream.
    Encode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value_t = 32)]
        intra_period: usize,
        #[arg(long, default_value_t = 8)]
        gop: usize,
        #[arg(long, default_value_t = 4)]
        quality: u8,
        #[arg(long)]
        downsample: bool,
        #[command(flatten)]
        raw: RawGeometry,
        /// Write the frame schedule as JSON lines.
        #[arg(long)]
        dump_schedule: Option<PathBuf>,
        /// Write per-frame motion fields as JSON.
        #[arg(long)]
        dump_motion: Option<PathBuf>,
    },
    /// Decode an .rdv stream to Y4M at the original resolution.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    /// Run the coding-option competition over a directory of videos.
    Compete {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Total budget in MBytes (10^6 bytes).
        #[arg(long, conflicts_with_all = ["budget_bps", "lambda"])]
        budget_mbytes: Option<f64>,
        /// Mean rate per sequence in bits per second.
        #[arg(long, conflicts_with = "lambda")]
        budget_bps: Option<f64>,
        /// Fixed Lagrange multiplier instead of a budget.
        #[arg(long)]
        lambda: Option<f64>,
        /// Grid subset, e.g. `ip=32,64:gop=4,8:q=2,4,6,8:ds=0,1`.
        #[arg(long)]
        grid: Option<String>,
        /// Worker threads; RDVK_THREADS takes precedence.
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        raw: RawGeometry,
    },
    /// MS-SSIM and PSNR of a distorted video against a reference.
    Metrics {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "dist")]
        distorted: PathBuf,
        #[command(flatten)]
        raw: RawGeometry,
    },
    /// BD-rate of a test RD curve against an anchor (CSV with `rate,quality`).
    Bdrate {
        #[arg(long)]
        anchor: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Rebuild report.md from a competition output directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to `<in>/report.md`.
        #[arg(long = "out")]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> rdvk_core::Result<()> {
    match cli.command {
        Command::Encode { input, output, intra_period, gop, quality, downsample, raw, dump_schedule, dump_motion } => {
            commands::encode(&commands::EncodeArgs {
                input,
                output,
                intra_period,
                gop,
                quality,
                downsample,
                raw,
                dump_schedule,
                dump_motion,
            })
        }
        Command::Decode { input, output } => commands::decode(&input, &output),
        Command::Compete { input, output, budget_mbytes, budget_bps, lambda, grid, jobs, raw } => {
            let target = match (budget_mbytes, budget_bps, lambda) {
                (Some(mb), _, _) => commands::Target::MBytes(mb),
                (_, Some(bps), _) => commands::Target::Bps(bps),
                (_, _, Some(l)) => commands::Target::Lambda(l),
                _ => {
                    return Err(rdvk_core::Error::Config(
                        "one of --budget-mbytes, --budget-bps or --lambda is required".into(),
                    ))
                }
            };
            commands::compete(&commands::CompeteArgs { input, output, target, grid, jobs, raw })
        }
        Command::Metrics { reference, distorted, raw } => commands::metrics(&reference, &distorted, &raw),
        Command::Bdrate { anchor, test } => commands::bdrate(&anchor, &test),
        Command::Report { input, output } => commands::report(&input, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
