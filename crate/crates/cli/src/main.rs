//! `mman`: train, evaluate and compare the adversarial segmentation variants.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "mman",
    version,
    about = "Macro/micro adversarial segmentation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every experiment; they override the config file.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Plain-text `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// baseline, single_an, double_an, multiple_an or mman.
    #[arg(long)]
    pub variant: Option<String>,
    /// Comma-separated inference scales, e.g. `0.8,1,1.2`.
    #[arg(long)]
    pub scales: Option<String>,
    /// desk (64×64) or full (256×256).
    #[arg(long)]
    pub profile: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one variant; writes checkpoint, trace, curves and report.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Dataset manifest; defaults to the config's synthetic set.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Stop after this many iterations (resumable).
        #[arg(long)]
        iterations: Option<usize>,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint with multi-scale inference.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset manifest; defaults to the checkpoint's synthetic training set.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        scales: Option<String>,
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
    },
    /// Write a seeded synthetic figure dataset.
    GenData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value = "runs/data")]
        out: PathBuf,
    },
    /// Train all five variants on one config and compare them.
    Variants {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "runs/variants")]
        out: PathBuf,
        /// Held-out figures scored per variant.
        #[arg(long, default_value_t = 50)]
        test_count: usize,
        /// Only print the architecture tables.
        #[arg(long)]
        no_train: bool,
    },
    /// Render a trace CSV to a normalized CSV and an SVG chart.
    ExportCurves {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "runs/curves")]
        out: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            common,
            out,
            data,
            iterations,
            resume,
        } => commands::train(
            &common,
            &out,
            data.as_deref(),
            iterations,
            resume.as_deref(),
        ),
        Command::Eval {
            checkpoint,
            data,
            scales,
            out,
        } => commands::eval(&checkpoint, data.as_deref(), scales.as_deref(), &out),
        Command::GenData {
            seed,
            count,
            size,
            out,
        } => commands::gen_data(seed, count, size, &out),
        Command::Variants {
            common,
            out,
            test_count,
            no_train,
        } => commands::variants(&common, &out, test_count, no_train),
        Command::ExportCurves { trace, out, title } => {
            commands::export_curves(&trace, &out, title.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
