//! Command-line entry point. All real work lives in `offlang::commands`;
//! this file only parses arguments and maps errors to exit codes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use offlang::commands::{self, CommandError};
use offlang::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "offlang",
    version,
    about = "Offensive-language detection for low-resource Indic languages"
)]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(short, long, global = true, default_value = "run.toml")]
    config: PathBuf,
    /// Override the training seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print label distribution for the configured data files.
    Stats,
    /// Normalize a corpus file and write the cleaned copy.
    Normalize {
        /// Input file; defaults to the configured train file.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where to write the cleaned corpus.
        #[arg(long)]
        output: PathBuf,
    },
    /// Fine-tune the configured backbone and save a checkpoint.
    Train,
    /// Run a saved checkpoint over the test file and write a submission.
    Predict {
        /// Checkpoint directory; defaults to <output_dir>/checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Submission path; defaults to <output_dir>/predictions.tsv.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Score a submission file against gold labels.
    Evaluate {
        /// Prediction file; defaults to data.predictions or
        /// <output_dir>/predictions.tsv.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Rewrite a prediction file in canonical submission order.
    Export {
        /// Prediction file to re-export.
        #[arg(long)]
        predictions: PathBuf,
        /// Destination submission file.
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> Result<String, CommandError> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.train.seed = seed;
    }
    if let Some(dir) = cli.output_dir {
        config.output_dir = dir;
    }
    match cli.command {
        Command::Stats => commands::cmd_stats(&config),
        Command::Normalize { input, output } => {
            commands::cmd_normalize(&config, input.as_deref(), &output)
        }
        Command::Train => commands::cmd_train(&config),
        Command::Predict { checkpoint, output } => {
            commands::cmd_predict(&config, checkpoint.as_deref(), output.as_deref())
        }
        Command::Evaluate { predictions } => {
            commands::cmd_evaluate(&config, predictions.as_deref())
        }
        Command::Export {
            predictions,
            output,
        } => commands::cmd_export(&config, &predictions, &output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
