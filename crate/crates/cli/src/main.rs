mod commands;
mod formats;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit code for results that ran but could not rank the truth.
pub const EXIT_ANALYSIS: u8 = 3;
/// Exit code for bad arguments or unreadable input.
pub const EXIT_INPUT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "keyheat", version, about = "Keyboard thermal and acoustic side-channel toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// Scenario JSON; command-line flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = ".")]
    pub output_dir: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate key heating and cooling; write the thermal image and recovery curve.
    Simulate(commands::SimulateArgs),
    /// Detect keystrokes in a WAV recording and extract their features.
    Segment(commands::SegmentArgs),
    /// Train a key classifier.
    Train(commands::TrainArgs),
    /// Rank keys for each keystroke with a trained model.
    Predict(commands::PredictArgs),
    /// Cross-validate the classifier.
    Cv(commands::CvArgs),
    /// Combine a key set with keystroke predictions into ranked passwords.
    Fuse(commands::FuseArgs),
    /// Run the whole attack on a synthetic scenario.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
