use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

mod commands;
mod failure;

use failure::Failure;

#[derive(Parser)]
#[command(name = "turnprint", version, about = "Identify drivers from the IMU signature of their turns")]
struct Cli {
    /// Run configuration (TOML); missing keys take their defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Root seed, overriding the config file
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trip, or a labeled corpus with --drivers
    Simulate(SimulateArgs),
    /// Pull left and right turns out of a trace as JSON lines
    Extract(ExtractArgs),
    /// Turn JSON lines into the 225-column feature CSV
    Featurize(FeaturizeArgs),
    /// Fit a classifier on labeled features
    Train(TrainArgs),
    /// Predict the driver of each turn, or of the whole trip with --trip
    Identify(IdentifyArgs),
    /// Add a trip to a driver profile table, creating a driver if none fits
    Enroll(EnrollArgs),
    /// Run the evaluation suite on a labeled corpus
    Eval(EvalArgs),
    /// Add Gaussian noise to a trace's gyroscope and accelerometer
    Perturb(PerturbArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Driver profile (JSON)
    #[arg(long, conflicts_with = "drivers", requires = "route")]
    pub profile: Option<PathBuf>,
    /// Route script (JSON)
    #[arg(long, conflicts_with = "drivers")]
    pub route: Option<PathBuf>,
    /// Ground-truth maneuvers of the trip (JSON)
    #[arg(long, conflicts_with = "drivers")]
    pub truth: Option<PathBuf>,
    /// Simulate a corpus of this many drivers into the -o directory
    #[arg(long)]
    pub drivers: Option<usize>,
    /// Trips per driver in corpus mode
    #[arg(long, default_value_t = 4, requires = "drivers")]
    pub trips: usize,
    /// Turns per random route in corpus mode
    #[arg(long, default_value_t = 12, requires = "drivers")]
    pub turns: usize,
    /// Add lane changes, U-turns and stops to random routes
    #[arg(long, requires = "drivers")]
    pub distractors: bool,
    #[arg(long, default_value_t = 100.0)]
    pub rate_hz: f64,
    /// Emit device-frame samples with a magnetometer instead of aligned ones
    #[arg(long)]
    pub mounted: bool,
    /// Disable sensor noise
    #[arg(long)]
    pub noise_free: bool,
    /// Trace CSV, or the corpus directory with --drivers
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Trace CSV
    #[arg(long)]
    pub trace: PathBuf,
    /// Treat the trace as already geo-aligned, overriding its header
    #[arg(long)]
    pub aligned: Option<bool>,
    /// Keep native-rate samples instead of resampling to L points
    #[arg(long)]
    pub native: bool,
    /// Output JSON lines (stdout when omitted)
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct FeaturizeArgs {
    /// Turn JSON lines
    #[arg(long)]
    pub turns: PathBuf,
    /// Driver label written into every row
    #[arg(long)]
    pub label: Option<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Labeled feature CSV
    #[arg(long)]
    pub features: PathBuf,
    /// nb or rf
    #[arg(long, default_value = "rf")]
    pub kind: String,
    /// Model JSON
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV of the turns to identify
    #[arg(long)]
    pub turns: PathBuf,
    /// Fuse all turns into one trip-level MAP estimate (naive Bayes only)
    #[arg(long)]
    pub trip: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct EnrollArgs {
    /// Profile table (JSON lines); created when missing
    #[arg(long)]
    pub table: PathBuf,
    /// Feature CSV of one trip
    #[arg(long)]
    pub trip: PathBuf,
    /// Gate threshold, overriding the config
    #[arg(long, allow_hyphen_values = true)]
    pub threshold: Option<f64>,
    /// Write the updated table here instead of in place
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Corpus manifest CSV with columns driver,trace
    #[arg(long)]
    pub manifest: PathBuf,
    /// Trip draws per point of the accuracy-versus-turns curve
    #[arg(long, default_value_t = 500)]
    pub iterations: usize,
    /// Longest trip on the curve, in turns
    #[arg(long, default_value_t = 10)]
    pub max_turns: usize,
    /// Skip the with/without interpolation comparison
    #[arg(long)]
    pub no_ablation: bool,
    /// Report directory
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub aligned: Option<bool>,
    /// Standard deviation of the added noise, in sensor units
    #[arg(long)]
    pub noise_sd: f64,
    /// always or on_bump
    #[arg(long, default_value = "always")]
    pub trigger: String,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = commands::load_config(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&config, &a),
        Command::Extract(a) => commands::extract(&config, &a),
        Command::Featurize(a) => commands::featurize(&config, &a),
        Command::Train(a) => commands::train(&config, &a),
        Command::Identify(a) => commands::identify(&config, &a),
        Command::Enroll(a) => commands::enroll(&config, &a),
        Command::Eval(a) => commands::eval(&config, &a),
        Command::Perturb(a) => commands::perturb(&config, &a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
