mod commands;
mod dataset;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Vanishing point detection from recurring patterns and line segments.
#[derive(Debug, Parser)]
#[command(name = "vanishkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect the vanishing point of an image, or of every image and instance in a directory.
    Detect(DetectArgs),
    /// Generate synthetic scenes with known vanishing points.
    Synth(SynthArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Compare two prediction files on the same ground truth.
    Compare(CompareArgs),
    /// F1 under feature position noise.
    Stress(StressArgs),
    /// Per-image detection time.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Image file, or directory of images and instance directories.
    pub input: PathBuf,
    /// Pipeline configuration (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Precomputed features for a single image.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Line segments (`x0,y0,x1,y1`) for a single image.
    #[arg(long)]
    pub segments: Option<PathBuf>,
    /// Random seed; falls back to VANISHKIT_SEED, then the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prediction CSV (`imageId,x,y`); printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-image stage timings CSV.
    #[arg(long)]
    pub timings: Option<PathBuf>,
    /// Decode `image.png` in instance directories instead of reading `features.csv`.
    #[arg(long)]
    pub use_images: bool,
    /// Worker threads for directory input (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of scenes.
    #[arg(long)]
    pub scenes: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature position noise in pixels.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Log-normal feature size jitter.
    #[arg(long, default_value_t = 0.0)]
    pub size_jitter: f64,
    /// Descriptor noise.
    #[arg(long, default_value_t = 0.0)]
    pub descriptor_noise: f64,
    /// Scene distribution (TOML).
    #[arg(long)]
    pub scene_config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a dot rendering of each scene.
    #[arg(long)]
    pub render: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of `<id>.txt` files or `<id>/gt.txt` instance directories.
    #[arg(long)]
    pub gt: PathBuf,
    /// Success-rate curve CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// Success-rate curve SVG.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Per-image results CSV.
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// Timings CSV from `detect --timings`, for the results runtime column.
    #[arg(long)]
    pub timings: Option<PathBuf>,
    /// Image size `WxH` for ground truth without an image or camera file.
    #[arg(long)]
    pub size: Option<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub pred_a: PathBuf,
    #[arg(long)]
    pub pred_b: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub size: Option<String>,
}

#[derive(Debug, Args)]
pub struct StressArgs {
    /// Directory of instance directories with `features.csv` and `gt.txt`.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 3.0, 5.0])]
    pub sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    pub scales: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [5.0, 10.0])]
    pub thresholds: Vec<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// F1 table CSV; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub use_images: bool,
}

/// Bad invocation (exit 1) or bad data (exit 2).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Detect(a) => commands::detect(a),
        Command::Synth(a) => commands::synth(a),
        Command::Eval(a) => commands::eval(a),
        Command::Compare(a) => commands::compare(a),
        Command::Stress(a) => commands::stress(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
