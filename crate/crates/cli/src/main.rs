//! `mwtomo`: command-line driver for phantom generation, forward modelling,
//! dataset building, training, inversion and evaluation.

mod commands;
mod manifest;
mod render;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use mwtomo::ErrorKind;

#[derive(Debug, Parser)]
#[command(name = "mwtomo", version, about = "Microwave breast tomography toolkit")]
pub struct Cli {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set grid.n=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads (defaults to MWTOMO_THREADS, then all cores).
    #[arg(long, global = true, env = "MWTOMO_THREADS")]
    pub threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one random breast phantom.
    Phantom(PhantomArgs),
    /// Build the training database and split it.
    Dataset(DatasetArgs),
    /// Compute the noise-free scattering matrix of a dielectric map.
    Forward(ForwardArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Run a trained network on one scattering matrix.
    Infer(InferArgs),
    /// Reconstruct a dielectric map from one scattering matrix.
    Invert(InvertArgs),
    /// Score networks and baselines on the test split.
    Evaluate(EvaluateArgs),
    /// Render rasters to grayscale PGM images.
    Render(RenderArgs),
    /// Run the desk-scale reproduction end to end.
    ReproDesk(ReproDeskArgs),
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// Breast class: I, II, III or IV.
    #[arg(long)]
    pub class: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "phantom")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, default_value_t = 500)]
    pub n_per_class: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed of the train/validation/test split.
    #[arg(long, default_value_t = 7)]
    pub split_seed: u64,
    /// Continue an existing store instead of refusing to touch it.
    #[arg(long)]
    pub resume: bool,
    #[arg(long, default_value = "dataset")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Relative-permittivity raster (MWTR).
    #[arg(long)]
    pub eps: PathBuf,
    /// Conductivity raster (MWTR).
    #[arg(long)]
    pub sigma: PathBuf,
    /// Add noise at this SNR (dB) to the written matrix.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "forward")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory with a split manifest.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "model")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Scattering matrix (MWTS).
    #[arg(long)]
    pub input: PathBuf,
    /// Add noise at this SNR (dB) before inference.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "infer")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ann,
    Born,
    Dbim,
    Csi,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Scattering matrix (MWTS).
    #[arg(long)]
    pub input: PathBuf,
    /// Trained network, required for `--method ann`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Outer iterations (DBIM, CSI).
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "invert")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Trained networks; repeatable. Named after the file stem.
    #[arg(long = "model")]
    pub models: Vec<PathBuf>,
    /// Also score the listed baselines.
    #[arg(long = "baseline", value_enum)]
    pub baselines: Vec<Method>,
    /// Use only the first N test records.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 30.0)]
    pub snr: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "evaluation")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Rasters (MWTR) to render.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Lower end of the color scale (default: data minimum).
    #[arg(long, allow_negative_numbers = true)]
    pub min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max: Option<f64>,
    #[arg(long, default_value = "render")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproDeskArgs {
    #[arg(long, default_value_t = 500)]
    pub n_per_class: usize,
    /// Hidden widths of the node sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [64, 256])]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = 256)]
    pub reference_width: usize,
    #[arg(long, default_value = "desk")]
    pub out: PathBuf,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<mwtomo::Error>() {
            return match e.kind() {
                ErrorKind::Usage => 2,
                ErrorKind::Integrity => 3,
                ErrorKind::Numerical => 4,
                ErrorKind::Io => {
                    if let mwtomo::Error::Io { source, .. } = e {
                        if source.kind() == std::io::ErrorKind::NotFound {
                            return 2;
                        }
                    }
                    3
                }
            };
        }
        if cause.is::<commands::UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<std::io::Error>() {
            return if e.kind() == std::io::ErrorKind::NotFound { 2 } else { 3 };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
