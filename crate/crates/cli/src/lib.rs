//! The `momoc` command line: sampling plans, phantoms, simulation, reconstruction,
//! metrics, perceived-artifact scores and the annotation server.

pub mod commands;
pub mod server;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "momoc",
    version,
    about = "Rigid-motion simulation, correction and evaluation for 3D MRI"
)]
pub struct Cli {
    /// JSON configuration for the subcommand; missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Undersampling masks and shot schedules.
    Mask {
        #[command(subcommand)]
        cmd: MaskCmd,
    },
    /// Write a synthetic phantom volume.
    Phantom(PhantomArgs),
    /// Simulate multi-coil, motion-corrupted k-space into a data-set directory.
    Simulate(SimulateArgs),
    /// Reconstruct a data set.
    Recon {
        #[command(subcommand)]
        method: ReconCmd,
    },
    /// Image quality metrics.
    Metrics {
        #[command(subcommand)]
        cmd: MetricsCmd,
    },
    /// Perceived motion artifact scores.
    Pmas {
        #[command(subcommand)]
        cmd: PmasCmd,
    },
    /// Spearman correlation of metric rows with perceived artifact scores.
    Correlate(CorrelateArgs),
    /// Evaluation protocols.
    Eval {
        #[command(subcommand)]
        cmd: EvalCmd,
    },
    /// Serve the blinded pairwise annotation API.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum MaskCmd {
    /// Generate a sampling plan (JSON).
    Gen(MaskGenArgs),
}

#[derive(Debug, Args)]
pub struct MaskGenArgs {
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub nz: Option<usize>,
    #[arg(long)]
    pub shots: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    /// shepp3d or blobs.
    #[arg(long)]
    pub kind: Option<String>,
    /// Voxel counts ny nz nx.
    #[arg(long, num_args = 3, value_names = ["NY", "NZ", "NX"])]
    pub dims: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Motion-free magnitude volume (.pmv or .nii); a phantom is generated when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// mild, severe or none.
    #[arg(long)]
    pub severity: Option<String>,
    /// Sampling plan from `momoc mask gen`; generated from the volume dims when absent.
    #[arg(long)]
    pub plan: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReconCmd {
    /// Zero-filled coil-combined adjoint.
    Adjoint(ReconArgs),
    /// Wavelet-L1 reconstruction.
    L1(L1Args),
    /// Alternating image and motion estimation with shot rejection.
    Altopt(ReconArgs),
}

#[derive(Debug, Args)]
pub struct ReconArgs {
    /// Data-set directory written by `momoc simulate`.
    #[arg(long)]
    pub data: PathBuf,
}

#[derive(Debug, Args)]
pub struct L1Args {
    /// Data-set directory written by `momoc simulate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Use the data set's true trajectory in the forward model.
    #[arg(long)]
    pub true_motion: bool,
}

#[derive(Debug, Subcommand)]
pub enum MetricsCmd {
    /// Register, mask and normalize against a reference, then score.
    Paired(PairedArgs),
    /// Reference-free metrics.
    Free(FreeArgs),
}

#[derive(Debug, Args)]
pub struct PairedArgs {
    /// Motion-free reference volume.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Brain mask of the reference; required.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Reconstructions; the file stem is the id.
    #[arg(required = true)]
    pub recons: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FreeArgs {
    /// Region to score; the whole volume when absent.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Reconstructions; the file stem is the id.
    #[arg(required = true)]
    pub recons: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PmasCmd {
    /// Fit scores to a comparisons log.
    Fit(PmasFitArgs),
}

#[derive(Debug, Args)]
pub struct PmasFitArgs {
    /// Comparisons log (JSON lines).
    #[arg(long)]
    pub comparisons: PathBuf,
    /// Weight of the L2 prior.
    #[arg(long)]
    pub reg: Option<f64>,
    /// Also report the given number of lowest-scoring items as mild.
    #[arg(long)]
    pub k_mild: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Metric rows (JSON lines).
    #[arg(long)]
    pub rows: PathBuf,
    /// Scores file from `momoc pmas fit`.
    #[arg(long)]
    pub scores: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    /// Corrupt, reconstruct and score phantoms or given volumes.
    Simulated,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Append-only comparisons log (created when missing).
    #[arg(long)]
    pub comparisons: PathBuf,
    /// Directory of volumes to compare (.pmv or .nii).
    #[arg(long)]
    pub volumes: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .try_init();
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    commands::dispatch(cli)
}
