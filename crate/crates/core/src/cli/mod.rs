//! The `flowdeblur` command line.
//!
//! Exit status: 0 on success, 1 on runtime failure, 2 on usage errors.
//! Logs go to stderr, results to stdout.

mod config;
mod deblur;
mod eval;
mod generate;
mod server;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::io::BitDepth;

pub use config::{parse_list, ConfigFile};
pub use deblur::PriorKind;
pub use server::{serve, ServerMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A bad flag, config entry or combination; nothing has been written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(UsageError),
    Runtime(Error),
}

impl From<UsageError> for CliError {
    fn from(e: UsageError) -> Self {
        CliError::Usage(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Runtime(_) => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(e) => write!(f, "usage error: {e}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

/// Maps parameter errors raised during validation to usage errors.
pub(crate) fn usage(e: Error) -> UsageError {
    UsageError(e.to_string())
}

pub(crate) fn required<T>(value: Option<T>, flag: &str) -> Result<T, UsageError> {
    value.ok_or_else(|| UsageError(format!("--{flag} is required")))
}

pub(crate) fn bit_depth(bits: Option<u8>, default: BitDepth) -> Result<BitDepth, UsageError> {
    match bits {
        None => Ok(default),
        Some(8) => Ok(BitDepth::Eight),
        Some(16) => Ok(BitDepth::Sixteen),
        Some(b) => Err(UsageError(format!("bit depth must be 8 or 16, got {b}"))),
    }
}

#[derive(Debug, Parser)]
#[command(name = "flowdeblur", version, about = "Spatially-varying motion deblurring")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Build a synthetic blurred/sharp dataset with known flows.
    Generate(GenerateArgs),
    /// Blur one image with a stored flow.
    Blur(BlurArgs),
    /// Restore a blurred image.
    Deblur(DeblurArgs),
    /// Score restorations and flows.
    Eval(EvalArgs),
    /// Serve denoise requests on stdin/stdout (reference external prior).
    DenoiseServer(ServerArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Directory of sharp PNG images.
    #[arg(long)]
    pub sharp_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pairs generated per sharp image.
    #[arg(long)]
    pub per_image: Option<usize>,
    /// Bound on |u| and |v| in pixels.
    #[arg(long)]
    pub ceiling: Option<f64>,
    /// Correlation length of the flow field in pixels.
    #[arg(long)]
    pub smoothness: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// key = value file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BlurArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// MFLO flow file.
    #[arg(long)]
    pub flow: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// replicate or zero.
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// 8 or 16.
    #[arg(long)]
    pub bit_depth: Option<u8>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DeblurArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Stored MFLO flow (oracle mode).
    #[arg(long)]
    pub flow: Option<PathBuf>,
    /// Flow estimator command: PNG on stdin, MFLO on stdout (blind mode).
    #[arg(long)]
    pub flow_cmd: Option<String>,
    /// identity, tv or external.
    #[arg(long)]
    pub prior: Option<PriorKind>,
    /// Denoiser command for `--prior external`.
    #[arg(long)]
    pub denoiser_cmd: Option<String>,
    /// Seconds to wait for each denoiser reply.
    #[arg(long)]
    pub denoiser_timeout: Option<f64>,
    /// Level count; betas default to 0.01·5ⁿ.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Comma-separated, strictly increasing.
    #[arg(long)]
    pub betas: Option<String>,
    /// Comma-separated TV weight per level.
    #[arg(long)]
    pub tv_weights: Option<String>,
    #[arg(long)]
    pub tv_iters: Option<usize>,
    #[arg(long)]
    pub tv_step: Option<f64>,
    /// Full solves; defaults to 1 with --flow and 3 with --flow-cmd.
    #[arg(long)]
    pub global_iters: Option<usize>,
    /// Write the per-level trace as TSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Sharp image for per-level PSNR in the trace.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// replicate or zero.
    #[arg(long)]
    pub boundary: Option<String>,
    #[arg(long)]
    pub cg_tol: Option<f64>,
    #[arg(long)]
    pub cg_max_iter: Option<usize>,
    /// 8 or 16.
    #[arg(long)]
    pub bit_depth: Option<u8>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Manifest written by `generate`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Restored images named like the manifest's blurred files.
    #[arg(long, requires = "manifest")]
    pub restored_dir: Option<PathBuf>,
    /// Estimated flows named like the manifest's flow files.
    #[arg(long, requires = "manifest")]
    pub flow_dir: Option<PathBuf>,
    /// IMAGE REFERENCE; repeatable.
    #[arg(long, num_args = 2, value_names = ["IMAGE", "REFERENCE"], action = clap::ArgAction::Append)]
    pub pair: Vec<PathBuf>,
    /// ESTIMATE LABEL; repeatable.
    #[arg(long, num_args = 2, value_names = ["ESTIMATE", "LABEL"], action = clap::ArgAction::Append)]
    pub flow_pair: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServerArgs {
    /// identity, gaussian or tv.
    #[arg(long, default_value = "identity")]
    pub mode: String,
    /// Gaussian σ in pixels.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// TV weight.
    #[arg(long, default_value_t = 0.05)]
    pub weight: f64,
    #[arg(long, default_value_t = 50)]
    pub tv_iters: usize,
}

fn init_logging() {
    let env = env_logger::Env::default().default_filter_or("info");
    let _ = env_logger::Builder::from_env(env)
        .target(env_logger::Target::Stderr)
        .try_init();
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => generate::run_generate(a),
        Command::Blur(a) => generate::run_blur(a),
        Command::Deblur(a) => deblur::run(a),
        Command::Eval(a) => eval::run(a),
        Command::DenoiseServer(a) => server::run(a),
    }
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run() -> i32 {
    run_from(std::env::args_os())
}
