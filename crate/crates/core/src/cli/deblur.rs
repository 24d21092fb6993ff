use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use log::info;

use super::{bit_depth, required, usage, CliError, ConfigFile, DeblurArgs, UsageError};
use crate::blur::BoundaryPolicy;
use crate::error::Error;
use crate::flow::read_flow;
use crate::hqs::{geometric_betas, global_iterate_traced, ExternalFlowEstimator, FlowProvider, HqsSchedule, SolveTrace, StoredFlow};
use crate::io::{read_image, write_image, BitDepth};
use crate::priors::{DenoiserPrior, ExternalDenoiser, ExternalDenoiserConfig, IdentityPrior, TvParams, TvPrior};

const DEBLUR_KEYS: &[&str] = &[
    "input",
    "output",
    "flow",
    "flow-cmd",
    "prior",
    "denoiser-cmd",
    "denoiser-timeout",
    "levels",
    "betas",
    "tv-weights",
    "tv-iters",
    "tv-step",
    "global-iters",
    "trace",
    "reference",
    "boundary",
    "cg-tol",
    "cg-max-iter",
    "bit-depth",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorKind {
    Identity,
    #[default]
    Tv,
    External,
}

impl FromStr for PriorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(PriorKind::Identity),
            "tv" => Ok(PriorKind::Tv),
            "external" => Ok(PriorKind::External),
            other => Err(format!("unknown prior `{other}` (expected identity, tv or external)")),
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Identity => "identity",
            PriorKind::Tv => "tv",
            PriorKind::External => "external",
        })
    }
}

enum FlowSource {
    Stored(PathBuf),
    Command(ExternalFlowEstimator),
}

/// Everything checked before any file is read or written.
struct Plan {
    input: PathBuf,
    output: PathBuf,
    flow: FlowSource,
    prior: Box<dyn DenoiserPrior>,
    schedule: HqsSchedule,
    trace: Option<PathBuf>,
    reference: Option<PathBuf>,
    depth: BitDepth,
}

fn plan(args: DeblurArgs) -> Result<Plan, UsageError> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    cfg.restrict(DEBLUR_KEYS)?;
    let input = required(cfg.pick(args.input, "input")?, "input")?;
    let output = required(cfg.pick(args.output, "output")?, "output")?;

    let flow = match (cfg.pick(args.flow, "flow")?, cfg.pick(args.flow_cmd, "flow-cmd")?) {
        (Some(path), None) => FlowSource::Stored(path),
        (None, Some(cmd)) => FlowSource::Command(ExternalFlowEstimator::from_command_line(&cmd).map_err(usage)?),
        (Some(_), Some(_)) => return Err(UsageError("--flow and --flow-cmd are exclusive".into())),
        (None, None) => return Err(UsageError("one of --flow or --flow-cmd is required".into())),
    };

    let levels: Option<usize> = cfg.pick(args.levels, "levels")?;
    let betas = match (levels, cfg.pick_list(args.betas, "betas")?) {
        (Some(n), Some(b)) if n != b.len() => {
            return Err(UsageError(format!("--levels {n} but {} betas given", b.len())))
        }
        (_, Some(b)) => b,
        (Some(0), None) => return Err(UsageError("--levels must be >= 1".into())),
        (Some(n), None) => geometric_betas(n),
        (None, None) => HqsSchedule::default().betas,
    };
    let level_count = betas.len();
    let defaults = HqsSchedule::default();
    let blind = matches!(flow, FlowSource::Command(_));
    let boundary: BoundaryPolicy = cfg
        .pick(args.boundary, "boundary")?
        .map(|b: String| b.parse().map_err(usage))
        .transpose()?
        .unwrap_or_default();
    let schedule = HqsSchedule {
        betas,
        cg_tol: cfg.pick(args.cg_tol, "cg-tol")?.unwrap_or(defaults.cg_tol),
        cg_max_iter: cfg.pick(args.cg_max_iter, "cg-max-iter")?.unwrap_or(defaults.cg_max_iter),
        global_iterations: cfg
            .pick(args.global_iters, "global-iters")?
            .unwrap_or(if blind { defaults.global_iterations } else { 1 }),
        boundary,
        method: defaults.method,
    };
    schedule.validate().map_err(usage)?;

    let kind: PriorKind = cfg.pick(args.prior, "prior")?.unwrap_or_default();
    let denoiser_cmd: Option<String> = cfg.pick(args.denoiser_cmd, "denoiser-cmd")?;
    let timeout: Option<f64> = cfg.pick(args.denoiser_timeout, "denoiser-timeout")?;
    let tv_weights = cfg.pick_list(args.tv_weights, "tv-weights")?;
    let tv_iters: Option<usize> = cfg.pick(args.tv_iters, "tv-iters")?;
    let tv_step: Option<f64> = cfg.pick(args.tv_step, "tv-step")?;
    if kind != PriorKind::External && (denoiser_cmd.is_some() || timeout.is_some()) {
        return Err(UsageError("--denoiser-cmd and --denoiser-timeout need --prior external".into()));
    }
    if kind != PriorKind::Tv && (tv_weights.is_some() || tv_iters.is_some() || tv_step.is_some()) {
        return Err(UsageError("--tv-* options need --prior tv".into()));
    }
    let prior: Box<dyn DenoiserPrior> = match kind {
        PriorKind::Identity => Box::new(IdentityPrior),
        PriorKind::Tv => {
            let base = TvParams::halving(level_count);
            let params = TvParams {
                weights: tv_weights.unwrap_or(base.weights),
                inner_iters: tv_iters.unwrap_or(base.inner_iters),
                step: tv_step.unwrap_or(base.step),
            };
            Box::new(TvPrior::new(params).map_err(usage)?)
        }
        PriorKind::External => {
            let cmd = required(denoiser_cmd, "denoiser-cmd")?;
            let mut cfg = ExternalDenoiserConfig::from_command_line(&cmd).map_err(usage)?;
            if let Some(t) = timeout {
                if !(t.is_finite() && t > 0.0) {
                    return Err(UsageError(format!("--denoiser-timeout must be > 0, got {t}")));
                }
                cfg = cfg.with_timeout(Duration::from_secs_f64(t));
            }
            Box::new(ExternalDenoiser::new(cfg))
        }
    };

    Ok(Plan {
        input,
        output,
        flow,
        prior,
        schedule,
        trace: cfg.pick(args.trace, "trace")?,
        reference: cfg.pick(args.reference, "reference")?,
        depth: bit_depth(cfg.pick(args.bit_depth, "bit-depth")?, BitDepth::Sixteen)?,
    })
}

pub(super) fn run(args: DeblurArgs) -> Result<(), CliError> {
    let mut plan = plan(args)?;
    let observed = read_image(&plan.input)?;
    let reference = plan.reference.as_ref().map(read_image).transpose()?;
    let mut provider: Box<dyn FlowProvider> = match plan.flow {
        FlowSource::Stored(ref path) => Box::new(StoredFlow(read_flow(path)?)),
        FlowSource::Command(ref cmd) => Box::new(cmd.clone()),
    };
    info!(
        "deblurring {} with {} prior, betas {:?}, {} global iteration(s)",
        plan.input.display(),
        plan.prior.name(),
        plan.schedule.betas,
        plan.schedule.global_iterations
    );
    let mut trace = SolveTrace::default();
    let result = global_iterate_traced(
        &observed,
        provider.as_mut(),
        plan.prior.as_mut(),
        &plan.schedule,
        reference.as_ref(),
        &mut trace,
    );
    // the trace is flushed even when the solve failed
    let flushed = plan
        .trace
        .as_ref()
        .map(|path| fs::write(path, trace.to_tsv()).map_err(|e| Error::io(path, e)))
        .transpose();
    let restored = result?;
    flushed?;
    write_image(&restored, &plan.output, plan.depth)?;
    println!("{}", plan.output.display());
    Ok(())
}
