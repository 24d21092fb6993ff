use log::info;

use super::{bit_depth, required, usage, BlurArgs, CliError, ConfigFile, GenerateArgs, UsageError};
use crate::blur::{forward_blur, BoundaryPolicy};
use crate::flow::read_flow;
use crate::io::{read_image, write_image, BitDepth};
use crate::synth::{add_noise, build_dataset, FlowGenParams, MANIFEST_FILE};

const GENERATE_KEYS: &[&str] = &["sharp-dir", "out", "per-image", "ceiling", "smoothness", "noise-sigma", "seed"];

const BLUR_KEYS: &[&str] = &["input", "flow", "output", "boundary", "noise-sigma", "seed", "bit-depth"];

pub(super) fn run_generate(args: GenerateArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    cfg.restrict(GENERATE_KEYS)?;
    let sharp_dir = required(cfg.pick(args.sharp_dir, "sharp-dir")?, "sharp-dir")?;
    let out = required(cfg.pick(args.out, "out")?, "out")?;
    let per_image = cfg.pick(args.per_image, "per-image")?.unwrap_or(1);
    if per_image == 0 {
        return Err(UsageError("--per-image must be >= 1".into()).into());
    }
    let defaults = FlowGenParams::default();
    let params = FlowGenParams {
        ceiling: cfg.pick(args.ceiling, "ceiling")?.unwrap_or(defaults.ceiling),
        smoothness: cfg.pick(args.smoothness, "smoothness")?.unwrap_or(defaults.smoothness),
        seed: cfg.pick(args.seed, "seed")?.unwrap_or(defaults.seed),
        noise_sigma: cfg.pick(args.noise_sigma, "noise-sigma")?.unwrap_or(defaults.noise_sigma),
    };
    params.validate().map_err(usage)?;
    if !sharp_dir.is_dir() {
        return Err(UsageError(format!("{} is not a directory", sharp_dir.display())).into());
    }

    let manifest = build_dataset(&sharp_dir, &out, per_image, &params)?;
    info!("generated {} pairs", manifest.rows.len());
    println!("{}", out.join(MANIFEST_FILE).display());
    Ok(())
}

pub(super) fn run_blur(args: BlurArgs) -> Result<(), CliError> {
    let cfg = ConfigFile::load(args.config.as_deref())?;
    cfg.restrict(BLUR_KEYS)?;
    let input = required(cfg.pick(args.input, "input")?, "input")?;
    let flow_path = required(cfg.pick(args.flow, "flow")?, "flow")?;
    let output = required(cfg.pick(args.output, "output")?, "output")?;
    let boundary: BoundaryPolicy = cfg
        .pick(args.boundary, "boundary")?
        .map(|b: String| b.parse().map_err(usage))
        .transpose()?
        .unwrap_or_default();
    let sigma = cfg.pick(args.noise_sigma, "noise-sigma")?.unwrap_or(0.0);
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(UsageError(format!("--noise-sigma must be >= 0, got {sigma}")).into());
    }
    let seed = cfg.pick(args.seed, "seed")?.unwrap_or(0);
    let depth = bit_depth(cfg.pick(args.bit_depth, "bit-depth")?, BitDepth::Sixteen)?;

    let sharp = read_image(&input)?;
    let flow = read_flow(&flow_path)?;
    let blurred = add_noise(&forward_blur(&sharp, &flow, boundary)?, sigma, seed)?;
    write_image(&blurred, &output, depth)?;
    println!("{}", output.display());
    Ok(())
}
