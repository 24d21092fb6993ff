use log::{debug, info};

use super::cg::{cg_solve_with, CgOptions, CgOutcome};
use super::provider::FlowProvider;
use super::schedule::HqsSchedule;
use super::trace::{GlobalSummary, LevelRecord, SolveTrace};
use crate::blur::{check_beta, BlurOperator};
use crate::error::{Error, Result};
use crate::flow::MotionFlowMap;
use crate::image::{dot, Image};
use crate::metrics::psnr;
use crate::priors::DenoiserPrior;

/// Result of one deconvolution step.
#[derive(Debug, Clone)]
pub struct XStep {
    pub image: Image,
    pub cg: CgOutcome,
}

/// `(KᵀK + βI)⁻¹ (βZ + KᵀO)` by CG, warm-started from the right-hand side.
pub fn x_step(
    aux: &Image,
    observed: &Image,
    flow: &MotionFlowMap,
    beta: f64,
    schedule: &HqsSchedule,
) -> Result<XStep> {
    flow.ensure_matches(observed.width(), observed.height())?;
    let op = BlurOperator::new(flow, schedule.boundary);
    x_step_with(&op, aux, observed, beta, &schedule.cg_options())
}

/// [`x_step`] against a prebuilt operator.
pub fn x_step_with(
    op: &BlurOperator,
    aux: &Image,
    observed: &Image,
    beta: f64,
    opts: &CgOptions,
) -> Result<XStep> {
    check_beta(beta)?;
    if beta == 0.0 {
        return Err(Error::Parameter("x-step needs beta > 0".into()));
    }
    aux.ensure_same_shape(observed, "x-step")?;
    if observed.width() != op.width() || observed.height() != op.height() {
        return Err(Error::Shape(format!(
            "image is {}x{}, flow is {}x{}",
            observed.width(),
            observed.height(),
            op.width(),
            op.height()
        )));
    }
    let z = aux.to_f64();
    let mut rhs = op.adjoint_f64(&observed.to_f64())?;
    rhs.iter_mut().zip(&z).for_each(|(r, zi)| *r += beta * zi);
    let normal = |x: &[f64]| op.normal_f64(x, beta);
    let cg = cg_solve_with(&normal, &rhs, None, opts)?;
    let image = observed.with_data_f64(&cg.x)?;
    Ok(XStep { image, cg })
}

/// `β/2 ‖x − Z‖² + ½ ‖Kx − O‖²`, the quadratic the x-step minimises.
pub fn x_step_objective(op: &BlurOperator, x: &Image, aux: &Image, observed: &Image, beta: f64) -> Result<f64> {
    let xs = x.to_f64();
    let coupling: Vec<f64> = xs.iter().zip(&aux.to_f64()).map(|(a, b)| a - b).collect();
    let fit: Vec<f64> = op
        .forward_f64(&xs)?
        .iter()
        .zip(&observed.to_f64())
        .map(|(a, b)| a - b)
        .collect();
    Ok(0.5 * beta * dot(&coupling, &coupling) + 0.5 * dot(&fit, &fit))
}

/// Half-quadratic splitting over the schedule's levels. `Z₀ = O`; every
/// level runs one x-step with its β and hands the result to the prior.
pub fn hqs_deblur(
    observed: &Image,
    flow: &MotionFlowMap,
    prior: &mut dyn DenoiserPrior,
    schedule: &HqsSchedule,
) -> Result<(Image, SolveTrace)> {
    hqs_deblur_with_reference(observed, flow, prior, schedule, None)
}

pub fn hqs_deblur_with_reference(
    observed: &Image,
    flow: &MotionFlowMap,
    prior: &mut dyn DenoiserPrior,
    schedule: &HqsSchedule,
    reference: Option<&Image>,
) -> Result<(Image, SolveTrace)> {
    let mut trace = SolveTrace::default();
    let out = hqs_deblur_traced(observed, flow, prior, schedule, reference, &mut trace)?;
    Ok((out, trace))
}

/// Like [`hqs_deblur_with_reference`], but records into `trace` so levels
/// finished before a failure are kept.
pub fn hqs_deblur_traced(
    observed: &Image,
    flow: &MotionFlowMap,
    prior: &mut dyn DenoiserPrior,
    schedule: &HqsSchedule,
    reference: Option<&Image>,
    trace: &mut SolveTrace,
) -> Result<Image> {
    solve_once(observed, flow, prior, schedule, reference, 1, trace)
}

fn solve_once(
    observed: &Image,
    flow: &MotionFlowMap,
    prior: &mut dyn DenoiserPrior,
    schedule: &HqsSchedule,
    reference: Option<&Image>,
    global_iteration: usize,
    trace: &mut SolveTrace,
) -> Result<Image> {
    schedule.validate()?;
    flow.ensure_matches(observed.width(), observed.height())?;
    if let Some(r) = reference {
        r.ensure_same_shape(observed, "reference")?;
    }
    let op = BlurOperator::new(flow, schedule.boundary);
    let opts = schedule.cg_options();
    let mut z = observed.clone();
    for (i, &beta) in schedule.betas.iter().enumerate() {
        let level = i + 1;
        let step = x_step_with(&op, &z, observed, beta, &opts)?;
        let next = prior.denoise(&step.image, observed, level)?;
        if !next.same_shape(observed) {
            return Err(Error::Shape(format!(
                "prior `{}` returned {:?}, expected {:?}",
                prior.name(),
                next.dims(),
                observed.dims()
            )));
        }
        let level_psnr = reference.map(|r| psnr(&next, r)).transpose()?;
        debug!(
            "level {level}: beta {beta}, {} cg iterations, residual {:.3e}",
            step.cg.iterations, step.cg.residual
        );
        trace.levels.push(LevelRecord {
            global_iteration,
            level,
            beta,
            cg_iterations: step.cg.iterations,
            cg_residual: step.cg.residual,
            cg_converged: step.cg.converged,
            cg_history: step.cg.history,
            psnr: level_psnr,
        });
        z = next;
    }
    Ok(z)
}

/// Re-runs the whole pipeline on its own output `global_iterations` times,
/// asking the provider for a fresh flow estimate each time.
pub fn global_iterate(
    observed: &Image,
    flow_source: &mut dyn FlowProvider,
    prior: &mut dyn DenoiserPrior,
    schedule: &HqsSchedule,
) -> Result<(Image, SolveTrace)> {
    global_iterate_with_reference(observed, flow_source, prior, schedule, None)
}

pub fn global_iterate_with_reference(
    observed: &Image,
    flow_source: &mut dyn FlowProvider,
    prior: &mut dyn DenoiserPrior,
    schedule: &HqsSchedule,
    reference: Option<&Image>,
) -> Result<(Image, SolveTrace)> {
    let mut trace = SolveTrace::default();
    let out = global_iterate_traced(observed, flow_source, prior, schedule, reference, &mut trace)?;
    Ok((out, trace))
}

/// Like [`global_iterate_with_reference`], but records into `trace` so work
/// finished before a failure is kept.
pub fn global_iterate_traced(
    observed: &Image,
    flow_source: &mut dyn FlowProvider,
    prior: &mut dyn DenoiserPrior,
    schedule: &HqsSchedule,
    reference: Option<&Image>,
    trace: &mut SolveTrace,
) -> Result<Image> {
    schedule.validate()?;
    let mut current = observed.clone();
    for t in 1..=schedule.global_iterations {
        let flow = flow_source.flow_for(&current, t)?;
        let first = trace.levels.len();
        let next = solve_once(&current, &flow, prior, schedule, reference, t, trace)?;
        let change = current
            .data()
            .iter()
            .zip(next.data())
            .map(|(a, b)| (*a as f64 - *b as f64).abs())
            .sum::<f64>()
            / current.len() as f64;
        let summary = GlobalSummary {
            iteration: t,
            levels: trace.levels.len() - first,
            total_cg_iterations: trace.levels[first..].iter().map(|r| r.cg_iterations).sum(),
            mean_abs_change: change,
            psnr: reference.map(|r| psnr(&next, r)).transpose()?,
        };
        info!("{summary}");
        trace.summaries.push(summary);
        current = next;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blur::BoundaryPolicy;
    use crate::priors::IdentityPrior;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Image {
        Image::from_fn(w, h, 1, |_, _, _| rng.random::<f32>()).unwrap()
    }

    #[test]
    fn zero_flow_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = random_image(10, 9, &mut rng);
        let o = random_image(10, 9, &mut rng);
        let flow = MotionFlowMap::zeros(10, 9).unwrap();
        for beta in [0.01, 1.0, 100.0] {
            let out = x_step(&z, &o, &flow, beta, &HqsSchedule::default()).unwrap();
            for ((x, zi), oi) in out.image.data().iter().zip(z.data()).zip(o.data()) {
                let exact = (*oi as f64 + beta * *zi as f64) / (1.0 + beta);
                assert!((*x as f64 - exact).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rejects_zero_beta_and_mismatch() {
        let img = Image::zeros(4, 4, 1).unwrap();
        let flow = MotionFlowMap::zeros(4, 4).unwrap();
        assert!(x_step(&img, &img, &flow, 0.0, &HqsSchedule::default()).is_err());
        let other = MotionFlowMap::zeros(4, 5).unwrap();
        assert!(matches!(
            x_step(&img, &img, &other, 1.0, &HqsSchedule::default()),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn all_zero_observation_stays_zero() {
        let img = Image::zeros(8, 8, 3).unwrap();
        let flow = MotionFlowMap::constant(8, 8, 3.0, 1.0).unwrap();
        let (out, trace) = hqs_deblur(&img, &flow, &mut IdentityPrior, &HqsSchedule::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert!(trace.levels.iter().all(|r| r.cg_iterations == 0));
    }

    #[test]
    fn zero_flow_identity_prior_returns_observation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let o = random_image(12, 12, &mut rng);
        let flow = MotionFlowMap::zeros(12, 12).unwrap();
        let (out, trace) = hqs_deblur(&o, &flow, &mut IdentityPrior, &HqsSchedule::default()).unwrap();
        assert_eq!(trace.levels.len(), 3);
        for (a, b) in out.data().iter().zip(o.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn x_step_lowers_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = random_image(16, 16, &mut rng);
        let o = random_image(16, 16, &mut rng);
        let n = 256;
        let flow = MotionFlowMap::new(
            16,
            16,
            (0..n).map(|_| rng.random_range(-4.0..4.0)).collect(),
            (0..n).map(|_| rng.random_range(-4.0..4.0)).collect(),
        )
        .unwrap();
        let schedule = HqsSchedule::default();
        let op = BlurOperator::new(&flow, BoundaryPolicy::Replicate);
        for beta in [0.01, 0.3, 5.0] {
            let out = x_step(&z, &o, &flow, beta, &schedule).unwrap();
            let at_x = x_step_objective(&op, &out.image, &z, &o, beta).unwrap();
            let at_z = x_step_objective(&op, &z, &z, &o, beta).unwrap();
            assert!(at_x <= at_z * (1.0 + 10.0 * schedule.cg_tol));
        }
    }
}
