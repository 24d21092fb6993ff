//! Restoration of images degraded by spatially-varying linear motion blur.
//!
//! Blur is described by a per-pixel [`MotionFlowMap`]; [`BlurOperator`]
//! applies it and its adjoint. [`hqs_deblur`] inverts it by half-quadratic
//! splitting against a pluggable [`DenoiserPrior`], and [`global_iterate`]
//! wraps that in re-estimation rounds fed by a [`FlowProvider`].

pub mod blur;
pub mod cli;
pub mod error;
pub mod flow;
pub mod gan;
pub mod hqs;
pub mod image;
pub mod io;
pub mod metrics;
pub mod priors;
pub mod synth;

pub use blur::{adjoint_blur, forward_blur, kernel_from_motion, BlurOperator, BoundaryPolicy, KernelStamp};
pub use error::{Error, ExternalError, Result};
pub use flow::{read_flow, write_flow, MotionFlowMap};
pub use hqs::{
    global_iterate, hqs_deblur, x_step, FlowProvider, HqsSchedule, SolveTrace, StoredFlow,
};
pub use image::Image;
pub use io::{read_image, write_image, BitDepth};
pub use metrics::{flow_mse, psnr, ssim, MetricReport};
pub use priors::{DenoiserPrior, ExternalDenoiser, ExternalDenoiserConfig, IdentityPrior, TvParams, TvPrior};
pub use synth::{build_dataset, generate_pair, sample_flow, FlowGenParams, Manifest};
