//! Spatially-varying linear-motion blur and its adjoint.

mod kernel;
mod operator;

pub use kernel::{kernel_from_motion, KernelStamp, Tap, SAMPLES_PER_PIXEL};
pub use operator::{adjoint_blur, forward_blur, normal_apply, BlurOperator, BoundaryPolicy};
pub(crate) use operator::check_beta;
