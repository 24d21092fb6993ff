//! Solvers for the denoising half of the splitting: given the deconvolved
//! estimate (and the observation, for priors that want it) return the next
//! auxiliary image.

mod external;
pub mod protocol;
mod tv;

pub use external::{external_denoise, ExternalDenoiser, ExternalDenoiserConfig};
pub use tv::{total_variation, tv_denoise, TvParams, TvPrior};

use crate::error::Result;
use crate::image::Image;

pub trait DenoiserPrior {
    /// `level` counts from 1 within one solve.
    fn denoise(&mut self, deconvolved: &Image, observed: &Image, level: usize) -> Result<Image>;

    fn name(&self) -> &str;
}

impl<P: DenoiserPrior + ?Sized> DenoiserPrior for Box<P> {
    fn denoise(&mut self, deconvolved: &Image, observed: &Image, level: usize) -> Result<Image> {
        (**self).denoise(deconvolved, observed, level)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Pass-through prior; the splitting reduces to plain regularised
/// deconvolution.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPrior;

pub fn identity_denoise(deconvolved: &Image, observed: &Image, _level: usize) -> Result<Image> {
    deconvolved.ensure_same_shape(observed, "identity prior")?;
    Ok(deconvolved.clone())
}

impl DenoiserPrior for IdentityPrior {
    fn denoise(&mut self, deconvolved: &Image, observed: &Image, level: usize) -> Result<Image> {
        identity_denoise(deconvolved, observed, level)
    }

    fn name(&self) -> &str {
        "identity"
    }
}
