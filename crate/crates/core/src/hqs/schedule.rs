use super::cg::{CgOptions, KrylovMethod};
use crate::blur::BoundaryPolicy;
use crate::error::{Error, Result};

/// Coupling weights and solver limits for one restoration.
#[derive(Debug, Clone, PartialEq)]
pub struct HqsSchedule {
    /// One β per level, strictly increasing.
    pub betas: Vec<f64>,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub global_iterations: usize,
    pub boundary: BoundaryPolicy,
    pub method: KrylovMethod,
}

impl Default for HqsSchedule {
    fn default() -> Self {
        HqsSchedule {
            betas: vec![0.01, 0.05, 0.25],
            cg_tol: 1e-5,
            cg_max_iter: 200,
            global_iterations: 3,
            boundary: BoundaryPolicy::Replicate,
            method: KrylovMethod::ConjugateResidual,
        }
    }
}

impl HqsSchedule {
    /// Geometric schedule starting at 0.01 and growing ×5 per level.
    pub fn with_levels(levels: usize) -> Self {
        HqsSchedule {
            betas: geometric_betas(levels),
            ..HqsSchedule::default()
        }
    }

    pub fn levels(&self) -> usize {
        self.betas.len()
    }

    pub fn cg_options(&self) -> CgOptions {
        CgOptions {
            tol: self.cg_tol,
            max_iter: self.cg_max_iter,
            method: self.method,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.is_empty() {
            return Err(Error::Parameter("schedule needs at least one level".into()));
        }
        if let Some(b) = self.betas.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(Error::Parameter(format!("betas must be finite and > 0, got {b}")));
        }
        if self.betas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parameter(format!(
                "betas must be strictly increasing, got {:?}",
                self.betas
            )));
        }
        if !(self.cg_tol.is_finite() && self.cg_tol > 0.0) {
            return Err(Error::Parameter(format!("cg tolerance must be > 0, got {}", self.cg_tol)));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::Parameter("cg iteration cap must be >= 1".into()));
        }
        if self.global_iterations == 0 {
            return Err(Error::Parameter("global iterations must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn geometric_betas(levels: usize) -> Vec<f64> {
    (0..levels).map(|n| 0.01 * 5f64.powi(n as i32)).collect()
}
