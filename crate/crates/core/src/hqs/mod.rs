//! Deconvolution by half-quadratic splitting.
//!
//! Each level alternates an exact quadratic step
//! `x = argmin β/2‖x − Z‖² + ½‖Kx − O‖²`, solved by CG on `KᵀK + βI`,
//! with a denoiser prior producing the next `Z`. β grows level by level.

pub mod cg;
mod provider;
mod schedule;
mod solver;
mod trace;

pub use cg::{cg_solve, cg_solve_with, CgOptions, CgOutcome, KrylovMethod, LinearOperator};
pub use provider::{ExternalFlowEstimator, FlowProvider, StoredFlow};
pub use schedule::{geometric_betas, HqsSchedule};
pub use solver::{
    global_iterate, global_iterate_traced, global_iterate_with_reference, hqs_deblur, hqs_deblur_traced,
    hqs_deblur_with_reference, x_step,
    x_step_objective, x_step_with, XStep,
};
pub use trace::{GlobalSummary, LevelRecord, SolveTrace, TRACE_HEADER};
