use std::fmt::Write as _;

/// One x-step plus denoise.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    /// 1-based global iteration.
    pub global_iteration: usize,
    /// 1-based level.
    pub level: usize,
    pub beta: f64,
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub cg_converged: bool,
    /// Relative residual after each CG step, initial value first.
    pub cg_history: Vec<f64>,
    /// PSNR of the level output against a reference, when one was given.
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalSummary {
    pub iteration: usize,
    pub levels: usize,
    pub total_cg_iterations: usize,
    /// Mean absolute change of the image over this iteration.
    pub mean_abs_change: f64,
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub levels: Vec<LevelRecord>,
    pub summaries: Vec<GlobalSummary>,
}

pub const TRACE_HEADER: &str = "global_iter\tlevel\tbeta\tcg_iters\tresidual\tpsnr";

fn fmt_psnr(p: Option<f64>) -> String {
    match p {
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v:.4}"),
        None => String::new(),
    }
}

impl SolveTrace {
    pub fn extend(&mut self, other: SolveTrace) {
        self.levels.extend(other.levels);
        self.summaries.extend(other.summaries);
    }

    /// Tab-separated table, one row per level, header first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.levels {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.6e}\t{}",
                r.global_iteration,
                r.level,
                r.beta,
                r.cg_iterations,
                r.cg_residual,
                fmt_psnr(r.psnr)
            );
        }
        out
    }
}

impl std::fmt::Display for GlobalSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "global iteration {}: {} levels, {} cg iterations, mean |change| {:.3e}",
            self.iteration, self.levels, self.total_cg_iterations, self.mean_abs_change
        )?;
        if let Some(p) = self.psnr {
            write!(f, ", psnr {}", fmt_psnr(Some(p)))?;
        }
        Ok(())
    }
}
