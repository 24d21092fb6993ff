use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;

use super::{CliError, EvalArgs, UsageError};
use crate::error::{Error, Result};
use crate::flow::read_flow;
use crate::io::read_image;
use crate::metrics::{flow_mse, psnr, ssim, SSIM_WINDOW};
use crate::synth::Manifest;

pub const EVAL_HEADER: &str = "name\tpsnr\tssim\tflow_mse\tflow_max";

/// One scored row; images and flows are optional independently.
struct Job {
    name: String,
    image: Option<(PathBuf, PathBuf)>,
    flow: Option<(Option<PathBuf>, PathBuf)>,
}

#[derive(Debug, Default, Clone, PartialEq)]
struct Scores {
    psnr: Option<f64>,
    ssim: Option<f64>,
    flow_mse: Option<f64>,
    flow_max: Option<f64>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn name_of(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

fn jobs(args: &EvalArgs) -> std::result::Result<Vec<Job>, CliError> {
    let mut out = Vec::new();
    if let Some(manifest_path) = &args.manifest {
        let manifest = Manifest::read(manifest_path)?;
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        for row in &manifest.rows {
            let blurred = resolve(base, &row.blurred);
            let image = match &args.restored_dir {
                Some(dir) => dir.join(row.blurred.file_name().unwrap_or_default()),
                None => blurred.clone(),
            };
            let label = resolve(base, &row.flow);
            let estimate = args.flow_dir.as_ref().map(|d| d.join(row.flow.file_name().unwrap_or_default()));
            out.push(Job {
                name: name_of(&row.blurred),
                image: Some((image, resolve(base, &row.sharp))),
                flow: Some((estimate, label)),
            });
        }
    }
    for pair in args.pair.chunks(2) {
        out.push(Job {
            name: name_of(&pair[0]),
            image: Some((pair[0].clone(), pair[1].clone())),
            flow: None,
        });
    }
    for pair in args.flow_pair.chunks(2) {
        out.push(Job {
            name: name_of(&pair[0]),
            image: None,
            flow: Some((Some(pair[0].clone()), pair[1].clone())),
        });
    }
    if out.is_empty() {
        return Err(UsageError("nothing to evaluate: give --manifest, --pair or --flow-pair".into()).into());
    }
    Ok(out)
}

fn missing(jobs: &[Job]) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    for j in jobs {
        if let Some((a, b)) = &j.image {
            paths.extend([a.clone(), b.clone()]);
        }
        if let Some((est, label)) = &j.flow {
            paths.extend(est.iter().cloned());
            paths.push(label.clone());
        }
    }
    let mut gone: Vec<PathBuf> = paths.into_iter().filter(|p| !p.is_file()).collect();
    gone.dedup();
    gone
}

fn score(job: &Job) -> Result<Scores> {
    let mut s = Scores::default();
    if let Some((image, reference)) = &job.image {
        let a = read_image(image)?;
        let b = read_image(reference)?;
        s.psnr = Some(psnr(&a, &b)?);
        if a.width() >= SSIM_WINDOW && a.height() >= SSIM_WINDOW {
            s.ssim = Some(ssim(&a, &b)?);
        } else {
            warn!("{}: too small for ssim", job.name);
        }
    }
    if let Some((estimate, label)) = &job.flow {
        let label = read_flow(label)?;
        let mut peak = label.max_abs() as f64;
        if let Some(est) = estimate {
            let est = read_flow(est)?;
            peak = peak.max(est.max_abs() as f64);
            s.flow_mse = Some(flow_mse(&est, &label)?);
        }
        s.flow_max = Some(peak);
    }
    Ok(s)
}

fn cell(v: Option<f64>, digits: usize) -> String {
    match v {
        None => String::new(),
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x:.digits$}"),
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let xs: Vec<f64> = values.flatten().collect();
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

fn render(rows: &[(String, Scores)]) -> String {
    let mut out = String::from(EVAL_HEADER);
    out.push('\n');
    let line = |out: &mut String, name: &str, s: &Scores| {
        let _ = writeln!(
            out,
            "{name}\t{}\t{}\t{}\t{}",
            cell(s.psnr, 4),
            cell(s.ssim, 6),
            cell(s.flow_mse, 6),
            cell(s.flow_max, 4)
        );
    };
    for (name, s) in rows {
        line(&mut out, name, s);
    }
    let summary = Scores {
        psnr: mean(rows.iter().map(|r| r.1.psnr)),
        ssim: mean(rows.iter().map(|r| r.1.ssim)),
        flow_mse: mean(rows.iter().map(|r| r.1.flow_mse)),
        flow_max: rows.iter().filter_map(|r| r.1.flow_max).reduce(f64::max),
    };
    line(&mut out, "mean", &summary);
    out
}

pub(super) fn run(args: EvalArgs) -> std::result::Result<(), CliError> {
    let jobs = jobs(&args)?;
    let gone = missing(&jobs);
    if !gone.is_empty() {
        for p in &gone {
            eprintln!("missing: {}", p.display());
        }
        return Err(Error::io(
            &gone[0],
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("{} input file(s) missing", gone.len())),
        )
        .into());
    }
    let scored: Vec<Result<Scores>> = jobs.par_iter().map(score).collect();
    let mut rows = Vec::with_capacity(jobs.len());
    for (job, s) in jobs.iter().zip(scored) {
        rows.push((job.name.clone(), s?));
    }
    print!("{}", render(&rows));
    Ok(())
}
