//! Full-reference quality metrics for images in [0, 1] and the flow error.

use crate::error::{Error, Result};
use crate::flow::MotionFlowMap;
use crate::image::Image;

/// Side of the square SSIM window.
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub flow_mse: Option<f64>,
}

impl MetricReport {
    pub fn compute(restored: &Image, reference: &Image) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(restored, reference)?,
            ssim: ssim(restored, reference)?,
            flow_mse: None,
        })
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b, "mse")?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.len() as f64)
}

/// Peak signal-to-noise ratio with peak 1.0.
///
/// Identical inputs have zero error and yield `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let err = mse(a, b)?;
    if err == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-10.0 * err.log10())
    }
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// Separable "valid" filtering: output is (w - 10) x (h - 10).
fn filter_valid(src: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let ow = width - k + 1;
    let oh = height - k + 1;
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let line = &src[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + k]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows[(y + i) * ow + x])
                .sum();
        }
    }
    out
}

/// Mean structural similarity over all 11x11 Gaussian windows (σ = 1.5)
/// lying fully inside the image. Three-channel inputs are compared on luma.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b, "ssim")?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::Parameter(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let x = a.luma();
    let y = b.luma();
    let taps = gaussian_window();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;

    let product = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(s, t)| s * t).collect() };
    let mu_x = filter_valid(&x, w, h, &taps);
    let mu_y = filter_valid(&y, w, h, &taps);
    let xx = filter_valid(&product(&x, &x), w, h, &taps);
    let yy = filter_valid(&product(&y, &y), w, h, &taps);
    let xy = filter_valid(&product(&x, &y), w, h, &taps);

    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        total += ((2.0 * mx * my + c1) * (2.0 * cov + c2))
            / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    Ok(total / mu_x.len() as f64)
}

/// Mean squared error over both flow components: the sum of squared
/// differences divided by 2·W·H.
pub fn flow_mse(estimate: &MotionFlowMap, label: &MotionFlowMap) -> Result<f64> {
    if estimate.width() != label.width() || estimate.height() != label.height() {
        return Err(Error::Shape(format!(
            "flow_mse: {}x{} vs {}x{}",
            estimate.width(),
            estimate.height(),
            label.width(),
            label.height()
        )));
    }
    let sq = |p: &[f32], q: &[f32]| -> f64 {
        p.iter()
            .zip(q)
            .map(|(&s, &t)| {
                let d = s as f64 - t as f64;
                d * d
            })
            .sum()
    };
    let total = sq(estimate.u(), label.u()) + sq(estimate.v(), label.v());
    Ok(total / (2 * estimate.u().len()) as f64)
}
