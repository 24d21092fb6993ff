//! Synthetic blurred/sharp pairs with known flow.
//!
//! Flow components are independent Gaussian-filtered white noise, rescaled so
//! the peak magnitude is a random fraction of the ceiling, then hard-clamped
//! to `[-ceiling, ceiling]`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use crate::blur::{forward_blur, BoundaryPolicy};
use crate::error::{Error, Result};
use crate::flow::{write_flow, MotionFlowMap};
use crate::image::{gaussian_smooth_planes, Image};
use crate::io::{read_image, write_image, BitDepth};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowGenParams {
    /// Bound on |u| and |v| in pixels. Zero yields a zero flow.
    pub ceiling: f64,
    /// Correlation length (Gaussian σ) of the field, in pixels.
    pub smoothness: f64,
    pub seed: u64,
    /// Standard deviation of additive Gaussian noise; 0 disables it.
    pub noise_sigma: f64,
}

impl Default for FlowGenParams {
    fn default() -> Self {
        FlowGenParams {
            ceiling: 23.0,
            smoothness: 32.0,
            seed: 0,
            noise_sigma: 0.01,
        }
    }
}

/// Smallest fraction of the ceiling a map's peak is scaled to.
const MIN_PEAK_FRACTION: f64 = 0.25;

impl FlowGenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ceiling.is_finite() && self.ceiling >= 0.0) {
            return Err(Error::Parameter(format!("ceiling must be >= 0, got {}", self.ceiling)));
        }
        if !(self.smoothness.is_finite() && self.smoothness >= 1.0) {
            return Err(Error::Parameter(format!(
                "smoothness must be >= 1, got {}",
                self.smoothness
            )));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::Parameter(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        FlowGenParams { seed, ..self }
    }
}

fn smooth_component(width: usize, height: usize, params: &FlowGenParams, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    // pad so the crop does not see the clamped filter edge
    let pad = (3.0 * params.smoothness).ceil() as usize;
    let (pw, ph) = (width + 2 * pad, height + 2 * pad);
    let noise: Vec<f64> = (0..pw * ph).map(|_| StandardNormal.sample(rng)).collect();
    let field = gaussian_smooth_planes(&noise, pw, ph, 1, params.smoothness)?;
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        out.extend_from_slice(&field[(y + pad) * pw + pad..(y + pad) * pw + pad + width]);
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let target = params.ceiling * rng.random_range(MIN_PEAK_FRACTION..=1.0);
    let scale = if peak > 0.0 { target / peak } else { 0.0 };
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

fn to_bounded_f32(values: Vec<f64>, ceiling: f64) -> Vec<f32> {
    let c = ceiling as f32;
    values.into_iter().map(|v| (v as f32).clamp(-c, c)).collect()
}

/// Deterministic for a fixed seed.
pub fn sample_flow(width: usize, height: usize, params: &FlowGenParams) -> Result<MotionFlowMap> {
    params.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::Parameter(format!("empty flow map {width}x{height}")));
    }
    if params.ceiling == 0.0 {
        return MotionFlowMap::zeros(width, height);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let u = smooth_component(width, height, params, &mut rng)?;
    let v = smooth_component(width, height, params, &mut rng)?;
    MotionFlowMap::new(
        width,
        height,
        to_bounded_f32(u, params.ceiling),
        to_bounded_f32(v, params.ceiling),
    )
}

/// Blurs `sharp` with a freshly sampled flow, adds noise and clamps to [0, 1].
pub fn generate_pair(sharp: &Image, params: &FlowGenParams) -> Result<(Image, MotionFlowMap)> {
    let flow = sample_flow(sharp.width(), sharp.height(), params)?;
    let blurred = forward_blur(sharp, &flow, BoundaryPolicy::Replicate)?;
    Ok((add_noise(&blurred, params.noise_sigma, params.seed)?, flow))
}

/// Adds seeded N(0, σ²) noise and clamps to [0, 1].
pub fn add_noise(image: &Image, sigma: f64, seed: u64) -> Result<Image> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Parameter(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(image.clamp01());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // flow sampling uses stream 0 of the same seed
    rng.set_stream(1);
    let normal = Normal::new(0.0, sigma).expect("checked sigma");
    let noisy: Vec<f64> = image
        .data()
        .iter()
        .map(|&v| (v as f64 + normal.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    image.with_data_f64(&noisy)
}

/// Seed of pair `k` of image `index` under a base seed.
pub fn pair_seed(base: u64, index: usize, k: usize) -> u64 {
    let mut z = base ^ ((index as u64) << 32 | k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub sharp: PathBuf,
    pub blurred: PathBuf,
    pub flow: PathBuf,
    pub seed: u64,
}

/// One row per generated pair. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

pub const MANIFEST_HEADER: &str = "sharp\tblurred\tflow\tseed";
pub const MANIFEST_FILE: &str = "manifest.tsv";

impl Manifest {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                r.sharp.display(),
                r.blurred.display(),
                r.flow.display(),
                r.seed
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end_matches('\r') == MANIFEST_HEADER => {}
            other => {
                return Err(Error::Format(format!(
                    "manifest header should be {MANIFEST_HEADER:?}, got {other:?}"
                )))
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::Format(format!("manifest row {} has {} columns", i + 2, cols.len())));
            }
            let seed = cols[3]
                .parse()
                .map_err(|_| Error::Format(format!("manifest row {}: bad seed {:?}", i + 2, cols[3])))?;
            rows.push(ManifestRow {
                sharp: cols[0].into(),
                blurred: cols[1].into(),
                flow: cols[2].into(),
                seed,
            });
        }
        Ok(Manifest { rows })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// PNG files of a directory, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Generates `count_per_image` pairs for every PNG in `sharp_dir` and writes
/// `blurred/`, `flow/` and `manifest.tsv` under `out_dir`.
pub fn build_dataset(
    sharp_dir: &Path,
    out_dir: &Path,
    count_per_image: usize,
    params: &FlowGenParams,
) -> Result<Manifest> {
    params.validate()?;
    if count_per_image == 0 {
        return Err(Error::Parameter("count per image must be >= 1".into()));
    }
    let sources = list_images(sharp_dir)?;
    if sources.is_empty() {
        return Err(Error::io(
            sharp_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no PNG images found"),
        ));
    }
    let blurred_dir = out_dir.join("blurred");
    let flow_dir = out_dir.join("flow");
    for d in [&blurred_dir, &flow_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let per_image: Vec<Result<Vec<ManifestRow>>> = sources
        .par_iter()
        .enumerate()
        .map(|(index, src)| {
            let sharp = read_image(src)?;
            let sharp_path = fs::canonicalize(src).map_err(|e| Error::io(src, e))?;
            let stem = src.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            let mut rows = Vec::with_capacity(count_per_image);
            for k in 0..count_per_image {
                let seed = pair_seed(params.seed, index, k);
                let (blurred, flow) = generate_pair(&sharp, &params.with_seed(seed))?;
                let name = format!("{stem}_{k:03}");
                let blurred_rel = PathBuf::from("blurred").join(format!("{name}.png"));
                let flow_rel = PathBuf::from("flow").join(format!("{name}.mflo"));
                write_image(&blurred, out_dir.join(&blurred_rel), BitDepth::Sixteen)?;
                write_flow(&flow, out_dir.join(&flow_rel))?;
                rows.push(ManifestRow {
                    sharp: sharp_path.clone(),
                    blurred: blurred_rel,
                    flow: flow_rel,
                    seed,
                });
            }
            Ok(rows)
        })
        .collect();

    let mut manifest = Manifest::default();
    for rows in per_image {
        manifest.rows.extend(rows?);
    }
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest.to_tsv()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// A piecewise-smooth test scene: a shaded background with random
/// rectangles and discs.
pub fn synthetic_scene(width: usize, height: usize, channels: usize, seed: u64) -> Result<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f32> = (0..channels).map(|_| rng.random_range(0.2..0.5)).collect();
    let tilt = (rng.random_range(-0.3..0.3f32), rng.random_range(-0.3..0.3f32));
    let mut img: Vec<f32> = Vec::with_capacity(width * height * channels);
    for (c, &b) in base.iter().enumerate() {
        let shift = c as f32 * 0.05;
        for y in 0..height {
            for x in 0..width {
                let fx = x as f32 / width as f32 - 0.5;
                let fy = y as f32 / height as f32 - 0.5;
                img.push(b + shift + tilt.0 * fx + tilt.1 * fy);
            }
        }
    }
    let n = width * height;
    let shapes = 6 + (width * height / 400).min(20);
    for _ in 0..shapes {
        let color: Vec<f32> = (0..channels).map(|_| rng.random_range(0.0..1.0)).collect();
        let cx = rng.random_range(0.0..width as f32);
        let cy = rng.random_range(0.0..height as f32);
        let rx = rng.random_range(2.0..(width as f32 / 4.0).max(3.0));
        let ry = rng.random_range(2.0..(height as f32 / 4.0).max(3.0));
        let disc = rng.random_bool(0.5);
        for y in 0..height {
            for x in 0..width {
                let (dx, dy) = ((x as f32 - cx) / rx, (y as f32 - cy) / ry);
                let inside = if disc {
                    dx * dx + dy * dy <= 1.0
                } else {
                    dx.abs() <= 1.0 && dy.abs() <= 1.0
                };
                if inside {
                    for (c, &col) in color.iter().enumerate() {
                        img[c * n + y * width + x] = col;
                    }
                }
            }
        }
    }
    img.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Image::from_planar(width, height, channels, img)
}
