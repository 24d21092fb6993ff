use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::kernel::{kernel_from_motion, KernelStamp};
use crate::error::{Error, Result};
use crate::flow::MotionFlowMap;
use crate::image::Image;

/// How taps that fall outside the image are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Clamp to the nearest edge pixel.
    #[default]
    Replicate,
    /// Treat outside samples as zero.
    Zero,
}

impl FromStr for BoundaryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replicate" => Ok(BoundaryPolicy::Replicate),
            "zero" => Ok(BoundaryPolicy::Zero),
            other => Err(Error::Parameter(format!(
                "unknown boundary `{other}` (expected replicate or zero)"
            ))),
        }
    }
}

impl fmt::Display for BoundaryPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryPolicy::Replicate => "replicate",
            BoundaryPolicy::Zero => "zero",
        })
    }
}

/// The spatially-varying blur `K` for one flow map, with all per-pixel
/// stamps rasterized up front. Pixels sharing a motion vector share a stamp.
#[derive(Debug, Clone)]
pub struct BlurOperator {
    width: usize,
    height: usize,
    boundary: BoundaryPolicy,
    stamps: Vec<KernelStamp>,
    index: Vec<u32>,
}

impl BlurOperator {
    pub fn new(flow: &MotionFlowMap, boundary: BoundaryPolicy) -> Self {
        let mut keys: HashMap<(u32, u32), u32> = HashMap::new();
        let mut unique = Vec::new();
        let index = flow
            .u()
            .iter()
            .zip(flow.v())
            .map(|(&u, &v)| {
                // -0.0 and 0.0 rasterize identically
                let key = ((u + 0.0).to_bits(), (v + 0.0).to_bits());
                *keys.entry(key).or_insert_with(|| {
                    unique.push((u, v));
                    (unique.len() - 1) as u32
                })
            })
            .collect();
        let stamps = unique
            .par_iter()
            .map(|&(u, v)| kernel_from_motion(u, v))
            .collect();
        BlurOperator {
            width: flow.width(),
            height: flow.height(),
            boundary,
            stamps,
            index,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn boundary(&self) -> BoundaryPolicy {
        self.boundary
    }

    pub fn stamp(&self, y: usize, x: usize) -> &KernelStamp {
        &self.stamps[self.index[y * self.width + x] as usize]
    }

    #[inline]
    fn resolve(&self, y: usize, x: usize, dy: i32, dx: i32) -> Option<usize> {
        let (yy, xx) = (y as i64 + dy as i64, x as i64 + dx as i64);
        let (h, w) = (self.height as i64, self.width as i64);
        match self.boundary {
            BoundaryPolicy::Replicate => {
                Some((yy.clamp(0, h - 1) * w + xx.clamp(0, w - 1)) as usize)
            }
            BoundaryPolicy::Zero => {
                if (0..h).contains(&yy) && (0..w).contains(&xx) {
                    Some((yy * w + xx) as usize)
                } else {
                    None
                }
            }
        }
    }

    fn check_len(&self, len: usize) -> Result<usize> {
        let n = self.width * self.height;
        if len == 0 || len % n != 0 {
            return Err(Error::Shape(format!(
                "{len} samples do not tile {}x{} planes",
                self.width, self.height
            )));
        }
        Ok(len / n)
    }

    fn forward_plane(&self, src: &[f64], dst: &mut [f64]) {
        let w = self.width;
        dst.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for t in self.stamp(y, x).taps() {
                    if let Some(q) = self.resolve(y, x, t.dy, t.dx) {
                        acc += t.weight * src[q];
                    }
                }
                *out = acc;
            }
        });
    }

    fn adjoint_plane(&self, src: &[f64], dst: &mut [f64]) {
        dst.iter_mut().for_each(|v| *v = 0.0);
        for y in 0..self.height {
            for x in 0..self.width {
                let r = src[y * self.width + x];
                if r == 0.0 {
                    continue;
                }
                for t in self.stamp(y, x).taps() {
                    if let Some(q) = self.resolve(y, x, t.dy, t.dx) {
                        dst[q] += t.weight * r;
                    }
                }
            }
        }
    }

    /// `K x` on planar `f64` samples with any number of planes.
    pub fn forward_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        let planes = self.check_len(x.len())?;
        let n = self.width * self.height;
        let mut out = vec![0.0; x.len()];
        for c in 0..planes {
            self.forward_plane(&x[c * n..(c + 1) * n], &mut out[c * n..(c + 1) * n]);
        }
        Ok(out)
    }

    /// `Kᵀ y`: every residual sample is scattered back through its own stamp.
    pub fn adjoint_f64(&self, y: &[f64]) -> Result<Vec<f64>> {
        let planes = self.check_len(y.len())?;
        let n = self.width * self.height;
        let mut out = vec![0.0; y.len()];
        out.par_chunks_mut(n)
            .zip(y.par_chunks(n))
            .take(planes)
            .for_each(|(dst, src)| self.adjoint_plane(src, dst));
        Ok(out)
    }

    /// `(KᵀK + βI) x`.
    pub fn normal_f64(&self, x: &[f64], beta: f64) -> Result<Vec<f64>> {
        let mut out = self.adjoint_f64(&self.forward_f64(x)?)?;
        if beta != 0.0 {
            out.iter_mut().zip(x).for_each(|(o, &xi)| *o += beta * xi);
        }
        Ok(out)
    }

    fn check_image(&self, image: &Image) -> Result<()> {
        if image.width() != self.width || image.height() != self.height {
            return Err(Error::Shape(format!(
                "image is {}x{}, operator is {}x{}",
                image.width(),
                image.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }

    pub fn forward(&self, image: &Image) -> Result<Image> {
        self.check_image(image)?;
        image.with_data_f64(&self.forward_f64(&image.to_f64())?)
    }

    pub fn adjoint(&self, image: &Image) -> Result<Image> {
        self.check_image(image)?;
        image.with_data_f64(&self.adjoint_f64(&image.to_f64())?)
    }

    pub fn normal(&self, image: &Image, beta: f64) -> Result<Image> {
        check_beta(beta)?;
        self.check_image(image)?;
        image.with_data_f64(&self.normal_f64(&image.to_f64(), beta)?)
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("beta must be finite and >= 0, got {beta}")))
    }
}

fn operator_for(image: &Image, flow: &MotionFlowMap, boundary: BoundaryPolicy) -> Result<BlurOperator> {
    flow.ensure_matches(image.width(), image.height())?;
    Ok(BlurOperator::new(flow, boundary))
}

/// Applies the per-pixel motion blur: each output pixel gathers the sharp
/// image through the stamp of its own motion vector.
pub fn forward_blur(sharp: &Image, flow: &MotionFlowMap, boundary: BoundaryPolicy) -> Result<Image> {
    operator_for(sharp, flow, boundary)?.forward(sharp)
}

/// Exact transpose of [`forward_blur`] under the same boundary policy.
pub fn adjoint_blur(residual: &Image, flow: &MotionFlowMap, boundary: BoundaryPolicy) -> Result<Image> {
    operator_for(residual, flow, boundary)?.adjoint(residual)
}

pub fn normal_apply(x: &Image, flow: &MotionFlowMap, beta: f64, boundary: BoundaryPolicy) -> Result<Image> {
    check_beta(beta)?;
    operator_for(x, flow, boundary)?.normal(x, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::dot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, c: usize, rng: &mut ChaCha8Rng) -> Image {
        Image::from_fn(w, h, c, |_, _, _| rng.random::<f32>()).unwrap()
    }

    fn random_flow(w: usize, h: usize, max: f32, rng: &mut ChaCha8Rng) -> MotionFlowMap {
        let n = w * h;
        let u = (0..n).map(|_| rng.random_range(-max..max)).collect();
        let v = (0..n).map(|_| rng.random_range(-max..max)).collect();
        MotionFlowMap::new(w, h, u, v).unwrap()
    }

    /// Nested-loop correlation of a dense stencil with zero or clamped edges.
    fn dense_gather(img: &Image, stamp: &KernelStamp, replicate: bool) -> Vec<f64> {
        let (w, h) = (img.width() as i64, img.height() as i64);
        let mut out = vec![0.0; img.len()];
        for c in 0..img.channels() {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for t in stamp.taps() {
                        let (mut yy, mut xx) = (y + t.dy as i64, x + t.dx as i64);
                        if replicate {
                            yy = yy.clamp(0, h - 1);
                            xx = xx.clamp(0, w - 1);
                        } else if !(0..h).contains(&yy) || !(0..w).contains(&xx) {
                            continue;
                        }
                        acc += t.weight * img.get(c, yy as usize, xx as usize) as f64;
                    }
                    out[(c * h as usize + y as usize) * w as usize + x as usize] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn zero_flow_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = random_image(9, 7, 3, &mut rng);
        let flow = MotionFlowMap::zeros(9, 7).unwrap();
        for b in [BoundaryPolicy::Replicate, BoundaryPolicy::Zero] {
            assert_eq!(forward_blur(&img, &flow, b).unwrap(), img);
            assert_eq!(adjoint_blur(&img, &flow, b).unwrap(), img);
        }
    }

    #[test]
    fn constant_flow_matches_dense_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = random_image(16, 16, 1, &mut rng);
        for (u, v) in [(3.0, 1.0), (-2.5, 4.0), (6.0, 0.0)] {
            let flow = MotionFlowMap::constant(16, 16, u, v).unwrap();
            let stamp = kernel_from_motion(u, v);
            for (b, replicate) in [(BoundaryPolicy::Replicate, true), (BoundaryPolicy::Zero, false)] {
                let got = forward_blur(&img, &flow, b).unwrap();
                let want = dense_gather(&img, &stamp, replicate);
                for (g, w) in got.data().iter().zip(&want) {
                    assert!((*g as f64 - w).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn adjoint_of_constant_flow_is_flipped_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = random_image(16, 16, 1, &mut rng);
        let (u, v) = (3.5f32, -2.0f32);
        let flow = MotionFlowMap::constant(16, 16, u, v).unwrap();
        let stamp = kernel_from_motion(u, v);
        let flipped = KernelStamp::from_taps_unchecked(
            stamp
                .taps()
                .iter()
                .map(|t| super::super::kernel::Tap { dx: -t.dx, dy: -t.dy, weight: t.weight })
                .collect(),
        );
        let got = adjoint_blur(&img, &flow, BoundaryPolicy::Zero).unwrap();
        let want = dense_gather(&img, &flipped, false);
        for (g, w) in got.data().iter().zip(&want) {
            assert!((*g as f64 - w).abs() < 1e-6);
        }
    }

    #[test]
    fn impulse_reads_back_stamp() {
        let (w, h) = (21, 15);
        let (cy, cx) = (7, 10);
        let img = Image::from_fn(w, h, 1, |_, y, x| if (y, x) == (cy, cx) { 1.0 } else { 0.0 }).unwrap();
        let flow = MotionFlowMap::constant(w, h, 4.0, 0.0).unwrap();
        let out = forward_blur(&img, &flow, BoundaryPolicy::Zero).unwrap();
        let stamp = kernel_from_motion(4.0, 0.0);
        let mut total = 0.0;
        for y in 0..h {
            for x in 0..w {
                let (dx, dy) = (cx as i32 - x as i32, cy as i32 - y as i32);
                let expected = stamp.weight_at(dx, dy);
                assert!((out.get(0, y, x) as f64 - expected).abs() < 1e-7);
                total += out.get(0, y, x) as f64;
            }
        }
        assert!((total - 1.0).abs() < 1e-6);
        // symmetric stamp: centred read-back
        assert!((out.get(0, cy, cx + 2) as f64 - stamp.weight_at(2, 0)).abs() < 1e-7);
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for boundary in [BoundaryPolicy::Replicate, BoundaryPolicy::Zero] {
            for _ in 0..5 {
                let flow = random_flow(12, 12, 5.0, &mut rng);
                let op = BlurOperator::new(&flow, boundary);
                let x: Vec<f64> = (0..144).map(|_| rng.random::<f64>() - 0.5).collect();
                let y: Vec<f64> = (0..144).map(|_| rng.random::<f64>() - 0.5).collect();
                let lhs = dot(&op.forward_f64(&x).unwrap(), &y);
                let rhs = dot(&x, &op.adjoint_f64(&y).unwrap());
                let scale = dot(&x, &x).sqrt() * dot(&y, &y).sqrt();
                assert!((lhs - rhs).abs() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn normal_operator_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_image(8, 6, 1, &mut rng);
        let zero = MotionFlowMap::zeros(8, 6).unwrap();
        let b = BoundaryPolicy::Replicate;
        assert_eq!(normal_apply(&x, &zero, 0.0, b).unwrap(), x);
        let doubled = normal_apply(&x, &zero, 1.0, b).unwrap();
        for (d, v) in doubled.data().iter().zip(x.data()) {
            assert_eq!(*d, 2.0 * v);
        }
        assert!(normal_apply(&x, &zero, -1.0, b).is_err());

        let flow = random_flow(8, 6, 4.0, &mut rng);
        let op = BlurOperator::new(&flow, b);
        for _ in 0..10 {
            let p: Vec<f64> = (0..48).map(|_| rng.random::<f64>() - 0.5).collect();
            let q: Vec<f64> = (0..48).map(|_| rng.random::<f64>() - 0.5).collect();
            let ap = op.normal_f64(&p, 0.3).unwrap();
            let aq = op.normal_f64(&q, 0.3).unwrap();
            assert!(dot(&p, &ap) >= 0.3 * dot(&p, &p) - 1e-12);
            assert!((dot(&p, &aq) - dot(&ap, &q)).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_mismatch() {
        let img = Image::zeros(8, 8, 1).unwrap();
        let flow = MotionFlowMap::zeros(8, 7).unwrap();
        let b = BoundaryPolicy::Replicate;
        assert!(matches!(forward_blur(&img, &flow, b), Err(Error::Shape(_))));
        assert!(matches!(adjoint_blur(&img, &flow, b), Err(Error::Shape(_))));
        assert!(matches!(normal_apply(&img, &flow, 1.0, b), Err(Error::Shape(_))));
    }

    #[test]
    fn constant_image_is_fixed_under_replicate() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = Image::filled(20, 14, 3, 0.37).unwrap();
        let flow = random_flow(20, 14, 9.0, &mut rng);
        let out = forward_blur(&img, &flow, BoundaryPolicy::Replicate).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-6));
    }

    #[test]
    fn boundary_parses() {
        assert_eq!("zero".parse::<BoundaryPolicy>().unwrap(), BoundaryPolicy::Zero);
        assert!("wrap".parse::<BoundaryPolicy>().is_err());
    }
}
