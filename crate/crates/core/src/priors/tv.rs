//! Isotropic total-variation proximal operator,
//! `argmin_z ½‖z − f‖² + λ·TV(z)`, computed per channel by projected ascent
//! on the dual field `p` with `|p| ≤ 1`:
//!
//! ```text
//! p ← Π(p + τ ∇(div p − f/λ)),   z = f − λ div p
//! ```
//!
//! Forward differences with Neumann boundaries; `div = −∇ᵀ`.

use super::DenoiserPrior;
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct TvParams {
    /// Weight per level (1-based); the last entry covers deeper levels.
    pub weights: Vec<f64>,
    pub inner_iters: usize,
    pub step: f64,
}

impl Default for TvParams {
    fn default() -> Self {
        TvParams {
            weights: vec![0.08, 0.04, 0.02],
            inner_iters: 50,
            step: 0.248,
        }
    }
}

impl TvParams {
    pub fn uniform(weight: f64) -> Self {
        TvParams {
            weights: vec![weight],
            ..TvParams::default()
        }
    }

    /// Default weights halving per level.
    pub fn halving(levels: usize) -> Self {
        TvParams {
            weights: (0..levels.max(1)).map(|n| 0.08 / 2f64.powi(n as i32)).collect(),
            ..TvParams::default()
        }
    }

    pub fn weight_for(&self, level: usize) -> f64 {
        let i = level.saturating_sub(1).min(self.weights.len() - 1);
        self.weights[i]
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::Parameter("tv weights must not be empty".into()));
        }
        if let Some(w) = self.weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Parameter(format!("tv weight must be finite and >= 0, got {w}")));
        }
        check_step(self.step)
    }
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step <= 0.25 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("tv step must lie in (0, 0.25], got {step}")))
    }
}

/// Isotropic discrete total variation summed over channels.
pub fn total_variation(image: &Image) -> f64 {
    let (w, h) = (image.width(), image.height());
    let mut tv = 0.0;
    for c in 0..image.channels() {
        let plane = image.plane(c);
        for y in 0..h {
            for x in 0..w {
                let v = plane[y * w + x] as f64;
                let gx = if x + 1 < w { plane[y * w + x + 1] as f64 - v } else { 0.0 };
                let gy = if y + 1 < h { plane[(y + 1) * w + x] as f64 - v } else { 0.0 };
                tv += gx.hypot(gy);
            }
        }
    }
    tv
}

pub fn tv_denoise(image: &Image, weight: f64, inner_iters: usize, step: f64) -> Result<Image> {
    if !(weight.is_finite() && weight >= 0.0) {
        return Err(Error::Parameter(format!("tv weight must be finite and >= 0, got {weight}")));
    }
    check_step(step)?;
    if weight == 0.0 || inner_iters == 0 {
        return Ok(image.clone());
    }
    let (w, h) = (image.width(), image.height());
    let mut out = Vec::with_capacity(image.len());
    for c in 0..image.channels() {
        let f: Vec<f64> = image.plane(c).iter().map(|&v| v as f64).collect();
        out.extend(prox_plane(&f, w, h, weight, inner_iters, step));
    }
    image.with_data_f64(&out)
}

fn divergence(px: &[f64], py: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let dx = match x {
                _ if w == 1 => 0.0,
                0 => px[i],
                _ if x == w - 1 => -px[i - 1],
                _ => px[i] - px[i - 1],
            };
            let dy = match y {
                _ if h == 1 => 0.0,
                0 => py[i],
                _ if y == h - 1 => -py[i - w],
                _ => py[i] - py[i - w],
            };
            out[i] = dx + dy;
        }
    }
}

fn prox_plane(f: &[f64], w: usize, h: usize, weight: f64, iters: usize, step: f64) -> Vec<f64> {
    let n = w * h;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut g = vec![0.0; n];
    let inv = 1.0 / weight;
    for _ in 0..iters {
        divergence(&px, &py, w, h, &mut div);
        for i in 0..n {
            g[i] = div[i] - f[i] * inv;
        }
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let gx = if x + 1 < w { g[i + 1] - g[i] } else { 0.0 };
                let gy = if y + 1 < h { g[i + w] - g[i] } else { 0.0 };
                let qx = px[i] + step * gx;
                let qy = py[i] + step * gy;
                let scale = qx.hypot(qy).max(1.0);
                px[i] = qx / scale;
                py[i] = qy / scale;
            }
        }
    }
    divergence(&px, &py, w, h, &mut div);
    f.iter().zip(&div).map(|(fi, d)| fi - weight * d).collect()
}

/// TV prior with a per-level weight. Ignores the observation.
#[derive(Debug, Clone, Default)]
pub struct TvPrior {
    params: TvParams,
}

impl TvPrior {
    pub fn new(params: TvParams) -> Result<Self> {
        params.validate()?;
        Ok(TvPrior { params })
    }

    pub fn params(&self) -> &TvParams {
        &self.params
    }
}

impl DenoiserPrior for TvPrior {
    fn denoise(&mut self, deconvolved: &Image, observed: &Image, level: usize) -> Result<Image> {
        deconvolved.ensure_same_shape(observed, "tv prior")?;
        tv_denoise(
            deconvolved,
            self.params.weight_for(level),
            self.params.inner_iters,
            self.params.step,
        )
    }

    fn name(&self) -> &str {
        "tv"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent 1-D projected dual ascent: the dual `q` lives on the n-1
    /// edges, `z = f − λ Dᵀq` and `q ← clamp(q + τ Dz / λ)`.
    fn dual_ascent_1d(f: &[f64], lambda: f64, iters: usize, tau: f64) -> Vec<f64> {
        let n = f.len();
        let mut q = vec![0.0; n - 1];
        let primal = |q: &[f64]| -> Vec<f64> {
            // z_i = f_i - λ (q_{i-1} - q_i) with q_{-1} = q_{n-1} = 0
            (0..n)
                .map(|i| {
                    let left = if i > 0 { q[i - 1] } else { 0.0 };
                    let right = if i < n - 1 { q[i] } else { 0.0 };
                    f[i] - lambda * (left - right)
                })
                .collect()
        };
        for _ in 0..iters {
            let z = primal(&q);
            for e in 0..n - 1 {
                q[e] = (q[e] + tau * (z[e + 1] - z[e]) / lambda).clamp(-1.0, 1.0);
            }
        }
        primal(&q)
    }

    fn objective(z: &Image, f: &Image, weight: f64) -> f64 {
        let fid: f64 = z
            .data()
            .iter()
            .zip(f.data())
            .map(|(a, b)| (*a as f64 - *b as f64).powi(2))
            .sum();
        0.5 * fid + weight * total_variation(z)
    }

    #[test]
    fn zero_weight_is_exact_identity() {
        let img = Image::from_fn(7, 5, 3, |c, y, x| ((c + 2 * y + 3 * x) % 7) as f32 / 7.0).unwrap();
        assert_eq!(tv_denoise(&img, 0.0, 50, 0.248).unwrap(), img);
    }

    #[test]
    fn constant_is_fixed_point() {
        let img = Image::filled(9, 6, 1, 0.42).unwrap();
        assert_eq!(tv_denoise(&img, 0.7, 50, 0.248).unwrap(), img);
    }

    #[test]
    fn step_edge_matches_long_run_and_closed_form() {
        let f: Vec<f64> = (0..32).map(|i| if i < 16 { 0.0 } else { 1.0 }).collect();
        let img = Image::from_f64(32, 1, 1, &f).unwrap();
        let out = tv_denoise(&img, 0.1, 5000, 0.248).unwrap();
        let oracle = dual_ascent_1d(&f, 0.1, 100_000, 0.248);
        for (a, b) in out.data().iter().zip(&oracle) {
            assert!((*a as f64 - b).abs() < 1e-3, "{a} vs {b}");
        }
        // plateaus move by λ/16 towards each other
        for (i, b) in oracle.iter().enumerate() {
            let exact = if i < 16 { 0.1 / 16.0 } else { 1.0 - 0.1 / 16.0 };
            assert!((b - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let img = Image::zeros(4, 4, 1).unwrap();
        assert!(tv_denoise(&img, -1.0, 10, 0.2).is_err());
        assert!(tv_denoise(&img, f64::NAN, 10, 0.2).is_err());
        assert!(tv_denoise(&img, 0.1, 10, 0.3).is_err());
        assert!(TvPrior::new(TvParams { weights: vec![], ..TvParams::default() }).is_err());
    }

    #[test]
    fn weights_per_level() {
        let p = TvParams::default();
        assert_eq!(p.weight_for(1), 0.08);
        assert_eq!(p.weight_for(3), 0.02);
        assert_eq!(p.weight_for(7), 0.02);
        assert_eq!(TvParams::halving(3).weights, vec![0.08, 0.04, 0.02]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn prox_lowers_tv_and_objective(seed in 0u64..10_000, weight in 0.01f64..0.5, ch in prop::sample::select(vec![1usize, 3])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = Image::from_fn(10, 9, ch, |_, _, _| rng.random::<f32>()).unwrap();
            let z = tv_denoise(&f, weight, 50, 0.248).unwrap();
            prop_assert_eq!(z.dims(), f.dims());
            prop_assert!(total_variation(&z) <= total_variation(&f) + 1e-9);
            prop_assert!(objective(&z, &f, weight) <= objective(&f, &f, weight));
        }
    }
}
