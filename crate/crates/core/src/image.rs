//! Planar floating-point rasters.
//!
//! Samples are stored as `f32`, one plane per channel, each plane row-major.
//! Arithmetic that needs headroom (operators, solvers, metrics) widens to
//! `f64` internally and rounds back on output.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        check_dims(width, height, channels)?;
        if !value.is_finite() {
            return Err(Error::Parameter("fill value must be finite".into()));
        }
        Ok(Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        })
    }

    /// Wraps planar samples. Fails on a length mismatch or any non-finite sample.
    pub fn from_planar(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::Shape(format!(
                "{} samples for {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("image samples must be finite".into()));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Rounds `f64` planar samples to storage precision.
    pub fn from_f64(width: usize, height: usize, channels: usize, data: &[f64]) -> Result<Self> {
        Self::from_planar(width, height, channels, data.iter().map(|&v| v as f32).collect())
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        check_dims(width, height, channels)?;
        let mut data = Vec::with_capacity(width * height * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self::from_planar(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Pixels per plane.
    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.width, self.height, self.channels)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    /// Same geometry, new samples.
    pub fn with_data_f64(&self, data: &[f64]) -> Result<Self> {
        Self::from_f64(self.width, self.height, self.channels, data)
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.dims() == other.dims()
    }

    pub fn ensure_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {:?} vs {:?}",
                self.dims(),
                other.dims()
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::from_planar(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn clamp01(&self) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        out
    }

    /// Rec. 601 luma for 3-channel images; a copy of the plane otherwise.
    pub fn luma(&self) -> Vec<f64> {
        if self.channels == 3 {
            let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
            r.iter()
                .zip(g)
                .zip(b)
                .map(|((&r, &g), &b)| 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
                .collect()
        } else {
            self.plane(0).iter().map(|&v| v as f64).collect()
        }
    }
}

fn check_dims(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Parameter(format!("empty image {width}x{height}")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::Parameter(format!(
            "images have 1 or 3 channels, got {channels}"
        )));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Separable Gaussian smoothing of each plane with replicate boundaries,
/// truncated at 3σ.
pub fn gaussian_smooth(image: &Image, sigma: f64) -> Result<Image> {
    let data = image.to_f64();
    let out = gaussian_smooth_planes(&data, image.width, image.height, image.channels, sigma)?;
    image.with_data_f64(&out)
}

pub(crate) fn gaussian_smooth_planes(
    data: &[f64],
    width: usize,
    height: usize,
    channels: usize,
    sigma: f64,
) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Parameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(data.to_vec());
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);

    let n = width * height;
    let mut out = vec![0.0; data.len()];
    let mut tmp = vec![0.0; n];
    for c in 0..channels {
        let src = &data[c * n..(c + 1) * n];
        for y in 0..height {
            for x in 0..width {
                let mut acc = 0.0;
                for (k, w) in taps.iter().enumerate() {
                    let xx = (x as isize + k as isize - radius).clamp(0, width as isize - 1);
                    acc += w * src[y * width + xx as usize];
                }
                tmp[y * width + x] = acc;
            }
        }
        let dst = &mut out[c * n..(c + 1) * n];
        for y in 0..height {
            for x in 0..width {
                let mut acc = 0.0;
                for (k, w) in taps.iter().enumerate() {
                    let yy = (y as isize + k as isize - radius).clamp(0, height as isize - 1);
                    acc += w * tmp[yy as usize * width + x];
                }
                dst[y * width + x] = acc;
            }
        }
    }
    Ok(out)
}
