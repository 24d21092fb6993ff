//! Linear-motion kernel stamps.
//!
//! A motion vector `(u, v)` is read as a straight segment from
//! `(-u/2, -v/2)` to `(u/2, v/2)` centred on the pixel. The segment is
//! sampled at `SAMPLES_PER_PIXEL` points per pixel of length (midpoint rule),
//! every sample is splatted bilinearly onto the integer grid and the result is
//! normalised to unit sum.

/// Supersampling density along the segment.
pub const SAMPLES_PER_PIXEL: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub dx: i32,
    pub dy: i32,
    pub weight: f64,
}

/// A normalised stencil. Offsets are relative to the pixel the stamp belongs
/// to, so the anchor is always `(0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelStamp {
    taps: Vec<Tap>,
}

impl KernelStamp {
    pub fn delta() -> Self {
        KernelStamp {
            taps: vec![Tap {
                dx: 0,
                dy: 0,
                weight: 1.0,
            }],
        }
    }

    #[cfg(test)]
    pub(crate) fn from_taps_unchecked(taps: Vec<Tap>) -> Self {
        KernelStamp { taps }
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn anchor(&self) -> (i32, i32) {
        (0, 0)
    }

    pub fn weight_sum(&self) -> f64 {
        self.taps.iter().map(|t| t.weight).sum()
    }

    /// Weight at an offset, zero when no tap lands there.
    pub fn weight_at(&self, dx: i32, dy: i32) -> f64 {
        self.taps
            .iter()
            .find(|t| t.dx == dx && t.dy == dy)
            .map_or(0.0, |t| t.weight)
    }

    /// Inclusive `(min_dx, max_dx, min_dy, max_dy)`.
    pub fn bounds(&self) -> (i32, i32, i32, i32) {
        self.taps.iter().fold(
            (i32::MAX, i32::MIN, i32::MAX, i32::MIN),
            |(a, b, c, d), t| (a.min(t.dx), b.max(t.dx), c.min(t.dy), d.max(t.dy)),
        )
    }
}

/// Rasterizes the stamp for one motion vector. `(0, 0)` gives the exact delta.
pub fn kernel_from_motion(u: f32, v: f32) -> KernelStamp {
    let (u, v) = (u as f64, v as f64);
    debug_assert!(u.is_finite() && v.is_finite());
    let length = u.hypot(v);
    if length == 0.0 {
        return KernelStamp::delta();
    }
    let samples = ((length * SAMPLES_PER_PIXEL).ceil() as usize).max(1);
    let reach = (u.abs().max(v.abs()) / 2.0).ceil() as i32 + 1;
    let side = (2 * reach + 1) as usize;
    let mut grid = vec![0.0f64; side * side];

    let inv = 1.0 / samples as f64;
    for k in 0..samples {
        let t = (k as f64 + 0.5) * inv - 0.5;
        let (px, py) = (t * u, t * v);
        let (x0, y0) = (px.floor(), py.floor());
        let (fx, fy) = (px - x0, py - y0);
        let gx = (x0 as i32 + reach) as usize;
        let gy = (y0 as i32 + reach) as usize;
        grid[gy * side + gx] += (1.0 - fx) * (1.0 - fy);
        grid[gy * side + gx + 1] += fx * (1.0 - fy);
        grid[(gy + 1) * side + gx] += (1.0 - fx) * fy;
        grid[(gy + 1) * side + gx + 1] += fx * fy;
    }

    let total: f64 = grid.iter().sum();
    let mut taps = Vec::new();
    for (i, &w) in grid.iter().enumerate() {
        if w > 0.0 {
            taps.push(Tap {
                dx: (i % side) as i32 - reach,
                dy: (i / side) as i32 - reach,
                weight: w / total,
            });
        }
    }
    KernelStamp { taps }
}
