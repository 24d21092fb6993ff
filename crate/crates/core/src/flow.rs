//! Per-pixel motion vectors and the `MFLO` binary container.
//!
//! Layout (little-endian):
//!
//! | offset | size      | content                     |
//! |--------|-----------|-----------------------------|
//! | 0      | 4         | magic `MFLO`                |
//! | 4      | 4         | `u32` width                 |
//! | 8      | 4         | `u32` height                |
//! | 12     | 4·W·H     | `f32` u, row-major          |
//! | 12+4WH | 4·W·H     | `f32` v, row-major          |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const FLOW_MAGIC: &[u8; 4] = b"MFLO";
const HEADER_LEN: usize = 12;

/// Horizontal (`u`) and vertical (`v`) motion in pixels for every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFlowMap {
    width: usize,
    height: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl MotionFlowMap {
    pub fn new(width: usize, height: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Parameter(format!("empty flow map {width}x{height}")));
        }
        let n = width * height;
        if u.len() != n || v.len() != n {
            return Err(Error::Shape(format!(
                "flow components have {} and {} entries, expected {n}",
                u.len(),
                v.len()
            )));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::Parameter("flow vectors must be finite".into()));
        }
        Ok(MotionFlowMap { width, height, u, v })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, 0.0, 0.0)
    }

    pub fn constant(width: usize, height: usize, u: f32, v: f32) -> Result<Self> {
        let n = width * height;
        Self::new(width, height, vec![u; n], vec![v; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    /// Motion at row `y`, column `x`.
    pub fn at(&self, y: usize, x: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    /// Largest |u| or |v| over the map.
    pub fn max_abs(&self) -> f32 {
        self.u
            .iter()
            .chain(&self.v)
            .fold(0.0f32, |m, x| m.max(x.abs()))
    }

    pub fn ensure_matches(&self, width: usize, height: usize) -> Result<()> {
        if self.width == width && self.height == height {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "flow is {}x{}, image is {width}x{height}",
                self.width, self.height
            )))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.u.len());
        out.extend_from_slice(FLOW_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for x in self.u.iter().chain(&self.v) {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    /// Decodes a complete `MFLO` buffer. Trailing bytes are rejected.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "{} bytes is shorter than the header",
                bytes.len()
            )));
        }
        if &bytes[..4] != FLOW_MAGIC {
            return Err(Error::Format(format!("bad magic {:?}", &bytes[..4])));
        }
        let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let n = width
            .checked_mul(height)
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let expected = n
            .checked_mul(8)
            .and_then(|b| b.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "{width}x{height} flow needs {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut values = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        let u: Vec<f32> = values.by_ref().take(n).collect();
        let v: Vec<f32> = values.collect();
        Self::new(width, height, u, v).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn read_from(mut reader: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        reader
            .read_to_end(&mut bytes)
            .map_err(|e| Error::Format(format!("reading flow stream: {e}")))?;
        Self::from_bytes(&bytes)
    }

    pub fn write_to(&self, mut writer: impl Write) -> std::io::Result<()> {
        writer.write_all(&self.to_bytes())
    }
}

pub fn read_flow(path: impl AsRef<Path>) -> Result<MotionFlowMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    MotionFlowMap::from_bytes(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_flow(flow: &MotionFlowMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, flow.to_bytes()).map_err(|e| Error::io(path, e))
}
