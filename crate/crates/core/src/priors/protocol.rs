//! Framed binary protocol spoken with an external denoiser process.
//!
//! All integers and samples are little-endian.
//!
//! Request (parent → child, one per level):
//! `"DNZ1"`, `u32 level`, `u32 width`, `u32 height`, `u32 channels`,
//! then `channels·height·width` `f32` samples of the deconvolved image
//! (planar, row-major), then the same block for the observation.
//!
//! Reply (child → parent): `"DNZ2"`, `u32 width`, `u32 height`,
//! `u32 channels`, samples.
//!
//! The header fixes the payload length, so either side can read a whole
//! frame without scanning.

use std::io::{self, Read, Write};

use crate::image::Image;

pub const REQUEST_MAGIC: &[u8; 4] = b"DNZ1";
pub const REPLY_MAGIC: &[u8; 4] = b"DNZ2";

/// Upper bound on samples per block accepted from a peer.
pub const MAX_SAMPLES: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq)]
pub struct Request {
    pub level: u32,
    pub deconvolved: Image,
    pub observed: Image,
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("stream closed")]
    Eof,
    #[error("{0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_samples(out: &mut Vec<u8>, image: &Image) {
    for s in image.data() {
        out.extend_from_slice(&s.to_le_bytes());
    }
}

pub fn encode_request(level: usize, deconvolved: &Image, observed: &Image) -> Vec<u8> {
    let (w, h, c) = deconvolved.dims();
    let mut out = Vec::with_capacity(20 + 8 * deconvolved.len());
    out.extend_from_slice(REQUEST_MAGIC);
    put_u32(&mut out, level);
    put_u32(&mut out, w);
    put_u32(&mut out, h);
    put_u32(&mut out, c);
    put_samples(&mut out, deconvolved);
    put_samples(&mut out, observed);
    out
}

pub fn encode_reply(image: &Image) -> Vec<u8> {
    let (w, h, c) = image.dims();
    let mut out = Vec::with_capacity(16 + 4 * image.len());
    out.extend_from_slice(REPLY_MAGIC);
    put_u32(&mut out, w);
    put_u32(&mut out, h);
    put_u32(&mut out, c);
    put_samples(&mut out, image);
    out
}

/// Reads exactly `buf.len()` bytes; a clean EOF before the first byte is
/// reported as [`FrameError::Eof`].
fn read_full(r: &mut impl Read, buf: &mut [u8], first: bool) -> Result<(), FrameError> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 && first => return Err(FrameError::Eof),
            Ok(0) => {
                return Err(FrameError::Malformed(format!(
                    "truncated frame: {filled} of {} bytes",
                    buf.len()
                )))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<usize, FrameError> {
    let mut b = [0u8; 4];
    read_full(r, &mut b, false)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn read_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<(), FrameError> {
    let mut b = [0u8; 4];
    read_full(r, &mut b, true)?;
    if &b != magic {
        return Err(FrameError::Malformed(format!(
            "expected magic {:?}, got {:?}",
            String::from_utf8_lossy(magic),
            b
        )));
    }
    Ok(())
}

/// Header dimensions `(width, height, channels)`.
pub fn read_dims(r: &mut impl Read) -> Result<(usize, usize, usize), FrameError> {
    let w = read_u32(r)?;
    let h = read_u32(r)?;
    let c = read_u32(r)?;
    Ok((w, h, c))
}

pub fn read_block(r: &mut impl Read, dims: (usize, usize, usize)) -> Result<Image, FrameError> {
    let (w, h, c) = dims;
    let n = w
        .checked_mul(h)
        .and_then(|p| p.checked_mul(c))
        .filter(|&n| n > 0 && n <= MAX_SAMPLES)
        .ok_or_else(|| FrameError::Malformed(format!("implausible frame size {w}x{h}x{c}")))?;
    let mut bytes = vec![0u8; 4 * n];
    read_full(r, &mut bytes, false)?;
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Image::from_planar(w, h, c, data).map_err(|e| FrameError::Malformed(e.to_string()))
}

/// Child side: `Ok(None)` on a clean end of stream.
pub fn read_request(r: &mut impl Read) -> Result<Option<Request>, FrameError> {
    match read_magic(r, REQUEST_MAGIC) {
        Err(FrameError::Eof) => return Ok(None),
        other => other?,
    }
    let level = read_u32(r)? as u32;
    let dims = read_dims(r)?;
    let deconvolved = read_block(r, dims)?;
    let observed = read_block(r, dims)?;
    Ok(Some(Request {
        level,
        deconvolved,
        observed,
    }))
}

/// Reads the reply header only, so a caller can vet dimensions before
/// pulling the payload.
pub fn read_reply_header(r: &mut impl Read) -> Result<(usize, usize, usize), FrameError> {
    read_magic(r, REPLY_MAGIC)?;
    read_dims(r)
}

pub fn read_reply(r: &mut impl Read) -> Result<Image, FrameError> {
    let dims = read_reply_header(r)?;
    read_block(r, dims)
}

pub fn write_frame(w: &mut impl Write, frame: &[u8]) -> io::Result<()> {
    w.write_all(frame)?;
    w.flush()
}
