//! PNG raster I/O. Samples map linearly between integer codes and [0, 1].

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma, Rgb};

use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn max_code(self) -> f32 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_png(&bytes).map_err(|e| match e {
        Error::Image { message, .. } => Error::Image {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn write_image(image: &Image, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(image, depth)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Alpha channels are dropped; gray-alpha loads as one channel.
pub fn decode_png(bytes: &[u8]) -> Result<Image> {
    let bad = |message: String| Error::Image {
        path: "<memory>".into(),
        message,
    };
    let format = image::guess_format(bytes).map_err(|e| bad(e.to_string()))?;
    if format != ImageFormat::Png {
        return Err(bad(format!("unsupported format {format:?}; only PNG is accepted")));
    }
    let decoded =
        image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| bad(e.to_string()))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let n = w * h;
    let (channels, codes, max): (usize, Vec<f32>, f32) = match decoded {
        DynamicImage::ImageLuma8(b) => (1, b.pixels().map(|p| p.0[0] as f32).collect(), 255.0),
        DynamicImage::ImageLumaA8(b) => (1, b.pixels().map(|p| p.0[0] as f32).collect(), 255.0),
        DynamicImage::ImageLuma16(b) => (1, b.pixels().map(|p| p.0[0] as f32).collect(), 65535.0),
        DynamicImage::ImageLumaA16(b) => (1, b.pixels().map(|p| p.0[0] as f32).collect(), 65535.0),
        DynamicImage::ImageRgb8(b) => (3, interleaved(b.as_raw(), 3, n), 255.0),
        DynamicImage::ImageRgba8(b) => (3, interleaved(b.as_raw(), 4, n), 255.0),
        DynamicImage::ImageRgb16(b) => (3, interleaved(b.as_raw(), 3, n), 65535.0),
        DynamicImage::ImageRgba16(b) => (3, interleaved(b.as_raw(), 4, n), 65535.0),
        other => return Err(bad(format!("unsupported pixel layout {:?}", other.color()))),
    };
    let data = codes.into_iter().map(|c| c / max).collect();
    Image::from_planar(w, h, channels, data)
}

/// Splits interleaved samples into planes, keeping the first three channels.
fn interleaved<T: Copy + Into<f32>>(raw: &[T], stride: usize, n: usize) -> Vec<f32> {
    let mut out = vec![0.0; 3 * n];
    for (i, px) in raw.chunks_exact(stride).enumerate() {
        for c in 0..3 {
            out[c * n + i] = px[c].into();
        }
    }
    out
}

pub fn encode_png(image: &Image, depth: BitDepth) -> Result<Vec<u8>> {
    let (w, h, channels) = image.dims();
    let n = w * h;
    let max = depth.max_code();
    let code = |v: f32| (v.clamp(0.0, 1.0) * max).round();
    let data = image.data();
    let order = |i: usize| -> usize {
        // interleaved index i -> planar index
        let (px, c) = (i / channels, i % channels);
        c * n + px
    };
    let dynamic = match (channels, depth) {
        (1, BitDepth::Eight) => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w as u32, h as u32, data.iter().map(|&v| code(v) as u8).collect())
                .expect("buffer length"),
        ),
        (1, BitDepth::Sixteen) => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w as u32, h as u32, data.iter().map(|&v| code(v) as u16).collect())
                .expect("buffer length"),
        ),
        (3, BitDepth::Eight) => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(
                w as u32,
                h as u32,
                (0..3 * n).map(|i| code(data[order(i)]) as u8).collect(),
            )
            .expect("buffer length"),
        ),
        (3, BitDepth::Sixteen) => DynamicImage::ImageRgb16(
            ImageBuffer::<Rgb<u16>, _>::from_raw(
                w as u32,
                h as u32,
                (0..3 * n).map(|i| code(data[order(i)]) as u16).collect(),
            )
            .expect("buffer length"),
        ),
        _ => unreachable!("images carry 1 or 3 channels"),
    };
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: "<memory>".into(),
            message: e.to_string(),
        })?;
    Ok(out.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eight_bit_round_trip_within_quantization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for channels in [1, 3] {
            let img = Image::from_fn(13, 7, channels, |_, _, _| rng.random::<f32>()).unwrap();
            let back = decode_png(&encode_png(&img, BitDepth::Eight).unwrap()).unwrap();
            assert_eq!(back.dims(), img.dims());
            let worst = img
                .data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f32, f32::max);
            assert!(worst <= 1.0 / 255.0, "{worst}");
        }
    }

    #[test]
    fn black_loads_as_zero() {
        let img = Image::zeros(5, 4, 3).unwrap();
        let back = decode_png(&encode_png(&img, BitDepth::Eight).unwrap()).unwrap();
        assert!(back.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sixteen_bit_ramp_is_monotone_and_matches_codes() {
        let w = 300;
        let img = Image::from_fn(w, 2, 1, |_, _, x| x as f32 / (w - 1) as f32).unwrap();
        let bytes = encode_png(&img, BitDepth::Sixteen).unwrap();
        let back = decode_png(&bytes).unwrap();
        let row = &back.plane(0)[..w];
        assert!(row.windows(2).all(|p| p[1] > p[0]));
        // code table the writer emits: round(x / (w-1) * 65535)
        for (x, &v) in row.iter().enumerate() {
            let expected_code = ((x as f32 / (w - 1) as f32) * 65535.0).round();
            assert_eq!(v, expected_code / 65535.0);
        }
    }

    #[test]
    fn rejects_garbage_and_truncation() {
        assert!(matches!(decode_png(b"not an image"), Err(Error::Image { .. })));
        let bytes = encode_png(&Image::filled(16, 16, 1, 0.5).unwrap(), BitDepth::Eight).unwrap();
        assert!(matches!(decode_png(&bytes[..bytes.len() / 2]), Err(Error::Image { .. })));
    }
}
