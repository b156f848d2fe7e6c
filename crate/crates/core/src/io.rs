//! PNG / PPM / PGM reading and 8-bit PNG writing.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageError, ImageFormat, ImageReader};

use crate::error::{Error, Result};
use crate::image::Image;

/// Loads an 8- or 16-bit PNG, or a binary PPM/PGM, scaling samples to
/// `[0, 1]` by the format maximum. Alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes)
}

fn reader(bytes: &[u8]) -> Result<ImageReader<Cursor<&[u8]>>> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::CorruptImage(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => Ok(reader),
        Some(other) => Err(Error::UnsupportedFormat(format!("{other:?}"))),
        None => Err(Error::UnsupportedFormat(
            "unrecognised file signature".into(),
        )),
    }
}

/// Decodes an in-memory PNG / PNM file.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let decoded = reader(bytes)?.decode().map_err(map_decode_error)?;
    from_dynamic(decoded)
}

/// Width and height of an in-memory PNG / PNM file, read from its header.
pub fn image_dimensions(bytes: &[u8]) -> Result<(usize, usize)> {
    let (w, h) = reader(bytes)?.into_dimensions().map_err(map_decode_error)?;
    Ok((w as usize, h as usize))
}

fn map_decode_error(e: ImageError) -> Error {
    match e {
        ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        other => Error::CorruptImage(other.to_string()),
    }
}

fn from_dynamic(img: DynamicImage) -> Result<Image> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(b) => planar(w, h, 1, 1, b.as_raw(), 255.0),
        DynamicImage::ImageLumaA8(b) => planar(w, h, 1, 2, b.as_raw(), 255.0),
        DynamicImage::ImageRgb8(b) => planar(w, h, 3, 3, b.as_raw(), 255.0),
        DynamicImage::ImageRgba8(b) => planar(w, h, 3, 4, b.as_raw(), 255.0),
        DynamicImage::ImageLuma16(b) => planar(w, h, 1, 1, b.as_raw(), 65535.0),
        DynamicImage::ImageLumaA16(b) => planar(w, h, 1, 2, b.as_raw(), 65535.0),
        DynamicImage::ImageRgb16(b) => planar(w, h, 3, 3, b.as_raw(), 65535.0),
        DynamicImage::ImageRgba16(b) => planar(w, h, 3, 4, b.as_raw(), 65535.0),
        other => Err(Error::UnsupportedFormat(format!(
            "bit depth / colour type {:?}",
            other.color()
        ))),
    }
}

/// Interleaved samples with `stride` components per pixel to planar floats.
fn planar<T: Copy + Into<f32>>(
    w: usize,
    h: usize,
    channels: usize,
    stride: usize,
    raw: &[T],
    max: f32,
) -> Result<Image> {
    let mut img = Image::new(w, h, channels)?;
    let n = w * h;
    let data = img.data_mut();
    for i in 0..n {
        for c in 0..channels {
            data[c * n + i] = raw[i * stride + c].into() / max;
        }
    }
    Ok(img)
}

/// Quantizes a sample to 8 bits: clamp to `[0, 1]`, then `round(s * 255)`.
#[inline]
pub fn quantize_u8(s: f32) -> u8 {
    (s.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Interleaved 8-bit samples in row-major order.
pub fn to_interleaved_u8(img: &Image) -> Vec<u8> {
    let n = img.pixel_count();
    let ch = img.channels();
    let mut out = vec![0u8; n * ch];
    for c in 0..ch {
        for (i, &s) in img.plane(c).iter().enumerate() {
            out[i * ch + c] = quantize_u8(s);
        }
    }
    out
}

/// Writes an 8-bit gray or RGB PNG.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_png(img)?;
    std::fs::write(path, bytes).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

/// Encodes an image as an 8-bit PNG in memory.
pub fn encode_png(img: &Image) -> Result<Vec<u8>> {
    let (w, h) = (img.width() as u32, img.height() as u32);
    let raw = to_interleaved_u8(img);
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, raw).expect("buffer size"))
    } else {
        DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, raw).expect("buffer size"))
    };
    let mut out = Cursor::new(Vec::new());
    dynamic
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::CorruptImage(e.to_string()))?;
    Ok(out.into_inner())
}
