//! Planar floating-point raster shared by every stage of the toolkit.

use crate::error::{invalid, Error, Result};
use crate::rng::Rng;

/// Planar (channel-major) `f32` image with 1 or 3 channels.
///
/// Samples of images produced by public operations lie in `[0, 1]`.
/// Residuals (`noisy - clean`) reuse this container and may be signed;
/// range is only enforced by [`Image::clamped`] and when saving.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        check_geometry(width, height, channels)?;
        Ok(Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        })
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        check_geometry(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image from a per-sample function `f(x, y, c)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut img = Self::new(width, height, channels)?;
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    img.data[(c * height + y) * width + x] = f(x, y, c);
                }
            }
        }
        Ok(img)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.pixel_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what}: {}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    /// Element-wise combination of two same-shaped images.
    pub fn zip_map(&self, other: &Image, f: impl Fn(f32, f32) -> f32) -> Result<Image> {
        self.check_same_shape(other, "zip_map")?;
        Ok(Image {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            ..*self
        })
    }

    /// Signed residual `self - other`; exempt from the `[0, 1]` range.
    pub fn residual(&self, other: &Image) -> Result<Image> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn clamped(&self) -> Image {
        self.map(|v| v.clamp(0.0, 1.0))
    }

    pub fn is_in_range(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.is_finite() && (0.0..=1.0).contains(v))
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Image> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::DimensionMismatch(format!(
                "crop {width}x{height}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        let mut out = Image::new(width, height, self.channels)?;
        for c in 0..self.channels {
            for y in 0..height {
                let src = self.index(x0, y0 + y, c);
                let dst = out.index(0, y, c);
                out.data[dst..dst + width].copy_from_slice(&self.data[src..src + width]);
            }
        }
        Ok(out)
    }

    /// Copies `src` into `self` with its top-left corner at `(x0, y0)`.
    pub fn paste(&mut self, src: &Image, x0: usize, y0: usize) -> Result<()> {
        if src.channels != self.channels
            || x0 + src.width > self.width
            || y0 + src.height > self.height
        {
            return Err(Error::DimensionMismatch(format!(
                "paste {}x{}x{} at +{x0}+{y0} into {}x{}x{}",
                src.width, src.height, src.channels, self.width, self.height, self.channels
            )));
        }
        for c in 0..self.channels {
            for y in 0..src.height {
                let s = src.index(0, y, c);
                let d = self.index(x0, y0 + y, c);
                self.data[d..d + src.width].copy_from_slice(&src.data[s..s + src.width]);
            }
        }
        Ok(())
    }

    /// Grayscale copy replicated to three channels; RGB images are cloned.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for _ in 0..3 {
            data.extend_from_slice(&self.data);
        }
        Image {
            channels: 3,
            data,
            ..*self
        }
    }

    /// Channel average (luma-free) as a single-channel image.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let n = self.pixel_count();
        let inv = 1.0 / self.channels as f32;
        let data = (0..n)
            .map(|i| {
                (0..self.channels)
                    .map(|c| self.data[c * n + i])
                    .sum::<f32>()
                    * inv
            })
            .collect();
        Image {
            channels: 1,
            data,
            ..*self
        }
    }
}

fn check_geometry(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(invalid(format!("empty image {width}x{height}")));
    }
    if channels != 1 && channels != 3 {
        return Err(invalid(format!("{channels} channels; expected 1 or 3")));
    }
    Ok(())
}

/// Samples `count` square patches of side `size` at random top-left offsets
/// on a lattice of spacing `stride`.
pub fn extract_patches(
    img: &Image,
    size: usize,
    stride: usize,
    rng: &mut Rng,
    count: usize,
) -> Result<Vec<Image>> {
    if size == 0 || stride == 0 {
        return Err(invalid("patch size and stride must be positive"));
    }
    if size > img.width().min(img.height()) {
        return Err(Error::TooSmall(format!(
            "patch {size} larger than {}x{} image",
            img.width(),
            img.height()
        )));
    }
    let nx = (img.width() - size) / stride + 1;
    let ny = (img.height() - size) / stride + 1;
    (0..count)
        .map(|_| {
            let x0 = rng.below(nx) * stride;
            let y0 = rng.below(ny) * stride;
            img.crop(x0, y0, size, size)
        })
        .collect()
}
