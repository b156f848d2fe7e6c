//! Pixel-shuffle down-sampling (PD): a lossless space-to-depth permutation
//! that tiles the `s²` stride-subsampled sub-images into an `s × s` mosaic.
//!
//! Sub-image `(a, b)` holds the input pixels `(u·s + a, v·s + b)` and sits at
//! tile column `a`, tile row `b` of the mosaic.

use crate::error::{invalid, Error, Result};
use crate::image::Image;

/// A pixel-shuffled image together with the stride that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Mosaic {
    image: Image,
    stride: usize,
}

impl Mosaic {
    /// Wraps an image already in mosaic layout.
    pub fn from_image(image: Image, stride: usize) -> Result<Self> {
        check_divisible(image.width(), image.height(), stride)?;
        Ok(Self { image, stride })
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn into_image(self) -> Image {
        self.image
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Width and height of one sub-image.
    pub fn tile_size(&self) -> (usize, usize) {
        (
            self.image.width() / self.stride,
            self.image.height() / self.stride,
        )
    }

    /// Top-left corner of sub-image `(a, b)` inside the mosaic.
    pub fn tile_origin(&self, a: usize, b: usize) -> (usize, usize) {
        let (tw, th) = self.tile_size();
        (a * tw, b * th)
    }

    /// Read-only view of sub-image `(a, b)`.
    pub fn sub_image(&self, a: usize, b: usize) -> Result<SubImage<'_>> {
        self.check_index(a, b)?;
        let (x0, y0) = self.tile_origin(a, b);
        let (width, height) = self.tile_size();
        Ok(SubImage {
            mosaic: &self.image,
            x0,
            y0,
            width,
            height,
        })
    }

    /// Iterates `(a, b)` over the grid in row-major tile order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> {
        let s = self.stride;
        (0..s).flat_map(move |b| (0..s).map(move |a| (a, b)))
    }

    fn check_index(&self, a: usize, b: usize) -> Result<()> {
        if a >= self.stride || b >= self.stride {
            return Err(invalid(format!(
                "sub-image ({a}, {b}) outside {0}x{0} grid",
                self.stride
            )));
        }
        Ok(())
    }
}

/// Borrowed window onto one tile of a mosaic.
#[derive(Clone, Copy, Debug)]
pub struct SubImage<'a> {
    mosaic: &'a Image,
    x0: usize,
    y0: usize,
    width: usize,
    height: usize,
}

impl SubImage<'_> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn origin(&self) -> (usize, usize) {
        (self.x0, self.y0)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.mosaic.get(self.x0 + x, self.y0 + y, c)
    }

    pub fn to_image(&self) -> Image {
        self.mosaic
            .crop(self.x0, self.y0, self.width, self.height)
            .expect("tile lies inside its mosaic")
    }
}

fn check_divisible(w: usize, h: usize, s: usize) -> Result<()> {
    if s == 0 {
        return Err(invalid("stride must be >= 1"));
    }
    if !w.is_multiple_of(s) || !h.is_multiple_of(s) {
        return Err(Error::DimensionMismatch(format!(
            "{w}x{h} not divisible by stride {s}"
        )));
    }
    Ok(())
}

/// Pixel-shuffle `img` into a stride-`s` mosaic.
pub fn pd_down(img: &Image, s: usize) -> Result<Mosaic> {
    check_divisible(img.width(), img.height(), s)?;
    if s == 1 {
        return Ok(Mosaic {
            image: img.clone(),
            stride: 1,
        });
    }
    let (w, h) = (img.width(), img.height());
    let (tw, th) = (w / s, h / s);
    let mut out = Image::new(w, h, img.channels())?;
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            let (v, b) = (y / s, y % s);
            let row = &src[y * w..(y + 1) * w];
            let dst_row = &mut dst[(v + th * b) * w..(v + th * b + 1) * w];
            for (x, &val) in row.iter().enumerate() {
                let (u, a) = (x / s, x % s);
                dst_row[u + tw * a] = val;
            }
        }
    }
    Ok(Mosaic {
        image: out,
        stride: s,
    })
}

/// Inverse of [`pd_down`]. `s` must match the mosaic's stride.
pub fn pd_up(mosaic: &Mosaic, s: usize) -> Result<Image> {
    if s != mosaic.stride {
        return Err(invalid(format!(
            "stride {s} does not match mosaic stride {}",
            mosaic.stride
        )));
    }
    let img = &mosaic.image;
    if s == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width(), img.height());
    let (tw, th) = (w / s, h / s);
    let mut out = Image::new(w, h, img.channels())?;
    for c in 0..img.channels() {
        let src = img.plane(c);
        let dst = out.plane_mut(c);
        for y in 0..h {
            let (v, b) = (y / s, y % s);
            let src_row = &src[(v + th * b) * w..(v + th * b + 1) * w];
            for (x, val) in dst[y * w..(y + 1) * w].iter_mut().enumerate() {
                *val = src_row[x / s + tw * (x % s)];
            }
        }
    }
    Ok(out)
}

/// Returns `denoised` with sub-image `index` replaced by the same tile of
/// `noisy`.
pub fn refill_subimage(denoised: &Mosaic, noisy: &Mosaic, index: (usize, usize)) -> Result<Mosaic> {
    if denoised.stride != noisy.stride {
        return Err(invalid(format!(
            "stride mismatch: {} vs {}",
            denoised.stride, noisy.stride
        )));
    }
    denoised.image.check_same_shape(&noisy.image, "refill")?;
    let (a, b) = index;
    let tile = noisy.sub_image(a, b)?;
    let (x0, y0) = tile.origin();
    let mut out = denoised.clone();
    out.image.paste(&tile.to_image(), x0, y0)?;
    Ok(out)
}
