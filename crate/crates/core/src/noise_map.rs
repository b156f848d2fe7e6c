//! Six-channel pixel-wise noise-level maps and their binary file format.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

/// AWGN standard deviation (8-bit units) that maps to 1.0.
pub const AWGN_SCALE: f64 = 75.0;
/// RVIN corruption ratio that maps to 1.0.
pub const RVIN_SCALE: f64 = 0.3;
pub const MAP_CHANNELS: usize = 6;

const MAGIC: &[u8; 4] = b"NMAP";

/// Planar map with channels AWGN-R, AWGN-G, AWGN-B, RVIN-R, RVIN-G, RVIN-B,
/// each normalized to `[0, 1]` (σ/75 and ratio/0.3).
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl NoiseMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height * MAP_CHANNELS],
        }
    }

    /// Spatially uniform map from normalized per-channel levels.
    pub fn uniform(width: usize, height: usize, awgn: [f32; 3], rvin: [f32; 3]) -> Self {
        let mut m = Self::zeros(width, height);
        for c in 0..3 {
            m.plane_mut(c).fill(awgn[c].clamp(0.0, 1.0));
            m.plane_mut(3 + c).fill(rvin[c].clamp(0.0, 1.0));
        }
        m
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * MAP_CHANNELS {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {width}x{height} noise map",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.pixel_count();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.pixel_count();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn awgn(&self, c: usize) -> &[f32] {
        self.plane(c)
    }

    pub fn rvin(&self, c: usize) -> &[f32] {
        self.plane(3 + c)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn matches(&self, img: &Image) -> bool {
        self.width == img.width() && self.height == img.height()
    }

    pub(crate) fn check_matches(&self, img: &Image) -> Result<()> {
        if self.matches(img) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "noise map {}x{} vs image {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )))
        }
    }

    /// Mean of the AWGN channels, de-normalized to 8-bit σ units.
    pub fn mean_sigma(&self) -> f64 {
        let n = 3 * self.pixel_count();
        let sum: f64 = (0..3).flat_map(|c| self.awgn(c)).map(|&v| v as f64).sum();
        sum / n as f64 * AWGN_SCALE
    }

    /// Mean of the RVIN channels, de-normalized to a corruption ratio.
    pub fn mean_ratio(&self) -> f64 {
        let n = 3 * self.pixel_count();
        let sum: f64 = (0..3).flat_map(|c| self.rvin(c)).map(|&v| v as f64).sum();
        sum / n as f64 * RVIN_SCALE
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<NoiseMap> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::DimensionMismatch(
                "noise map crop out of bounds".into(),
            ));
        }
        let mut out = NoiseMap::zeros(width, height);
        for c in 0..MAP_CHANNELS {
            for y in 0..height {
                let s = (c * self.height + y0 + y) * self.width + x0;
                let d = (c * height + y) * width;
                out.data[d..d + width].copy_from_slice(&self.data[s..s + width]);
            }
        }
        Ok(out)
    }

    pub fn paste(&mut self, src: &NoiseMap, x0: usize, y0: usize) -> Result<()> {
        if x0 + src.width > self.width || y0 + src.height > self.height {
            return Err(Error::DimensionMismatch(
                "noise map paste out of bounds".into(),
            ));
        }
        for c in 0..MAP_CHANNELS {
            for y in 0..src.height {
                let s = (c * src.height + y) * src.width;
                let d = (c * self.height + y0 + y) * self.width + x0;
                self.data[d..d + src.width].copy_from_slice(&src.data[s..s + src.width]);
            }
        }
        Ok(())
    }

    /// False-colour view: AWGN channels as RGB.
    pub fn visualize(&self) -> Image {
        let n = self.pixel_count();
        Image::from_vec(self.width, self.height, 3, self.data[..3 * n].to_vec())
            .expect("map geometry is valid")
    }

    /// Serializes as `NMAP`, u32 width, u32 height, u32 channels, then
    /// little-endian `f32` samples in planar order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(MAP_CHANNELS as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::CorruptImage("noise map: bad magic".into()));
        }
        let width = read_u32(&mut r)? as usize;
        let height = read_u32(&mut r)? as usize;
        let channels = read_u32(&mut r)? as usize;
        if channels != MAP_CHANNELS {
            return Err(Error::CorruptImage(format!(
                "noise map: {channels} channels, expected {MAP_CHANNELS}"
            )));
        }
        let n = width * height * channels;
        if r.len() != n * 4 {
            return Err(Error::CorruptImage(format!(
                "noise map: {} payload bytes, expected {}",
                r.len(),
                n * 4
            )));
        }
        let data = r
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| Error::Unwritable {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::CorruptImage("noise map: truncated header".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}
