use crate::error::{Error, Result};
use crate::image::Image;
use crate::noise_map::{NoiseMap, MAP_CHANNELS};

/// Dense `(N, C, H, W)` array of `f32` with an optional gradient buffer.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: [usize; 4],
    data: Vec<f32>,
    grad: Option<Vec<f32>>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
            grad: None,
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} values for shape {shape:?}",
                data.len()
            )));
        }
        Ok(Self {
            shape,
            data,
            grad: None,
        })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn c(&self) -> usize {
        self.shape[1]
    }

    pub fn h(&self) -> usize {
        self.shape[2]
    }

    pub fn w(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
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

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    /// Gradient buffer, allocated as zeros on first use.
    pub fn grad_mut(&mut self) -> &mut [f32] {
        let n = self.data.len();
        self.grad.get_or_insert_with(|| vec![0.0; n])
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.fill(0.0);
        }
    }

    /// Contiguous `H × W` plane of item `n`, channel `c`.
    pub fn plane(&self, n: usize, c: usize) -> &[f32] {
        let hw = self.h() * self.w();
        let o = (n * self.c() + c) * hw;
        &self.data[o..o + hw]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [f32] {
        let hw = self.h() * self.w();
        let o = (n * self.c() + c) * hw;
        &mut self.data[o..o + hw]
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
            grad: None,
        }
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        check_same(self, other, "sub")?;
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
            grad: None,
        })
    }

    /// Channel-wise concatenation of two tensors with equal `N, H, W`.
    pub fn concat_channels(a: &Tensor, b: &Tensor) -> Result<Tensor> {
        if a.n() != b.n() || a.h() != b.h() || a.w() != b.w() {
            return Err(Error::ShapeMismatch(format!(
                "concat {:?} with {:?}",
                a.shape, b.shape
            )));
        }
        let (n, hw) = (a.n(), a.h() * a.w());
        let mut data = Vec::with_capacity(a.len() + b.len());
        for i in 0..n {
            data.extend_from_slice(&a.data[i * a.c() * hw..(i + 1) * a.c() * hw]);
            data.extend_from_slice(&b.data[i * b.c() * hw..(i + 1) * b.c() * hw]);
        }
        Tensor::from_vec([n, a.c() + b.c(), a.h(), a.w()], data)
    }

    /// Inverse of [`Tensor::concat_channels`]: first `c0` channels, rest.
    pub fn split_channels(&self, c0: usize) -> Result<(Tensor, Tensor)> {
        if c0 > self.c() {
            return Err(Error::ShapeMismatch(format!(
                "split at {c0} of {} channels",
                self.c()
            )));
        }
        let (n, hw, c1) = (self.n(), self.h() * self.w(), self.c() - c0);
        let mut a = Vec::with_capacity(n * c0 * hw);
        let mut b = Vec::with_capacity(n * c1 * hw);
        for i in 0..n {
            let base = i * self.c() * hw;
            a.extend_from_slice(&self.data[base..base + c0 * hw]);
            b.extend_from_slice(&self.data[base + c0 * hw..base + self.c() * hw]);
        }
        Ok((
            Tensor::from_vec([n, c0, self.h(), self.w()], a)?,
            Tensor::from_vec([n, c1, self.h(), self.w()], b)?,
        ))
    }

    /// Stacks same-sized images into a batch.
    pub fn from_images(images: &[Image]) -> Result<Tensor> {
        let first = images
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty batch".into()))?;
        let mut data = Vec::with_capacity(first.len() * images.len());
        for img in images {
            first.check_same_shape(img, "batch")?;
            data.extend_from_slice(img.data());
        }
        Tensor::from_vec(
            [
                images.len(),
                first.channels(),
                first.height(),
                first.width(),
            ],
            data,
        )
    }

    pub fn from_maps(maps: &[NoiseMap]) -> Result<Tensor> {
        let first = maps
            .first()
            .ok_or_else(|| Error::ShapeMismatch("empty batch".into()))?;
        let mut data = Vec::with_capacity(first.data().len() * maps.len());
        for m in maps {
            if (m.width(), m.height()) != (first.width(), first.height()) {
                return Err(Error::ShapeMismatch("noise maps differ in size".into()));
            }
            data.extend_from_slice(m.data());
        }
        Tensor::from_vec(
            [maps.len(), MAP_CHANNELS, first.height(), first.width()],
            data,
        )
    }

    /// Item `n` as an image (1 or 3 channels).
    pub fn to_image(&self, n: usize) -> Result<Image> {
        let len = self.c() * self.h() * self.w();
        Image::from_vec(
            self.w(),
            self.h(),
            self.c(),
            self.data[n * len..(n + 1) * len].to_vec(),
        )
    }

    /// Item `n` of a six-channel tensor as a noise map.
    pub fn to_noise_map(&self, n: usize) -> Result<NoiseMap> {
        if self.c() != MAP_CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "{} channels is not a noise map",
                self.c()
            )));
        }
        let len = self.c() * self.h() * self.w();
        NoiseMap::from_vec(
            self.w(),
            self.h(),
            self.data[n * len..(n + 1) * len].to_vec(),
        )
    }
}

pub(crate) fn check_same(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::ShapeMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.shape, b.shape
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_then_split_roundtrips() {
        let a = Tensor::from_vec([2, 1, 2, 2], (0..8).map(|v| v as f32).collect()).unwrap();
        let b =
            Tensor::from_vec([2, 2, 2, 2], (0..16).map(|v| 100.0 + v as f32).collect()).unwrap();
        let ab = Tensor::concat_channels(&a, &b).unwrap();
        assert_eq!(ab.shape(), [2, 3, 2, 2]);
        assert_eq!(ab.plane(1, 0), a.plane(1, 0));
        assert_eq!(ab.plane(1, 2), b.plane(1, 1));
        let (a2, b2) = ab.split_channels(1).unwrap();
        assert_eq!((a2, b2), (a, b));
    }

    #[test]
    fn shape_checks() {
        assert!(Tensor::from_vec([1, 1, 2, 2], vec![0.0; 3]).is_err());
        let a = Tensor::zeros([1, 1, 2, 2]);
        let b = Tensor::zeros([1, 1, 3, 2]);
        assert!(Tensor::concat_channels(&a, &b).is_err());
        assert!(a.sub(&b).is_err());
    }

    #[test]
    fn grad_buffer_matches_shape() {
        let mut t = Tensor::zeros([2, 3, 4, 5]);
        assert!(t.grad().is_none());
        assert_eq!(t.grad_mut().len(), t.len());
    }
}
