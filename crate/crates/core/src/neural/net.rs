//! Plain convolutional stacks: conv + ReLU, last layer linear.

use crate::error::{invalid, Result};
use crate::rng::Rng;

use super::conv::{conv2d_backward, conv2d_forward};
use super::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `(C_out, C_in, k, k)`.
    pub weight: Tensor,
    /// `(C_out, 1, 1, 1)`.
    pub bias: Tensor,
}

impl ConvLayer {
    /// He-style uniform init, bound `sqrt(6 / fan_in)`; zero bias.
    pub fn new(c_in: usize, c_out: usize, kernel: usize, rng: &mut Rng) -> Self {
        let fan_in = (c_in * kernel * kernel) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let mut weight = Tensor::zeros([c_out, c_in, kernel, kernel]);
        for w in weight.data_mut() {
            *w = rng.uniform_in(-bound, bound) as f32;
        }
        Self {
            weight,
            bias: Tensor::zeros([c_out, 1, 1, 1]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }
}

/// Activations kept by [`ConvNet::forward_traced`] for the backward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    /// Input of every layer; entry `i > 0` is the ReLU output of layer `i-1`.
    inputs: Vec<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvNet {
    layers: Vec<ConvLayer>,
}

impl ConvNet {
    /// `depth` layers mapping `c_in → width → … → width → c_out`.
    pub fn new(
        c_in: usize,
        width: usize,
        c_out: usize,
        depth: usize,
        kernel: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if depth < 2 {
            return Err(invalid(format!("network depth must be >= 2, got {depth}")));
        }
        let layers = (0..depth)
            .map(|i| {
                let ci = if i == 0 { c_in } else { width };
                let co = if i + 1 == depth { c_out } else { width };
                ConvLayer::new(ci, co, kernel, rng)
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<ConvLayer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(invalid("network needs at least 2 layers"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_channels() != pair[1].in_channels() {
                return Err(invalid("consecutive layers disagree on channel count"));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn in_channels(&self) -> usize {
        self.layers[0].in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.layers[self.layers.len() - 1].out_channels()
    }

    fn pad(layer: &ConvLayer) -> usize {
        layer.weight.shape()[2] / 2
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut cur = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            cur = conv2d_forward(&cur, &layer.weight, &layer.bias, Self::pad(layer))?;
            if i < last {
                cur.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok(cur)
    }

    pub fn forward_traced(&self, x: &Tensor) -> Result<(Tensor, Trace)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let out = conv2d_forward(&cur, &layer.weight, &layer.bias, Self::pad(layer))?;
            inputs.push(cur);
            cur = out;
            if i < last {
                cur.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
            }
        }
        Ok((cur, Trace { inputs }))
    }

    /// Accumulates parameter gradients into each layer's `grad` buffers and
    /// returns the gradient with respect to the network input.
    pub fn backward(&mut self, trace: &Trace, grad_out: &Tensor) -> Result<Tensor> {
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            let layer = &mut self.layers[i];
            let (gx, gw, gb) =
                conv2d_backward(&g, &trace.inputs[i], &layer.weight, Self::pad(layer))?;
            accumulate(layer.weight.grad_mut(), gw.data());
            accumulate(layer.bias.grad_mut(), gb.data());
            g = gx;
            if i > 0 {
                for (d, &a) in g.data_mut().iter_mut().zip(trace.inputs[i].data()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for l in &mut self.layers {
            l.weight.zero_grad();
            l.bias.zero_grad();
        }
    }

    /// Weights and biases in declaration order.
    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias])
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
    }
}

fn accumulate(dst: &mut [f32], src: &[f32]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
