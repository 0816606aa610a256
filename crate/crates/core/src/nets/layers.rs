use crate::error::Result;
use crate::tensor::{Graph, Tensor, Var};
use rand::Rng;

/// Convolution with per-channel bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv {
    pub weight: Tensor,
    pub bias: Tensor,
    pub stride: usize,
    pub pad: usize,
}

impl Conv {
    /// He-normal initialised `out x in x k x k` kernel, zero bias.
    pub fn he<R: Rng + ?Sized>(in_ch: usize, out_ch: usize, k: usize, stride: usize, pad: usize, rng: &mut R) -> Self {
        let std = (2.0 / (in_ch * k * k) as f32).sqrt();
        Self {
            weight: Tensor::randn(&[out_ch, in_ch, k, k], std, rng),
            bias: Tensor::zeros(&[out_ch]),
            stride,
            pad,
        }
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> ConvVars {
        ConvVars {
            weight: bind(g, &self.weight, trainable),
            bias: bind(g, &self.bias, trainable),
            stride: self.stride,
            pad: self.pad,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConvVars {
    pub weight: Var,
    pub bias: Var,
    pub stride: usize,
    pub pad: usize,
}

impl ConvVars {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let y = g.conv2d(x, self.weight, self.stride, self.pad)?;
        g.add_channel_bias(y, self.bias)
    }
}

/// Affine map `x W + b` with `W` stored `in x out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    /// Weights drawn from `N(0, gain / in)`.
    pub fn normal<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f32, rng: &mut R) -> Self {
        let std = (gain / inputs as f32).sqrt();
        Self {
            weight: Tensor::randn(&[inputs, outputs], std, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> LinearVars {
        LinearVars {
            weight: bind(g, &self.weight, trainable),
            bias: bind(g, &self.bias, trainable),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LinearVars {
    pub weight: Var,
    pub bias: Var,
}

impl LinearVars {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let y = g.matmul(x, self.weight)?;
        g.add(y, self.bias)
    }
}

fn bind(g: &mut Graph, t: &Tensor, trainable: bool) -> Var {
    if trainable {
        g.param(t.clone())
    } else {
        g.constant(t.clone())
    }
}

/// Stable 64-bit FNV-1a over the bit patterns of a parameter list.
pub fn param_checksum<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> u64 {
    let mut h = crate::train::checkpoint::Fnv1a::new();
    for t in params {
        for d in t.shape() {
            h.update(&(*d as u32).to_le_bytes());
        }
        for v in t.data() {
            h.update(&v.to_le_bytes());
        }
    }
    h.finish()
}
