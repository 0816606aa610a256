use super::layers::{param_checksum, Conv, ConvVars, Linear, LinearVars};
use super::{check_image_batch, take_named, IMAGE_CHANNELS};
use crate::error::{contract_err, Result};
use crate::tensor::{Graph, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub const FEATURE_DIM: usize = 4096;
pub const PERCEPTUAL_SEED: u64 = 7;

/// (out channels, stride) of each 3x3 block.
const BLOCKS: [(usize, usize); 5] = [(32, 2), (64, 2), (128, 2), (128, 1), (64, 2)];
/// Blocks (1-based) whose activations feed the perceptual loss.
const TAPS: [usize; 2] = [2, 4];
const FLAT: usize = 64 * 4 * 4;

/// Frozen convolutional feature extractor standing in for an ImageNet
/// network. Its parameters are bound as constants and never updated.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptualNet {
    blocks: Vec<Conv>,
    fc: Linear,
    tap_layers: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct PerceptualVars {
    blocks: Vec<ConvVars>,
    fc: LinearVars,
}

impl PerceptualNet {
    /// He-initialised from `seed`.
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = IMAGE_CHANNELS;
        let blocks = BLOCKS
            .iter()
            .map(|&(out, stride)| {
                let c = Conv::he(in_ch, out, 3, stride, 1, &mut rng);
                in_ch = out;
                c
            })
            .collect();
        Self {
            blocks,
            fc: Linear::normal(FLAT, FEATURE_DIM, 2.0, &mut rng),
            tap_layers: TAPS.to_vec(),
        }
    }

    pub fn tap_layers(&self) -> &[usize] {
        &self.tap_layers
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn bind(&self, g: &mut Graph) -> PerceptualVars {
        PerceptualVars {
            blocks: self.blocks.iter().map(|c| c.bind(g, false)).collect(),
            fc: self.fc.bind(g, false),
        }
    }

    /// Output of block `to` (1-based) starting from the output of block `from`
    /// (0 means the image itself).
    pub fn blocks_between(&self, g: &mut Graph, vars: &PerceptualVars, x: Var, from: usize, to: usize) -> Result<Var> {
        if from > to || to > self.blocks.len() {
            return contract_err(format!("invalid block range {from}..{to}"));
        }
        if from == 0 {
            check_image_batch(g.shape(x))?;
        }
        let mut x = x;
        for c in &vars.blocks[from..to] {
            let y = c.forward(g, x)?;
            x = g.relu(y);
        }
        Ok(x)
    }

    /// Tap activations only (enough for the perceptual loss).
    pub fn taps(&self, g: &mut Graph, vars: &PerceptualVars, images: Var) -> Result<Vec<Var>> {
        let mut out = Vec::with_capacity(self.tap_layers.len());
        let mut x = images;
        let mut at = 0;
        for &t in &self.tap_layers {
            x = self.blocks_between(g, vars, x, at, t)?;
            out.push(x);
            at = t;
        }
        Ok(out)
    }

    /// Flattens the last block output into the 4096-d feature vector.
    pub fn head_from_last_block(&self, g: &mut Graph, vars: &PerceptualVars, x: Var) -> Result<Var> {
        let n = g.shape(x)[0];
        let flat = g.reshape(x, &[n, FLAT])?;
        vars.fc.forward(g, flat)
    }

    /// Tap activations plus the final `N x 4096` features.
    pub fn forward(&self, g: &mut Graph, vars: &PerceptualVars, images: Var) -> Result<(Vec<Var>, Var)> {
        let taps = self.taps(g, vars, images)?;
        let last_tap = *self.tap_layers.last().unwrap_or(&0);
        let from = taps.last().copied().unwrap_or(images);
        let x = self.blocks_between(g, vars, from, last_tap, self.blocks.len())?;
        let features = self.head_from_last_block(g, vars, x)?;
        Ok((taps, features))
    }

    /// Tap activations and features as plain tensors.
    pub fn perceptual_features(&self, images: &Tensor) -> Result<(Vec<Tensor>, Tensor)> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g);
        let x = g.constant(images.clone());
        let (taps, f) = self.forward(&mut g, &vars, x)?;
        Ok((taps.iter().map(|t| g.value(*t).clone()).collect(), g.value(f).clone()))
    }

    pub fn checksum(&self) -> u64 {
        param_checksum(self.named_params().into_iter().map(|(_, t)| t))
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, c) in self.blocks.iter().enumerate() {
            out.push((format!("percep.{i}.weight"), &c.weight));
            out.push((format!("percep.{i}.bias"), &c.bias));
        }
        out.push(("percep.fc.weight".into(), &self.fc.weight));
        out.push(("percep.fc.bias".into(), &self.fc.bias));
        out
    }

    pub fn from_named(tensors: &BTreeMap<String, Tensor>) -> Result<Self> {
        let mut net = Self::new(PERCEPTUAL_SEED);
        let names: Vec<String> = net.named_params().into_iter().map(|(n, _)| n).collect();
        let mut slots: Vec<&mut Tensor> = Vec::new();
        for c in &mut net.blocks {
            slots.push(&mut c.weight);
            slots.push(&mut c.bias);
        }
        slots.push(&mut net.fc.weight);
        slots.push(&mut net.fc.bias);
        for (name, slot) in names.iter().zip(slots) {
            *slot = take_named(tensors, name, slot.shape())?;
        }
        Ok(net)
    }
}
