use super::layers::{Conv, ConvVars, Linear, LinearVars};
use super::{check_image_batch, take_named, IMAGE_CHANNELS, IMAGE_SIZE};
use crate::error::{contract_err, dim_err, Result};
use crate::tensor::{Graph, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const ENCODER_CHANNELS: [usize; 5] = [IMAGE_CHANNELS, 32, 64, 128, 256];
/// Spatial size after the four stride-2 encoder blocks.
const BOTTLENECK: usize = IMAGE_SIZE / 16;
const FLAT: usize = 256 * BOTTLENECK * BOTTLENECK;

/// Posterior parameters of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode {
    pub mean: Vec<f32>,
    pub logvar: Vec<f32>,
}

impl LatentCode {
    pub fn new(mean: Vec<f32>, logvar: Vec<f32>) -> Result<Self> {
        if mean.len() != logvar.len() {
            return dim_err(format!(
                "latent mean has {} entries but logvar has {}",
                mean.len(),
                logvar.len()
            ));
        }
        Ok(Self { mean, logvar })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `z = mean + exp(logvar / 2) * noise`.
pub fn reparameterize(code: &LatentCode, noise: &[f32]) -> Result<Vec<f32>> {
    if noise.len() != code.dim() {
        return dim_err(format!(
            "noise has {} entries, latent dim is {}",
            noise.len(),
            code.dim()
        ));
    }
    Ok(code
        .mean
        .iter()
        .zip(&code.logvar)
        .zip(noise)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

/// Convolutional VAE: four stride-2 conv blocks with two linear heads for
/// mean and log-variance; the decoder mirrors it with nearest upsampling.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeModel {
    pub latent_dim: usize,
    pub encoder: Vec<Conv>,
    pub mu_head: Linear,
    pub logvar_head: Linear,
    pub decoder_fc: Linear,
    pub decoder: Vec<Conv>,
}

#[derive(Clone, Debug)]
pub struct VaeVars {
    pub encoder: Vec<ConvVars>,
    pub mu_head: LinearVars,
    pub logvar_head: LinearVars,
    pub decoder_fc: LinearVars,
    pub decoder: Vec<ConvVars>,
}

impl VaeVars {
    /// Parameter handles in the same order as [`VaeModel::params_mut`].
    pub fn params(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for c in &self.encoder {
            out.extend([c.weight, c.bias]);
        }
        for l in [&self.mu_head, &self.logvar_head, &self.decoder_fc] {
            out.extend([l.weight, l.bias]);
        }
        for c in &self.decoder {
            out.extend([c.weight, c.bias]);
        }
        out
    }
}

impl VaeModel {
    pub fn new(latent_dim: usize, seed: u64) -> Self {
        assert!(latent_dim > 0, "latent_dim must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = ENCODER_CHANNELS
            .windows(2)
            .map(|w| Conv::he(w[0], w[1], 4, 2, 1, &mut rng))
            .collect();
        let mu_head = Linear::normal(FLAT, latent_dim, 1.0, &mut rng);
        let logvar_head = Linear::normal(FLAT, latent_dim, 0.01, &mut rng);
        let decoder_fc = Linear::normal(latent_dim, FLAT, 2.0, &mut rng);
        let decoder = ENCODER_CHANNELS
            .iter()
            .rev()
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| Conv::he(*w[0], *w[1], 3, 1, 1, &mut rng))
            .collect();
        Self {
            latent_dim,
            encoder,
            mu_head,
            logvar_head,
            decoder_fc,
            decoder,
        }
    }

    pub fn num_encoder_blocks(&self) -> usize {
        self.encoder.len()
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> VaeVars {
        VaeVars {
            encoder: self.encoder.iter().map(|c| c.bind(g, trainable)).collect(),
            mu_head: self.mu_head.bind(g, trainable),
            logvar_head: self.logvar_head.bind(g, trainable),
            decoder_fc: self.decoder_fc.bind(g, trainable),
            decoder: self.decoder.iter().map(|c| c.bind(g, trainable)).collect(),
        }
    }

    /// Activation after the first `blocks` encoder conv blocks.
    pub fn encoder_features(&self, g: &mut Graph, vars: &VaeVars, images: Var, blocks: usize) -> Result<Var> {
        check_image_batch(g.shape(images))?;
        if blocks > vars.encoder.len() {
            return contract_err(format!("encoder has only {} blocks", vars.encoder.len()));
        }
        let mut x = images;
        for c in &vars.encoder[..blocks] {
            let y = c.forward(g, x)?;
            x = g.relu(y);
        }
        Ok(x)
    }

    /// Continues the encoder from the output of block `from` (1-based) to `(mean, logvar)`.
    pub fn encoder_tail(&self, g: &mut Graph, vars: &VaeVars, features: Var, from: usize) -> Result<(Var, Var)> {
        let mut x = features;
        for c in &vars.encoder[from..] {
            let y = c.forward(g, x)?;
            x = g.relu(y);
        }
        let n = g.shape(x)[0];
        let flat = g.reshape(x, &[n, FLAT])?;
        let mu = vars.mu_head.forward(g, flat)?;
        let logvar = vars.logvar_head.forward(g, flat)?;
        Ok((mu, logvar))
    }

    /// `N x 3 x 64 x 64` images to `(mean, logvar)`, each `N x latent_dim`.
    pub fn encode_vars(&self, g: &mut Graph, vars: &VaeVars, images: Var) -> Result<(Var, Var)> {
        let blocks = vars.encoder.len();
        let f = self.encoder_features(g, vars, images, blocks)?;
        self.encoder_tail(g, vars, f, blocks)
    }

    /// `N x latent_dim` codes to `N x 3 x 64 x 64` images in `[0, 1]`.
    pub fn decode_vars(&self, g: &mut Graph, vars: &VaeVars, z: Var) -> Result<Var> {
        let s = g.shape(z);
        if s.len() != 2 || s[1] != self.latent_dim {
            return dim_err(format!("decoder expects N x {} codes, got {s:?}", self.latent_dim));
        }
        let n = s[0];
        let h = vars.decoder_fc.forward(g, z)?;
        let h = g.relu(h);
        let mut x = g.reshape(h, &[n, 256, BOTTLENECK, BOTTLENECK])?;
        let last = vars.decoder.len() - 1;
        for (i, c) in vars.decoder.iter().enumerate() {
            let up = g.upsample2x(x)?;
            let y = c.forward(g, up)?;
            x = if i == last { g.sigmoid(y) } else { g.relu(y) };
        }
        Ok(x)
    }

    /// Posterior parameters for every image of the batch.
    pub fn encode(&self, images: &Tensor) -> Result<Vec<LatentCode>> {
        check_image_batch(images.shape())?;
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let x = g.constant(images.clone());
        let (mu, lv) = self.encode_vars(&mut g, &vars, x)?;
        let n = images.shape()[0];
        (0..n)
            .map(|i| LatentCode::new(g.value(mu).row(i).to_vec(), g.value(lv).row(i).to_vec()))
            .collect()
    }

    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let zv = g.constant(z.clone());
        let out = self.decode_vars(&mut g, &vars, zv)?;
        Ok(g.value(out).clone())
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, c) in self.encoder.iter().enumerate() {
            out.push((format!("vae.enc.{i}.weight"), &c.weight));
            out.push((format!("vae.enc.{i}.bias"), &c.bias));
        }
        for (name, l) in [
            ("mu", &self.mu_head),
            ("logvar", &self.logvar_head),
            ("dec_fc", &self.decoder_fc),
        ] {
            out.push((format!("vae.{name}.weight"), &l.weight));
            out.push((format!("vae.{name}.bias"), &l.bias));
        }
        for (i, c) in self.decoder.iter().enumerate() {
            out.push((format!("vae.dec.{i}.weight"), &c.weight));
            out.push((format!("vae.dec.{i}.bias"), &c.bias));
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for c in &mut self.encoder {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        for l in [&mut self.mu_head, &mut self.logvar_head, &mut self.decoder_fc] {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        for c in &mut self.decoder {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out
    }

    pub fn from_named(tensors: &BTreeMap<String, Tensor>, latent_dim: usize) -> Result<Self> {
        let mut model = Self::new(latent_dim, 0);
        let names: Vec<String> = model.named_params().into_iter().map(|(n, _)| n).collect();
        for (name, slot) in names.iter().zip(model.params_mut()) {
            *slot = take_named(tensors, name, slot.shape())?;
        }
        Ok(model)
    }
}
