use crate::error::{contract_err, Error, Result};
use crate::losses::LossWeights;
use crate::nets::{ModelVariant, DEFAULT_LATENT_DIM};
use crate::tensor::AdamConfig;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: ModelVariant,
    pub weights: LossWeights,
    pub latent_dim: usize,
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epochs: usize,
    /// Triplets per step (images per step are three times this).
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: ModelVariant::VaeTriplet,
            weights: LossWeights::default(),
            latent_dim: DEFAULT_LATENT_DIM,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epochs: 40,
            batch_size: 8,
            seed: 0,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`].
pub const CONFIG_KEYS: [&str; 13] = [
    "variant",
    "latent_dim",
    "lr",
    "beta1",
    "beta2",
    "epochs",
    "batch_size",
    "seed",
    "lambda_kl",
    "lambda_recon",
    "lambda_triplet",
    "lambda_percep",
    "margin",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Contract(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.batch_size == 0 {
            return contract_err("batch_size must be >= 1");
        }
        if self.latent_dim == 0 {
            return contract_err("latent_dim must be >= 1");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return contract_err(format!("lr must be positive, got {}", self.lr));
        }
        for (n, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return contract_err(format!("{n} must lie in [0, 1), got {b}"));
            }
        }
        Ok(())
    }

    /// Sets one `key = value` entry.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "variant" => self.variant = value.trim().parse()?,
            "latent_dim" => self.latent_dim = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "beta1" => self.beta1 = parse(key, value)?,
            "beta2" => self.beta2 = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "lambda_kl" => self.weights.kl = parse(key, value)?,
            "lambda_recon" => self.weights.recon = parse(key, value)?,
            "lambda_triplet" => self.weights.triplet = parse(key, value)?,
            "lambda_percep" => self.weights.percep = parse(key, value)?,
            "margin" => self.weights.margin = parse(key, value)?,
            _ => return contract_err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// Applies a `key = value` text (one entry per line, `#` comments) on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Contract(format!("config line {}: expected key = value", i + 1)))?;
            self.set(k, v)
                .map_err(|e| Error::Contract(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let w = &self.weights;
        format!(
            "variant = {}\nlatent_dim = {}\nlr = {}\nbeta1 = {}\nbeta2 = {}\nepochs = {}\nbatch_size = {}\nseed = {}\n\
             lambda_kl = {}\nlambda_recon = {}\nlambda_triplet = {}\nlambda_percep = {}\nmargin = {}\n",
            self.variant,
            self.latent_dim,
            self.lr,
            self.beta1,
            self.beta2,
            self.epochs,
            self.batch_size,
            self.seed,
            w.kl,
            w.recon,
            w.triplet,
            w.percep,
            w.margin
        )
    }
}
