//! Network definitions: the convolutional VAE, the frozen perceptual feature
//! network, the two-layer style head, and the variant bundle tying them together.
//!
//! Images are always `N x 3 x 64 x 64` with values in `[0, 1]`.

mod layers;
mod perceptual;
mod vae;

pub use layers::{param_checksum, Conv, ConvVars, Linear, LinearVars};
pub use perceptual::{PerceptualNet, PerceptualVars, FEATURE_DIM, PERCEPTUAL_SEED};
pub use vae::{reparameterize, LatentCode, VaeModel, VaeVars};

use crate::error::{contract_err, dim_err, Error, Result};
use crate::tensor::{Graph, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub const IMAGE_SIZE: usize = 64;
pub const IMAGE_CHANNELS: usize = 3;
pub const STYLE_DIM: usize = 1024;
pub const DEFAULT_LATENT_DIM: usize = 128;

/// Rejects anything that is not an `N x 3 x 64 x 64` batch.
pub fn check_image_batch(shape: &[usize]) -> Result<usize> {
    if shape.len() != 4 || shape[1] != IMAGE_CHANNELS || shape[2] != IMAGE_SIZE || shape[3] != IMAGE_SIZE {
        return dim_err(format!(
            "expected N x {IMAGE_CHANNELS} x {IMAGE_SIZE} x {IMAGE_SIZE} images, got {shape:?}"
        ));
    }
    Ok(shape[0])
}

/// Nonlinearity between the two style-head layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadActivation {
    Relu,
    Identity,
}

/// Two linear layers mapping the 4096-d frozen features to a 1024-d style embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleEncoderHead {
    pub first: Linear,
    pub second: Linear,
    pub activation: HeadActivation,
}

#[derive(Clone, Copy, Debug)]
pub struct HeadVars {
    pub first: LinearVars,
    pub second: LinearVars,
}

impl HeadVars {
    pub fn params(&self) -> Vec<Var> {
        vec![self.first.weight, self.first.bias, self.second.weight, self.second.bias]
    }
}

impl StyleEncoderHead {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            first: Linear::normal(FEATURE_DIM, STYLE_DIM, 2.0, &mut rng),
            second: Linear::normal(STYLE_DIM, STYLE_DIM, 1.0, &mut rng),
            activation: HeadActivation::Relu,
        }
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> HeadVars {
        HeadVars {
            first: self.first.bind(g, trainable),
            second: self.second.bind(g, trainable),
        }
    }

    /// `features` is `N x 4096`; returns `N x 1024`.
    pub fn forward(&self, g: &mut Graph, vars: &HeadVars, features: Var) -> Result<Var> {
        let s = g.shape(features);
        if s.len() != 2 || s[1] != FEATURE_DIM {
            return dim_err(format!("style head expects N x {FEATURE_DIM} features, got {s:?}"));
        }
        let h = vars.first.forward(g, features)?;
        let h = match self.activation {
            HeadActivation::Relu => g.relu(h),
            HeadActivation::Identity => h,
        };
        vars.second.forward(g, h)
    }

    /// Style embedding of a single 4096-d feature vector.
    pub fn style_embed(&self, feature: &[f32]) -> Result<Vec<f32>> {
        if feature.len() != FEATURE_DIM {
            return dim_err(format!(
                "style_embed expects {FEATURE_DIM} features, got {}",
                feature.len()
            ));
        }
        let mut g = Graph::new();
        let vars = self.bind(&mut g, false);
        let x = g.constant(Tensor::new(&[1, FEATURE_DIM], feature.to_vec())?);
        let y = self.forward(&mut g, &vars, x)?;
        Ok(g.value(y).data().to_vec())
    }

    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("head.0.weight".into(), &self.first.weight),
            ("head.0.bias".into(), &self.first.bias),
            ("head.1.weight".into(), &self.second.weight),
            ("head.1.bias".into(), &self.second.bias),
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.first.weight,
            &mut self.first.bias,
            &mut self.second.weight,
            &mut self.second.bias,
        ]
    }

    pub fn from_named(tensors: &BTreeMap<String, Tensor>) -> Result<Self> {
        let mut head = Self::new(0);
        let names: Vec<String> = head.named_params().into_iter().map(|(n, _)| n).collect();
        for (name, slot) in names.iter().zip(head.params_mut()) {
            *slot = take_named(tensors, name, slot.shape())?;
        }
        Ok(head)
    }
}

pub(crate) fn take_named(tensors: &BTreeMap<String, Tensor>, name: &str, shape: &[usize]) -> Result<Tensor> {
    let t = tensors
        .get(name)
        .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
    if t.shape() != shape {
        return Err(Error::Format(format!(
            "tensor {name} has shape {:?}, expected {shape:?}",
            t.shape()
        )));
    }
    Ok(t.clone())
}

/// The four model variants compared in the analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum ModelVariant {
    /// Statistical prior only.
    Vae,
    /// Statistical prior plus expert triplets.
    VaeTriplet,
    /// Frozen feature network, no training.
    FrozenNet,
    /// Frozen feature network plus a triplet-trained style head.
    FrozenNetTriplet,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::Vae,
        ModelVariant::VaeTriplet,
        ModelVariant::FrozenNet,
        ModelVariant::FrozenNetTriplet,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::Vae => "vae",
            ModelVariant::VaeTriplet => "vae_triplet",
            ModelVariant::FrozenNet => "frozen_net",
            ModelVariant::FrozenNetTriplet => "frozen_net_triplet",
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn uses_triplet(self) -> bool {
        matches!(self, ModelVariant::VaeTriplet | ModelVariant::FrozenNetTriplet)
    }

    pub fn has_vae(self) -> bool {
        matches!(self, ModelVariant::Vae | ModelVariant::VaeTriplet)
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Contract(format!("unknown model variant {s:?}")))
    }
}

/// A constructed model of any variant: the VAE for VAE variants, the style
/// head for the head variant, and the frozen feature network in every case.
#[derive(Clone, Debug)]
pub struct StyleModel {
    pub variant: ModelVariant,
    pub vae: Option<VaeModel>,
    pub head: Option<StyleEncoderHead>,
    pub perceptual: PerceptualNet,
}

impl StyleModel {
    pub fn new(variant: ModelVariant, latent_dim: usize, seed: u64, perceptual: PerceptualNet) -> Self {
        Self {
            variant,
            vae: variant.has_vae().then(|| VaeModel::new(latent_dim, seed)),
            head: (variant == ModelVariant::FrozenNetTriplet).then(|| StyleEncoderHead::new(seed)),
            perceptual,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        match self.variant {
            ModelVariant::Vae | ModelVariant::VaeTriplet => self.vae.as_ref().map_or(0, |v| v.latent_dim),
            ModelVariant::FrozenNet => FEATURE_DIM,
            ModelVariant::FrozenNetTriplet => STYLE_DIM,
        }
    }

    /// Style embeddings (`N x D`) of an image batch: encoder means for VAE
    /// variants, frozen features or head output otherwise.
    pub fn embed(&self, images: &Tensor) -> Result<Tensor> {
        check_image_batch(images.shape())?;
        match (self.variant, &self.vae, &self.head) {
            (ModelVariant::Vae | ModelVariant::VaeTriplet, Some(vae), _) => {
                let mut g = Graph::new();
                let vars = vae.bind(&mut g, false);
                let x = g.constant(images.clone());
                let (mu, _) = vae.encode_vars(&mut g, &vars, x)?;
                Ok(g.value(mu).clone())
            }
            (ModelVariant::FrozenNet, _, _) => Ok(self.perceptual.perceptual_features(images)?.1),
            (ModelVariant::FrozenNetTriplet, _, Some(head)) => {
                let features = self.perceptual.perceptual_features(images)?.1;
                self.embed_features(head, &features)
            }
            _ => contract_err(format!(
                "model of variant {} is missing its trainable part",
                self.variant
            )),
        }
    }

    fn embed_features(&self, head: &StyleEncoderHead, features: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let vars = head.bind(&mut g, false);
        let x = g.constant(features.clone());
        let y = head.forward(&mut g, &vars, x)?;
        Ok(g.value(y).clone())
    }

    /// Every tensor of the bundle with its stable name.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        if let Some(vae) = &self.vae {
            out.extend(vae.named_params());
        }
        if let Some(head) = &self.head {
            out.extend(head.named_params());
        }
        out.extend(self.perceptual.named_params());
        out
    }

    /// Rebuilds a model from tensors produced by [`StyleModel::named_params`].
    pub fn from_named(variant: ModelVariant, latent_dim: usize, tensors: &BTreeMap<String, Tensor>) -> Result<Self> {
        Ok(Self {
            variant,
            vae: variant
                .has_vae()
                .then(|| VaeModel::from_named(tensors, latent_dim))
                .transpose()?,
            head: (variant == ModelVariant::FrozenNetTriplet)
                .then(|| StyleEncoderHead::from_named(tensors))
                .transpose()?,
            perceptual: PerceptualNet::from_named(tensors)?,
        })
    }

    /// Checksum of the trainable tensors (VAE or head).
    pub fn trainable_checksum(&self) -> u64 {
        let mut out: Vec<&Tensor> = Vec::new();
        if let Some(vae) = &self.vae {
            out.extend(vae.named_params().into_iter().map(|(_, t)| t));
        }
        if let Some(head) = &self.head {
            out.extend(head.named_params().into_iter().map(|(_, t)| t));
        }
        param_checksum(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variants_round_trip_through_strings_and_codes() {
        for v in ModelVariant::ALL {
            assert_eq!(v.as_str().parse::<ModelVariant>().unwrap(), v);
            assert_eq!(ModelVariant::from_code(v.code()), Some(v));
        }
        assert!("vgg".parse::<ModelVariant>().is_err());
    }

    #[test]
    fn style_head_output_is_1024() {
        let head = StyleEncoderHead::new(3);
        let feature: Vec<f32> = (0..FEATURE_DIM).map(|i| (i as f32 * 0.01).sin()).collect();
        assert_eq!(head.style_embed(&feature).unwrap().len(), STYLE_DIM);
        assert!(matches!(head.style_embed(&feature[..10]), Err(Error::Dimension(_))));
    }

    #[test]
    fn zero_head_gives_zero_embedding() {
        let mut head = StyleEncoderHead::new(3);
        for p in head.params_mut() {
            p.data_mut().fill(0.0);
        }
        let feature = vec![1.0; FEATURE_DIM];
        assert!(head.style_embed(&feature).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identity_head_with_zero_bias_is_linear() {
        let mut head = StyleEncoderHead::new(11);
        head.activation = HeadActivation::Identity;
        let x: Vec<f32> = (0..FEATURE_DIM).map(|i| ((i * 7 % 13) as f32 - 6.0) * 0.1).collect();
        let x2: Vec<f32> = x.iter().map(|v| 2.0 * v).collect();
        let y = head.style_embed(&x).unwrap();
        let y2 = head.style_embed(&x2).unwrap();
        for (a, b) in y.iter().zip(&y2) {
            assert!((2.0 * a - b).abs() <= 1e-4 * (1.0 + b.abs()), "{a} {b}");
        }
    }

    #[test]
    fn every_variant_is_constructible() {
        let percep = PerceptualNet::new(PERCEPTUAL_SEED);
        for v in ModelVariant::ALL {
            let m = StyleModel::new(v, 16, 1, percep.clone());
            assert_eq!(m.vae.is_some(), v.has_vae());
            assert_eq!(m.head.is_some(), v == ModelVariant::FrozenNetTriplet);
            let imgs = Tensor::full(&[2, 3, 64, 64], 0.5);
            let e = m.embed(&imgs).unwrap();
            assert_eq!(e.shape(), &[2, m.embedding_dim()]);
        }
    }
}
