//! Gradient-weighted activation maps of the triplet loss.
//!
//! The network is cut at a convolutional block; the activations of anchor,
//! positive and negative at that block become leaves, the rest of the network
//! maps them to embeddings, and the single-triplet loss is differentiated back
//! to them. Channel weights are the spatial means of those gradients.

use crate::data::{save_image, tensor_to_rgb};
use crate::error::{contract_err, dim_err, Result};
use crate::losses::{triplet_loss, TripletBatch};
use crate::nets::{ModelVariant, StyleModel, IMAGE_CHANNELS, IMAGE_SIZE};
use crate::tensor::{Graph, Tensor, Var};
use std::path::Path;

/// A coarse importance map over one image.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMap {
    pub image_id: String,
    /// `height x width`, in `[0, 1]`.
    pub values: Vec<f32>,
    pub height: usize,
    pub width: usize,
    pub target_layer: String,
}

impl ActivationMap {
    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    /// Bilinear resampling to `size x size` (pixel-centre aligned).
    pub fn upsample(&self, size: usize) -> Vec<f32> {
        let (h, w) = (self.height, self.width);
        let coord = |dst: usize, src_len: usize| {
            let s = ((dst as f32 + 0.5) * src_len as f32 / size as f32 - 0.5).clamp(0.0, (src_len - 1) as f32);
            let i0 = s.floor() as usize;
            (i0, (i0 + 1).min(src_len - 1), s - i0 as f32)
        };
        let mut out = Vec::with_capacity(size * size);
        for y in 0..size {
            let (y0, y1, fy) = coord(y, h);
            for x in 0..size {
                let (x0, x1, fx) = coord(x, w);
                let v = |yy: usize, xx: usize| self.values[yy * w + xx];
                let top = v(y0, x0) * (1.0 - fx) + v(y0, x1) * fx;
                let bottom = v(y1, x0) * (1.0 - fx) + v(y1, x1) * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
        out
    }

    pub fn save_grayscale(&self, path: &Path) -> Result<()> {
        let up = self.upsample(IMAGE_SIZE);
        let s = IMAGE_SIZE as u32;
        image::GrayImage::from_fn(s, s, |x, y| {
            image::Luma([(up[(y * s + x) as usize].clamp(0.0, 1.0) * 255.0).round() as u8])
        })
        .save(path)?;
        Ok(())
    }

    /// Colour-mapped map composited over `image` at 40% opacity.
    pub fn save_overlay(&self, image: &Tensor, path: &Path) -> Result<()> {
        let base = tensor_to_rgb(image)?;
        if base.width() as usize != IMAGE_SIZE || base.height() as usize != IMAGE_SIZE {
            return dim_err(format!("overlay needs a {IMAGE_SIZE} x {IMAGE_SIZE} image"));
        }
        let up = self.upsample(IMAGE_SIZE);
        let out = image::RgbImage::from_fn(base.width(), base.height(), |x, y| {
            let v = up[(y as usize) * IMAGE_SIZE + x as usize].clamp(0.0, 1.0);
            let colour = [3.0, 2.0, 1.0].map(|c: f32| (1.5 - (4.0 * v - c).abs()).clamp(0.0, 1.0));
            let px = base.get_pixel(x, y);
            image::Rgb([0, 1, 2].map(|c| {
                let mixed = 0.6 * px[c] as f32 / 255.0 + 0.4 * colour[c];
                (mixed * 255.0).round() as u8
            }))
        });
        out.save(path)?;
        Ok(())
    }
}

/// Maps for anchor, positive and negative.
#[derive(Clone, Debug)]
pub struct CamResult {
    pub maps: [ActivationMap; 3],
    /// Spatial-mean gradient per channel, per image.
    pub channel_weights: [Vec<f32>; 3],
    pub loss: f32,
    /// The triplet already satisfies the margin, so every map is zero.
    pub inactive: bool,
}

/// A model cut at one convolutional block, holding the activations of a triplet there.
pub struct CamProbe<'a> {
    model: &'a StyleModel,
    layer: usize,
    alpha: f32,
    activations: Tensor,
}

fn layer_count(model: &StyleModel) -> usize {
    match &model.vae {
        Some(vae) if model.variant.has_vae() => vae.num_encoder_blocks(),
        _ => model.perceptual.num_blocks(),
    }
}

/// Name of a cut point, e.g. `vae.enc.4` or `percep.5`.
pub fn layer_name(model: &StyleModel, layer: usize) -> String {
    if model.variant.has_vae() {
        format!("vae.enc.{layer}")
    } else {
        format!("percep.{layer}")
    }
}

/// Last convolutional block before flattening.
pub fn default_layer(model: &StyleModel) -> usize {
    layer_count(model)
}

fn as_batch(images: [&Tensor; 3]) -> Result<Tensor> {
    let flat: Vec<Tensor> = images
        .iter()
        .map(|t| match t.shape() {
            [c, h, w] | [1, c, h, w] if *c == IMAGE_CHANNELS && *h == IMAGE_SIZE && *w == IMAGE_SIZE => {
                (*t).clone().reshape(&[IMAGE_CHANNELS, IMAGE_SIZE, IMAGE_SIZE])
            }
            s => dim_err(format!("expected a 3 x 64 x 64 image, got {s:?}")),
        })
        .collect::<Result<_>>()?;
    Tensor::stack(&flat)
}

impl<'a> CamProbe<'a> {
    pub fn new(model: &'a StyleModel, images: [&Tensor; 3], layer: Option<usize>, alpha: f32) -> Result<Self> {
        let count = layer_count(model);
        let layer = layer.unwrap_or(count);
        if layer == 0 || layer > count {
            return contract_err(format!("target layer {layer} outside 1..={count}"));
        }
        if model.variant == ModelVariant::FrozenNetTriplet && model.head.is_none() {
            return contract_err("head variant without a head");
        }
        let batch = as_batch(images)?;
        let mut g = Graph::new();
        let x = g.constant(batch);
        let a = match (&model.vae, model.variant.has_vae()) {
            (Some(vae), true) => {
                let vars = vae.bind(&mut g, false);
                vae.encoder_features(&mut g, &vars, x, layer)?
            }
            _ => {
                let vars = model.perceptual.bind(&mut g);
                model.perceptual.blocks_between(&mut g, &vars, x, 0, layer)?
            }
        };
        Ok(Self {
            model,
            layer,
            alpha,
            activations: g.value(a).clone(),
        })
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    /// `3 x C x h x w` activations at the cut.
    pub fn activations(&self) -> &Tensor {
        &self.activations
    }

    fn embeddings(&self, g: &mut Graph, a: Var) -> Result<Var> {
        let m = self.model;
        match (&m.vae, m.variant.has_vae()) {
            (Some(vae), true) => {
                let vars = vae.bind(g, false);
                Ok(vae.encoder_tail(g, &vars, a, self.layer)?.0)
            }
            _ => {
                let net = &m.perceptual;
                let vars = net.bind(g);
                let x = net.blocks_between(g, &vars, a, self.layer, net.num_blocks())?;
                let f = net.head_from_last_block(g, &vars, x)?;
                match (&m.head, m.variant) {
                    (Some(head), ModelVariant::FrozenNetTriplet) => {
                        let hv = head.bind(g, false);
                        head.forward(g, &hv, f)
                    }
                    _ => Ok(f),
                }
            }
        }
    }

    fn loss_var(&self, g: &mut Graph, a: Var) -> Result<(Var, usize)> {
        let e = self.embeddings(g, a)?;
        let batch = TripletBatch {
            anchors: g.narrow(e, 0, 1)?,
            positives: g.narrow(e, 1, 1)?,
            negatives: g.narrow(e, 2, 1)?,
        };
        let out = triplet_loss(g, &batch, self.alpha, 1.0)?;
        Ok((out.loss, out.n_plus))
    }

    /// Triplet loss with the cut activations replaced by `activations`.
    pub fn loss_at(&self, activations: &Tensor) -> Result<f32> {
        if activations.shape() != self.activations.shape() {
            return dim_err(format!(
                "activations {:?} do not match the cut {:?}",
                activations.shape(),
                self.activations.shape()
            ));
        }
        let mut g = Graph::new();
        let a = g.constant(activations.clone());
        let (l, _) = self.loss_var(&mut g, a)?;
        Ok(g.value(l).item())
    }

    /// Loss, `n_plus` and the gradient with respect to the cut activations.
    pub fn loss_and_grad(&self) -> Result<(f32, usize, Tensor)> {
        let mut g = Graph::new();
        let a = g.param(self.activations.clone());
        let (l, n_plus) = self.loss_var(&mut g, a)?;
        g.backward(l)?;
        let grad = g
            .grad(a)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(self.activations.shape()));
        Ok((g.value(l).item(), n_plus, grad))
    }
}

/// Grad-CAM maps for `(anchor, positive, negative)` at `target_layer`
/// (default: the last convolutional block).
pub fn grad_cam(
    model: &StyleModel,
    ids: [&str; 3],
    images: [&Tensor; 3],
    target_layer: Option<usize>,
    alpha: f32,
) -> Result<CamResult> {
    let probe = CamProbe::new(model, images, target_layer, alpha)?;
    let (loss, n_plus, grad) = probe.loss_and_grad()?;
    let act = probe.activations();
    let (c, h, w) = (act.shape()[1], act.shape()[2], act.shape()[3]);
    let hw = h * w;
    let inactive = n_plus == 0;
    let name = layer_name(model, probe.layer());
    let mut weights: [Vec<f32>; 3] = Default::default();
    let maps = [0, 1, 2].map(|i| {
        let a = &act.data()[i * c * hw..(i + 1) * c * hw];
        let gr = &grad.data()[i * c * hw..(i + 1) * c * hw];
        let wk: Vec<f32> = (0..c)
            .map(|k| (gr[k * hw..(k + 1) * hw].iter().map(|v| *v as f64).sum::<f64>() / hw as f64) as f32)
            .collect();
        let mut values = vec![0.0f32; hw];
        if !inactive {
            for (k, wv) in wk.iter().enumerate() {
                for (v, av) in values.iter_mut().zip(&a[k * hw..(k + 1) * hw]) {
                    *v += wv * av;
                }
            }
            values.iter_mut().for_each(|v| *v = v.max(0.0));
            let max = values.iter().copied().fold(0.0, f32::max);
            if max > 0.0 {
                values.iter_mut().for_each(|v| *v /= max);
            }
        }
        weights[i] = wk;
        ActivationMap {
            image_id: ids[i].to_string(),
            values,
            height: h,
            width: w,
            target_layer: name.clone(),
        }
    });
    Ok(CamResult {
        maps,
        channel_weights: weights,
        loss,
        inactive,
    })
}

/// Writes `{id}_cam.png` and `{id}_overlay.png` for each member of the triplet.
pub fn save_cam(result: &CamResult, images: [&Tensor; 3], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (map, img) in result.maps.iter().zip(images) {
        map.save_grayscale(&dir.join(format!("{}_cam.png", map.image_id)))?;
        map.save_overlay(img, &dir.join(format!("{}_overlay.png", map.image_id)))?;
    }
    Ok(())
}

/// Saves the three source images next to their maps, for side-by-side viewing.
pub fn save_sources(ids: [&str; 3], images: [&Tensor; 3], dir: &Path) -> Result<()> {
    for (id, img) in ids.iter().zip(images) {
        save_image(img, &dir.join(format!("{id}.png")))?;
    }
    Ok(())
}
