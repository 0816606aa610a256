//! Training objectives.
//!
//! Every loss is built on a [`Graph`] so that it can be differentiated:
//! KL divergence to the unit Gaussian prior, pixel reconstruction error,
//! frozen-feature perceptual error, the margin triplet loss normalised by the
//! number of violating triplets, and their weighted total.

use crate::error::{contract_err, dim_err, Error, Result};
use crate::nets::{PerceptualNet, PerceptualVars};
use crate::tensor::{Graph, Var};
use serde::{Deserialize, Serialize};

/// Loss coefficients and the triplet margin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub kl: f32,
    pub recon: f32,
    pub triplet: f32,
    pub percep: f32,
    /// Triplet margin (alpha).
    pub margin: f32,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            kl: 1e-3,
            recon: 1.0,
            triplet: 1.0,
            percep: 1e-2,
            margin: 0.2,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            kl: 0.0,
            recon: 0.0,
            triplet: 0.0,
            percep: 0.0,
            margin: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("kl", self.kl),
            ("recon", self.recon),
            ("triplet", self.triplet),
            ("percep", self.percep),
            ("margin", self.margin),
        ] {
            if !v.is_finite() || v < 0.0 {
                return contract_err(format!("loss weight {name} = {v} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Row-aligned `N x D` anchor, positive and negative embeddings.
#[derive(Clone, Copy, Debug)]
pub struct TripletBatch {
    pub anchors: Var,
    pub positives: Var,
    pub negatives: Var,
}

impl TripletBatch {
    /// Registers three aligned lists of vectors as trainable leaves.
    pub fn from_rows(
        g: &mut Graph,
        anchors: &[Vec<f32>],
        positives: &[Vec<f32>],
        negatives: &[Vec<f32>],
    ) -> Result<Self> {
        let n = anchors.len();
        if n == 0 {
            return contract_err("triplet batch is empty");
        }
        if positives.len() != n || negatives.len() != n {
            return dim_err(format!(
                "triplet lists have lengths {n}, {}, {}",
                positives.len(),
                negatives.len()
            ));
        }
        let d = anchors[0].len();
        let mut leaf = |rows: &[Vec<f32>]| -> Result<Var> {
            if rows.iter().any(|r| r.len() != d) {
                return dim_err("triplet vectors differ in length");
            }
            Ok(g.param(crate::Tensor::new(&[n, d], rows.concat())?))
        };
        Ok(Self {
            anchors: leaf(anchors)?,
            positives: leaf(positives)?,
            negatives: leaf(negatives)?,
        })
    }

    pub fn len(&self, g: &Graph) -> usize {
        g.shape(self.anchors)[0]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TripletOutput {
    pub loss: Var,
    /// Number of triplets whose hinge argument is strictly positive.
    pub n_plus: usize,
}

/// `mean_batch( 0.5 * sum_i (mu_i^2 + exp(logvar_i) - 1 - logvar_i) )`.
pub fn kl_loss(g: &mut Graph, mu: Var, logvar: Var) -> Result<Var> {
    let (sm, sl) = (g.shape(mu), g.shape(logvar));
    if sm != sl || sm.len() != 2 {
        return dim_err(format!("kl_loss: mean {sm:?} and logvar {sl:?}"));
    }
    let n = sm[0];
    let mu2 = g.square(mu);
    let var = g.exp(logvar);
    let t = g.add(mu2, var)?;
    let t = g.sub(t, logvar)?;
    let t = g.add_scalar(t, -1.0);
    let s = g.sum(t);
    Ok(g.scale(s, 0.5 / n as f32))
}

/// Per-image sum of squared pixel differences, averaged over the batch.
pub fn recon_loss(g: &mut Graph, input: Var, recon: Var) -> Result<Var> {
    let (si, sr) = (g.shape(input), g.shape(recon));
    if si != sr {
        return dim_err(format!("recon_loss: input {si:?} and reconstruction {sr:?}"));
    }
    let n = si[0];
    let d = g.sub(input, recon)?;
    let d2 = g.square(d);
    let s = g.sum(d2);
    Ok(g.scale(s, 1.0 / n as f32))
}

/// Sum over tap layers of the mean squared activation difference.
pub fn perceptual_loss(
    g: &mut Graph,
    net: &PerceptualNet,
    vars: &PerceptualVars,
    input: Var,
    recon: Var,
) -> Result<Var> {
    let (si, sr) = (g.shape(input), g.shape(recon));
    if si != sr {
        return dim_err(format!("perceptual_loss: input {si:?} and reconstruction {sr:?}"));
    }
    let a = net.taps(g, vars, input)?;
    let b = net.taps(g, vars, recon)?;
    let mut total: Option<Var> = None;
    for (x, y) in a.into_iter().zip(b) {
        let d = g.sub(x, y)?;
        let d2 = g.square(d);
        let m = g.mean(d2);
        total = Some(match total {
            Some(t) => g.add(t, m)?,
            None => m,
        });
    }
    total.ok_or_else(|| Error::Contract("perceptual network exposes no tap layers".into()))
}

/// `lambda / max(N+, 1) * sum_i [ |a-p|^2 - |a-n|^2 + alpha ]_+`.
pub fn triplet_loss(g: &mut Graph, batch: &TripletBatch, alpha: f32, lambda: f32) -> Result<TripletOutput> {
    let sa = g.shape(batch.anchors).to_vec();
    if sa.len() != 2 || sa[0] == 0 {
        return contract_err(format!("triplet batch must be N x D with N >= 1, got {sa:?}"));
    }
    for v in [batch.positives, batch.negatives] {
        if g.shape(v) != sa.as_slice() {
            return dim_err(format!("triplet members disagree: {sa:?} vs {:?}", g.shape(v)));
        }
    }
    if alpha.is_nan() || alpha < 0.0 {
        return contract_err(format!("triplet margin must be >= 0, got {alpha}"));
    }
    let dp = g.sub(batch.anchors, batch.positives)?;
    let dp = g.square(dp);
    let d_ap = g.sum_last(dp);
    let dn = g.sub(batch.anchors, batch.negatives)?;
    let dn = g.square(dn);
    let d_an = g.sum_last(dn);
    let arg = g.sub(d_ap, d_an)?;
    let arg = g.add_scalar(arg, alpha);
    let n_plus = g.value(arg).data().iter().filter(|v| **v > 0.0).count();
    let hinge = g.relu(arg);
    let s = g.sum(hinge);
    let loss = g.scale(s, lambda / n_plus.max(1) as f32);
    Ok(TripletOutput { loss, n_plus })
}

/// Scalar loss terms; absent terms are omitted from the total.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossComponents {
    pub kl: Option<Var>,
    pub recon: Option<Var>,
    pub triplet: Option<Var>,
    pub percep: Option<Var>,
}

/// `kl_w * kl + recon_w * recon + triplet_w * triplet + percep_w * percep`.
///
/// `triplet` must be the unweighted triplet term (built with `lambda = 1`) so
/// that the triplet coefficient is applied exactly once.
pub fn total_loss(g: &mut Graph, weights: &LossWeights, parts: &LossComponents) -> Result<Var> {
    weights.validate()?;
    let terms = [
        ("kl", parts.kl, weights.kl),
        ("recon", parts.recon, weights.recon),
        ("triplet", parts.triplet, weights.triplet),
        ("percep", parts.percep, weights.percep),
    ];
    for (name, v, _) in terms {
        if let Some(v) = v {
            let t = g.value(v);
            if t.numel() != 1 {
                return dim_err(format!("loss component {name} is not scalar: {:?}", t.shape()));
            }
            if !t.item().is_finite() {
                return Err(Error::Numeric(format!("loss component {name} is {}", t.item())));
            }
        }
    }
    let mut total: Option<Var> = None;
    for (_, v, w) in terms {
        let Some(v) = v else { continue };
        if w == 0.0 {
            continue;
        }
        let term = g.scale(v, w);
        total = Some(match total {
            Some(t) => g.add(t, term)?,
            None => term,
        });
    }
    Ok(match total {
        Some(t) => t,
        None => g.constant(crate::Tensor::scalar(0.0)),
    })
}
