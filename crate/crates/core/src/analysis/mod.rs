//! Style-space analysis: embedding export, PCA, exact t-SNE, nearest-neighbour
//! artist classification and latent interpolation.

mod knn;
mod pca;
mod tsne;

pub use knn::{knn_classify, KnnResult};
pub use pca::{pca, Pca};
pub use tsne::{conditional_affinities, kl_divergence, tsne, Affinities, TsneConfig, TsneResult};

use crate::data::{save_image, DatasetManifest};
use crate::error::{contract_err, dim_err, Error, Result};
use crate::nets::{ModelVariant, StyleModel, IMAGE_CHANNELS, IMAGE_SIZE};
use crate::tensor::Tensor;
use crate::train::{embed_manifest, Checkpoint};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleEmbedding {
    pub id: String,
    pub variant: ModelVariant,
    pub vector: Vec<f32>,
    /// Artist (class) label carried along for classification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artist: Option<String>,
}

/// Embeddings of every readable image, plus the ones that failed.
#[derive(Debug)]
pub struct EmbedReport {
    pub embeddings: Vec<StyleEmbedding>,
    pub errors: Vec<(String, Error)>,
}

pub fn embed_dataset(checkpoint: &Checkpoint, manifest: &DatasetManifest) -> EmbedReport {
    let model = &checkpoint.model;
    let (map, errors) = embed_manifest(model, manifest);
    EmbedReport {
        embeddings: map
            .into_iter()
            .map(|(id, vector)| StyleEmbedding {
                artist: manifest.get(&id).map(|r| r.artist.clone()),
                id,
                variant: model.variant,
                vector,
            })
            .collect(),
        errors,
    }
}

pub fn save_embeddings(path: &Path, embeddings: &[StyleEmbedding]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for e in embeddings {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an embedding file; all vectors must share one length.
pub fn load_embeddings(path: &Path) -> Result<Vec<StyleEmbedding>> {
    let mut out: Vec<StyleEmbedding> = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: StyleEmbedding =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if let Some(first) = out.first() {
            if first.vector.len() != e.vector.len() {
                return dim_err(format!(
                    "{}:{}: embedding length {} differs from {}",
                    path.display(),
                    i + 1,
                    e.vector.len(),
                    first.vector.len()
                ));
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// Row-major `n x d` f64 copy of a set of vectors.
pub fn to_matrix(vectors: &[Vec<f32>]) -> Result<(usize, usize, Vec<f64>)> {
    let n = vectors.len();
    let d = vectors.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(n * d);
    for v in vectors {
        if v.len() != d {
            return dim_err(format!("vector of length {} among vectors of length {d}", v.len()));
        }
        data.extend(v.iter().map(|x| *x as f64));
    }
    Ok((n, d, data))
}

/// PCA down to `min(d, 50, n)` dimensions followed by t-SNE, with the
/// perplexity clamped to what `n` supports.
pub fn project_2d(vectors: &[Vec<f32>], cfg: &TsneConfig) -> Result<TsneResult> {
    let (n, d, x) = to_matrix(vectors)?;
    if n < 4 {
        return contract_err(format!("t-SNE needs at least 4 points, got {n}"));
    }
    let k = d.min(50).min(n);
    let reduced = pca(&x, n, d, k)?;
    let max_perp = (n - 1) as f64 / 3.0;
    let cfg = TsneConfig {
        perplexity: cfg.perplexity.min(max_perp * 0.999),
        ..cfg.clone()
    };
    tsne(&reduced.projected, n, k, &cfg)
}

/// The `count` most frequent labels, most frequent first, ties by label.
pub fn top_labels<'a>(labels: impl IntoIterator<Item = &'a str>, count: usize) -> Vec<String> {
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for l in labels {
        *freq.entry(l).or_default() += 1;
    }
    let mut v: Vec<(&str, usize)> = freq.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    v.into_iter().take(count).map(|(l, _)| l.to_string()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedPoint {
    pub id: String,
    pub artist: String,
    pub x: f64,
    pub y: f64,
}

pub fn write_projection(path: &Path, points: &[ProjectedPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "artist", "x", "y"])?;
    for p in points {
        w.write_record([p.id.as_str(), p.artist.as_str(), &p.x.to_string(), &p.y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// One decoded step of a latent interpolation.
#[derive(Clone, Debug)]
pub struct Frame {
    pub index: usize,
    pub t: f32,
    pub z: Vec<f32>,
    pub image: Tensor,
}

pub fn frame_name(index: usize, t: f32) -> String {
    format!("frame_{index}_{t:.3}.png")
}

fn single(image: &Tensor) -> Result<Tensor> {
    match image.shape() {
        [c, h, w] if *c == IMAGE_CHANNELS && *h == IMAGE_SIZE && *w == IMAGE_SIZE => {
            image.clone().reshape(&[1, IMAGE_CHANNELS, IMAGE_SIZE, IMAGE_SIZE])
        }
        [1, c, h, w] if *c == IMAGE_CHANNELS && *h == IMAGE_SIZE && *w == IMAGE_SIZE => Ok(image.clone()),
        s => dim_err(format!("expected one 3 x 64 x 64 image, got {s:?}")),
    }
}

/// Decodes `(1 - t) z_src + t z_tgt` for `steps` evenly spaced `t` in `[0, 1]`,
/// where `z` are encoder means.
pub fn interpolate(model: &StyleModel, source: &Tensor, target: &Tensor, steps: usize) -> Result<Vec<Frame>> {
    let Some(vae) = model.vae.as_ref() else {
        return contract_err(format!("variant {} has no decoder to interpolate with", model.variant));
    };
    if steps < 2 {
        return contract_err(format!("interpolation needs at least 2 steps, got {steps}"));
    }
    let zs = vae.encode(&single(source)?)?.remove(0).mean;
    let zt = vae.encode(&single(target)?)?.remove(0).mean;
    (0..steps)
        .map(|i| {
            let t = i as f32 / (steps - 1) as f32;
            let z: Vec<f32> = zs.iter().zip(&zt).map(|(a, b)| (1.0 - t) * a + t * b).collect();
            let image = vae.decode(&Tensor::new(&[1, z.len()], z.clone())?)?;
            Ok(Frame { index: i, t, z, image })
        })
        .collect()
}

/// Writes frames as `frame_{index}_{t}.png` under `dir`, returning the paths.
pub fn save_frames(frames: &[Frame], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    frames
        .iter()
        .map(|f| {
            let p = dir.join(frame_name(f.index, f.t));
            save_image(&f.image, &p)?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_labels_breaks_ties_lexicographically() {
        let labels = ["b", "a", "c", "b", "a", "d", "e", "f", "c"];
        assert_eq!(top_labels(labels, 5), vec!["a", "b", "c", "d", "e"]);
        assert_eq!(top_labels(labels, 1), vec!["a"]);
    }

    #[test]
    fn frame_names() {
        assert_eq!(frame_name(0, 0.0), "frame_0_0.000.png");
        assert_eq!(frame_name(3, 1.0 / 3.0), "frame_3_0.333.png");
    }

    #[test]
    fn embeddings_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        let e = vec![
            StyleEmbedding {
                id: "a".into(),
                variant: ModelVariant::Vae,
                vector: vec![0.1, -2.0],
                artist: Some("x".into()),
            },
            StyleEmbedding {
                id: "b".into(),
                variant: ModelVariant::Vae,
                vector: vec![3.0, 1e-8],
                artist: None,
            },
        ];
        save_embeddings(&p, &e).unwrap();
        assert_eq!(load_embeddings(&p).unwrap(), e);
        std::fs::write(
            &p,
            "{\"id\":\"a\",\"variant\":\"vae\",\"vector\":[1]}\n{\"id\":\"b\",\"variant\":\"vae\",\"vector\":[1,2]}\n",
        )
        .unwrap();
        assert!(matches!(load_embeddings(&p), Err(Error::Dimension(_))));
    }

    #[test]
    fn interpolation_endpoints_and_midpoint() {
        let model = StyleModel::new(ModelVariant::Vae, 8, 2, crate::nets::PerceptualNet::new(7));
        let img = |s: f32| {
            Tensor::new(
                &[3, 64, 64],
                (0..3 * 64 * 64).map(|i| ((i as f32 * s).sin() + 1.0) / 2.0).collect(),
            )
            .unwrap()
        };
        let (a, b) = (img(0.01), img(0.037));
        let frames = interpolate(&model, &a, &b, 3).unwrap();
        let vae = model.vae.as_ref().unwrap();
        let recon = |x: &Tensor| {
            let mu = vae.encode(&single(x).unwrap()).unwrap().remove(0).mean;
            vae.decode(&Tensor::new(&[1, 8], mu).unwrap()).unwrap()
        };
        assert_eq!(frames[0].image, recon(&a));
        assert_eq!(frames[2].image, recon(&b));
        for ((m, s), t) in frames[1].z.iter().zip(&frames[0].z).zip(&frames[2].z) {
            assert!((m - (s + t) / 2.0).abs() <= 1e-7);
        }
        let head = StyleModel::new(ModelVariant::FrozenNetTriplet, 8, 2, crate::nets::PerceptualNet::new(7));
        assert!(matches!(interpolate(&head, &a, &b, 3), Err(Error::Contract(_))));
        assert!(matches!(interpolate(&model, &a, &b, 1), Err(Error::Contract(_))));
    }
}
