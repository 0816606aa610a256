//! Procedural portrait-like images whose style is fully described by a small
//! parameter vector, so triplets can be labelled analytically.

use super::{save_image, DatasetManifest, ImageRecord, Triplet, TripletLabel};
use crate::error::{contract_err, Error, Result};
use crate::nets::{IMAGE_CHANNELS, IMAGE_SIZE};
use crate::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    Plain,
    Gradient,
    Textured,
}

impl BackgroundKind {
    pub const ALL: [BackgroundKind; 3] = [Self::Plain, Self::Gradient, Self::Textured];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStyleParams {
    /// Background, face and clothing colours, RGB in `[0, 1]`.
    pub palette: [[f32; 3]; 3],
    /// Brush-stroke period, in `(0, 1]`.
    pub stroke_scale: f32,
    /// Per-pixel noise strength, in `[0, 1]`.
    pub noise_amplitude: f32,
    pub background_kind: BackgroundKind,
    pub class_id: usize,
    /// Seed of the per-pixel noise field.
    pub noise_seed: u64,
}

/// Weighted L2 distance over the style coordinates (class id and noise seed
/// are not style).
pub fn style_distance(p: &SyntheticStyleParams, q: &SyntheticStyleParams) -> f64 {
    let mut palette = 0.0f64;
    for (a, b) in p.palette.iter().flatten().zip(q.palette.iter().flatten()) {
        palette += (*a as f64 - *b as f64).powi(2);
    }
    palette /= 9.0;
    let ds = p.stroke_scale as f64 - q.stroke_scale as f64;
    let dn = p.noise_amplitude as f64 - q.noise_amplitude as f64;
    let bg = if p.background_kind == q.background_kind {
        0.0
    } else {
        1.0
    };
    (0.5 * palette + 0.2 * ds * ds + 0.2 * dn * dn + 0.1 * bg).sqrt()
}

pub type ParamsTable = BTreeMap<String, SyntheticStyleParams>;

fn inside_head(x: f32, y: f32) -> bool {
    let (dx, dy) = ((x - 32.0) / 10.0, (y - 24.0) / 13.0);
    dx * dx + dy * dy <= 1.0
}

fn inside_body(x: f32, y: f32) -> bool {
    let (dx, dy) = ((x - 32.0) / 24.0, (y - 66.0) / 24.0);
    dx * dx + dy * dy <= 1.0
}

/// Renders one image and its background mask (`true` = background pixel).
pub fn render(p: &SyntheticStyleParams) -> (Tensor, Vec<bool>) {
    let s = IMAGE_SIZE;
    let plane = s * s;
    let mut data = vec![0.0f32; IMAGE_CHANNELS * plane];
    let mut mask = vec![false; plane];
    let mut rng = ChaCha8Rng::seed_from_u64(p.noise_seed);
    let period = 2.0 + 10.0 * p.stroke_scale;
    let (sin_t, cos_t) = (0.6f32.sin(), 0.6f32.cos());
    for yi in 0..s {
        for xi in 0..s {
            let (x, y) = (xi as f32 + 0.5, yi as f32 + 0.5);
            let i = yi * s + xi;
            let (colour, figure) = if inside_head(x, y) {
                (p.palette[1], true)
            } else if inside_body(x, y) {
                (p.palette[2], true)
            } else {
                (p.palette[0], false)
            };
            mask[i] = !figure;
            let mut px = colour;
            if figure {
                let phase = (x * cos_t + y * sin_t) * std::f32::consts::TAU / period;
                let m = 0.12 * phase.sin();
                px.iter_mut().for_each(|v| *v += m);
            } else {
                match p.background_kind {
                    BackgroundKind::Plain => {}
                    BackgroundKind::Gradient => {
                        let t = y / s as f32;
                        for (v, c) in px.iter_mut().zip(p.palette[2]) {
                            *v = *v * (1.0 - 0.6 * t) + c * 0.6 * t;
                        }
                    }
                    BackgroundKind::Textured => {
                        let m = if (xi / 4 + yi / 4) % 2 == 0 { 0.15 } else { -0.15 };
                        px.iter_mut().for_each(|v| *v += m);
                    }
                }
            }
            let noise: f32 = rng.random_range(-1.0..1.0) * 0.25 * p.noise_amplitude;
            for c in 0..IMAGE_CHANNELS {
                data[c * plane + i] = (px[c] + noise).clamp(0.0, 1.0);
            }
        }
    }
    (
        Tensor::new(&[IMAGE_CHANNELS, s, s], data).expect("fixed image shape"),
        mask,
    )
}

fn jitter<R: Rng>(rng: &mut R, v: f32, sd: f32, lo: f32, hi: f32) -> f32 {
    let n: f32 = Normal::new(0.0, sd).expect("positive sd").sample(rng);
    (v + n).clamp(lo, hi)
}

/// Output of [`gen_synthetic`].
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub manifest: DatasetManifest,
    pub params: ParamsTable,
}

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const PARAMS_FILE: &str = "params.jsonl";

/// Writes `n_images` images (classes assigned round-robin) plus background
/// masks, `manifest.jsonl` and `params.jsonl` under `out_dir`.
pub fn gen_synthetic(n_images: usize, n_classes: usize, seed: u64, out_dir: &Path) -> Result<SyntheticCorpus> {
    if n_classes < 2 || n_images < n_classes {
        return contract_err(format!(
            "need n_images >= n_classes >= 2, got {n_images} images and {n_classes} classes"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids: Vec<SyntheticStyleParams> = (0..n_classes)
        .map(|class_id| SyntheticStyleParams {
            palette: [[0; 3]; 3].map(|c| c.map(|_: i32| rng.random_range(0.05..0.95))),
            stroke_scale: rng.random_range(0.1..1.0),
            noise_amplitude: rng.random_range(0.0..0.8),
            background_kind: BackgroundKind::ALL[rng.random_range(0..3)],
            class_id,
            noise_seed: 0,
        })
        .collect();

    let images = out_dir.join("images");
    let masks = out_dir.join("masks");
    fs::create_dir_all(&images)?;
    fs::create_dir_all(&masks)?;
    let mut records = Vec::with_capacity(n_images);
    let mut params = ParamsTable::new();
    for i in 0..n_images {
        let c = &centroids[i % n_classes];
        let p = SyntheticStyleParams {
            palette: c.palette.map(|col| col.map(|v| jitter(&mut rng, v, 0.04, 0.0, 1.0))),
            stroke_scale: jitter(&mut rng, c.stroke_scale, 0.04, 0.01, 1.0),
            noise_amplitude: jitter(&mut rng, c.noise_amplitude, 0.04, 0.0, 1.0),
            background_kind: c.background_kind,
            class_id: c.class_id,
            noise_seed: rng.random(),
        };
        let id = format!("syn_{i:05}");
        let (img, mask) = render(&p);
        let rel = Path::new("images").join(format!("{id}.png"));
        save_image(&img, &out_dir.join(&rel))?;
        save_mask(&mask, &masks.join(format!("{id}.png")))?;
        records.push(ImageRecord {
            id: id.clone(),
            path: rel,
            artist: p.class_id.to_string(),
            period: None,
        });
        params.insert(id, p);
    }
    let manifest = DatasetManifest::new(out_dir, records)?;
    manifest.save(&out_dir.join(MANIFEST_FILE))?;
    save_params(&params, &out_dir.join(PARAMS_FILE))?;
    Ok(SyntheticCorpus { manifest, params })
}

fn save_mask(mask: &[bool], path: &Path) -> Result<()> {
    let s = IMAGE_SIZE as u32;
    let img = image::GrayImage::from_fn(s, s, |x, y| {
        image::Luma([if mask[(y * s + x) as usize] { 255 } else { 0 }])
    });
    img.save(path)?;
    Ok(())
}

/// Reads a background mask written by [`gen_synthetic`].
pub fn load_mask(path: &Path) -> Result<Vec<bool>> {
    let img = image::open(path)?.to_luma8();
    Ok(img.pixels().map(|p| p[0] > 127).collect())
}

#[derive(Serialize, Deserialize)]
struct ParamsRow {
    id: String,
    #[serde(flatten)]
    params: SyntheticStyleParams,
}

pub fn save_params(params: &ParamsTable, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (id, p) in params {
        serde_json::to_writer(
            &mut w,
            &ParamsRow {
                id: id.clone(),
                params: p.clone(),
            },
        )?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<ParamsTable> {
    let mut out = ParamsTable::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ParamsRow =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.insert(row.id, row.params);
    }
    Ok(out)
}

/// Labels a triplet with the candidate closer in style to the anchor; exact
/// ties go to the lexicographically smaller id.
pub fn oracle_label(triplet: &Triplet, params: &ParamsTable) -> Result<TripletLabel> {
    let get = |id: &str| {
        params
            .get(id)
            .ok_or_else(|| Error::Contract(format!("image {id} has no synthetic parameters")))
    };
    let a = get(&triplet.anchor)?;
    let [c0, c1] = &triplet.candidates;
    let d0 = style_distance(a, get(c0)?);
    let d1 = style_distance(a, get(c1)?);
    let first_wins = d0 < d1 || (d0 == d1 && c0 < c1);
    let (pos, neg) = if first_wins { (c0, c1) } else { (c1, c0) };
    Ok(TripletLabel {
        anchor: triplet.anchor.clone(),
        positive: pos.clone(),
        negative: neg.clone(),
        annotator: "oracle".into(),
        labeled_at: 0,
    })
}
