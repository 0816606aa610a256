//! Corpus manifests, triplet labels, deterministic splits and image IO.
//!
//! A manifest is a newline-delimited JSON file with one
//! `{"id","path","artist","period"}` record per image; relative paths resolve
//! against the manifest's directory. Triplet labels live in an append-only
//! newline-delimited file of `{"anchor","positive","negative","annotator","labeled_at"}`.

mod ingest;
pub mod synthetic;

pub use ingest::{clean_artist, export_metadata_csv, ingest, parse_year, IngestReport};
pub use synthetic::{
    gen_synthetic, load_mask, load_params, oracle_label, render, save_params, style_distance, BackgroundKind,
    ParamsTable, SyntheticCorpus, SyntheticStyleParams, MANIFEST_FILE, PARAMS_FILE,
};

use crate::error::{contract_err, Error, Result};
use crate::nets::{IMAGE_CHANNELS, IMAGE_SIZE};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

/// One image of a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: PathBuf,
    pub artist: String,
    pub period: Option<i32>,
}

/// Image records ordered by id, with the directory relative paths resolve against.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub records: Vec<ImageRecord>,
}

impl DatasetManifest {
    /// Sorts by id and rejects duplicate ids.
    pub fn new(root: impl Into<PathBuf>, mut records: Vec<ImageRecord>) -> Result<Self> {
        records.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = records.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::Data(format!("duplicate image id {}", w[0].id)));
        }
        Ok(Self {
            root: root.into(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.records
            .binary_search_by(|r| r.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|r| r.id.as_str())
    }

    pub fn resolve(&self, record: &ImageRecord) -> PathBuf {
        if record.path.is_absolute() {
            record.path.clone()
        } else {
            self.root.join(&record.path)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: ImageRecord =
                serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
            records.push(r);
        }
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::new(root, records)
    }

    /// Subset with the given ids (which must exist), keeping this root.
    pub fn subset<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let records = ids
            .into_iter()
            .map(|id| {
                self.get(id)
                    .cloned()
                    .ok_or_else(|| Error::Data(format!("unknown image id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.root.clone(), records)
    }

    /// Loads every image as a `3 x 64 x 64` tensor, in record order.
    pub fn load_images(&self) -> Result<Vec<Tensor>> {
        self.records.iter().map(|r| load_image(&self.resolve(r))).collect()
    }
}

/// A human or oracle judgement: `positive` is closer in style to `anchor` than `negative`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripletLabel {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
    pub annotator: String,
    pub labeled_at: i64,
}

impl TripletLabel {
    pub fn ids(&self) -> [&str; 3] {
        [&self.anchor, &self.positive, &self.negative]
    }

    pub fn validate(&self, manifest: Option<&DatasetManifest>) -> Result<()> {
        let [a, p, n] = self.ids();
        if a == p || a == n || p == n {
            return Err(Error::Data(format!("triplet repeats an id: {a}, {p}, {n}")));
        }
        if let Some(m) = manifest {
            for id in self.ids() {
                if !m.contains(id) {
                    return Err(Error::Data(format!("triplet references unknown image {id}")));
                }
            }
        }
        Ok(())
    }
}

/// An anchor with two candidates awaiting a judgement.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: String,
    pub candidates: [String; 2],
}

pub fn append_label(path: &Path, label: &TripletLabel) -> Result<()> {
    let mut line = serde_json::to_vec(label)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    f.flush()?;
    Ok(())
}

pub fn save_labels(path: &Path, labels: &[TripletLabel]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a label file, validating every record (against `manifest` when given).
pub fn load_labels(path: &Path, manifest: Option<&DatasetManifest>) -> Result<Vec<TripletLabel>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: TripletLabel =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        l.validate(manifest)?;
        out.push(l);
    }
    Ok(out)
}

pub fn save_triplets(path: &Path, triplets: &[Triplet]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in triplets {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_triplets(path: &Path) -> Result<Vec<Triplet>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Deterministic by-image split into `(train, test)`.
pub fn split(manifest: &DatasetManifest, test_fraction: f64, seed: u64) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return contract_err(format!("test fraction {test_fraction} must lie in (0, 1)"));
    }
    let n = manifest.len();
    if n < 2 {
        return Err(Error::Data(format!("cannot split a manifest of {n} images")));
    }
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test: HashSet<usize> = order[..n_test].iter().copied().collect();
    let (mut tr, mut te) = (Vec::new(), Vec::new());
    for (i, r) in manifest.records.iter().enumerate() {
        if test.contains(&i) {
            te.push(r.clone());
        } else {
            tr.push(r.clone());
        }
    }
    Ok((
        DatasetManifest::new(manifest.root.clone(), tr)?,
        DatasetManifest::new(manifest.root.clone(), te)?,
    ))
}

/// One triplet per image as anchor, with two distinct other images drawn
/// uniformly without replacement.
pub fn make_triplets(manifest: &DatasetManifest, seed: u64) -> Result<Vec<Triplet>> {
    let n = manifest.len();
    if n < 3 {
        return Err(Error::Data(format!("need at least 3 images for triplets, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<&str> = manifest.ids().collect();
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, anchor)| {
            let picks = rand::seq::index::sample(&mut rng, n - 1, 2);
            let other = |j: usize| ids[if j >= i { j + 1 } else { j }].to_string();
            Triplet {
                anchor: anchor.to_string(),
                candidates: [other(picks.index(0)), other(picks.index(1))],
            }
        })
        .collect())
}

/// Loads an image as a `3 x 64 x 64` tensor in `[0, 1]`, resizing when needed.
pub fn load_image(path: &Path) -> Result<Tensor> {
    let img = image::open(path)?.to_rgb8();
    let img = if img.width() as usize != IMAGE_SIZE || img.height() as usize != IMAGE_SIZE {
        image::imageops::resize(
            &img,
            IMAGE_SIZE as u32,
            IMAGE_SIZE as u32,
            image::imageops::FilterType::Triangle,
        )
    } else {
        img
    };
    let plane = IMAGE_SIZE * IMAGE_SIZE;
    let mut data = vec![0.0; IMAGE_CHANNELS * plane];
    for (i, px) in img.pixels().enumerate() {
        for c in 0..IMAGE_CHANNELS {
            data[c * plane + i] = px[c] as f32 / 255.0;
        }
    }
    Tensor::new(&[IMAGE_CHANNELS, IMAGE_SIZE, IMAGE_SIZE], data)
}

/// Quantises a `3 x H x W` tensor in `[0, 1]` to an 8-bit RGB image.
pub fn tensor_to_rgb(t: &Tensor) -> Result<image::RgbImage> {
    let s = t.shape();
    let s = if s.len() == 4 && s[0] == 1 { &s[1..] } else { s };
    if s.len() != 3 || s[0] != 3 {
        return crate::error::dim_err(format!("expected a 3 x H x W image, got {:?}", t.shape()));
    }
    let (h, w) = (s[1], s[2]);
    let plane = h * w;
    let d = t.data();
    Ok(image::RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        image::Rgb([0, 1, 2].map(|c| (d[c * plane + i].clamp(0.0, 1.0) * 255.0).round() as u8))
    }))
}

pub fn save_image(t: &Tensor, path: &Path) -> Result<()> {
    tensor_to_rgb(t)?.save(path)?;
    Ok(())
}

/// Groups label ids by artist, for classification targets.
pub fn artists_by_id(manifest: &DatasetManifest) -> BTreeMap<String, String> {
    manifest
        .records
        .iter()
        .map(|r| (r.id.clone(), r.artist.clone()))
        .collect()
}
