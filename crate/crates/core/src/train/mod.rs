//! Training loop for the four model variants, the checkpoint container and
//! triplet-satisfaction evaluation.

pub mod checkpoint;
mod config;

pub use config::{TrainConfig, CONFIG_KEYS};

use crate::data::{DatasetManifest, TripletLabel};
use crate::error::{contract_err, Error, Result};
use crate::losses::{kl_loss, perceptual_loss, recon_loss, total_loss, triplet_loss, LossComponents, TripletBatch};
use crate::nets::{ModelVariant, PerceptualNet, StyleModel, FEATURE_DIM, IMAGE_CHANNELS, IMAGE_SIZE};
use crate::tensor::{adam_step, AdamState, Graph, Tensor, Var};
use checkpoint::{read_tensors, write_tensors};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

const PIXELS: usize = IMAGE_CHANNELS * IMAGE_SIZE * IMAGE_SIZE;

/// Mean loss components over one epoch (unweighted), and the number of
/// violating triplets seen.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub kl: f64,
    pub recon: f64,
    pub triplet: f64,
    pub percep: f64,
    pub total: f64,
    pub n_plus: usize,
}

pub const METRICS_HEADER: &str = "epoch,kl,recon,triplet,percep,total,n_plus";

pub fn write_metrics(path: &Path, rows: &[EpochMetrics]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.epoch, r.kl, r.recon, r.triplet, r.percep, r.total, r.n_plus
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<EpochMetrics>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != METRICS_HEADER {
        return Err(Error::Format(format!("unexpected metric header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Format(format!("bad metric value {:?}", &rec[i])))
        };
        out.push(EpochMetrics {
            epoch: f(0)? as usize,
            kl: f(1)?,
            recon: f(2)?,
            triplet: f(3)?,
            percep: f(4)?,
            total: f(5)?,
            n_plus: f(6)? as usize,
        });
    }
    Ok(out)
}

/// Trained (or freshly initialised) model plus the configuration that produced it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: StyleModel,
    pub config: TrainConfig,
    /// Completed epochs.
    pub epoch: usize,
    /// Word position of the training RNG stream when the checkpoint was taken.
    pub rng_position: u64,
}

fn u64_chunks(v: u64) -> Tensor {
    Tensor::vector(&[0, 16, 32, 48].map(|s| ((v >> s) & 0xffff) as f32))
}

fn u64_from_chunks(t: &Tensor, name: &str) -> Result<u64> {
    if t.numel() != 4 {
        return Err(Error::Format(format!("{name} must hold 4 chunks")));
    }
    let mut v = 0u64;
    for (i, c) in t.data().iter().enumerate() {
        if !(0.0..65536.0).contains(c) || c.fract() != 0.0 {
            return Err(Error::Format(format!("{name} has an invalid chunk {c}")));
        }
        v |= (*c as u64) << (16 * i);
    }
    Ok(v)
}

fn meta<'a>(map: &'a BTreeMap<String, Tensor>, name: &str, len: usize) -> Result<&'a [f32]> {
    let t = map
        .get(name)
        .ok_or_else(|| Error::Format(format!("missing tensor {name}")))?;
    if t.numel() != len {
        return Err(Error::Format(format!("{name} must hold {len} values")));
    }
    Ok(t.data())
}

impl Checkpoint {
    fn meta_tensors(&self) -> Vec<(String, Tensor)> {
        let c = &self.config;
        let w = &c.weights;
        vec![
            ("meta.variant".into(), Tensor::scalar(c.variant.code() as f32)),
            ("meta.latent_dim".into(), Tensor::scalar(c.latent_dim as f32)),
            ("meta.epoch".into(), Tensor::scalar(self.epoch as f32)),
            ("meta.epochs".into(), Tensor::scalar(c.epochs as f32)),
            ("meta.batch_size".into(), Tensor::scalar(c.batch_size as f32)),
            ("meta.seed".into(), u64_chunks(c.seed)),
            ("meta.rng_position".into(), u64_chunks(self.rng_position)),
            (
                "meta.weights".into(),
                Tensor::vector(&[w.kl, w.recon, w.triplet, w.percep, w.margin]),
            ),
            ("meta.adam".into(), Tensor::vector(&[c.lr, c.beta1, c.beta2])),
        ]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = self.meta_tensors();
        let params = self.model.named_params();
        let all = meta
            .iter()
            .map(|(n, t)| (n.as_str(), t))
            .chain(params.iter().map(|(n, t)| (n.as_str(), *t)));
        write_tensors(path, all)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let map = read_tensors(path)?;
        let code = meta(&map, "meta.variant", 1)?[0];
        let variant = ModelVariant::from_code(code as u8)
            .filter(|_| code.fract() == 0.0)
            .ok_or_else(|| Error::Format(format!("unknown variant code {code}")))?;
        let count = |name: &str| -> Result<usize> { Ok(meta(&map, name, 1)?[0] as usize) };
        let w = meta(&map, "meta.weights", 5)?;
        let adam = meta(&map, "meta.adam", 3)?;
        let config = TrainConfig {
            variant,
            weights: crate::losses::LossWeights {
                kl: w[0],
                recon: w[1],
                triplet: w[2],
                percep: w[3],
                margin: w[4],
            },
            latent_dim: count("meta.latent_dim")?,
            lr: adam[0],
            beta1: adam[1],
            beta2: adam[2],
            epochs: count("meta.epochs")?,
            batch_size: count("meta.batch_size")?,
            seed: u64_from_chunks(
                map.get("meta.seed")
                    .ok_or_else(|| Error::Format("missing tensor meta.seed".into()))?,
                "meta.seed",
            )?,
        };
        let rng_position = u64_from_chunks(
            map.get("meta.rng_position")
                .ok_or_else(|| Error::Format("missing tensor meta.rng_position".into()))?,
            "meta.rng_position",
        )?;
        Ok(Self {
            model: StyleModel::from_named(variant, config.latent_dim, &map)?,
            epoch: count("meta.epoch")?,
            config,
            rng_position,
        })
    }
}

/// Decoded images of a manifest held in one contiguous buffer.
pub struct ImageCache {
    index: HashMap<String, usize>,
    pixels: Vec<f32>,
}

impl ImageCache {
    pub fn load(manifest: &DatasetManifest) -> Result<Self> {
        let mut pixels = Vec::with_capacity(manifest.len() * PIXELS);
        let mut index = HashMap::new();
        for (i, r) in manifest.records.iter().enumerate() {
            let img = crate::data::load_image(&manifest.resolve(r))
                .map_err(|e| Error::Data(format!("image {}: {e}", r.id)))?;
            pixels.extend_from_slice(img.data());
            index.insert(r.id.clone(), i);
        }
        Ok(Self { index, pixels })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Data(format!("image {id} is not in the training manifest")))
    }

    /// `N x 3 x 64 x 64` batch of the given positions.
    pub fn batch(&self, positions: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(positions.len() * PIXELS);
        for &p in positions {
            data.extend_from_slice(&self.pixels[p * PIXELS..(p + 1) * PIXELS]);
        }
        Tensor::new(&[positions.len(), IMAGE_CHANNELS, IMAGE_SIZE, IMAGE_SIZE], data).expect("image batch shape")
    }
}

/// Checkpoint and per-epoch metrics of a finished run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub metrics: Vec<EpochMetrics>,
}

#[derive(Default)]
struct Accum {
    kl: f64,
    recon: f64,
    triplet: f64,
    percep: f64,
    total: f64,
    n_plus: usize,
    steps: usize,
}

impl Accum {
    fn add(&mut self, g: &Graph, parts: &LossComponents, total: Var, n_plus: usize) {
        let v = |x: Option<Var>| x.map_or(0.0, |x| g.value(x).item() as f64);
        self.kl += v(parts.kl);
        self.recon += v(parts.recon);
        self.triplet += v(parts.triplet);
        self.percep += v(parts.percep);
        self.total += g.value(total).item() as f64;
        self.n_plus += n_plus;
        self.steps += 1;
    }

    fn finish(self, epoch: usize) -> EpochMetrics {
        let n = self.steps.max(1) as f64;
        EpochMetrics {
            epoch,
            kl: self.kl / n,
            recon: self.recon / n,
            triplet: self.triplet / n,
            percep: self.percep / n,
            total: self.total / n,
            n_plus: self.n_plus,
        }
    }
}

fn step_context(epoch: usize, step: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Numeric(m) => Error::Numeric(format!("epoch {epoch} step {step}: {m}")),
        other => other,
    }
}

fn check_total(g: &Graph, total: Var, epoch: usize, step: usize) -> Result<()> {
    let v = g.value(total).item();
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Numeric(format!("epoch {epoch} step {step}: total loss is {v}")))
    }
}

fn collect_grads(g: &Graph, vars: &[Var]) -> Vec<Tensor> {
    vars.iter()
        .map(|v| g.grad(*v).cloned().unwrap_or_else(|| Tensor::zeros(g.shape(*v))))
        .collect()
}

/// Label positions `(a, p, n)` inside the image cache.
fn label_positions(cache: &ImageCache, labels: &[TripletLabel]) -> Result<Vec<[usize; 3]>> {
    labels
        .iter()
        .map(|l| {
            l.validate(None)?;
            Ok([
                cache.position(&l.anchor)?,
                cache.position(&l.positive)?,
                cache.position(&l.negative)?,
            ])
        })
        .collect()
}

/// Trains `config.variant` on the manifest (and the triplet labels, for
/// triplet variants). `on_epoch` sees every epoch's metrics as they finish.
pub fn train_model(
    config: &TrainConfig,
    manifest: &DatasetManifest,
    labels: &[TripletLabel],
    perceptual: &PerceptualNet,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    config.validate()?;
    let variant = config.variant;
    if variant.uses_triplet() && labels.is_empty() {
        return contract_err(format!("variant {variant} needs a non-empty triplet label set"));
    }
    let mut model = StyleModel::new(variant, config.latent_dim, config.seed, perceptual.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut metrics = Vec::with_capacity(config.epochs);
    if config.epochs > 0 {
        let cache = ImageCache::load(manifest)?;
        match variant {
            ModelVariant::Vae | ModelVariant::VaeTriplet => train_vae(
                config,
                &mut model,
                &cache,
                labels,
                &mut rng,
                &mut metrics,
                &mut on_epoch,
            )?,
            ModelVariant::FrozenNetTriplet => train_head(
                config,
                &mut model,
                &cache,
                labels,
                &mut rng,
                &mut metrics,
                &mut on_epoch,
            )?,
            ModelVariant::FrozenNet => evaluate_frozen(config, &model, &cache, labels, &mut metrics, &mut on_epoch)?,
        }
    }
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model,
            config: config.clone(),
            epoch: metrics.len(),
            rng_position: rng.get_word_pos() as u64,
        },
        metrics,
    })
}

fn train_vae(
    config: &TrainConfig,
    model: &mut StyleModel,
    cache: &ImageCache,
    labels: &[TripletLabel],
    rng: &mut ChaCha8Rng,
    metrics: &mut Vec<EpochMetrics>,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<()> {
    let with_triplet = config.variant == ModelVariant::VaeTriplet;
    let triplets = if with_triplet {
        label_positions(cache, labels)?
    } else {
        Vec::new()
    };
    let triplets = &triplets;
    let vae = model.vae.as_mut().expect("VAE variant has a VAE");
    let latent = vae.latent_dim;
    let mut adam = AdamState::new(&vae.params_mut().iter().map(|t| &**t).collect::<Vec<_>>());
    let adam_cfg = config.adam();
    let perceptual = &model.perceptual;
    let b = config.batch_size;

    for epoch in 1..=config.epochs {
        // Each batch is a list of image positions; triplet batches are laid out
        // as all anchors, then all positives, then all negatives.
        let batches: Vec<Vec<usize>> = if with_triplet {
            let mut order: Vec<usize> = (0..triplets.len()).collect();
            order.shuffle(rng);
            order
                .chunks(b)
                .map(|c| (0..3).flat_map(|k| c.iter().map(move |&i| triplets[i][k])).collect())
                .collect()
        } else {
            let mut order: Vec<usize> = (0..cache.len()).collect();
            order.shuffle(rng);
            order.chunks(3 * b).map(<[usize]>::to_vec).collect()
        };
        let mut acc = Accum::default();
        for (step, positions) in batches.iter().enumerate() {
            let ctx = step_context(epoch, step);
            let n = positions.len();
            let noise = Tensor::randn(&[n, latent], 1.0, rng);
            let mut g = Graph::new();
            let vars = vae.bind(&mut g, true);
            let pvars = perceptual.bind(&mut g);
            let x = g.constant(cache.batch(positions));
            let (mu, logvar) = vae.encode_vars(&mut g, &vars, x)?;
            let half = g.scale(logvar, 0.5);
            let std = g.exp(half);
            let eps = g.constant(noise);
            let spread = g.mul(std, eps)?;
            let z = g.add(mu, spread)?;
            let recon = vae.decode_vars(&mut g, &vars, z)?;

            let mut parts = LossComponents {
                kl: Some(kl_loss(&mut g, mu, logvar)?),
                recon: Some(recon_loss(&mut g, x, recon)?),
                percep: Some(perceptual_loss(&mut g, perceptual, &pvars, x, recon)?),
                triplet: None,
            };
            let mut n_plus = 0;
            if with_triplet {
                let k = n / 3;
                let batch = TripletBatch {
                    anchors: g.narrow(mu, 0, k)?,
                    positives: g.narrow(mu, k, k)?,
                    negatives: g.narrow(mu, 2 * k, k)?,
                };
                let t = triplet_loss(&mut g, &batch, config.weights.margin, 1.0)?;
                parts.triplet = Some(t.loss);
                n_plus = t.n_plus;
            }
            let total = total_loss(&mut g, &config.weights, &parts).map_err(&ctx)?;
            check_total(&g, total, epoch, step)?;
            g.backward(total)?;
            let grads = collect_grads(&g, &vars.params());
            let grad_refs: Vec<&Tensor> = grads.iter().collect();
            adam_step(&mut vae.params_mut(), &grad_refs, &mut adam, &adam_cfg)?;
            acc.add(&g, &parts, total, n_plus);
        }
        let m = acc.finish(epoch);
        log::info!(
            "epoch {epoch}: total {:.4} recon {:.3} triplet {:.4} n_plus {}",
            m.total,
            m.recon,
            m.triplet,
            m.n_plus
        );
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(())
}

/// Frozen 4096-d features for every cached image, `N x 4096`.
fn frozen_features(net: &PerceptualNet, cache: &ImageCache) -> Result<Tensor> {
    let mut data = Vec::with_capacity(cache.len() * FEATURE_DIM);
    let all: Vec<usize> = (0..cache.len()).collect();
    for chunk in all.chunks(32) {
        let (_, f) = net.perceptual_features(&cache.batch(chunk))?;
        data.extend_from_slice(f.data());
    }
    Tensor::new(&[cache.len(), FEATURE_DIM], data)
}

fn feature_rows(features: &Tensor, positions: &[usize]) -> Tensor {
    let mut data = Vec::with_capacity(positions.len() * FEATURE_DIM);
    for &p in positions {
        data.extend_from_slice(features.row(p));
    }
    Tensor::new(&[positions.len(), FEATURE_DIM], data).expect("feature batch shape")
}

fn train_head(
    config: &TrainConfig,
    model: &mut StyleModel,
    cache: &ImageCache,
    labels: &[TripletLabel],
    rng: &mut ChaCha8Rng,
    metrics: &mut Vec<EpochMetrics>,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<()> {
    let triplets = &label_positions(cache, labels)?;
    let features = frozen_features(&model.perceptual, cache)?;
    let head = model.head.as_mut().expect("head variant has a head");
    let mut adam = AdamState::new(&head.params_mut().iter().map(|t| &**t).collect::<Vec<_>>());
    let adam_cfg = config.adam();
    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.shuffle(rng);
        let mut acc = Accum::default();
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let k = chunk.len();
            let positions: Vec<usize> = (0..3)
                .flat_map(|m| chunk.iter().map(move |&i| triplets[i][m]))
                .collect();
            let mut g = Graph::new();
            let vars = head.bind(&mut g, true);
            let x = g.constant(feature_rows(&features, &positions));
            let e = head.forward(&mut g, &vars, x)?;
            let batch = TripletBatch {
                anchors: g.narrow(e, 0, k)?,
                positives: g.narrow(e, k, k)?,
                negatives: g.narrow(e, 2 * k, k)?,
            };
            let t = triplet_loss(&mut g, &batch, config.weights.margin, 1.0)?;
            let parts = LossComponents {
                triplet: Some(t.loss),
                ..Default::default()
            };
            let total = total_loss(&mut g, &config.weights, &parts).map_err(step_context(epoch, step))?;
            check_total(&g, total, epoch, step)?;
            g.backward(total)?;
            let grads = collect_grads(&g, &vars.params());
            let grad_refs: Vec<&Tensor> = grads.iter().collect();
            adam_step(&mut head.params_mut(), &grad_refs, &mut adam, &adam_cfg)?;
            acc.add(&g, &parts, total, t.n_plus);
        }
        let m = acc.finish(epoch);
        log::info!("epoch {epoch}: triplet {:.4} n_plus {}", m.triplet, m.n_plus);
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(())
}

/// The untrained frozen network still reports one evaluation row per epoch.
fn evaluate_frozen(
    config: &TrainConfig,
    model: &StyleModel,
    cache: &ImageCache,
    labels: &[TripletLabel],
    metrics: &mut Vec<EpochMetrics>,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<()> {
    let mut row = EpochMetrics::default();
    if !labels.is_empty() {
        let triplets = label_positions(cache, labels)?;
        let features = frozen_features(&model.perceptual, cache)?;
        let mut g = Graph::new();
        let pick = |k: usize| -> Tensor { feature_rows(&features, &triplets.iter().map(|t| t[k]).collect::<Vec<_>>()) };
        let batch = TripletBatch {
            anchors: g.constant(pick(0)),
            positives: g.constant(pick(1)),
            negatives: g.constant(pick(2)),
        };
        let t = triplet_loss(&mut g, &batch, config.weights.margin, 1.0)?;
        row.triplet = g.value(t.loss).item() as f64;
        row.total = config.weights.triplet as f64 * row.triplet;
        row.n_plus = t.n_plus;
    }
    for epoch in 1..=config.epochs {
        let m = EpochMetrics { epoch, ..row };
        on_epoch(&m);
        metrics.push(m);
    }
    Ok(())
}

/// Embedding vectors by image id, plus the images that failed and why.
pub type EmbeddedManifest = (BTreeMap<String, Vec<f32>>, Vec<(String, Error)>);

/// Embeds every manifest image that loads; failures are reported per image.
pub fn embed_manifest(model: &StyleModel, manifest: &DatasetManifest) -> EmbeddedManifest {
    let mut out = BTreeMap::new();
    let mut errors = Vec::new();
    let mut pending: Vec<(String, Tensor)> = Vec::new();
    let flush = |pending: &mut Vec<(String, Tensor)>,
                 out: &mut BTreeMap<String, Vec<f32>>,
                 errors: &mut Vec<(String, Error)>| {
        if pending.is_empty() {
            return;
        }
        let imgs: Vec<Tensor> = pending.iter().map(|(_, t)| t.clone()).collect();
        match Tensor::stack(&imgs).and_then(|b| model.embed(&b)) {
            Ok(e) => {
                for (i, (id, _)) in pending.iter().enumerate() {
                    out.insert(id.clone(), e.row(i).to_vec());
                }
            }
            Err(err) => {
                let msg = err.to_string();
                for (id, _) in pending.iter() {
                    errors.push((id.clone(), Error::Numeric(msg.clone())));
                }
            }
        }
        pending.clear();
    };
    for r in &manifest.records {
        match crate::data::load_image(&manifest.resolve(r)) {
            Ok(img) => pending.push((r.id.clone(), img)),
            Err(e) => errors.push((r.id.clone(), e)),
        }
        if pending.len() == 32 {
            flush(&mut pending, &mut out, &mut errors);
        }
    }
    flush(&mut pending, &mut out, &mut errors);
    (out, errors)
}

/// `|e_a - e_p|^2 - |e_a - e_n|^2 + alpha`, accumulated in f64.
pub fn hinge_argument(a: &[f32], p: &[f32], n: &[f32], alpha: f32) -> f64 {
    let mut dp = 0.0f64;
    let mut dn = 0.0f64;
    for ((a, p), n) in a.iter().zip(p).zip(n) {
        dp += (*a as f64 - *p as f64).powi(2);
        dn += (*a as f64 - *n as f64).powi(2);
    }
    dp - dn + alpha as f64
}

/// Fraction of labels whose hinge argument is `<= 0` under `embeddings`.
pub fn satisfaction_rate(embeddings: &BTreeMap<String, Vec<f32>>, labels: &[TripletLabel], alpha: f32) -> Result<f64> {
    if labels.is_empty() {
        return contract_err("triplet satisfaction needs at least one label");
    }
    let get = |id: &str| {
        embeddings
            .get(id)
            .ok_or_else(|| Error::Data(format!("no embedding for image {id}")))
    };
    let mut ok = 0usize;
    for l in labels {
        let (a, p, n) = (get(&l.anchor)?, get(&l.positive)?, get(&l.negative)?);
        if a.len() != p.len() || a.len() != n.len() {
            return crate::error::dim_err(format!("embedding lengths differ in triplet {:?}", l.ids()));
        }
        if hinge_argument(a, p, n, alpha) <= 0.0 {
            ok += 1;
        }
    }
    Ok(ok as f64 / labels.len() as f64)
}

/// Embeds the labelled images of `manifest` with `model` and scores the labels.
pub fn eval_triplet_satisfaction(
    model: &StyleModel,
    manifest: &DatasetManifest,
    labels: &[TripletLabel],
    alpha: f32,
) -> Result<f64> {
    if labels.is_empty() {
        return contract_err("triplet satisfaction needs at least one label");
    }
    let mut ids: Vec<&str> = labels.iter().flat_map(|l| l.ids()).collect();
    ids.sort_unstable();
    ids.dedup();
    let subset = manifest.subset(ids)?;
    let (emb, errors) = embed_manifest(model, &subset);
    if let Some((id, e)) = errors.into_iter().next() {
        return Err(Error::Data(format!("image {id}: {e}")));
    }
    satisfaction_rate(&emb, labels, alpha)
}
