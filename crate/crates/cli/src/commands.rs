use crate::{file_err, CliError, Summary};
use annotate::{AppState, Corpus};
use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use stylespace::analysis::{
    embed_dataset, interpolate, knn_classify, load_embeddings, project_2d, save_embeddings, save_frames, top_labels,
    write_projection, ProjectedPoint, TsneConfig,
};
use stylespace::data::{
    gen_synthetic, ingest, load_image, load_labels, load_params, load_triplets, make_triplets, oracle_label,
    save_labels, save_triplets, split, DatasetManifest, ImageRecord, MANIFEST_FILE,
};
use stylespace::explain::{grad_cam, save_cam, save_sources};
use stylespace::losses::LossWeights;
use stylespace::nets::{ModelVariant, PerceptualNet, PERCEPTUAL_SEED};
use stylespace::train::checkpoint::read_tensors;
use stylespace::train::{eval_triplet_satisfaction, train_model, write_metrics, Checkpoint, TrainConfig};

const TRAIN_MANIFEST: &str = "train.jsonl";
const TEST_MANIFEST: &str = "test.jsonl";

#[derive(Parser, Debug)]
#[command(
    name = "stylespace",
    version,
    about = "Learn and analyse continuous style embeddings of images"
)]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    /// Seed for every random choice of the command
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// File of `key = value` flag defaults; explicit flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic corpus with known style parameters, split into train and test
    SynthData(SynthData),
    /// Build a manifest from an image directory and a metadata CSV (id,path,artist,date)
    Ingest(Ingest),
    /// Draw one random triplet per anchor image
    MakeTriplets(MakeTriplets),
    /// Label triplets of a synthetic corpus with its analytic style distance
    OracleLabel(OracleLabel),
    /// Serve triplets to a human annotator over HTTP
    AnnotateServe(AnnotateServe),
    /// Train a model variant
    Train(Train),
    /// Fraction of labelled triplets a checkpoint satisfies
    EvalTriplets(EvalTriplets),
    /// Embed every image of a manifest
    Embed(Embed),
    /// PCA + t-SNE projection of embeddings to 2-D
    Project(Project),
    /// k-nearest-neighbour artist classification
    Classify(Classify),
    /// Decode a linear path between the latent codes of two images
    Interpolate(Interpolate),
    /// Gradient-weighted activation maps of one triplet
    Cam(Cam),
}

#[derive(Args, Debug)]
pub struct SynthData {
    /// Number of images
    #[arg(long, default_value_t = 600)]
    pub n: usize,
    /// Number of style classes
    #[arg(long, default_value_t = 6)]
    pub classes: usize,
    /// Share of images held out in test.jsonl (0 disables the split)
    #[arg(long, default_value_t = 0.15)]
    pub test_fraction: f64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Ingest {
    /// Directory the metadata paths are relative to
    #[arg(long)]
    pub images: PathBuf,
    /// Metadata CSV with columns id,path,artist,date
    #[arg(long)]
    pub metadata: PathBuf,
    /// Share of images held out in test.jsonl (0 disables the split)
    #[arg(long, default_value_t = 0.15)]
    pub test_fraction: f64,
    /// Output directory for the manifests
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MakeTriplets {
    /// Image manifest (newline-delimited JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Triplet file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OracleLabel {
    /// Triplet file written by make-triplets
    #[arg(long)]
    pub triplets: PathBuf,
    /// Style parameter table written by synth-data
    #[arg(long)]
    pub params: PathBuf,
    /// Label file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AnnotateServe {
    /// Image manifest (newline-delimited JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Triplet file written by make-triplets
    #[arg(long)]
    pub triplets: PathBuf,
    /// Label file to append to (created if missing)
    #[arg(long)]
    pub out: PathBuf,
    /// Address to bind
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Port to bind
    #[arg(long, default_value_t = annotate::DEFAULT_PORT)]
    pub port: u16,
    /// Built annotation UI to serve at / instead of the bundled page
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

fn variant_parser() -> impl TypedValueParser<Value = ModelVariant> {
    PossibleValuesParser::new(ModelVariant::ALL.map(ModelVariant::as_str))
        .map(|s| s.parse::<ModelVariant>().expect("listed variant"))
}

fn defaults() -> TrainConfig {
    TrainConfig::default()
}

#[derive(Args, Debug)]
pub struct Train {
    /// Image manifest (newline-delimited JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Triplet labels (required by the triplet variants)
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Model variant
    #[arg(long, default_value_t = defaults().variant, value_parser = variant_parser())]
    pub variant: ModelVariant,
    /// Training epochs
    #[arg(long, default_value_t = defaults().epochs)]
    pub epochs: usize,
    /// Triplets per step
    #[arg(long, default_value_t = defaults().batch_size)]
    pub batch_size: usize,
    /// Latent dimension of the VAE
    #[arg(long, default_value_t = defaults().latent_dim)]
    pub latent_dim: usize,
    /// Adam learning rate
    #[arg(long, default_value_t = defaults().lr)]
    pub lr: f32,
    /// Adam first-moment decay
    #[arg(long, default_value_t = defaults().beta1)]
    pub beta1: f32,
    /// Adam second-moment decay
    #[arg(long, default_value_t = defaults().beta2)]
    pub beta2: f32,
    /// Weight of the KL term
    #[arg(long, default_value_t = defaults().weights.kl)]
    pub lambda_kl: f32,
    /// Weight of the reconstruction term
    #[arg(long, default_value_t = defaults().weights.recon)]
    pub lambda_recon: f32,
    /// Weight of the triplet term
    #[arg(long, default_value_t = defaults().weights.triplet)]
    pub lambda_triplet: f32,
    /// Weight of the perceptual term
    #[arg(long, default_value_t = defaults().weights.percep)]
    pub lambda_percep: f32,
    /// Triplet margin
    #[arg(long, default_value_t = defaults().weights.margin)]
    pub margin: f32,
    /// Weights for the frozen feature network (tensor file with percep.* entries)
    #[arg(long)]
    pub perceptual_weights: Option<PathBuf>,
    /// Per-epoch metric CSV [default: <out stem>.metrics.csv]
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Checkpoint to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalTriplets {
    /// Checkpoint written by train
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Image manifest (newline-delimited JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Triplet label file
    #[arg(long)]
    pub labels: PathBuf,
    /// Margin a satisfied triplet must clear [default: the checkpoint's margin]
    #[arg(long)]
    pub margin: Option<f32>,
}

#[derive(Args, Debug)]
pub struct Embed {
    /// Checkpoint written by train
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Image manifest (newline-delimited JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Embedding file to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Project {
    /// Embedding file written by embed
    #[arg(long)]
    pub embeddings: PathBuf,
    /// t-SNE perplexity (clamped to what the point count supports)
    #[arg(long, default_value_t = TsneConfig::default().perplexity)]
    pub perplexity: f64,
    /// t-SNE iterations
    #[arg(long, default_value_t = TsneConfig::default().iterations)]
    pub iterations: usize,
    /// Keep only the N most represented artists (0 keeps all)
    #[arg(long, default_value_t = 0)]
    pub top_artists: usize,
    /// Projection CSV to write
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Classify {
    /// Reference embeddings
    #[arg(long)]
    pub train: PathBuf,
    /// Embeddings to classify
    #[arg(long)]
    pub test: PathBuf,
    /// Neighbours per vote
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Per-image predictions CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Interpolate {
    /// Checkpoint written by train
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Image manifest (newline-delimited JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Image id at t = 0
    #[arg(long)]
    pub source: String,
    /// Image id at t = 1
    #[arg(long)]
    pub target: String,
    /// Frames including both endpoints
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
    /// Directory for the frames
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Cam {
    /// Checkpoint written by train
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Image manifest (newline-delimited JSON)
    #[arg(long)]
    pub manifest: PathBuf,
    /// Anchor image id
    #[arg(long)]
    pub anchor: String,
    /// Image id labelled closer in style to the anchor
    #[arg(long)]
    pub positive: String,
    /// Image id labelled farther in style from the anchor
    #[arg(long)]
    pub negative: String,
    /// Convolutional block to cut at [default: the last one]
    #[arg(long)]
    pub layer: Option<usize>,
    /// Triplet margin [default: the checkpoint's margin]
    #[arg(long)]
    pub margin: Option<f32>,
    /// Directory for the maps
    #[arg(long)]
    pub out: PathBuf,
}

pub fn dispatch(cli: Cli) -> Result<Summary, CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::SynthData(a) => synth_data(a, seed),
        Command::Ingest(a) => ingest_cmd(a, seed),
        Command::MakeTriplets(a) => make_triplets_cmd(a, seed),
        Command::OracleLabel(a) => oracle_label_cmd(a),
        Command::AnnotateServe(a) => annotate_serve(a, seed),
        Command::Train(a) => train(a, seed),
        Command::EvalTriplets(a) => eval_triplets(a),
        Command::Embed(a) => embed(a),
        Command::Project(a) => project(a, seed),
        Command::Classify(a) => classify(a),
        Command::Interpolate(a) => interpolate_cmd(a),
        Command::Cam(a) => cam(a),
    }
}

/// Fails with the path in the message when an input is missing.
fn input(path: &Path) -> Result<&Path, CliError> {
    if path.exists() {
        Ok(path)
    } else {
        Err(file_err(path)(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "no such file",
        )))
    }
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(file_err(dir)),
        _ => Ok(()),
    }
}

fn load_manifest(path: &Path) -> Result<DatasetManifest, CliError> {
    Ok(DatasetManifest::load(input(path)?)?)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Ok(Checkpoint::load(input(path)?)?)
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

/// Writes train/test manifests next to `dir/manifest.jsonl`; returns their sizes.
fn write_split(manifest: &DatasetManifest, fraction: f64, seed: u64, dir: &Path) -> Result<(usize, usize), CliError> {
    if fraction == 0.0 {
        return Ok((manifest.len(), 0));
    }
    if !(0.0..1.0).contains(&fraction) {
        return Err(CliError::Usage(format!(
            "--test-fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let (train, test) = split(manifest, fraction, seed)?;
    train.save(&dir.join(TRAIN_MANIFEST))?;
    test.save(&dir.join(TEST_MANIFEST))?;
    Ok((train.len(), test.len()))
}

fn synth_data(a: SynthData, seed: u64) -> Result<Summary, CliError> {
    std::fs::create_dir_all(&a.out).map_err(file_err(&a.out))?;
    if a.classes < 2 || a.n < a.classes {
        return Err(CliError::Usage(format!(
            "need --n >= --classes >= 2, got {} and {}",
            a.n, a.classes
        )));
    }
    let corpus = gen_synthetic(a.n, a.classes, seed, &a.out)?;
    let (train, test) = write_split(&corpus.manifest, a.test_fraction, seed, &a.out)?;
    Ok(vec![
        ("images", corpus.manifest.len().to_string()),
        ("classes", a.classes.to_string()),
        ("train", train.to_string()),
        ("test", test.to_string()),
        ("manifest", show(&a.out.join(MANIFEST_FILE))),
    ])
}

fn ingest_cmd(a: Ingest, seed: u64) -> Result<Summary, CliError> {
    input(&a.images)?;
    let report = ingest(&a.images, input(&a.metadata)?)?;
    std::fs::create_dir_all(&a.out).map_err(file_err(&a.out))?;
    // The manifests live in --out, so image paths are stored absolute.
    let root = std::fs::canonicalize(&a.images).map_err(file_err(&a.images))?;
    let records: Vec<ImageRecord> = report
        .manifest
        .records
        .iter()
        .map(|r| ImageRecord {
            path: root.join(&r.path),
            ..r.clone()
        })
        .collect();
    let manifest = DatasetManifest::new(&a.out, records)?;
    manifest.save(&a.out.join(MANIFEST_FILE))?;
    let (train, test) = write_split(&manifest, a.test_fraction, seed, &a.out)?;
    Ok(vec![
        ("images", manifest.len().to_string()),
        ("skipped", report.warnings.len().to_string()),
        ("train", train.to_string()),
        ("test", test.to_string()),
        ("manifest", show(&a.out.join(MANIFEST_FILE))),
    ])
}

fn make_triplets_cmd(a: MakeTriplets, seed: u64) -> Result<Summary, CliError> {
    let manifest = load_manifest(&a.manifest)?;
    let triplets = make_triplets(&manifest, seed)?;
    create_parent(&a.out)?;
    save_triplets(&a.out, &triplets)?;
    Ok(vec![("triplets", triplets.len().to_string()), ("out", show(&a.out))])
}

fn oracle_label_cmd(a: OracleLabel) -> Result<Summary, CliError> {
    let triplets = load_triplets(input(&a.triplets)?)?;
    let params = load_params(input(&a.params)?)?;
    let labels = triplets
        .iter()
        .map(|t| oracle_label(t, &params))
        .collect::<stylespace::Result<Vec<_>>>()?;
    create_parent(&a.out)?;
    save_labels(&a.out, &labels)?;
    Ok(vec![("labels", labels.len().to_string()), ("out", show(&a.out))])
}

fn annotate_serve(a: AnnotateServe, seed: u64) -> Result<Summary, CliError> {
    create_parent(&a.out)?;
    let corpus = Corpus::open(input(&a.manifest)?, input(&a.triplets)?, &a.out, seed)?;
    let progress = corpus.progress();
    let mut state = AppState::new(Some(corpus));
    if let Some(dir) = a.ui_dir {
        state = state.with_ui_dir(input(&dir)?);
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Usage(format!("cannot start runtime: {e}")))?;
    let addr = format!("{}:{}", a.host, a.port);
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Usage(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Usage(e.to_string()))?;
        // Printed before serving so scripts can pick up the bound port.
        println!(
            "listening=http://{local} labeled={} total={}",
            progress.labeled, progress.total
        );
        annotate::serve(listener, state)
            .await
            .map_err(|e| CliError::Usage(format!("server stopped: {e}")))
    })?;
    Ok(vec![("stopped", "true".into())])
}

fn train(a: Train, seed: u64) -> Result<Summary, CliError> {
    let config = TrainConfig {
        variant: a.variant,
        weights: LossWeights {
            kl: a.lambda_kl,
            recon: a.lambda_recon,
            triplet: a.lambda_triplet,
            percep: a.lambda_percep,
            margin: a.margin,
        },
        latent_dim: a.latent_dim,
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if config.variant.uses_triplet() && a.labels.is_none() {
        return Err(CliError::Usage(format!("variant {} needs --labels", config.variant)));
    }
    let manifest = load_manifest(&a.manifest)?;
    let labels = match &a.labels {
        Some(p) => load_labels(input(p)?, Some(&manifest))?,
        None => Vec::new(),
    };
    let perceptual = match &a.perceptual_weights {
        Some(p) => PerceptualNet::from_named(&read_tensors(input(p)?)?)?,
        None => PerceptualNet::new(PERCEPTUAL_SEED),
    };
    let start = std::time::Instant::now();
    let outcome = train_model(&config, &manifest, &labels, &perceptual, |m| {
        log::info!(
            "epoch {} total {:.4} kl {:.4} recon {:.4} triplet {:.4} percep {:.4} n_plus {} ({:.0} s)",
            m.epoch,
            m.total,
            m.kl,
            m.recon,
            m.triplet,
            m.percep,
            m.n_plus,
            start.elapsed().as_secs_f64()
        );
    })?;
    create_parent(&a.out)?;
    outcome.checkpoint.save(&a.out)?;
    let stem = a
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    let metrics = a
        .metrics
        .unwrap_or_else(|| a.out.with_file_name(format!("{stem}.metrics.csv")));
    create_parent(&metrics)?;
    write_metrics(&metrics, &outcome.metrics)?;
    let config_path = a.out.with_file_name(format!("{stem}.config"));
    std::fs::write(&config_path, config.to_text()).map_err(file_err(&config_path))?;
    let last = outcome.metrics.last().map_or(f64::NAN, |m| m.total);
    Ok(vec![
        ("variant", config.variant.to_string()),
        ("epochs", config.epochs.to_string()),
        ("final_total", format!("{last:.6}")),
        ("seconds", format!("{:.1}", start.elapsed().as_secs_f64())),
        ("checkpoint", show(&a.out)),
        ("metrics", show(&metrics)),
    ])
}

fn eval_triplets(a: EvalTriplets) -> Result<Summary, CliError> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let manifest = load_manifest(&a.manifest)?;
    let labels = load_labels(input(&a.labels)?, Some(&manifest))?;
    let margin = a.margin.unwrap_or(ckpt.config.weights.margin);
    let rate = eval_triplet_satisfaction(&ckpt.model, &manifest, &labels, margin)?;
    Ok(vec![
        ("satisfaction", format!("{rate:.6}")),
        ("labels", labels.len().to_string()),
        ("margin", margin.to_string()),
    ])
}

fn embed(a: Embed) -> Result<Summary, CliError> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let manifest = load_manifest(&a.manifest)?;
    let report = embed_dataset(&ckpt, &manifest);
    for (id, e) in &report.errors {
        log::warn!("image {id} skipped: {e}");
    }
    if report.embeddings.is_empty() {
        return Err(stylespace::Error::Data(format!("no image of {} could be embedded", a.manifest.display())).into());
    }
    create_parent(&a.out)?;
    save_embeddings(&a.out, &report.embeddings)?;
    Ok(vec![
        ("embeddings", report.embeddings.len().to_string()),
        ("errors", report.errors.len().to_string()),
        ("dim", report.embeddings[0].vector.len().to_string()),
        ("variant", ckpt.model.variant.to_string()),
        ("out", show(&a.out)),
    ])
}

fn artist_of(e: &stylespace::analysis::StyleEmbedding, path: &Path) -> Result<String, CliError> {
    e.artist.clone().ok_or_else(|| {
        stylespace::Error::Data(format!(
            "{}: embedding {} carries no artist label",
            path.display(),
            e.id
        ))
        .into()
    })
}

fn project(a: Project, seed: u64) -> Result<Summary, CliError> {
    let mut embeddings = load_embeddings(input(&a.embeddings)?)?;
    let artists = embeddings
        .iter()
        .map(|e| artist_of(e, &a.embeddings))
        .collect::<Result<Vec<_>, _>>()?;
    if a.top_artists > 0 {
        let keep = top_labels(artists.iter().map(String::as_str), a.top_artists);
        embeddings.retain(|e| e.artist.as_ref().is_some_and(|x| keep.contains(x)));
    }
    let cfg = TsneConfig {
        perplexity: a.perplexity,
        iterations: a.iterations,
        seed,
        ..TsneConfig::default()
    };
    let vectors: Vec<Vec<f32>> = embeddings.iter().map(|e| e.vector.clone()).collect();
    let result = project_2d(&vectors, &cfg)?;
    let points: Vec<ProjectedPoint> = embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (x, y) = result.point(i);
            ProjectedPoint {
                id: e.id.clone(),
                artist: e.artist.clone().unwrap_or_default(),
                x,
                y,
            }
        })
        .collect();
    create_parent(&a.out)?;
    write_projection(&a.out, &points)?;
    Ok(vec![
        ("points", points.len().to_string()),
        ("initial_kl", format!("{:.6}", result.initial_kl)),
        ("final_kl", format!("{:.6}", result.final_kl)),
        ("out", show(&a.out)),
    ])
}

fn classify(a: Classify) -> Result<Summary, CliError> {
    let train = load_embeddings(input(&a.train)?)?;
    let test = load_embeddings(input(&a.test)?)?;
    let labels = |set: &[stylespace::analysis::StyleEmbedding], path: &Path| {
        set.iter().map(|e| artist_of(e, path)).collect::<Result<Vec<_>, _>>()
    };
    let (train_labels, test_labels) = (labels(&train, &a.train)?, labels(&test, &a.test)?);
    let vectors =
        |set: &[stylespace::analysis::StyleEmbedding]| set.iter().map(|e| e.vector.clone()).collect::<Vec<_>>();
    let result = knn_classify(&vectors(&train), &train_labels, &vectors(&test), &test_labels, a.k)?;
    if let Some(out) = &a.out {
        create_parent(out)?;
        let mut w = csv::Writer::from_path(out).map_err(stylespace::Error::Csv)?;
        let mut rows = vec![["id".to_string(), "artist".into(), "predicted".into()]];
        rows.extend(
            test.iter()
                .zip(&test_labels)
                .zip(&result.predictions)
                .map(|((e, t), p)| [e.id.clone(), t.clone(), p.clone()]),
        );
        for r in rows {
            w.write_record(&r).map_err(stylespace::Error::Csv)?;
        }
        w.flush().map_err(file_err(out))?;
    }
    Ok(vec![
        ("accuracy", format!("{:.6}", result.accuracy)),
        ("k", a.k.to_string()),
        ("train", train.len().to_string()),
        ("test", test.len().to_string()),
    ])
}

fn manifest_image(manifest: &DatasetManifest, id: &str) -> Result<stylespace::Tensor, CliError> {
    let record = manifest
        .get(id)
        .ok_or_else(|| stylespace::Error::Data(format!("image {id} is not in the manifest")))?;
    Ok(load_image(&manifest.resolve(record))?)
}

fn interpolate_cmd(a: Interpolate) -> Result<Summary, CliError> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let manifest = load_manifest(&a.manifest)?;
    let source = manifest_image(&manifest, &a.source)?;
    let target = manifest_image(&manifest, &a.target)?;
    let frames = interpolate(&ckpt.model, &source, &target, a.steps)?;
    let paths = save_frames(&frames, &a.out)?;
    Ok(vec![("frames", paths.len().to_string()), ("out", show(&a.out))])
}

fn cam(a: Cam) -> Result<Summary, CliError> {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let manifest = load_manifest(&a.manifest)?;
    let ids = [a.anchor.as_str(), a.positive.as_str(), a.negative.as_str()];
    let images = ids.map(|id| manifest_image(&manifest, id));
    let [x, y, z] = images;
    let (x, y, z) = (x?, y?, z?);
    let refs = [&x, &y, &z];
    let margin = a.margin.unwrap_or(ckpt.config.weights.margin);
    let result = grad_cam(&ckpt.model, ids, refs, a.layer, margin)?;
    save_cam(&result, refs, &a.out)?;
    save_sources(ids, refs, &a.out)?;
    let layer = result.maps[0].target_layer.clone();
    Ok(vec![
        ("loss", format!("{:.6}", result.loss)),
        ("inactive", result.inactive.to_string()),
        ("layer", layer),
        ("out", show(&a.out)),
    ])
}
