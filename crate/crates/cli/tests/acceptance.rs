//! Acceptance run: one PASS/FAIL line per primary criterion, then the
//! informational checks. Exits non-zero when any primary criterion fails.
//!
//! The property and oracle criteria reuse the bodies of the crates' own
//! integration tests; the end-to-end criterion drives the `stylespace` binary
//! through the full pipeline (23 to 27 minutes on one CPU core).

#[allow(dead_code, unused_imports)]
#[path = "../../core/tests/analysis.rs"]
mod analysis;
#[allow(dead_code, unused_imports)]
#[path = "../../core/tests/explain.rs"]
mod explain;
#[allow(dead_code, unused_imports)]
#[path = "../../core/tests/gradients.rs"]
mod gradients;
#[allow(dead_code, unused_imports)]
#[path = "../../core/tests/loss_properties.rs"]
mod loss_properties;
#[allow(dead_code, unused_imports)]
#[path = "../../annotate/tests/service.rs"]
mod service;
#[allow(dead_code, unused_imports)]
#[path = "../../core/tests/training.rs"]
mod training;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::Instant;
use stylespace::data::{load_labels, load_params, render, BackgroundKind, DatasetManifest};
use stylespace::explain::grad_cam;
use stylespace::train::Checkpoint;

const SATISFACTION_MIN: f64 = 0.75;
const ACCURACY_MIN: f64 = 0.50;
const RUNTIME_TARGET_SECS: f64 = 30.0 * 60.0;
const LOCALITY_MIN: f64 = 0.60;

struct Report {
    failed: Vec<&'static str>,
}

fn panic_text(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>()
        .cloned()
        .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

impl Report {
    /// Runs one criterion; a panic or an `Err` fails it, as does exceeding `limit` seconds.
    fn criterion(&mut self, name: &'static str, limit: Option<f64>, f: impl FnOnce() -> Result<String, String>) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| Err(panic_text(e)));
        let secs = start.elapsed().as_secs_f64();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if secs >= l => Err(format!("took {secs:.1} s, limit {l} s")),
            (o, _) => o,
        };
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                self.failed.push(name);
                ("FAIL", d.lines().next().unwrap_or("").to_string())
            }
        };
        println!(
            "{tag} {name} ({secs:.1} s){}",
            if detail.is_empty() {
                String::new()
            } else {
                format!(": {detail}")
            }
        );
    }
}

fn info(name: &str, ok: bool, detail: String) {
    println!("INFO {name} [{}]: {detail}", if ok { "met" } else { "not met" });
}

fn unit(f: impl FnOnce()) -> Result<String, String> {
    f();
    Ok(String::new())
}

fn tokio_runtime(workers: usize) -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(workers)
        .enable_all()
        .build()
        .expect("runtime")
}

/// Runs the binary and parses its `key=value` summary line.
fn stylespace(dir: &Path, args: &[&str]) -> Result<HashMap<String, String>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_stylespace"))
        .current_dir(dir)
        .args(args)
        .stderr(Stdio::inherit())
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{} exited with {}", args[0], out.status));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    Ok(text
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_string(), v.trim_matches('"').to_string()))
        .collect())
}

fn field(s: &HashMap<String, String>, key: &str) -> Result<f64, String> {
    s.get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("summary lacks {key}"))
}

struct Pipeline {
    dir: PathBuf,
    satisfaction: f64,
    accuracy: f64,
    seconds: f64,
}

/// 600 images, 6 classes, vae_triplet, 40 epochs, seed 1.
fn end_to_end(dir: &Path) -> Result<Pipeline, String> {
    let start = Instant::now();
    let run = |args: &[&str]| stylespace(dir, args);
    run(&[
        "--seed",
        "1",
        "synth-data",
        "--n",
        "600",
        "--classes",
        "6",
        "--test-fraction",
        "0.15",
        "--out",
        "data",
    ])?;
    for part in ["train", "test"] {
        let manifest = format!("data/{part}.jsonl");
        let triplets = format!("data/{part}.triplets.jsonl");
        run(&[
            "--seed",
            "1",
            "make-triplets",
            "--manifest",
            &manifest,
            "--out",
            &triplets,
        ])?;
        run(&[
            "oracle-label",
            "--triplets",
            &triplets,
            "--params",
            "data/params.jsonl",
            "--out",
            &format!("data/{part}.labels.jsonl"),
        ])?;
    }
    let trained = run(&[
        "--seed",
        "1",
        "train",
        "--manifest",
        "data/train.jsonl",
        "--labels",
        "data/train.labels.jsonl",
        "--variant",
        "vae_triplet",
        "--epochs",
        "40",
        "--out",
        "run/model.styl",
    ])?;
    if field(&trained, "epochs")? != 40.0 {
        return Err("train did not run 40 epochs".into());
    }
    let eval = run(&[
        "eval-triplets",
        "--checkpoint",
        "run/model.styl",
        "--manifest",
        "data/test.jsonl",
        "--labels",
        "data/test.labels.jsonl",
    ])?;
    for part in ["train", "test"] {
        run(&[
            "embed",
            "--checkpoint",
            "run/model.styl",
            "--manifest",
            &format!("data/{part}.jsonl"),
            "--out",
            &format!("run/{part}.emb"),
        ])?;
    }
    let knn = run(&[
        "classify",
        "--train",
        "run/train.emb",
        "--test",
        "run/test.emb",
        "--k",
        "1",
        "--out",
        "run/predictions.csv",
    ])?;
    Ok(Pipeline {
        dir: dir.to_path_buf(),
        satisfaction: field(&eval, "satisfaction")?,
        accuracy: field(&knn, "accuracy")?,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Whether the 5-epoch moving average of total loss never rises over the final half.
fn loss_trend(metrics: &Path) -> Result<(bool, String), String> {
    let mut r = csv::Reader::from_path(metrics).map_err(|e| e.to_string())?;
    let headers = r.headers().map_err(|e| e.to_string())?.clone();
    let col = headers
        .iter()
        .position(|h| h == "total")
        .ok_or("metrics lack a total column")?;
    let totals: Vec<f64> = r
        .records()
        .map(|rec| {
            rec.map_err(|e| e.to_string())?[col]
                .parse::<f64>()
                .map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    let avg: Vec<f64> = totals.windows(5).map(|w| w.iter().sum::<f64>() / 5.0).collect();
    let half = &avg[avg.len() / 2..];
    let rises: Vec<f64> = half.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    let worst = rises.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "first {:.2} last {:.2}; {} rise(s) in the final half, largest {:.3} ({:.2}% of the level)",
        totals[0],
        totals[totals.len() - 1],
        rises.len(),
        worst,
        100.0 * worst / half[0].abs().max(1e-12)
    );
    Ok((rises.is_empty(), detail))
}

/// Mean share of the negative map's mass inside the background mask, over
/// held-out anchors whose negative differs from them only in background kind.
fn background_locality(p: &Pipeline) -> Result<(f64, f64, usize), String> {
    let ckpt = Checkpoint::load(&p.dir.join("run/model.styl")).map_err(|e| e.to_string())?;
    let params = load_params(&p.dir.join("data/params.jsonl")).map_err(|e| e.to_string())?;
    let test = DatasetManifest::load(&p.dir.join("data/test.jsonl")).map_err(|e| e.to_string())?;
    let (mut shares, mut area) = (Vec::new(), 0.0);
    for rec in test.records.iter().take(30) {
        let base = &params[&rec.id];
        let mut positive = base.clone();
        positive.noise_seed = base.noise_seed.wrapping_add(1);
        let mut negative = base.clone();
        negative.background_kind = *BackgroundKind::ALL
            .iter()
            .find(|k| **k != base.background_kind)
            .unwrap();
        let (a, mask) = render(base);
        let (pos, _) = render(&positive);
        let (neg, _) = render(&negative);
        // A wide margin keeps the hinge active, so the maps are defined.
        let cam = grad_cam(&ckpt.model, ["a", "p", "n"], [&a, &pos, &neg], None, 100.0).map_err(|e| e.to_string())?;
        let map = &cam.maps[2];
        let side = (mask.len() as f64).sqrt() as usize;
        let (mut inside, mut total) = (0.0f64, 0.0f64);
        for (i, v) in map.values.iter().enumerate() {
            let (y, x) = (i / map.width * side / map.height, i % map.width * side / map.width);
            total += *v as f64;
            if mask[y * side + x] {
                inside += *v as f64;
            }
        }
        if total > 0.0 {
            shares.push(inside / total);
        }
        area += mask.iter().filter(|m| **m).count() as f64 / mask.len() as f64;
    }
    let n = shares.len();
    if n == 0 {
        return Err("every negative map was empty".into());
    }
    Ok((
        shares.iter().sum::<f64>() / n as f64,
        area / test.records.len().min(30) as f64,
        n,
    ))
}

fn main() {
    let mut report = Report { failed: Vec::new() };
    // Criteria report their own failures; keep the default hook's output off the summary lines.
    std::panic::set_hook(Box::new(|_| {}));

    report.criterion("loss-oracle equivalence", Some(5.0), || {
        unit(loss_properties::triplet_loss_matches_scalar_oracle_on_1000_batches)
    });
    report.criterion("normalization invariance", None, || {
        loss_properties::seeded_duplication_leaves_the_loss_unchanged();
        loss_properties::seeded_satisfied_batches_give_exactly_zero();
        Ok(String::new())
    });
    report.criterion("gradient suite", Some(60.0), || {
        gradients::kl_gradients();
        gradients::recon_gradients();
        gradients::perceptual_gradients();
        gradients::triplet_gradients();
        gradients::total_loss_gradients();
        Ok(String::new())
    });
    report.criterion("KL properties", None, || {
        loss_properties::seeded_kl_is_non_negative();
        loss_properties::kl_spot_values();
        Ok(String::new())
    });
    report.criterion("baseline arithmetic check", None, || {
        unit(analysis::shuffled_singleton_classes_sit_at_chance)
    });
    report.criterion("interpolation endpoints", None, || {
        unit(analysis::interpolation_endpoints_are_direct_reconstructions)
    });
    report.criterion("t-SNE properties", None, || {
        analysis::tsne_affinities_hit_the_target_perplexity();
        analysis::tsne_descends_and_is_repeatable();
        analysis::two_blobs_stay_apart_in_the_plane();
        Ok(String::new())
    });
    report.criterion("Grad-CAM", None, || {
        explain::satisfied_triplets_give_zero_maps();
        explain::channel_weights_match_the_finite_difference_oracle();
        explain::active_maps_are_normalised_weighted_activations();
        Ok(String::new())
    });
    report.criterion("checkpoint round trip", None, || {
        training::trained_checkpoint_survives_save_and_load_bitwise();
        training::wrong_magic_is_rejected_before_reading_a_huge_count();
        Ok(String::new())
    });
    report.criterion("annotation service", None, || {
        tokio_runtime(1).block_on(service::scripted_client_labels_a_50_triplet_queue());
        tokio_runtime(4).block_on(service::four_concurrent_clients_write_whole_lines());
        Ok(String::new())
    });

    let work = tempfile::tempdir().expect("temp dir");
    let mut pipeline = None;
    report.criterion("end-to-end synthetic run", None, || {
        let p = end_to_end(work.path())?;
        let detail = format!(
            "held-out satisfaction {:.4} (min {SATISFACTION_MIN}), 1-NN accuracy {:.4} (min {ACCURACY_MIN})",
            p.satisfaction, p.accuracy
        );
        let ok = p.satisfaction >= SATISFACTION_MIN && p.accuracy >= ACCURACY_MIN;
        pipeline = Some(p);
        if ok {
            Ok(detail)
        } else {
            Err(detail)
        }
    });

    if let Some(p) = &pipeline {
        info(
            "end-to-end runtime",
            p.seconds < RUNTIME_TARGET_SECS,
            format!("{:.0} s against a {RUNTIME_TARGET_SECS:.0} s laptop target", p.seconds),
        );
        match loss_trend(&p.dir.join("run/model.metrics.csv")) {
            Ok((ok, detail)) => info("loss moving average non-increasing over the final half", ok, detail),
            Err(e) => info("loss moving average non-increasing over the final half", false, e),
        }
        match catch_unwind(AssertUnwindSafe(|| background_locality(p))).unwrap_or_else(|e| Err(panic_text(e))) {
            Ok((share, area, n)) => info(
                "Grad-CAM background locality",
                share >= LOCALITY_MIN,
                format!(
                    "{:.1}% of negative-map mass on the background over {n} triplets (min {:.0}%; background is {:.1}% of the image)",
                    100.0 * share,
                    100.0 * LOCALITY_MIN,
                    100.0 * area
                ),
            ),
            Err(e) => info("Grad-CAM background locality", false, e),
        }
        let labels = load_labels(&p.dir.join("data/test.labels.jsonl"), None)
            .map(|l| l.len())
            .unwrap_or(0);
        println!("INFO held-out oracle triplets: {labels}");
    }

    let _ = std::panic::take_hook();
    if report.failed.is_empty() {
        println!("acceptance: all primary criteria passed");
    } else {
        println!(
            "acceptance: {} primary criteria failed: {}",
            report.failed.len(),
            report.failed.join(", ")
        );
        std::process::exit(1);
    }
}
