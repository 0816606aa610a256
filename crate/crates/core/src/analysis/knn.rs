use crate::error::{contract_err, dim_err, Result};
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq)]
pub struct KnnResult {
    pub predictions: Vec<String>,
    /// Exact-match fraction against the test labels.
    pub accuracy: f64,
}

fn dist2(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (*x as f64 - *y as f64).powi(2)).sum()
}

/// Majority vote over the `k` nearest training points (Euclidean). Vote ties
/// go to the label with the smaller mean neighbour distance, then to the
/// lexicographically smaller label; equidistant neighbours are taken in
/// training order.
pub fn knn_classify(
    train: &[Vec<f32>],
    train_labels: &[String],
    test: &[Vec<f32>],
    test_labels: &[String],
    k: usize,
) -> Result<KnnResult> {
    if k == 0 {
        return contract_err("k must be >= 1");
    }
    if train.is_empty() {
        return contract_err("k-NN needs a non-empty training set");
    }
    if train.len() != train_labels.len() || test.len() != test_labels.len() {
        return contract_err("every embedding needs exactly one label");
    }
    let dim = train[0].len();
    if let Some(v) = train.iter().chain(test).find(|v| v.len() != dim) {
        return dim_err(format!(
            "embedding of length {} among embeddings of length {dim}",
            v.len()
        ));
    }
    let k = k.min(train.len());
    let mut predictions = Vec::with_capacity(test.len());
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(train.len());
    for q in test {
        order.clear();
        order.extend(train.iter().enumerate().map(|(i, t)| (dist2(q, t), i)));
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
        for &(d, i) in &order[..k] {
            let e = votes.entry(train_labels[i].as_str()).or_default();
            e.0 += 1;
            e.1 += d.sqrt();
        }
        let best = votes
            .into_iter()
            .map(|(label, (count, sum))| (label, count, sum / count as f64))
            .min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(b.0)))
            .expect("k >= 1 neighbours");
        predictions.push(best.0.to_string());
    }
    let correct = predictions.iter().zip(test_labels).filter(|(p, t)| p == t).count();
    let accuracy = if test.is_empty() {
        0.0
    } else {
        correct as f64 / test.len() as f64
    };
    Ok(KnnResult { predictions, accuracy })
}
