use crate::error::{contract_err, dim_err, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Clone, Debug, PartialEq)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    /// Iterations run with exaggerated affinities and the low momentum.
    pub exaggeration_iters: usize,
    pub initial_momentum: f64,
    pub final_momentum: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            seed: 0,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            initial_momentum: 0.5,
            final_momentum: 0.8,
        }
    }
}

/// Row-conditional Gaussian affinities and their Shannon entropies (bits).
#[derive(Clone, Debug)]
pub struct Affinities {
    /// `n x n`, row `i` is `p(j | i)` with a zero diagonal.
    pub conditional: Vec<f64>,
    pub entropy_bits: Vec<f64>,
    pub n: usize,
}

impl Affinities {
    /// `(P + P^T) / 2n`, floored to keep the KL finite.
    pub fn joint(&self) -> Vec<f64> {
        let n = self.n;
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p[i * n + j] =
                        ((self.conditional[i * n + j] + self.conditional[j * n + i]) / (2.0 * n as f64)).max(1e-12);
                }
            }
        }
        p
    }
}

const ENTROPY_TOL: f64 = 1e-5;

/// Binary-searches each point's Gaussian precision so that the entropy of
/// `p(. | i)` equals `log2(perplexity)`.
pub fn conditional_affinities(dist2: &[f64], n: usize, perplexity: f64) -> Result<Affinities> {
    if dist2.len() != n * n {
        return dim_err(format!("{} squared distances for {n} points", dist2.len()));
    }
    if perplexity.is_nan() || perplexity <= 0.0 || n as f64 <= 3.0 * perplexity {
        return contract_err(format!(
            "perplexity {perplexity} too large for {n} points (need n > 3 * perplexity)"
        ));
    }
    let target = perplexity.log2();
    let mut conditional = vec![0.0; n * n];
    let mut entropy_bits = vec![0.0; n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let d = &dist2[i * n..(i + 1) * n];
        let dmin = (0..n).filter(|j| *j != i).map(|j| d[j]).fold(f64::INFINITY, f64::min);
        let entropy = |beta: f64, row: &mut [f64]| -> f64 {
            let mut sum = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(d[j] - dmin) * beta).exp() };
                sum += row[j];
            }
            let mut h = 0.0;
            for v in row.iter_mut() {
                *v /= sum;
                if *v > 0.0 {
                    h -= *v * v.log2();
                }
            }
            h
        };
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        let mut beta = 1.0;
        let mut h = entropy(beta, &mut row);
        for _ in 0..200 {
            if (h - target).abs() <= ENTROPY_TOL {
                break;
            }
            if h > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = entropy(beta, &mut row);
        }
        if (h - target).abs() > ENTROPY_TOL {
            return Err(Error::Numeric(format!(
                "perplexity search for point {i} stopped at entropy {h} bits (target {target})"
            )));
        }
        conditional[i * n..(i + 1) * n].copy_from_slice(&row);
        entropy_bits[i] = h;
    }
    Ok(Affinities {
        conditional,
        entropy_bits,
        n,
    })
}

fn squared_distances(x: &[f64], n: usize, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = (0..d).map(|k| (x[i * d + k] - x[j * d + k]).powi(2)).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// Student-t kernel numerators `1 / (1 + |y_i - y_j|^2)` and their sum.
fn student_t(y: &[f64], n: usize) -> (Vec<f64>, f64) {
    let mut num = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[2 * i] - y[2 * j];
            let dy = y[2 * i + 1] - y[2 * j + 1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    (num, sum)
}

/// `KL(P || Q)` of a 2-D layout against joint affinities `p`.
pub fn kl_divergence(p: &[f64], y: &[f64], n: usize) -> f64 {
    let (num, sum) = student_t(y, n);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[i * n + j];
                let qij = (num[i * n + j] / sum).max(1e-12);
                kl += pij * (pij / qij).ln();
            }
        }
    }
    kl
}

#[derive(Clone, Debug)]
pub struct TsneResult {
    /// `n x 2`, row-major.
    pub coords: Vec<f64>,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub affinities: Affinities,
}

impl TsneResult {
    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.coords[2 * i], self.coords[2 * i + 1])
    }
}

/// Exact (quadratic) t-SNE of the row-major `n x d` matrix `x` to 2-D.
pub fn tsne(x: &[f64], n: usize, d: usize, cfg: &TsneConfig) -> Result<TsneResult> {
    if x.len() != n * d {
        return dim_err(format!("tsne: {} values for a {n} x {d} matrix", x.len()));
    }
    let aff = conditional_affinities(&squared_distances(x, n, d), n, cfg.perplexity)?;
    let p = aff.joint();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, 1e-4).expect("positive sd");
    let mut y: Vec<f64> = (0..2 * n).map(|_| normal.sample(&mut rng)).collect();
    let initial_kl = kl_divergence(&p, &y, n);
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0f64; 2 * n];
    let mut grad = vec![0.0; 2 * n];
    for it in 0..cfg.iterations {
        let early = it < cfg.exaggeration_iters;
        let exag = if early { cfg.early_exaggeration } else { 1.0 };
        let momentum = if early {
            cfg.initial_momentum
        } else {
            cfg.final_momentum
        };
        let (num, sum) = student_t(&y, n);
        grad.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let m = 4.0 * (exag * p[i * n + j] - w / sum) * w;
                grad[2 * i] += m * (y[2 * i] - y[2 * j]);
                grad[2 * i + 1] += m * (y[2 * i + 1] - y[2 * j + 1]);
            }
        }
        for k in 0..2 * n {
            gains[k] = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2
            } else {
                (gains[k] * 0.8).max(0.01)
            };
            update[k] = momentum * update[k] - cfg.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        for c in 0..2 {
            let mean = (0..n).map(|i| y[2 * i + c]).sum::<f64>() / n as f64;
            (0..n).for_each(|i| y[2 * i + c] -= mean);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("t-SNE layout diverged".into()));
    }
    let final_kl = kl_divergence(&p, &y, n);
    Ok(TsneResult {
        coords: y,
        initial_kl,
        final_kl,
        affinities: aff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_each: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        for b in 0..2 {
            for _ in 0..n_each {
                for k in 0..d {
                    let centre = if b == 0 || k > 0 { 0.0 } else { 12.0 };
                    x.push(centre + normal.sample(&mut rng));
                }
            }
        }
        x
    }

    #[test]
    fn affinity_rows_and_entropy() {
        let n = 40;
        let x = blobs(20, 3, 1);
        let aff = conditional_affinities(&squared_distances(&x, n, 3), n, 10.0).unwrap();
        for i in 0..n {
            let s: f64 = aff.conditional[i * n..(i + 1) * n].iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!((aff.entropy_bits[i] - 10f64.log2()).abs() < 1e-4);
            assert_eq!(aff.conditional[i * n + i], 0.0);
        }
        let p = aff.joint();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(p[i * n + j], p[j * n + i]);
            }
        }
    }

    #[test]
    fn perplexity_too_large() {
        let x = blobs(5, 2, 0);
        assert!(matches!(
            tsne(&x, 10, 2, &TsneConfig::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn two_blobs_separate_and_kl_drops() {
        let n = 60;
        let x = blobs(30, 5, 3);
        let cfg = TsneConfig {
            perplexity: 10.0,
            iterations: 500,
            seed: 2,
            ..Default::default()
        };
        let r = tsne(&x, n, 5, &cfg).unwrap();
        assert!(r.final_kl < r.initial_kl);
        let again = tsne(&x, n, 5, &cfg).unwrap();
        assert_eq!(r.coords, again.coords);
    }
}
