use crate::error::{contract_err, dim_err, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Principal axes of a point set.
#[derive(Clone, Debug)]
pub struct Pca {
    /// `k x d`, orthonormal rows.
    pub components: Vec<f64>,
    /// `n x k`.
    pub projected: Vec<f64>,
    /// Variance along each component, non-increasing.
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
    pub k: usize,
    pub d: usize,
}

impl Pca {
    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.d..(i + 1) * self.d]
    }

    /// Maps projected coordinates back into the input space.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.projected.len() / self.k.max(1);
        let mut out = Vec::with_capacity(n * self.d);
        for r in 0..n {
            let p = &self.projected[r * self.k..(r + 1) * self.k];
            for j in 0..self.d {
                let mut v = self.mean[j];
                for (c, pc) in p.iter().enumerate() {
                    v += pc * self.components[c * self.d + j];
                }
                out.push(v);
            }
        }
        out
    }
}

/// Flips `v` so its largest-magnitude coordinate (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Gram-Schmidt completion of `basis` (rows of length `d`) with unit vectors.
fn complete_basis(basis: &mut Vec<Vec<f64>>, want: usize, d: usize) {
    let mut e = 0;
    while basis.len() < want && e < d {
        let mut v = vec![0.0; d];
        v[e] = 1.0;
        e += 1;
        for _ in 0..2 {
            for b in basis.iter() {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
}

/// Top-`k` principal components of the row-major `n x d` matrix `x`.
///
/// Eigendecomposes the `d x d` covariance, or the `n x n` Gram matrix when
/// `d > n` (same non-zero spectrum, much cheaper for wide data).
pub fn pca(x: &[f64], n: usize, d: usize, k: usize) -> Result<Pca> {
    if x.len() != n * d {
        return dim_err(format!("pca: {} values for a {n} x {d} matrix", x.len()));
    }
    if n < 2 {
        return contract_err(format!("pca needs at least 2 points, got {n}"));
    }
    if k == 0 || k > n.min(d) {
        return contract_err(format!("pca: k = {k} outside 1..={}", n.min(d)));
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for j in 0..d {
            mean[j] += x[r * d + j];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, d, |r, j| x[r * d + j] - mean[j]);
    let denom = (n - 1) as f64;

    let mut pairs: Vec<(f64, Vec<f64>)> = if d <= n {
        let cov = centered.transpose() * &centered / denom;
        let eig = SymmetricEigen::new(cov);
        (0..d)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
            .collect()
    } else {
        let gram = &centered * centered.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        (0..n)
            .filter_map(|i| {
                let lambda = eig.eigenvalues[i];
                let v = centered.transpose() * eig.eigenvectors.column(i);
                let norm = v.norm();
                (lambda > 0.0 && norm > 1e-12).then(|| (lambda, v.iter().map(|x| x / norm).collect()))
            })
            .collect()
    };
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs.truncate(k);
    let mut variance: Vec<f64> = pairs.iter().map(|p| p.0.max(0.0)).collect();
    let mut basis: Vec<Vec<f64>> = pairs.into_iter().map(|p| p.1).collect();
    complete_basis(&mut basis, k, d);
    variance.resize(k, 0.0);
    for b in &mut basis {
        fix_sign(b);
    }
    let components: Vec<f64> = basis.concat();
    let mut projected = vec![0.0; n * k];
    for r in 0..n {
        for c in 0..k {
            let comp = &components[c * d..(c + 1) * d];
            projected[r * k + c] = (0..d).map(|j| centered[(r, j)] * comp[j]).sum();
        }
    }
    Ok(Pca {
        components,
        projected,
        explained_variance: variance,
        mean,
        k,
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn check_orthonormal(p: &Pca) {
        for i in 0..p.k {
            for j in 0..p.k {
                let dot: f64 = p.component(i).iter().zip(p.component(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-6, "{i} {j} {dot}");
            }
        }
    }

    #[test]
    fn line_in_3d_has_one_component() {
        let x: Vec<f64> = (0..20)
            .flat_map(|i| {
                let t = i as f64 * 0.3 - 2.0;
                [1.0 + 2.0 * t, -t, 0.5 + 0.25 * t]
            })
            .collect();
        let p = pca(&x, 20, 3, 3).unwrap();
        let total: f64 = p.explained_variance.iter().sum();
        assert!(p.explained_variance[0] / total >= 0.9999);
        check_orthonormal(&p);
    }

    #[test]
    fn full_rank_reconstruction_and_ordering() {
        for (n, d) in [(30, 5), (6, 12)] {
            let x = random(n, d, 4);
            let k = n.min(d);
            let p = pca(&x, n, d, k).unwrap();
            check_orthonormal(&p);
            assert!(p.explained_variance.windows(2).all(|w| w[0] >= w[1]));
            if k == d {
                let r = p.reconstruct();
                let err: f64 = r.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                let norm: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(err / norm <= 1e-5);
            }
        }
    }

    #[test]
    fn sign_convention() {
        let p = pca(&random(15, 4, 1), 15, 4, 4).unwrap();
        for i in 0..4 {
            let c = p.component(i);
            let big = c
                .iter()
                .cloned()
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn wide_data_matches_covariance_route() {
        // Same spectrum whether computed from the Gram or the covariance matrix.
        let (n, d) = (5, 8);
        let x = random(n, d, 9);
        let wide = pca(&x, n, d, 4).unwrap();
        let mut xt = Vec::new();
        // Duplicate rows so n > d, which forces the covariance route with the same spread.
        for _ in 0..2 {
            xt.extend_from_slice(&x);
        }
        let tall = pca(&xt, 2 * n, d, 4).unwrap();
        for i in 0..4 {
            let scale = (2 * n - 1) as f64 / (2.0 * (n - 1) as f64);
            assert!((wide.explained_variance[i] - tall.explained_variance[i] * scale).abs() < 1e-9);
            let dot: f64 = wide
                .component(i)
                .iter()
                .zip(tall.component(i))
                .map(|(a, b)| a * b)
                .sum();
            assert!((dot.abs() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn k_out_of_range() {
        let x = random(4, 3, 0);
        assert!(pca(&x, 4, 3, 0).is_err());
        assert!(pca(&x, 4, 3, 4).is_err());
        assert!(pca(&x[..3], 1, 3, 1).is_err());
    }
}
