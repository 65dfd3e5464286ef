//! 2-component PCA via power iteration with deflation, used as the
//! feature-space embedding for coverage analysis. Accepts any matrix of
//! flattened patches; a learned encoder producing N x 2 codes can be
//! swapped in wherever the embedding is consumed.

use rand::{Rng, RngExt};

use crate::error::{NovError, Result};
use crate::seeding::rng_from_seed;

const POWER_TOL: f64 = 1e-9;
const POWER_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone)]
pub struct LatentEmbedding {
    /// N x 2 scores, columns ordered by descending explained variance.
    pub scores: Vec<[f64; 2]>,
    pub explained_variance: [f64; 2],
    pub components: [Vec<f64>; 2],
    /// Set when the input had no variance (all patches identical).
    pub degenerate: bool,
}

fn mat_vec(c: &[f64], dim: usize, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = c[i * dim..(i + 1) * dim].iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn power_iteration<R: Rng>(c: &[f64], dim: usize, rng: &mut R) -> (Vec<f64>, f64) {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut w = vec![0.0; dim];
    for _ in 0..POWER_MAX_ITERS {
        mat_vec(c, dim, &v, &mut w);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        std::mem::swap(&mut v, &mut w);
        if delta < POWER_TOL {
            break;
        }
    }
    mat_vec(c, dim, &v, &mut w);
    let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    (v, lambda)
}

/// Project mean-centered flattened patches onto the top-2 principal
/// directions. The sign of each component is fixed so its
/// largest-magnitude loading is positive.
pub fn latent_embed_all(patches: &[Vec<f64>], seed: u64) -> Result<LatentEmbedding> {
    let n = patches.len();
    if n < 3 {
        return Err(NovError::InvalidInput(format!("PCA embedding needs N >= 3, have {n}")));
    }
    let dim = patches[0].len();
    if patches.iter().any(|p| p.len() != dim) {
        return Err(NovError::Contract("ragged patch matrix".into()));
    }

    let mut mean = vec![0.0; dim];
    for p in patches {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> =
        patches.iter().map(|p| p.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect();

    // Covariance C = X^T X / N.
    let mut cov = vec![0.0; dim * dim];
    for row in &centered {
        for i in 0..dim {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            let dst = &mut cov[i * dim..(i + 1) * dim];
            for (d, &rj) in dst.iter_mut().zip(row) {
                *d += ri * rj;
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= n as f64);

    let total_var: f64 = (0..dim).map(|i| cov[i * dim + i]).sum();
    if total_var < 1e-24 {
        return Ok(LatentEmbedding {
            scores: vec![[0.0, 0.0]; n],
            explained_variance: [0.0, 0.0],
            components: [vec![0.0; dim], vec![0.0; dim]],
            degenerate: true,
        });
    }

    let mut rng = rng_from_seed(seed);
    let mut components: [Vec<f64>; 2] = [vec![0.0; dim], vec![0.0; dim]];
    let mut lambdas = [0.0; 2];
    for comp in 0..2 {
        let (mut v, lambda) = power_iteration(&cov, dim, &mut rng);
        // Sign convention: largest-magnitude loading positive.
        let pivot = (0..dim).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap()).unwrap();
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        // Deflate.
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] -= lambda * v[i] * v[j];
            }
        }
        lambdas[comp] = lambda;
        components[comp] = v;
    }

    let scores = centered
        .iter()
        .map(|row| {
            [
                row.iter().zip(&components[0]).map(|(a, b)| a * b).sum(),
                row.iter().zip(&components[1]).map(|(a, b)| a * b).sum(),
            ]
        })
        .collect();

    Ok(LatentEmbedding {
        scores,
        explained_variance: lambdas,
        components,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::RngExt;

    fn random_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
    }

    #[test]
    fn components_match_eigen_oracle() {
        let points = random_points(40, 6, 3);
        let emb = latent_embed_all(&points, 5).unwrap();

        // Dense covariance eigen-decomposition oracle.
        let n = points.len();
        let dim = 6;
        let mut mean = vec![0.0; dim];
        for p in &points {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / n as f64;
            }
        }
        let mut cov = DMatrix::<f64>::zeros(dim, dim);
        for p in &points {
            for i in 0..dim {
                for j in 0..dim {
                    cov[(i, j)] += (p[i] - mean[i]) * (p[j] - mean[j]) / n as f64;
                }
            }
        }
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

        for comp in 0..2 {
            let oracle: Vec<f64> = eig.eigenvectors.column(order[comp]).iter().cloned().collect();
            // Principal angle: |cos| close to 1 regardless of sign.
            let dot: f64 =
                emb.components[comp].iter().zip(&oracle).map(|(a, b)| a * b).sum::<f64>().abs();
            assert!(dot > 1.0 - 1e-6, "component {comp}: |cos| = {dot}");
            let lam = eig.eigenvalues[order[comp]];
            assert!((emb.explained_variance[comp] - lam).abs() < 1e-6 * lam.max(1.0));
        }
    }

    #[test]
    fn scores_are_centered_projections() {
        let points = random_points(25, 5, 9);
        let emb = latent_embed_all(&points, 2).unwrap();
        let n = points.len() as f64;
        for c in 0..2 {
            let mean: f64 = emb.scores.iter().map(|s| s[c]).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn sign_convention_makes_embedding_seed_stable() {
        let points = random_points(30, 4, 1);
        let a = latent_embed_all(&points, 10).unwrap();
        let b = latent_embed_all(&points, 99).unwrap();
        for comp in 0..2 {
            for (x, y) in a.components[comp].iter().zip(&b.components[comp]) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn degenerate_input_is_flagged() {
        let points = vec![vec![1.0, 2.0, 3.0]; 5];
        let emb = latent_embed_all(&points, 0).unwrap();
        assert!(emb.degenerate);
        assert!(emb.scores.iter().all(|s| s == &[0.0, 0.0]));
        assert!(latent_embed_all(&points[..2], 0).is_err());
    }
}
