//! Lloyd's k-means with k-means++ seeding, deterministic given the seed.

use rand::{Rng, RngExt};

use crate::error::{NovError, Result};
use crate::seeding::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterSpace {
    PatchProjected,
    Latent,
}

#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub space: ClusterSpace,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeanspp_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining points coincide with a centroid; pick uniformly.
            rng.random_range(0..n)
        } else {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc >= target {
                    pick = i;
                    break;
                }
            }
            pick
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, centroids.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// Cluster `points` into `k` groups; Lloyd iterations run to an assignment
/// fixpoint or 100 iterations, re-seeding empty clusters to the point
/// farthest from its current centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, space: ClusterSpace) -> Result<ClusterModel> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(NovError::InvalidInput(format!("k={k} must be in 1..=n={n}")));
    }
    let dim = points[0].len();
    let mut rng = rng_from_seed(seed);
    let mut centroids = kmeanspp_init(points, k, &mut rng);
    let mut labels = vec![0usize; n];

    for _iter in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest(p, &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, &v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (ctr, s) in centroids[c].iter_mut().zip(&sums[c]) {
                    *ctr = s / counts[c] as f64;
                }
            } else {
                // Re-seed to the point farthest from its assigned centroid.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = dist2(&points[a], &centroids[labels[a]]);
                        let db = dist2(&points[b], &centroids[labels[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centroids[c] = points[far].clone();
                labels[far] = c;
                changed = true;
            }
        }

        if !changed {
            break;
        }
    }

    Ok(ClusterModel { centroids, labels, space })
}

/// Within-cluster sum of squares of a model over its points.
pub fn wcss(points: &[Vec<f64>], model: &ClusterModel) -> f64 {
    points.iter().zip(&model.labels).map(|(p, &l)| dist2(p, &model.centroids[l])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    fn blob(center: &[f64], n: usize, spread: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| center.iter().map(|c| c + rng.random_range(-spread..spread)).collect())
            .collect()
    }

    #[test]
    fn k_equals_n_gives_singleton_clusters() {
        let points: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 3.0, 0.0]).collect();
        let model = kmeans(&points, 6, 0, ClusterSpace::Latent).unwrap();
        let mut labels = model.labels.clone();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 6);
        assert!(wcss(&points, &model) < 1e-18);
    }

    #[test]
    fn two_blobs_recover_the_optimal_bipartition() {
        let mut rng = crate::seeding::rng_from_seed(42);
        let mut points = blob(&[0.0, 0.0], 10, 0.5, &mut rng);
        points.extend(blob(&[20.0, 20.0], 10, 0.5, &mut rng));
        let model = kmeans(&points, 2, 7, ClusterSpace::PatchProjected).unwrap();
        // All of blob A in one cluster, all of blob B in the other.
        assert!(model.labels[..10].iter().all(|&l| l == model.labels[0]));
        assert!(model.labels[10..].iter().all(|&l| l == model.labels[10]));
        assert_ne!(model.labels[0], model.labels[10]);

        // Brute-force oracle over all 2-partitions of a smaller instance.
        let small: Vec<Vec<f64>> = points.iter().step_by(3).cloned().collect();
        let model_s = kmeans(&small, 2, 3, ClusterSpace::PatchProjected).unwrap();
        let mut best = f64::INFINITY;
        let n = small.len();
        for mask in 1..(1u32 << n) - 1 {
            let (mut ca, mut cb) = (vec![0.0; 2], vec![0.0; 2]);
            let (mut na, mut nb) = (0.0, 0.0);
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    ca[0] += small[i][0];
                    ca[1] += small[i][1];
                    na += 1.0;
                } else {
                    cb[0] += small[i][0];
                    cb[1] += small[i][1];
                    nb += 1.0;
                }
            }
            ca.iter_mut().for_each(|v| *v /= na);
            cb.iter_mut().for_each(|v| *v /= nb);
            let mut w = 0.0;
            for i in 0..n {
                let c = if mask >> i & 1 == 1 { &ca } else { &cb };
                w += dist2(&small[i], c);
            }
            best = best.min(w);
        }
        assert!((wcss(&small, &model_s) - best).abs() < 1e-9);
    }

    #[test]
    fn kmeans_is_deterministic_per_seed() {
        let mut rng = crate::seeding::rng_from_seed(1);
        let points = blob(&[0.0, 0.0], 30, 5.0, &mut rng);
        let a = kmeans(&points, 5, 11, ClusterSpace::Latent).unwrap();
        let b = kmeans(&points, 5, 11, ClusterSpace::Latent).unwrap();
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.centroids, b.centroids);
    }

    #[test]
    fn every_cluster_is_nonempty() {
        // Heavily duplicated points force empty-cluster reseeding paths.
        let mut points = vec![vec![0.0, 0.0]; 12];
        points.push(vec![100.0, 0.0]);
        points.push(vec![0.0, 100.0]);
        points.push(vec![100.0, 100.0]);
        let model = kmeans(&points, 4, 9, ClusterSpace::Latent).unwrap();
        for c in 0..4 {
            assert!(model.labels.iter().any(|&l| l == c), "cluster {c} empty");
        }
    }

    #[test]
    fn invalid_k_is_rejected() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(kmeans(&points, 0, 0, ClusterSpace::Latent).is_err());
        assert!(kmeans(&points, 3, 0, ClusterSpace::Latent).is_err());
    }
}
