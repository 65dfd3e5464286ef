//! The six monitoring functions: three learning curves (surrogate MAE,
//! surrogate mean, surrogate uncertainty, all averaged over the full
//! candidate grid) and three coverage curves (fraction of patch-space
//! clusters, feature-space clusters, and reachable target bins visited by
//! the trajectory so far).

use std::collections::HashSet;

use crate::dataset::{candidate_set, extract_patch, ScanDataset};
use crate::error::{NovError, Result};
use crate::kmeans::{kmeans, ClusterModel, ClusterSpace};
use crate::pca::latent_embed_all;
use crate::projection::random_projection;
use crate::seeding::derive_seed;

/// MAE of the surrogate mean against the ground-truth scalarizer over all
/// candidates, measured and unmeasured alike.
pub fn mae_step(posterior_mean: &[f64], truth: &[f64]) -> Result<f64> {
    if posterior_mean.len() != truth.len() {
        return Err(NovError::Contract(format!(
            "posterior has {} candidates, ground truth {}",
            posterior_mean.len(),
            truth.len()
        )));
    }
    let n = truth.len() as f64;
    Ok(posterior_mean.iter().zip(truth).map(|(m, t)| (m - t).abs()).sum::<f64>() / n)
}

pub fn surrogate_mean_step(posterior_mean: &[f64]) -> f64 {
    posterior_mean.iter().sum::<f64>() / posterior_mean.len() as f64
}

/// Mean predictive standard deviation over the candidate grid.
pub fn surrogate_uncertainty_step(posterior_variance: &[f64]) -> f64 {
    posterior_variance.iter().map(|v| v.sqrt()).sum::<f64>() / posterior_variance.len() as f64
}

/// Equal-width discretization of the ground-truth scalarizer range.
#[derive(Debug, Clone)]
pub struct BinModel {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
    /// Bins containing at least one ground-truth point.
    pub reachable: Vec<bool>,
    pub reachable_count: usize,
    /// All ground-truth values coincide; a single bin is reachable.
    pub degenerate: bool,
}

impl BinModel {
    pub fn build(truth: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || truth.is_empty() {
            return Err(NovError::InvalidInput("bin model needs bins >= 1 and data".into()));
        }
        let min = truth.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = truth.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max - min <= 0.0 {
            return Ok(Self {
                min,
                max,
                bins,
                reachable: {
                    let mut r = vec![false; bins];
                    r[0] = true;
                    r
                },
                reachable_count: 1,
                degenerate: true,
            });
        }
        let mut model = Self { min, max, bins, reachable: vec![false; bins], reachable_count: 0, degenerate: false };
        for &y in truth {
            let b = model.bin_of(y);
            model.reachable[b] = true;
        }
        model.reachable_count = model.reachable.iter().filter(|r| **r).count();
        Ok(model)
    }

    /// Bin of a value; the top edge is inclusive in the last bin.
    pub fn bin_of(&self, y: f64) -> usize {
        if self.degenerate || y >= self.max {
            return if self.degenerate { 0 } else { self.bins - 1 };
        }
        let width = (self.max - self.min) / self.bins as f64;
        (((y - self.min) / width) as usize).min(self.bins - 1)
    }
}

/// Fraction of clusters containing at least one acquired candidate.
pub fn cluster_coverage(model: &ClusterModel, acquired: &[usize]) -> Result<f64> {
    if acquired.is_empty() {
        return Err(NovError::Contract("coverage of an empty trajectory".into()));
    }
    let k = model.centroids.len();
    let seen: HashSet<usize> = acquired.iter().map(|&j| model.labels[j]).collect();
    Ok(seen.len() as f64 / k as f64)
}

/// Fraction of reachable target bins hit by the acquired ground-truth
/// values.
pub fn target_coverage(model: &BinModel, acquired_truth: &[f64]) -> Result<f64> {
    if acquired_truth.is_empty() {
        return Err(NovError::Contract("coverage of an empty trajectory".into()));
    }
    let seen: HashSet<usize> = acquired_truth.iter().map(|&y| model.bin_of(y)).collect();
    Ok(seen.len() as f64 / model.reachable_count as f64)
}

/// Frozen per-dataset machinery behind the coverage metrics: projection +
/// k-means over raw patches, PCA latent + k-means over the embedding, and
/// the target bin model. Built once and shared across benchmark arms.
#[derive(Debug, Clone)]
pub struct MetricModels {
    pub patch_clusters: ClusterModel,
    pub feat_clusters: ClusterModel,
    pub bin_model: Option<BinModel>,
    pub truth: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub clusters: usize,
    pub bins: usize,
    pub projection_dim: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { clusters: 50, bins: 20, projection_dim: 32 }
    }
}

impl MetricModels {
    pub fn build(dataset: &ScanDataset, cfg: &MetricsConfig, master_seed: u64) -> Result<Self> {
        let candidates = candidate_set(dataset);
        let patches: Vec<Vec<f64>> = candidates
            .iter()
            .map(|&idx| extract_patch(dataset, idx, true).map(|p| p.values))
            .collect::<Result<_>>()?;
        let k = cfg.clusters.min(patches.len());

        let projected =
            random_projection(&patches, cfg.projection_dim.min(patches[0].len()), derive_seed(master_seed, "projection"))?;
        let patch_clusters =
            kmeans(&projected, k, derive_seed(master_seed, "kmeans-patch"), ClusterSpace::PatchProjected)?;

        let embedding = latent_embed_all(&patches, derive_seed(master_seed, "pca"))?;
        let latent_points: Vec<Vec<f64>> = embedding.scores.iter().map(|s| s.to_vec()).collect();
        let feat_clusters =
            kmeans(&latent_points, k, derive_seed(master_seed, "kmeans-feat"), ClusterSpace::Latent)?;

        let (bin_model, truth) = if dataset.has_map() {
            let truth: Vec<f64> =
                candidates.iter().map(|&idx| dataset.map_value(idx)).collect::<Result<_>>()?;
            (Some(BinModel::build(&truth, cfg.bins)?), Some(truth))
        } else {
            (None, None)
        };

        Ok(Self { patch_clusters, feat_clusters, bin_model, truth })
    }
}

/// Per-step values of the six monitoring functions; fields are absent
/// (not zero) where a metric does not apply at that step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricSeries {
    pub steps: Vec<usize>,
    pub mae: Vec<Option<f64>>,
    pub surrogate_mean: Vec<Option<f64>>,
    pub surrogate_uncertainty: Vec<Option<f64>>,
    pub patch_cov: Vec<Option<f64>>,
    pub feat_cov: Vec<Option<f64>>,
    pub target_cov: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(
        &mut self,
        step: usize,
        mae: Option<f64>,
        mean: Option<f64>,
        uncertainty: Option<f64>,
        patch_cov: Option<f64>,
        feat_cov: Option<f64>,
        target_cov: Option<f64>,
    ) {
        self.steps.push(step);
        self.mae.push(mae);
        self.surrogate_mean.push(mean);
        self.surrogate_uncertainty.push(uncertainty);
        self.patch_cov.push(patch_cov);
        self.feat_cov.push(feat_cov);
        self.target_cov.push(target_cov);
    }
}

/// 9-significant-digit decimal text used in every CSV payload.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

pub fn metrics_to_csv(series: &MetricSeries) -> String {
    let mut out =
        String::from("step,mae,surrogate_mean,surrogate_uncertainty,patch_cov,feat_cov,target_cov\n");
    for i in 0..series.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            series.steps[i],
            fmt_opt(series.mae[i]),
            fmt_opt(series.surrogate_mean[i]),
            fmt_opt(series.surrogate_uncertainty[i]),
            fmt_opt(series.patch_cov[i]),
            fmt_opt(series.feat_cov[i]),
            fmt_opt(series.target_cov[i]),
        ));
    }
    out
}
