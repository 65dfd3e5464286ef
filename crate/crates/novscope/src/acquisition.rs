//! Acquisition policies: Expected Improvement, Maximum Uncertainty, and the
//! elite-set novelty score (z-scored Thompson draws ranked by mean distance
//! to their k nearest elite responses).

use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::error::{NovError, Result};
use crate::gp::Posterior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Ei,
    Mu,
    Beacon,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Ei => "ei",
            Policy::Mu => "mu",
            Policy::Beacon => "beacon",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = NovError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ei" => Ok(Policy::Ei),
            "mu" => Ok(Policy::Mu),
            "beacon" => Ok(Policy::Beacon),
            other => Err(NovError::Config(format!("unknown policy '{other}' (ei|mu|beacon)"))),
        }
    }
}

/// Which space the novelty distances live in. Response space is the
/// default; latent mode measures Euclidean distance between embedded
/// patches instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoveltySpace {
    Response,
    Latent,
}

impl NoveltySpace {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoveltySpace::Response => "response",
            NoveltySpace::Latent => "latent",
        }
    }
}

impl std::str::FromStr for NoveltySpace {
    type Err = NovError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "response" => Ok(NoveltySpace::Response),
            "latent" => Ok(NoveltySpace::Latent),
            other => {
                Err(NovError::Config(format!("unknown novelty_space '{other}' (response|latent)")))
            }
        }
    }
}

/// Top fraction of acquired responses plus their z-score statistics.
#[derive(Debug, Clone)]
pub struct EliteSet {
    /// (flat candidate index, raw response), largest responses first,
    /// ties broken by earlier acquisition order.
    pub members: Vec<(usize, f64)>,
    pub elite_mean: f64,
    /// Population std of member responses, before flooring.
    pub elite_std_raw: f64,
}

impl EliteSet {
    /// Degenerate-variance floor applied when normalizing.
    pub fn elite_std(&self) -> f64 {
        self.elite_std_raw.max(1e-8 * self.elite_mean.abs().max(1.0))
    }
}

/// Build the elite set from the acquisition history (in acquisition order).
pub fn select_elite(history: &[(usize, f64)], fraction: f64) -> Result<EliteSet> {
    if history.is_empty() {
        return Err(NovError::Contract("elite selection over empty history".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(NovError::InvalidInput(format!("elite fraction {fraction} not in (0, 1]")));
    }
    let n = history.len();
    let m = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort by descending response keeps earlier acquisitions first
    // among ties.
    order.sort_by(|&a, &b| history[b].1.partial_cmp(&history[a].1).unwrap());
    let members: Vec<(usize, f64)> = order[..m].iter().map(|&i| history[i]).collect();
    let mean = members.iter().map(|(_, y)| y).sum::<f64>() / m as f64;
    let var = members.iter().map(|(_, y)| (y - mean) * (y - mean)).sum::<f64>() / m as f64;
    Ok(EliteSet { members, elite_mean: mean, elite_std_raw: var.sqrt() })
}

/// Per-candidate independent posterior draws y_j = mu_j + sigma_j * eps_j.
pub fn thompson_sample<R: Rng>(posterior: &Posterior, rng: &mut R) -> Vec<f64> {
    posterior
        .mean
        .iter()
        .zip(&posterior.variance)
        .map(|(&mu, &var)| {
            let eps: f64 = rng.sample(StandardNormal);
            mu + var.sqrt() * eps
        })
        .collect()
}

/// Mean absolute distance of each z-scored sample to its k nearest
/// neighbors among the z-scored elite responses.
pub fn beacon_score(yhat: &[f64], elite: &EliteSet, k: usize) -> Result<Vec<f64>> {
    if elite.members.is_empty() {
        return Err(NovError::Contract("beacon scoring with empty elite set".into()));
    }
    if k == 0 {
        return Err(NovError::InvalidInput("k must be >= 1".into()));
    }
    let mu = elite.elite_mean;
    let sd = elite.elite_std();
    let elite_norm: Vec<f64> = elite.members.iter().map(|(_, y)| (y - mu) / sd).collect();
    let k_eff = k.min(elite_norm.len());

    let mut dist = vec![0.0f64; elite_norm.len()];
    let scores = yhat
        .iter()
        .map(|&y| {
            let yn = (y - mu) / sd;
            for (d, &e) in dist.iter_mut().zip(&elite_norm) {
                *d = (yn - e).abs();
            }
            dist.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dist[..k_eff].iter().sum::<f64>() / k_eff as f64
        })
        .collect();
    Ok(scores)
}

/// Latent-space variant: mean Euclidean distance of each candidate
/// embedding to its k nearest elite embeddings.
pub fn beacon_score_latent(
    candidate_latents: &[Vec<f64>],
    elite_latents: &[Vec<f64>],
    k: usize,
) -> Result<Vec<f64>> {
    if elite_latents.is_empty() {
        return Err(NovError::Contract("beacon scoring with empty elite set".into()));
    }
    if k == 0 {
        return Err(NovError::InvalidInput("k must be >= 1".into()));
    }
    let k_eff = k.min(elite_latents.len());
    Ok(candidate_latents
        .iter()
        .map(|z| {
            let mut dists: Vec<f64> = elite_latents
                .iter()
                .map(|e| z.iter().zip(e).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dists[..k_eff].iter().sum::<f64>() / k_eff as f64
        })
        .collect())
}

fn normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(u: f64) -> f64 {
    0.5 * (1.0 + libm::erf(u / std::f64::consts::SQRT_2))
}

/// Closed-form Expected Improvement over `best`, the max acquired response.
pub fn ei_score(posterior: &Posterior, best: f64) -> Vec<f64> {
    posterior
        .mean
        .iter()
        .zip(&posterior.variance)
        .map(|(&mu, &var)| {
            let sigma = var.sqrt();
            if sigma > 0.0 {
                let u = (mu - best) / sigma;
                (mu - best) * normal_cdf(u) + sigma * normal_pdf(u)
            } else {
                (mu - best).max(0.0)
            }
        })
        .collect()
}

/// Predictive standard deviation per candidate.
pub fn mu_score(posterior: &Posterior) -> Vec<f64> {
    posterior.variance.iter().map(|v| v.sqrt()).collect()
}

#[derive(Debug, Clone)]
pub struct AcquisitionDecision {
    pub chosen: usize,
    pub score: f64,
    pub scores: Vec<f64>,
    pub policy: Policy,
}

/// Argmax over unmeasured candidates; ties break to the lowest flat index.
pub fn select_next(
    scores: &[f64],
    measured: &[bool],
    policy: Policy,
) -> Result<AcquisitionDecision> {
    debug_assert_eq!(scores.len(), measured.len());
    let mut best: Option<(usize, f64)> = None;
    for (j, (&s, &m)) in scores.iter().zip(measured).enumerate() {
        if m {
            continue;
        }
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((j, s)),
        }
    }
    let (chosen, score) =
        best.ok_or_else(|| NovError::InvalidInput("budget exceeds search space".into()))?;
    Ok(AcquisitionDecision { chosen, score, scores: scores.to_vec(), policy })
}
