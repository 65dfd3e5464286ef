//! Train the deep-kernel surrogate on a handful of measured patches and
//! query its posterior: the marginal likelihood drops and the predictive
//! uncertainty is lowest at the training points.

use novscope::dataset::{candidate_set, extract_patch, generate_synthetic_domains, measure};
use novscope::extractor::{Architecture, ExtractorParams};
use novscope::gp::{nll, posterior, KernelHyperparams, SurrogateState};
use novscope::seeding::labeled_rng;
use novscope::train::{train, TrainSchedule};

fn main() {
    let dataset = generate_synthetic_domains(48, 48, 12, 14.0, 3.0, 1.0, 2).unwrap();
    let candidates = candidate_set(&dataset);
    let mut rng = labeled_rng(0, "measure");

    // Measure every 150th candidate as a training set.
    let train_idx: Vec<usize> = (0..candidates.len()).step_by(150).collect();
    let patches: Vec<_> = train_idx
        .iter()
        .map(|&i| extract_patch(&dataset, candidates[i], true).unwrap())
        .collect();
    let targets: Vec<f64> =
        train_idx.iter().map(|&i| measure(&dataset, candidates[i], &mut rng).unwrap()).collect();

    let arch = Architecture::new(dataset.patch_size(), 4, 8, 2).unwrap();
    let mut init_rng = labeled_rng(0, "init");
    let extractor = ExtractorParams::init(arch, &mut init_rng);
    let state =
        SurrogateState::new(extractor, KernelHyperparams::default(), patches.clone(), targets)
            .unwrap()
            .prepare()
            .unwrap();

    let before = nll(&state).unwrap();
    let schedule = TrainSchedule { iterations: 150, step_size: 0.01, seed: 0, freeze_extractor: false };
    let trained = train(state, &schedule).unwrap();
    let after = nll(&trained).unwrap();
    println!("negative log-likelihood: {before:.4} -> {after:.4} ({} points)", patches.len());

    let post = posterior(&trained, &patches).unwrap();
    let mean_sd_at_train =
        post.variance.iter().map(|v| v.sqrt()).sum::<f64>() / post.variance.len() as f64;
    let all: Vec<_> = candidates
        .iter()
        .map(|&idx| extract_patch(&dataset, idx, true).unwrap())
        .collect();
    let post_all = posterior(&trained, &all).unwrap();
    let mean_sd_everywhere =
        post_all.variance.iter().map(|v| v.sqrt()).sum::<f64>() / post_all.variance.len() as f64;
    println!(
        "mean predictive sd: {mean_sd_at_train:.4} at training points vs {mean_sd_everywhere:.4} grid-wide"
    );
}
