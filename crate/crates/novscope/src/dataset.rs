//! Ground-truth scan datasets, patch extraction, and the digital-twin
//! measurement oracle.
//!
//! A [`ScanDataset`] holds the fast-to-acquire overview image plus an
//! optional ground-truth scalarizer map of identical dimensions. The twin
//! replays the map (optionally with Gaussian measurement noise) in place of
//! a live instrument; a future instrument client only needs to satisfy the
//! same `measure` contract.

use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::error::{NovError, Result};
use crate::seeding::rng_from_seed;

/// Overview image grid + optional scalarizer map + patch geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanDataset {
    height: usize,
    width: usize,
    patch_size: usize,
    noise_std: f32,
    image: Vec<f32>,
    scalar_map: Option<Vec<f32>>,
}

/// One flat index into the row-major ordering of valid patch centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CandidateIndex {
    pub flat: usize,
    pub row: usize,
    pub col: usize,
}

/// A p*p window of the overview image, optionally standardized to
/// zero mean / unit population std (constant windows map to all-zeros).
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub values: Vec<f64>,
    pub center: (usize, usize),
    pub standardized: bool,
}

impl ScanDataset {
    pub fn new(
        height: usize,
        width: usize,
        patch_size: usize,
        noise_std: f32,
        image: Vec<f32>,
        scalar_map: Option<Vec<f32>>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(NovError::InvalidInput("image dimensions must be positive".into()));
        }
        if patch_size == 0 || patch_size > height.min(width) {
            return Err(NovError::InvalidInput(format!(
                "patch_size {patch_size} must be in 1..=min(H,W)={}",
                height.min(width)
            )));
        }
        if image.len() != height * width {
            return Err(NovError::InvalidInput(format!(
                "image has {} values, expected {}",
                image.len(),
                height * width
            )));
        }
        if image.iter().any(|v| !v.is_finite()) {
            return Err(NovError::InvalidInput("image contains non-finite values".into()));
        }
        if let Some(map) = &scalar_map {
            if map.len() != height * width {
                return Err(NovError::InvalidInput(format!(
                    "scalar_map has {} values, expected {}",
                    map.len(),
                    height * width
                )));
            }
            if map.iter().any(|v| !v.is_finite()) {
                return Err(NovError::InvalidInput("scalar_map contains non-finite values".into()));
            }
        }
        if !noise_std.is_finite() || noise_std < 0.0 {
            return Err(NovError::InvalidInput("noise_std must be finite and nonnegative".into()));
        }
        Ok(Self { height, width, patch_size, noise_std, image, scalar_map })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn noise_std(&self) -> f32 {
        self.noise_std
    }

    pub fn image(&self) -> &[f32] {
        &self.image
    }

    pub fn scalar_map(&self) -> Option<&[f32]> {
        self.scalar_map.as_deref()
    }

    pub fn has_map(&self) -> bool {
        self.scalar_map.is_some()
    }

    pub fn with_noise_std(mut self, noise_std: f32) -> Result<Self> {
        if !noise_std.is_finite() || noise_std < 0.0 {
            return Err(NovError::InvalidInput("noise_std must be finite and nonnegative".into()));
        }
        self.noise_std = noise_std;
        Ok(self)
    }

    /// Ground-truth scalarizer value at a candidate center.
    pub fn map_value(&self, idx: CandidateIndex) -> Result<f64> {
        let map = self.scalar_map.as_ref().ok_or(NovError::OracleUnavailable)?;
        Ok(f64::from(map[idx.row * self.width + idx.col]))
    }
}

/// Margin of valid centers: the window spans rows
/// `[row - floor(p/2), row + ceil(p/2) - 1]`, so for even p the center
/// pixel is the upper-left of the central 2x2 block.
fn center_margins(patch_size: usize) -> (usize, usize) {
    (patch_size / 2, patch_size.div_ceil(2))
}

/// All valid patch centers in deterministic row-major order.
pub fn candidate_set(dataset: &ScanDataset) -> Vec<CandidateIndex> {
    let (lo, hi) = center_margins(dataset.patch_size);
    let rows = dataset.height - dataset.patch_size + 1;
    let cols = dataset.width - dataset.patch_size + 1;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(CandidateIndex { flat: r * cols + c, row: r + lo, col: c + lo });
        }
    }
    debug_assert!(out.iter().all(|idx| idx.row + hi <= dataset.height));
    out
}

/// Number of valid candidates without materializing the list.
pub fn candidate_count(dataset: &ScanDataset) -> usize {
    (dataset.height - dataset.patch_size + 1) * (dataset.width - dataset.patch_size + 1)
}

/// Extract the p*p window centered at `idx`.
pub fn extract_patch(dataset: &ScanDataset, idx: CandidateIndex, standardize: bool) -> Result<Patch> {
    let p = dataset.patch_size;
    let (lo, hi) = center_margins(p);
    if idx.row < lo || idx.col < lo || idx.row + hi > dataset.height || idx.col + hi > dataset.width {
        return Err(NovError::Contract(format!(
            "candidate center ({}, {}) outside valid margin",
            idx.row, idx.col
        )));
    }
    let mut values = Vec::with_capacity(p * p);
    for r in (idx.row - lo)..(idx.row - lo + p) {
        let base = r * dataset.width + (idx.col - lo);
        values.extend(dataset.image[base..base + p].iter().map(|&v| f64::from(v)));
    }
    if standardize {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std < 1e-12 {
            values.iter_mut().for_each(|v| *v = 0.0);
        } else {
            values.iter_mut().for_each(|v| *v = (*v - mean) / std);
        }
    }
    Ok(Patch { values, center: (idx.row, idx.col), standardized: standardize })
}

/// Replay the scalarizer map at `idx`, plus seeded Gaussian noise.
pub fn measure<R: Rng>(dataset: &ScanDataset, idx: CandidateIndex, rng: &mut R) -> Result<f64> {
    let value = dataset.map_value(idx)?;
    if dataset.noise_std == 0.0 {
        return Ok(value);
    }
    let eps: f64 = rng.sample(StandardNormal);
    Ok(value + f64::from(dataset.noise_std) * eps)
}

/// Draw `n_seed` distinct candidates uniformly without replacement.
pub fn seed_sample<R: Rng>(
    candidates: &[CandidateIndex],
    n_seed: usize,
    rng: &mut R,
) -> Result<Vec<CandidateIndex>> {
    if n_seed == 0 || n_seed > candidates.len() {
        return Err(NovError::InvalidInput(format!(
            "n_seed {n_seed} out of range 1..={}",
            candidates.len()
        )));
    }
    let picks = rand::seq::index::sample(rng, candidates.len(), n_seed);
    Ok(picks.iter().map(|i| candidates[i]).collect())
}

/// Raw stripe waveform used by the domains generator; stripes follow its
/// sign, so a row of width W holds W/period full periods.
pub fn stripe_waveform(col: usize, period: f64) -> f64 {
    (std::f64::consts::TAU * (col as f64 + 0.5) / period).sin()
}

/// Synthetic ferroelectric-domain-like twin: smoothed alternating stripes
/// with a rare anomalous wall regime in the scalarizer map, one compact
/// high-response inclusion, and a few low-response voids. Every response
/// regime is visible in the image so that a patch-based surrogate can
/// predict it.
pub fn generate_synthetic_domains(
    height: usize,
    width: usize,
    patch_size: usize,
    stripe_period: f64,
    wall_width: f64,
    loop_contrast: f64,
    seed: u64,
) -> Result<ScanDataset> {
    if height < 2 * patch_size || width < 2 * patch_size {
        return Err(NovError::InvalidInput(format!(
            "dims {height}x{width} must be at least twice patch_size {patch_size}"
        )));
    }
    if !(stripe_period.is_finite() && stripe_period >= 2.0) {
        return Err(NovError::InvalidInput("stripe_period must be >= 2".into()));
    }
    if !(wall_width.is_finite() && wall_width >= 0.0) || !loop_contrast.is_finite() {
        return Err(NovError::InvalidInput("wall_width/loop_contrast invalid".into()));
    }
    let mut rng = rng_from_seed(seed);

    // Stripe sign and wall mask are functions of the column only.
    let signs: Vec<bool> = (0..width).map(|c| stripe_waveform(c, stripe_period) > 0.0).collect();
    let mut boundaries = Vec::new();
    for c in 0..width - 1 {
        if signs[c] != signs[c + 1] {
            boundaries.push(c as f64 + 0.5);
        }
    }
    let wall: Vec<bool> = (0..width)
        .map(|c| {
            boundaries
                .iter()
                .any(|b| (c as f64 - b).abs() <= wall_width / 2.0)
        })
        .collect();

    // Image: two intensity levels, horizontally smoothed.
    let base: Vec<f64> = signs.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
    let kernel = [1.0, 4.0, 6.0, 4.0, 1.0];
    let smooth: Vec<f64> = (0..width)
        .map(|c| {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let off = k as isize - 2;
                let cc = c as isize + off;
                if cc >= 0 && (cc as usize) < width {
                    acc += kv * base[cc as usize];
                    norm += kv;
                }
            }
            acc / norm
        })
        .collect();

    // Seeded inclusions: one compact flat-topped high-response blob (the
    // anomalous regime's global optimum) and a handful of small voids with
    // distinct low response levels. Placed inside the candidate interior
    // with a margin so every regime is reachable.
    let margin = patch_size as f64;
    let place = |rng: &mut rand_chacha::ChaCha12Rng, taken: &[(f64, f64, f64)], rad: f64| {
        // Deterministic rejection sampling; falls back to the last draw.
        let mut pos = (height as f64 / 2.0, width as f64 / 2.0);
        for _ in 0..64 {
            let r = rng.random_range(margin..height as f64 - margin);
            let c = rng.random_range(margin..width as f64 - margin);
            pos = (r, c);
            let clear = taken
                .iter()
                .all(|&(tr, tc, trad)| ((r - tr).powi(2) + (c - tc).powi(2)).sqrt() > trad + rad + 2.0);
            if clear {
                break;
            }
        }
        pos
    };
    let blob_rad = height.min(width) as f64 / 8.0;
    let void_rad = (height.min(width) as f64 / 24.0).max(1.5);
    let mut inclusions: Vec<(f64, f64, f64)> = Vec::new();
    let (blob_r, blob_c) = place(&mut rng, &inclusions, blob_rad);
    inclusions.push((blob_r, blob_c, blob_rad));
    let void_levels = [0.05, 0.15, 0.25, 0.35, 0.45];
    let mut voids = Vec::new();
    for &level in &void_levels {
        let (r, c) = place(&mut rng, &inclusions, void_rad);
        inclusions.push((r, c, void_rad));
        voids.push((r, c, level));
    }
    // Image profiles are smooth (visible bumps/dimples); the scalarizer
    // regimes are hard-edged plateaus so intermediate responses do not
    // exist and every regime occupies its own band of the target range.
    let blob_profile = |r: usize, c: usize| -> f64 {
        let d2 = (r as f64 - blob_r).powi(2) + (c as f64 - blob_c).powi(2);
        (-(d2 / (blob_rad * blob_rad)).powi(4)).exp()
    };
    let void_profile = |r: usize, c: usize, vr: f64, vc: f64| -> f64 {
        let d2 = (r as f64 - vr).powi(2) + (c as f64 - vc).powi(2);
        (-(d2 / (void_rad * void_rad)).powi(2)).exp()
    };
    let inside = |r: usize, c: usize, ir: f64, ic: f64, rad: f64| -> bool {
        (r as f64 - ir).powi(2) + (c as f64 - ic).powi(2) <= rad * rad
    };

    let mut image = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let mut v = smooth[c] + 1.4 * blob_profile(r, c);
            // Deeper voids are darker, so appearance predicts the level.
            for &(vr, vc, level) in &voids {
                v -= (0.9 - level) * void_profile(r, c, vr, vc);
            }
            let eps: f64 = rng.sample(StandardNormal);
            image.push((v + 0.05 * eps) as f32);
        }
    }

    // Scalarizer: close-but-distinct levels for the two stripe interiors,
    // an anomalous wall level, stepped low void levels, and the blob's
    // high plateau.
    let mut map = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let base = if wall[c] {
                0.75
            } else if signs[c] {
                0.58
            } else {
                0.55
            };
            let mut v = if inside(r, c, blob_r, blob_c, blob_rad) { 2.0 } else { base };
            for &(vr, vc, level) in &voids {
                if inside(r, c, vr, vc, void_rad) {
                    v = level;
                }
            }
            map.push((loop_contrast * v) as f32);
        }
    }

    ScanDataset::new(height, width, patch_size, 0.0, image, Some(map))
}

/// Synthetic nanoparticle-assembly twin: seeded disks, with a scalarizer
/// decaying radially at particle edges on a scale of `edge_decay` pixels.
pub fn generate_synthetic_particles(
    height: usize,
    width: usize,
    patch_size: usize,
    n_particles: usize,
    radius_range: (f64, f64),
    edge_decay: f64,
    seed: u64,
) -> Result<ScanDataset> {
    if height < 2 * patch_size || width < 2 * patch_size {
        return Err(NovError::InvalidInput(format!(
            "dims {height}x{width} must be at least twice patch_size {patch_size}"
        )));
    }
    if n_particles == 0 {
        return Err(NovError::InvalidInput("n_particles must be >= 1".into()));
    }
    let (r_lo, r_hi) = radius_range;
    if !(r_lo.is_finite() && r_hi.is_finite() && 0.0 < r_lo && r_lo <= r_hi) {
        return Err(NovError::InvalidInput("radius_range must satisfy 0 < lo <= hi".into()));
    }
    if !(edge_decay.is_finite() && edge_decay >= 0.0) {
        return Err(NovError::InvalidInput("edge_decay must be nonnegative".into()));
    }
    let mut rng = rng_from_seed(seed);
    let disks: Vec<(f64, f64, f64)> = (0..n_particles)
        .map(|_| {
            let r = rng.random_range(0.0..height as f64);
            let c = rng.random_range(0.0..width as f64);
            let rad = if r_lo == r_hi { r_lo } else { rng.random_range(r_lo..r_hi) };
            (r, c, rad)
        })
        .collect();

    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let decay = edge_decay.max(1e-6);
    let mut image = Vec::with_capacity(height * width);
    let mut map = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let mut intensity = 0.0;
            let mut response: f64 = 0.0;
            for &(dr, dc, rad) in &disks {
                let dist = ((r as f64 - dr).powi(2) + (c as f64 - dc).powi(2)).sqrt();
                intensity += sigmoid((rad - dist) / 0.8);
                response = response.max(sigmoid((rad - dist) / decay));
            }
            let eps: f64 = rng.sample(StandardNormal);
            image.push((intensity + 0.02 * eps) as f32);
            map.push(response as f32);
        }
    }

    ScanDataset::new(height, width, patch_size, 0.0, image, Some(map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::labeled_rng;

    fn ramp_dataset(h: usize, w: usize, p: usize) -> ScanDataset {
        let image: Vec<f32> = (0..h * w).map(|i| i as f32).collect();
        let map: Vec<f32> = (0..h * w).map(|i| (i % 7) as f32).collect();
        ScanDataset::new(h, w, p, 0.0, image, Some(map)).unwrap()
    }

    /// Brute-force window count: every top-left corner whose p*p window fits.
    fn window_count_oracle(h: usize, w: usize, p: usize) -> usize {
        let mut count = 0;
        for r in 0..h {
            for c in 0..w {
                if r + p <= h && c + p <= w {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn candidate_count_matches_window_oracle() {
        for &(h, w, p) in &[(64, 64, 16), (16, 16, 4), (5, 9, 3), (8, 8, 8), (7, 5, 2)] {
            let ds = ramp_dataset(h, w, p);
            let expected = window_count_oracle(h, w, p);
            assert_eq!(candidate_count(&ds), expected, "{h}x{w} p={p}");
            assert_eq!(candidate_set(&ds).len(), expected);
        }
        assert_eq!(candidate_count(&ramp_dataset(64, 64, 16)), 2401);
    }

    #[test]
    fn candidate_set_is_row_major_and_in_bounds() {
        let ds = ramp_dataset(10, 12, 5);
        let cands = candidate_set(&ds);
        let (lo, hi) = center_margins(5);
        for (i, idx) in cands.iter().enumerate() {
            assert_eq!(idx.flat, i);
            assert!(idx.row >= lo && idx.row + hi <= 10);
            assert!(idx.col >= lo && idx.col + hi <= 12);
        }
        // Row-major: flat index increases with (row, col).
        for pair in cands.windows(2) {
            assert!((pair[0].row, pair[0].col) < (pair[1].row, pair[1].col));
        }
    }

    #[test]
    fn extract_patch_matches_manual_window() {
        let ds = ramp_dataset(6, 6, 3);
        let idx = CandidateIndex { flat: 0, row: 2, col: 3 };
        let patch = extract_patch(&ds, idx, false).unwrap();
        let mut expected = Vec::new();
        for r in 1..4 {
            for c in 2..5 {
                expected.push((r * 6 + c) as f64);
            }
        }
        assert_eq!(patch.values, expected);
    }

    #[test]
    fn even_patch_center_is_upper_left_of_central_block() {
        // p=4: window spans [row-2, row+1] x [col-2, col+1].
        let ds = ramp_dataset(8, 8, 4);
        let idx = CandidateIndex { flat: 0, row: 3, col: 3 };
        let patch = extract_patch(&ds, idx, false).unwrap();
        assert_eq!(patch.values[0], (1 * 8 + 1) as f64);
        assert_eq!(*patch.values.last().unwrap(), (4 * 8 + 4) as f64);
    }

    #[test]
    fn standardized_patch_has_zero_mean_unit_std() {
        let ds = ramp_dataset(9, 9, 5);
        let idx = candidate_set(&ds)[7];
        let patch = extract_patch(&ds, idx, true).unwrap();
        let n = patch.values.len() as f64;
        let mean: f64 = patch.values.iter().sum::<f64>() / n;
        let var: f64 = patch.values.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_patch_standardizes_to_zeros() {
        let ds = ScanDataset::new(5, 5, 3, 0.0, vec![2.5; 25], None).unwrap();
        let patch = extract_patch(&ds, candidate_set(&ds)[0], true).unwrap();
        assert!(patch.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn patch_outside_margin_is_rejected() {
        let ds = ramp_dataset(8, 8, 5);
        let bad = CandidateIndex { flat: 0, row: 1, col: 4 };
        assert!(extract_patch(&ds, bad, false).is_err());
    }

    #[test]
    fn measure_without_map_is_oracle_unavailable() {
        let ds = ScanDataset::new(6, 6, 3, 0.0, vec![0.0; 36], None).unwrap();
        let mut rng = labeled_rng(0, "measure");
        match measure(&ds, candidate_set(&ds)[0], &mut rng) {
            Err(NovError::OracleUnavailable) => {}
            other => panic!("expected OracleUnavailable, got {other:?}"),
        }
    }

    #[test]
    fn noiseless_measure_replays_the_map_exactly() {
        let ds = ramp_dataset(8, 8, 3);
        let mut rng = labeled_rng(1, "measure");
        for idx in candidate_set(&ds) {
            assert_eq!(measure(&ds, idx, &mut rng).unwrap(), ds.map_value(idx).unwrap());
        }
    }

    #[test]
    fn noisy_measure_is_seeded_and_has_expected_spread() {
        let ds = ramp_dataset(8, 8, 3).with_noise_std(0.5).unwrap();
        let idx = candidate_set(&ds)[0];
        let truth = ds.map_value(idx).unwrap();
        let mut a = labeled_rng(9, "measure");
        let mut b = labeled_rng(9, "measure");
        assert_eq!(measure(&ds, idx, &mut a).unwrap(), measure(&ds, idx, &mut b).unwrap());

        let mut rng = labeled_rng(9, "measure");
        let n = 20_000;
        let draws: Vec<f64> = (0..n).map(|_| measure(&ds, idx, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
        assert!((mean - truth).abs() < 0.02);
        assert!((var.sqrt() - 0.5).abs() < 0.02);
    }

    #[test]
    fn seed_sample_is_distinct_and_validated() {
        let ds = ramp_dataset(10, 10, 3);
        let cands = candidate_set(&ds);
        let mut rng = labeled_rng(3, "seed-sample");
        let picks = seed_sample(&cands, 12, &mut rng).unwrap();
        let set: std::collections::HashSet<usize> = picks.iter().map(|i| i.flat).collect();
        assert_eq!(set.len(), 12);
        assert!(seed_sample(&cands, 0, &mut rng).is_err());
        assert!(seed_sample(&cands, cands.len() + 1, &mut rng).is_err());
    }

    #[test]
    fn seed_sample_is_roughly_uniform() {
        let ds = ramp_dataset(7, 7, 3);
        let cands = candidate_set(&ds);
        let mut rng = labeled_rng(4, "seed-sample");
        let mut hits = vec![0usize; cands.len()];
        let trials = 5000;
        for _ in 0..trials {
            for idx in seed_sample(&cands, 5, &mut rng).unwrap() {
                hits[idx.flat] += 1;
            }
        }
        let expected = trials as f64 * 5.0 / cands.len() as f64;
        for &h in &hits {
            assert!((h as f64 - expected).abs() < 0.35 * expected, "h={h} expected={expected}");
        }
    }

    #[test]
    fn domains_generator_is_deterministic_and_seed_sensitive() {
        let a = generate_synthetic_domains(32, 32, 8, 8.0, 2.0, 1.0, 11).unwrap();
        let b = generate_synthetic_domains(32, 32, 8, 8.0, 2.0, 1.0, 11).unwrap();
        let c = generate_synthetic_domains(32, 32, 8, 8.0, 2.0, 1.0, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn stripe_sign_changes_match_period() {
        // W/period full periods -> 2 sign changes per period.
        let (width, period) = (64usize, 8.0);
        let signs: Vec<bool> = (0..width).map(|c| stripe_waveform(c, period) > 0.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 2 * (width as f64 / period) as usize - 1);
    }

    #[test]
    fn domains_map_has_three_regimes() {
        let ds = generate_synthetic_domains(64, 64, 16, 16.0, 3.0, 1.0, 0).unwrap();
        let map = ds.scalar_map().unwrap();
        let has = |pred: &dyn Fn(f32) -> bool| map.iter().any(|&v| pred(v));
        // Two stripe interiors, the anomalous wall level, the high blob
        // plateau, and at least one low void.
        assert!(has(&|v| (v - 0.55).abs() < 1e-6));
        assert!(has(&|v| (v - 0.58).abs() < 1e-6));
        assert!(has(&|v| (v - 0.75).abs() < 1e-6));
        assert!(has(&|v| v > 1.9));
        assert!(has(&|v| v < 0.2));
    }

    #[test]
    fn particles_generator_bounds_and_determinism() {
        let a = generate_synthetic_particles(48, 48, 12, 10, (3.0, 6.0), 1.5, 5).unwrap();
        let b = generate_synthetic_particles(48, 48, 12, 10, (3.0, 6.0), 1.5, 5).unwrap();
        assert_eq!(a, b);
        let map = a.scalar_map().unwrap();
        assert!(map.iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Disk interiors push the response close to 1.
        assert!(map.iter().cloned().fold(f32::MIN, f32::max) > 0.9);
    }

    #[test]
    fn dataset_validation_rejects_bad_shapes() {
        assert!(ScanDataset::new(0, 4, 1, 0.0, vec![], None).is_err());
        assert!(ScanDataset::new(4, 4, 5, 0.0, vec![0.0; 16], None).is_err());
        assert!(ScanDataset::new(4, 4, 2, 0.0, vec![0.0; 15], None).is_err());
        assert!(ScanDataset::new(4, 4, 2, 0.0, vec![0.0; 16], Some(vec![0.0; 15])).is_err());
        assert!(ScanDataset::new(4, 4, 2, -1.0, vec![0.0; 16], None).is_err());
        assert!(ScanDataset::new(4, 4, 2, 0.0, vec![f32::NAN; 16], None).is_err());
    }
}
