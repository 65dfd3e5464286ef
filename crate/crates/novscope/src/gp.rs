//! Exact deep-kernel GP: an RBF kernel over the extractor's latent space,
//! with targets z-scored per training set. The marginal likelihood and its
//! gradients with respect to extractor weights and the three log
//! hyperparameters are computed analytically through the Cholesky
//! factorization.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Patch;
use crate::error::{NovError, Result};
use crate::extractor::{backward, embed, forward_cached, ExtractorParams};

/// Relative jitter schedule: start at 1e-6 * s^2, escalate x10 up to
/// 1e-2 * s^2, then report the matrix as non-PD.
const JITTER_START: f64 = 1e-6;
const JITTER_MAX: f64 = 1e-2;

/// Log-parameterized RBF kernel hyperparameters; s, l, sigma_n^2 are
/// strictly positive by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelHyperparams {
    pub log_outputscale: f64,
    pub log_lengthscale: f64,
    pub log_noise: f64,
}

impl KernelHyperparams {
    pub fn outputscale2(&self) -> f64 {
        (2.0 * self.log_outputscale).exp()
    }

    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }

    pub fn noise_var(&self) -> f64 {
        self.log_noise.exp()
    }
}

impl Default for KernelHyperparams {
    fn default() -> Self {
        // Unit scale/lengthscale on z-scored targets, sigma_n^2 = 0.1.
        Self { log_outputscale: 0.0, log_lengthscale: 0.0, log_noise: (0.1f64).ln() }
    }
}

/// k(z, z') = s^2 * exp(-|z - z'|^2 / (2 l^2)).
pub fn kernel_eval(theta: &KernelHyperparams, z: &[f64], zp: &[f64]) -> f64 {
    debug_assert_eq!(z.len(), zp.len());
    let d2: f64 = z.iter().zip(zp).map(|(a, b)| (a - b) * (a - b)).sum();
    let l = theta.lengthscale();
    theta.outputscale2() * (-d2 / (2.0 * l * l)).exp()
}

/// Cached triangular factor of K_ZZ plus the solved vector K_ZZ^-1 y.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub latents: Vec<Vec<f64>>,
    pub chol_l: DMatrix<f64>,
    pub alpha: DVector<f64>,
    pub jitter: f64,
}

/// The DKL surrogate: extractor weights, kernel hyperparameters, acquired
/// training set, target normalization stats, and an optional factorization
/// cache (populated by `prepare`/training, reused by `posterior`).
#[derive(Debug, Clone)]
pub struct SurrogateState {
    pub extractor: ExtractorParams,
    pub kernel: KernelHyperparams,
    pub train_patches: Vec<Patch>,
    pub train_targets: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
    pub cache: Option<Factorization>,
}

/// Predictive mean and variance per candidate, in raw response units.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// How many variances were clamped up to zero, and the largest
    /// magnitude clamped away (normalized units).
    pub clamp_count: usize,
    pub max_clamp: f64,
}

impl SurrogateState {
    pub fn new(
        extractor: ExtractorParams,
        kernel: KernelHyperparams,
        train_patches: Vec<Patch>,
        train_targets: Vec<f64>,
    ) -> Result<Self> {
        if train_patches.is_empty() || train_patches.len() != train_targets.len() {
            return Err(NovError::Contract(format!(
                "training set sizes disagree: {} patches, {} targets",
                train_patches.len(),
                train_targets.len()
            )));
        }
        let n = train_targets.len() as f64;
        let mean = train_targets.iter().sum::<f64>() / n;
        let var = train_targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        let std = if std < 1e-12 { 1.0 } else { std };
        Ok(Self {
            extractor,
            kernel,
            train_patches,
            train_targets,
            target_mean: mean,
            target_std: std,
            cache: None,
        })
    }

    pub fn len(&self) -> usize {
        self.train_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_targets.is_empty()
    }

    pub fn normalized_targets(&self) -> Vec<f64> {
        self.train_targets.iter().map(|y| (y - self.target_mean) / self.target_std).collect()
    }

    pub fn train_latents(&self) -> Result<Vec<Vec<f64>>> {
        self.train_patches.iter().map(|p| embed(&self.extractor, p)).collect()
    }

    /// Factorize K_ZZ, escalating jitter on failure.
    pub fn factorize(&self) -> Result<Factorization> {
        let latents = self.train_latents()?;
        let y = DVector::from_vec(self.normalized_targets());
        let (chol_l, jitter) = cholesky_with_jitter(&self.kernel, &latents)?;
        let alpha = solve_cholesky(&chol_l, &y);
        Ok(Factorization { latents, chol_l, alpha, jitter })
    }

    /// Same state with the factorization cache populated.
    pub fn prepare(mut self) -> Result<Self> {
        self.cache = Some(self.factorize()?);
        Ok(self)
    }
}

fn rbf_matrix(theta: &KernelHyperparams, latents: &[Vec<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = latents.len();
    let s2 = theta.outputscale2();
    let l2 = theta.lengthscale().powi(2);
    let mut k = DMatrix::zeros(n, n);
    let mut d2m = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = s2;
        for j in (i + 1)..n {
            let d2: f64 =
                latents[i].iter().zip(&latents[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = s2 * (-d2 / (2.0 * l2)).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
            d2m[(i, j)] = d2;
            d2m[(j, i)] = d2;
        }
    }
    (k, d2m)
}

/// Lower Cholesky factor of K_rbf + (sigma_n^2 + jitter) I.
fn cholesky_with_jitter(
    theta: &KernelHyperparams,
    latents: &[Vec<f64>],
) -> Result<(DMatrix<f64>, f64)> {
    let (k_rbf, _) = rbf_matrix(theta, latents);
    cholesky_of(theta, &k_rbf)
}

fn cholesky_of(theta: &KernelHyperparams, k_rbf: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let s2 = theta.outputscale2();
    let noise = theta.noise_var();
    let mut jitter = JITTER_START * s2;
    loop {
        let mut k = k_rbf.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += noise + jitter;
        }
        if let Some(chol) = nalgebra::Cholesky::new(k) {
            return Ok((chol.unpack(), jitter));
        }
        jitter *= 10.0;
        if jitter > JITTER_MAX * s2 {
            return Err(NovError::NotPositiveDefinite { max_jitter: JITTER_MAX * s2 });
        }
    }
}

fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = b.len();
    let mut x = b.clone();
    for i in 0..n {
        for j in 0..i {
            let lij = l[(i, j)];
            x[i] -= lij * x[j];
        }
        x[i] /= l[(i, i)];
    }
    x
}

fn solve_upper_t(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    // Solves L^T x = b.
    let n = b.len();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            let lji = l[(j, i)];
            x[i] -= lji * x[j];
        }
        x[i] /= l[(i, i)];
    }
    x
}

fn solve_cholesky(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    solve_upper_t(l, &solve_lower(l, b))
}

fn log_det_from_chol(l: &DMatrix<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Negative log marginal likelihood of the z-scored targets.
pub fn nll(state: &SurrogateState) -> Result<f64> {
    let fac = match &state.cache {
        Some(f) => f.clone(),
        None => state.factorize()?,
    };
    let y = DVector::from_vec(state.normalized_targets());
    let n = y.len() as f64;
    Ok(0.5 * y.dot(&fac.alpha)
        + 0.5 * log_det_from_chol(&fac.chol_l)
        + 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

/// Flat gradient of the NLL: extractor weights first, then
/// [log_outputscale, log_lengthscale, log_noise].
#[derive(Debug, Clone)]
pub struct NllGrad {
    pub weights: Vec<f64>,
    pub log_outputscale: f64,
    pub log_lengthscale: f64,
    pub log_noise: f64,
}

pub fn nll_with_grad(state: &SurrogateState) -> Result<(f64, NllGrad)> {
    let n = state.len();
    let theta = &state.kernel;
    let d = state.extractor.arch.latent_dim;

    // Forward passes with caches retained for backprop.
    let mut latents = Vec::with_capacity(n);
    let mut caches = Vec::with_capacity(n);
    for p in &state.train_patches {
        if p.values.len() != state.extractor.arch.patch_size.pow(2) {
            return Err(NovError::Contract("patch/architecture shape mismatch".into()));
        }
        let (z, c) = forward_cached(&state.extractor, &p.values);
        latents.push(z);
        caches.push(c);
    }

    let (k_rbf, d2m) = rbf_matrix(theta, &latents);
    let (chol_l, jitter) = cholesky_of(theta, &k_rbf)?;
    let y = DVector::from_vec(state.normalized_targets());
    let alpha = solve_cholesky(&chol_l, &y);

    let value = 0.5 * y.dot(&alpha)
        + 0.5 * log_det_from_chol(&chol_l)
        + 0.5 * (n as f64) * (2.0 * std::f64::consts::PI).ln();

    // G = 0.5 (K^-1 - alpha alpha^T); dNLL/dtheta = sum_ij G_ij dK_ij/dtheta.
    let kinv = {
        let mut inv = DMatrix::identity(n, n);
        for col in 0..n {
            let b = inv.column(col).into_owned();
            let x = solve_cholesky(&chol_l, &b);
            inv.set_column(col, &x);
        }
        inv
    };
    let l2 = theta.lengthscale().powi(2);
    let noise = theta.noise_var();

    let mut g_log_s = 0.0;
    let mut g_log_l = 0.0;
    let mut g_log_n = 0.0;
    let mut dz = vec![vec![0.0; d]; n];
    for i in 0..n {
        for j in 0..n {
            let g = 0.5 * (kinv[(i, j)] - alpha[i] * alpha[j]);
            let krbf = k_rbf[(i, j)];
            g_log_s += g * 2.0 * krbf;
            if i == j {
                g_log_s += g * 2.0 * jitter;
                g_log_n += g * noise;
            } else {
                g_log_l += g * krbf * d2m[(i, j)] / l2;
                // Both (i,j) and (j,i) contribute to z_i through symmetry;
                // the double loop covers them.
                let scale = -g * krbf / l2;
                for k in 0..d {
                    dz[i][k] += 2.0 * scale * (latents[i][k] - latents[j][k]);
                }
            }
        }
    }

    let mut w_grad = vec![0.0; state.extractor.weights.len()];
    for i in 0..n {
        backward(&state.extractor, &caches[i], &dz[i], &mut w_grad);
    }

    Ok((
        value,
        NllGrad {
            weights: w_grad,
            log_outputscale: g_log_s,
            log_lengthscale: g_log_l,
            log_noise: g_log_n,
        },
    ))
}

/// Predictive mean/variance at candidate patches, de-normalized back to raw
/// response units. Variances are clamped at zero with clamp accounting.
pub fn posterior(state: &SurrogateState, candidates: &[Patch]) -> Result<Posterior> {
    let fac = match &state.cache {
        Some(f) => f.clone(),
        None => state.factorize()?,
    };
    let n = state.len();
    let theta = &state.kernel;
    let s2 = theta.outputscale2();
    let l2 = theta.lengthscale().powi(2);
    let std = state.target_std;
    let var_scale = std * std;

    // Row-major copy of L for the per-candidate forward substitutions.
    let l_rows: Vec<f64> = {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                v[i * n + j] = fac.chol_l[(i, j)];
            }
        }
        v
    };

    let mut mean = Vec::with_capacity(candidates.len());
    let mut variance = Vec::with_capacity(candidates.len());
    let mut clamp_count = 0usize;
    let mut max_clamp: f64 = 0.0;
    let mut k_vec = vec![0.0; n];
    let mut v = vec![0.0; n];
    for cand in candidates {
        let z = embed(&state.extractor, cand)?;
        for (i, zi) in fac.latents.iter().enumerate() {
            let d2: f64 = z.iter().zip(zi).map(|(a, b)| (a - b) * (a - b)).sum();
            k_vec[i] = s2 * (-d2 / (2.0 * l2)).exp();
        }
        let mu_norm: f64 = k_vec.iter().zip(fac.alpha.iter()).map(|(a, b)| a * b).sum();
        // v = L^-1 k_vec; sigma^2 = s^2 - v.v
        for i in 0..n {
            let row = &l_rows[i * n..i * n + i];
            let acc: f64 = row.iter().zip(&v[..i]).map(|(a, b)| a * b).sum();
            v[i] = (k_vec[i] - acc) / l_rows[i * n + i];
        }
        let mut var_norm = s2 - v.iter().map(|x| x * x).sum::<f64>();
        if var_norm < 0.0 {
            clamp_count += 1;
            max_clamp = max_clamp.max(-var_norm);
            var_norm = 0.0;
        }
        mean.push(state.target_mean + std * mu_norm);
        variance.push(var_scale * var_norm);
    }
    Ok(Posterior { mean, variance, clamp_count, max_clamp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::Architecture;
    use crate::seeding::labeled_rng;
    use rand::RngExt;

    fn random_patch<R: rand::Rng>(p: usize, rng: &mut R) -> Patch {
        Patch {
            values: (0..p * p).map(|_| rng.random_range(-1.5..1.5)).collect(),
            center: (0, 0),
            standardized: true,
        }
    }

    fn random_state<R: rand::Rng>(
        n: usize,
        rng: &mut R,
        kernel: KernelHyperparams,
    ) -> SurrogateState {
        let arch = Architecture::new(4, 2, 2, 2).unwrap();
        let extractor = ExtractorParams::init(arch, rng);
        let patches: Vec<Patch> = (0..n).map(|_| random_patch(4, rng)).collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        SurrogateState::new(extractor, kernel, patches, targets).unwrap()
    }

    /// Dense K = K_rbf + (noise + jitter) I from a factorized state.
    fn dense_k(state: &SurrogateState, fac: &Factorization) -> DMatrix<f64> {
        let (mut k, _) = rbf_matrix(&state.kernel, &fac.latents);
        for i in 0..k.nrows() {
            k[(i, i)] += state.kernel.noise_var() + fac.jitter;
        }
        k
    }

    #[test]
    fn single_point_nll_is_half_log_two_pi() {
        // Hypers tuned so K = [1]: s^2 (1 + 1e-6) = 1, noise = 0.
        let kernel = KernelHyperparams {
            log_outputscale: -0.25 * (1.0f64 + 1e-6).ln(),
            log_lengthscale: 0.0,
            log_noise: -745.0,
        };
        let arch = Architecture::new(4, 2, 2, 2).unwrap();
        let state = SurrogateState::new(
            ExtractorParams::zeros(arch),
            kernel,
            vec![random_patch(4, &mut labeled_rng(0, "gp-n1"))],
            vec![3.7],
        )
        .unwrap();
        let expected = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((nll(&state).unwrap() - expected).abs() < 1e-5);
        assert!((expected - 0.918939).abs() < 1e-6);
    }

    #[test]
    fn nll_matches_dense_eigen_oracle() {
        let mut rng = labeled_rng(1, "gp-nll");
        for trial in 0..20 {
            let n = 2 + trial % 7;
            let state = random_state(n, &mut rng, KernelHyperparams::default());
            let fac = state.factorize().unwrap();
            let k = dense_k(&state, &fac);

            let eig = k.clone().symmetric_eigen();
            let log_det: f64 = eig.eigenvalues.iter().map(|e| e.ln()).sum();
            let kinv = k.try_inverse().unwrap();
            let y = DVector::from_vec(state.normalized_targets());
            let quad = (y.transpose() * &kinv * &y)[(0, 0)];
            let oracle = 0.5 * quad + 0.5 * log_det + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

            assert!((nll(&state).unwrap() - oracle).abs() < 1e-8, "trial {trial}");
        }
    }

    #[test]
    fn posterior_matches_dense_inverse_oracle() {
        let mut rng = labeled_rng(2, "gp-post");
        for trial in 0..20 {
            let n = 2 + trial % 6;
            let state = random_state(n, &mut rng, KernelHyperparams::default()).prepare().unwrap();
            let fac = state.cache.clone().unwrap();
            let k = dense_k(&state, &fac);
            let kinv = k.try_inverse().unwrap();
            let y = DVector::from_vec(state.normalized_targets());

            let queries: Vec<Patch> = (0..5).map(|_| random_patch(4, &mut rng)).collect();
            let post = posterior(&state, &queries).unwrap();
            let s2 = state.kernel.outputscale2();
            for (q, query) in queries.iter().enumerate() {
                let z = crate::extractor::embed(&state.extractor, query).unwrap();
                let kv = DVector::from_vec(
                    fac.latents.iter().map(|zi| kernel_eval(&state.kernel, &z, zi)).collect::<Vec<_>>(),
                );
                let mu = state.target_mean + state.target_std * (kv.transpose() * &kinv * &y)[(0, 0)];
                let var = state.target_std.powi(2)
                    * (s2 - (kv.transpose() * &kinv * &kv)[(0, 0)]).max(0.0);
                assert!((post.mean[q] - mu).abs() < 1e-8, "trial {trial} q {q}");
                assert!((post.variance[q] - var).abs() < 1e-8, "trial {trial} q {q}");
            }
        }
    }

    #[test]
    fn nll_gradients_match_finite_differences() {
        let mut rng = labeled_rng(3, "gp-grad");
        let mut state = random_state(6, &mut rng, KernelHyperparams::default());
        let (_, grad) = nll_with_grad(&state).unwrap();

        let h = 1e-5;
        let check = |get: &dyn Fn(&SurrogateState) -> f64,
                         set: &dyn Fn(&mut SurrogateState, f64),
                         analytic: f64,
                         tag: &str| {
            let base = get(&state);
            let step = h * base.abs().max(1.0);
            let mut s_plus = state.clone();
            set(&mut s_plus, base + step);
            let mut s_minus = state.clone();
            set(&mut s_minus, base - step);
            let fd = (nll(&s_plus).unwrap() - nll(&s_minus).unwrap()) / (2.0 * step);
            let denom = fd.abs().max(analytic.abs()).max(1e-6);
            assert!((fd - analytic).abs() / denom < 1e-3, "{tag}: fd={fd} analytic={analytic}");
        };

        check(
            &|s| s.kernel.log_outputscale,
            &|s, v| s.kernel.log_outputscale = v,
            grad.log_outputscale,
            "log_outputscale",
        );
        check(
            &|s| s.kernel.log_lengthscale,
            &|s, v| s.kernel.log_lengthscale = v,
            grad.log_lengthscale,
            "log_lengthscale",
        );
        check(&|s| s.kernel.log_noise, &|s, v| s.kernel.log_noise = v, grad.log_noise, "log_noise");

        let stride = (state.extractor.weights.len() / 17).max(1);
        for i in (0..state.extractor.weights.len()).step_by(stride) {
            let base = state.extractor.weights[i];
            let step = h * base.abs().max(1.0);
            state.extractor.weights[i] = base + step;
            let f_plus = nll(&state).unwrap();
            state.extractor.weights[i] = base - step;
            let f_minus = nll(&state).unwrap();
            state.extractor.weights[i] = base;
            let fd = (f_plus - f_minus) / (2.0 * step);
            let denom = fd.abs().max(grad.weights[i].abs()).max(1e-6);
            assert!(
                (fd - grad.weights[i]).abs() / denom < 1e-3,
                "weight {i}: fd={fd} analytic={}",
                grad.weights[i]
            );
        }
    }

    #[test]
    fn duplicate_points_stay_finite_via_jitter() {
        let mut rng = labeled_rng(4, "gp-dup");
        let arch = Architecture::new(4, 2, 2, 2).unwrap();
        let extractor = ExtractorParams::init(arch, &mut rng);
        let patch = random_patch(4, &mut rng);
        let patches = vec![patch.clone(), patch.clone(), patch];
        let state = SurrogateState::new(
            extractor,
            KernelHyperparams { log_noise: -40.0, ..Default::default() },
            patches,
            vec![1.0, 1.0, 1.0],
        )
        .unwrap();
        let value = nll(&state).unwrap();
        assert!(value.is_finite());
        let post = posterior(&state, &[random_patch(4, &mut labeled_rng(5, "gp-dup-q"))]).unwrap();
        assert!(post.mean[0].is_finite() && post.variance[0].is_finite());
    }

    #[test]
    fn low_noise_posterior_interpolates_training_targets() {
        let mut rng = labeled_rng(6, "gp-interp");
        // Lengthscale well below the minimum latent separation so K is
        // near-diagonal and near-noiseless interpolation is well-posed.
        let draft = random_state(5, &mut rng, KernelHyperparams::default());
        let latents = draft.train_latents().unwrap();
        let mut min_d = f64::INFINITY;
        for i in 0..latents.len() {
            for j in (i + 1)..latents.len() {
                let d: f64 = latents[i]
                    .iter()
                    .zip(&latents[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                min_d = min_d.min(d);
            }
        }
        let kernel = KernelHyperparams {
            log_noise: (1e-10f64).ln(),
            log_lengthscale: (min_d / 10.0).ln(),
            ..Default::default()
        };
        let state = SurrogateState::new(
            draft.extractor.clone(),
            kernel,
            draft.train_patches.clone(),
            draft.train_targets.clone(),
        )
        .unwrap()
        .prepare()
        .unwrap();
        let post = posterior(&state, &state.train_patches).unwrap();
        for (m, y) in post.mean.iter().zip(&state.train_targets) {
            assert!((m - y).abs() < 1e-3, "mean {m} target {y}");
        }
    }

    #[test]
    fn posterior_reverts_to_prior_far_from_data() {
        let mut rng = labeled_rng(7, "gp-prior");
        let state = random_state(5, &mut rng, KernelHyperparams::default()).prepare().unwrap();
        // A latent point far away: scale up a patch so the embedding moves,
        // then verify via a synthetic far query in latent space using the
        // kernel directly -- distances beyond ~10 lengthscales zero out k*.
        let far = Patch { values: vec![1e6; 16], center: (0, 0), standardized: false };
        let z = crate::extractor::embed(&state.extractor, &far).unwrap();
        let min_d2 = state
            .cache
            .as_ref()
            .unwrap()
            .latents
            .iter()
            .map(|zi| z.iter().zip(zi).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        if min_d2 > 200.0 {
            let post = posterior(&state, &[far]).unwrap();
            assert!((post.mean[0] - state.target_mean).abs() < 1e-6);
            let prior_var = state.target_std.powi(2) * state.kernel.outputscale2();
            assert!((post.variance[0] - prior_var).abs() / prior_var < 1e-6);
        }
    }

    #[test]
    fn posterior_is_exchangeable_under_training_order() {
        let mut rng = labeled_rng(8, "gp-perm");
        let state = random_state(6, &mut rng, KernelHyperparams::default()).prepare().unwrap();
        let mut patches = state.train_patches.clone();
        let mut targets = state.train_targets.clone();
        patches.reverse();
        targets.reverse();
        let permuted =
            SurrogateState::new(state.extractor.clone(), state.kernel, patches, targets)
                .unwrap()
                .prepare()
                .unwrap();
        let queries: Vec<Patch> = (0..4).map(|_| random_patch(4, &mut rng)).collect();
        let a = posterior(&state, &queries).unwrap();
        let b = posterior(&permuted, &queries).unwrap();
        for i in 0..queries.len() {
            assert!((a.mean[i] - b.mean[i]).abs() < 1e-10);
            assert!((a.variance[i] - b.variance[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn adding_data_does_not_increase_variance() {
        let mut rng = labeled_rng(9, "gp-gain");
        let full = random_state(7, &mut rng, KernelHyperparams::default());
        let reduced = SurrogateState::new(
            full.extractor.clone(),
            full.kernel,
            full.train_patches[..5].to_vec(),
            full.train_targets[..5].to_vec(),
        )
        .unwrap();
        // Compare in normalized units with shared stats: rebuild the full
        // state with the reduced normalization to isolate the kernel effect.
        let queries: Vec<Patch> = (0..6).map(|_| random_patch(4, &mut rng)).collect();
        let var_scale_r = reduced.target_std.powi(2);
        let var_scale_f = full.target_std.powi(2);
        let post_r = posterior(&reduced.prepare().unwrap(), &queries).unwrap();
        let post_f = posterior(&full.prepare().unwrap(), &queries).unwrap();
        for i in 0..queries.len() {
            let vr = post_r.variance[i] / var_scale_r;
            let vf = post_f.variance[i] / var_scale_f;
            assert!(vf <= vr + 1e-8, "query {i}: {vf} > {vr}");
        }
    }

    #[test]
    fn target_zscore_roundtrip_and_degenerate_std() {
        let mut rng = labeled_rng(10, "gp-z");
        let state = random_state(6, &mut rng, KernelHyperparams::default());
        let norm = state.normalized_targets();
        for (z, y) in norm.iter().zip(&state.train_targets) {
            assert!((state.target_mean + state.target_std * z - y).abs() < 1e-12);
        }
        let mean: f64 = norm.iter().sum::<f64>() / norm.len() as f64;
        let var: f64 = norm.iter().map(|z| z * z).sum::<f64>() / norm.len() as f64 - mean * mean;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-10);

        let arch = Architecture::new(4, 2, 2, 2).unwrap();
        let degenerate = SurrogateState::new(
            ExtractorParams::zeros(arch),
            KernelHyperparams::default(),
            vec![random_patch(4, &mut rng), random_patch(4, &mut rng)],
            vec![2.5, 2.5],
        )
        .unwrap();
        assert_eq!(degenerate.target_std, 1.0);
        assert!(degenerate.normalized_targets().iter().all(|&z| z == 0.0));
    }
}
