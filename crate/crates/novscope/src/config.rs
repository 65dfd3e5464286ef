//! Flat `section.key = value` run configuration: strict unknown-key
//! rejection, defaults materialized on resolution, CLI overrides applied on
//! top of the file, and a canonical echo format so a resolved config can be
//! re-parsed into an identical run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::acquisition::{NoveltySpace, Policy};
use crate::dataset::{generate_synthetic_domains, generate_synthetic_particles, ScanDataset};
use crate::error::{NovError, Result};
use crate::experiment::{AcquisitionConfig, ExperimentConfig, SurrogateConfig};
use crate::metrics::MetricsConfig;

pub const SEED_ENV_VAR: &str = "NOVSCOPE_SEED";

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// An MDT1 file on disk.
    Path(PathBuf),
    Domains {
        height: usize,
        width: usize,
        patch_size: usize,
        stripe_period: f64,
        wall_width: f64,
        loop_contrast: f64,
        noise_std: f32,
        seed: u64,
    },
    Particles {
        height: usize,
        width: usize,
        patch_size: usize,
        n_particles: usize,
        radius_lo: f64,
        radius_hi: f64,
        edge_decay: f64,
        noise_std: f32,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub experiment: ExperimentConfig,
    pub bench_policies: Vec<Policy>,
    pub bench_seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Domains {
                height: 64,
                width: 64,
                patch_size: 16,
                stripe_period: 16.0,
                wall_width: 3.0,
                loop_contrast: 1.0,
                noise_std: 0.0,
                seed: 0,
            },
            experiment: ExperimentConfig {
                policy: Policy::Beacon,
                budget: 300,
                n_seed: 10,
                master_seed: 0,
                surrogate: SurrogateConfig::default(),
                acquisition: AcquisitionConfig::default(),
                metrics: MetricsConfig::default(),
                dispersion_window: 50,
            },
            bench_policies: vec![Policy::Ei, Policy::Mu, Policy::Beacon],
            bench_seeds: (0..10).collect(),
        }
    }
}

fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            NovError::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(NovError::Config(format!("line {}: empty key", lineno + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

struct KeyBag {
    map: BTreeMap<String, String>,
}

impl KeyBag {
    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| NovError::Config(format!("key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.map.keys().next() {
            return Err(NovError::Config(format!("unknown config key `{key}`")));
        }
        Ok(())
    }
}

fn parse_policy(s: &str) -> Result<Policy> {
    s.parse()
}

fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    // Either a comma list (`0,1,2`) or a half-open range (`0..10`).
    if let Some((a, b)) = s.split_once("..") {
        let lo: u64 = a.trim().parse().map_err(|_| NovError::Config(format!("bad seed range `{s}`")))?;
        let hi: u64 = b.trim().parse().map_err(|_| NovError::Config(format!("bad seed range `{s}`")))?;
        if hi <= lo {
            return Err(NovError::Config(format!("empty seed range `{s}`")));
        }
        return Ok((lo..hi).collect());
    }
    s.split(',')
        .map(|t| t.trim().parse().map_err(|_| NovError::Config(format!("bad seed `{t}`"))))
        .collect()
}

/// Build a config from file text plus `key=value` overrides. Defaults fill
/// every key not present; unknown keys are rejected by name. The
/// `NOVSCOPE_SEED` environment variable supplies `run.master_seed` when the
/// config does not set it.
pub fn resolve_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut map = parse_kv_text(text)?;
    for (k, v) in overrides {
        map.insert(k.clone(), v.clone());
    }
    let env_seed = match std::env::var(SEED_ENV_VAR) {
        Ok(v) => Some(v.trim().parse::<u64>().map_err(|_| {
            NovError::Config(format!("{SEED_ENV_VAR}: cannot parse `{v}` as a seed"))
        })?),
        Err(_) => None,
    };
    resolve_config_map(map, env_seed)
}

fn resolve_config_map(map: BTreeMap<String, String>, env_seed: Option<u64>) -> Result<RunConfig> {
    let defaults = RunConfig::default();
    let mut bag = KeyBag { map };

    let dataset = match bag.take("dataset.path") {
        Some(path) => DatasetSource::Path(PathBuf::from(path)),
        None => {
            let kind = bag.take("dataset.kind").unwrap_or_else(|| "domains".into());
            let size = bag.parse("dataset.size", 64usize)?;
            let height = bag.parse("dataset.height", size)?;
            let width = bag.parse("dataset.width", size)?;
            let patch_size = bag.parse("dataset.patch_size", 16usize)?;
            let noise_std = bag.parse("dataset.noise_std", 0.0f32)?;
            let seed = bag.parse("dataset.seed", 0u64)?;
            match kind.as_str() {
                "domains" => DatasetSource::Domains {
                    height,
                    width,
                    patch_size,
                    stripe_period: bag.parse("dataset.stripe_period", 16.0)?,
                    wall_width: bag.parse("dataset.wall_width", 3.0)?,
                    loop_contrast: bag.parse("dataset.loop_contrast", 1.0)?,
                    noise_std,
                    seed,
                },
                "particles" => DatasetSource::Particles {
                    height,
                    width,
                    patch_size,
                    n_particles: bag.parse("dataset.n_particles", 12usize)?,
                    radius_lo: bag.parse("dataset.radius_lo", 3.0)?,
                    radius_hi: bag.parse("dataset.radius_hi", 6.0)?,
                    edge_decay: bag.parse("dataset.edge_decay", 1.5)?,
                    noise_std,
                    seed,
                },
                other => {
                    return Err(NovError::Config(format!(
                        "key `dataset.kind`: expected domains|particles, got `{other}`"
                    )))
                }
            }
        }
    };

    let policy = match bag.take("run.policy") {
        Some(v) => parse_policy(&v)?,
        None => defaults.experiment.policy,
    };
    let master_seed = match bag.take("run.master_seed") {
        Some(v) => v
            .parse()
            .map_err(|_| NovError::Config(format!("key `run.master_seed`: cannot parse `{v}`")))?,
        None => env_seed.unwrap_or(defaults.experiment.master_seed),
    };
    let novelty_space = match bag.take("acquisition.novelty_space") {
        Some(v) => v.parse()?,
        None => NoveltySpace::Response,
    };
    let d = &defaults.experiment;
    let experiment = ExperimentConfig {
        policy,
        budget: bag.parse("run.budget", d.budget)?,
        n_seed: bag.parse("run.n_seed", d.n_seed)?,
        master_seed,
        surrogate: SurrogateConfig {
            c1: bag.parse("surrogate.c1", d.surrogate.c1)?,
            c2: bag.parse("surrogate.c2", d.surrogate.c2)?,
            latent_dim: bag.parse("surrogate.latent_dim", d.surrogate.latent_dim)?,
            initial_iterations: bag.parse("surrogate.initial_iterations", d.surrogate.initial_iterations)?,
            iterations: bag.parse("surrogate.iterations", d.surrogate.iterations)?,
            step_size: bag.parse("surrogate.step_size", d.surrogate.step_size)?,
            cold_start: bag.parse("surrogate.cold_start", d.surrogate.cold_start)?,
        },
        acquisition: AcquisitionConfig {
            elite_fraction: bag.parse("acquisition.rho", d.acquisition.elite_fraction)?,
            k_neighbors: bag.parse("acquisition.k", d.acquisition.k_neighbors)?,
            novelty_space,
        },
        metrics: MetricsConfig {
            clusters: bag.parse("metrics.clusters", d.metrics.clusters)?,
            bins: bag.parse("metrics.bins", d.metrics.bins)?,
            projection_dim: bag.parse("metrics.projection_dim", d.metrics.projection_dim)?,
        },
        dispersion_window: bag.parse("run.dispersion_window", d.dispersion_window)?,
    };

    let bench_policies = match bag.take("bench.policies") {
        Some(v) => v.split(',').map(|t| parse_policy(t.trim())).collect::<Result<_>>()?,
        None => defaults.bench_policies,
    };
    let bench_seeds = match bag.take("bench.seeds") {
        Some(v) => parse_seed_list(&v)?,
        None => defaults.bench_seeds,
    };

    bag.finish()?;
    Ok(RunConfig { dataset, experiment, bench_policies, bench_seeds })
}

/// Render every key with its resolved value; parsing the result yields an
/// identical config (provenance echo, written before any computation).
pub fn render_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    match &cfg.dataset {
        DatasetSource::Path(p) => kv("dataset.path", p.display().to_string()),
        DatasetSource::Domains {
            height,
            width,
            patch_size,
            stripe_period,
            wall_width,
            loop_contrast,
            noise_std,
            seed,
        } => {
            kv("dataset.kind", "domains".into());
            kv("dataset.height", height.to_string());
            kv("dataset.width", width.to_string());
            kv("dataset.patch_size", patch_size.to_string());
            kv("dataset.stripe_period", stripe_period.to_string());
            kv("dataset.wall_width", wall_width.to_string());
            kv("dataset.loop_contrast", loop_contrast.to_string());
            kv("dataset.noise_std", noise_std.to_string());
            kv("dataset.seed", seed.to_string());
        }
        DatasetSource::Particles {
            height,
            width,
            patch_size,
            n_particles,
            radius_lo,
            radius_hi,
            edge_decay,
            noise_std,
            seed,
        } => {
            kv("dataset.kind", "particles".into());
            kv("dataset.height", height.to_string());
            kv("dataset.width", width.to_string());
            kv("dataset.patch_size", patch_size.to_string());
            kv("dataset.n_particles", n_particles.to_string());
            kv("dataset.radius_lo", radius_lo.to_string());
            kv("dataset.radius_hi", radius_hi.to_string());
            kv("dataset.edge_decay", edge_decay.to_string());
            kv("dataset.noise_std", noise_std.to_string());
            kv("dataset.seed", seed.to_string());
        }
    }
    let e = &cfg.experiment;
    kv("run.policy", e.policy.as_str().into());
    kv("run.budget", e.budget.to_string());
    kv("run.n_seed", e.n_seed.to_string());
    kv("run.master_seed", e.master_seed.to_string());
    kv("run.dispersion_window", e.dispersion_window.to_string());
    kv("surrogate.c1", e.surrogate.c1.to_string());
    kv("surrogate.c2", e.surrogate.c2.to_string());
    kv("surrogate.latent_dim", e.surrogate.latent_dim.to_string());
    kv("surrogate.initial_iterations", e.surrogate.initial_iterations.to_string());
    kv("surrogate.iterations", e.surrogate.iterations.to_string());
    kv("surrogate.step_size", e.surrogate.step_size.to_string());
    kv("surrogate.cold_start", e.surrogate.cold_start.to_string());
    kv("acquisition.rho", e.acquisition.elite_fraction.to_string());
    kv("acquisition.k", e.acquisition.k_neighbors.to_string());
    kv("acquisition.novelty_space", e.acquisition.novelty_space.as_str().into());
    kv("metrics.clusters", e.metrics.clusters.to_string());
    kv("metrics.bins", e.metrics.bins.to_string());
    kv("metrics.projection_dim", e.metrics.projection_dim.to_string());
    kv(
        "bench.policies",
        cfg.bench_policies.iter().map(|p| p.as_str()).collect::<Vec<_>>().join(","),
    );
    kv(
        "bench.seeds",
        cfg.bench_seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
    );
    out
}

/// Materialize the dataset a config points at (load or generate).
pub fn load_source(source: &DatasetSource, base: &Path) -> Result<ScanDataset> {
    match source {
        DatasetSource::Path(p) => {
            let path = if p.is_absolute() { p.clone() } else { base.join(p) };
            crate::container::load_dataset(&path)
        }
        DatasetSource::Domains {
            height,
            width,
            patch_size,
            stripe_period,
            wall_width,
            loop_contrast,
            noise_std,
            seed,
        } => generate_synthetic_domains(
            *height,
            *width,
            *patch_size,
            *stripe_period,
            *wall_width,
            *loop_contrast,
            *seed,
        )?
        .with_noise_std(*noise_std),
        DatasetSource::Particles {
            height,
            width,
            patch_size,
            n_particles,
            radius_lo,
            radius_hi,
            edge_decay,
            noise_std,
            seed,
        } => generate_synthetic_particles(
            *height,
            *width,
            *patch_size,
            *n_particles,
            (*radius_lo, *radius_hi),
            *edge_decay,
            *seed,
        )?
        .with_noise_std(*noise_std),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    // resolve_config reads the process environment; serialize tests that
    // touch it.
    static ENV_LOCK: Mutex<()> = Mutex::new(());

    #[test]
    fn empty_text_yields_defaults() {
        let _g = ENV_LOCK.lock().unwrap();
        let cfg = resolve_config("", &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let _g = ENV_LOCK.lock().unwrap();
        let err = resolve_config("run.budgget = 10\n", &[]).unwrap_err();
        assert!(err.to_string().contains("run.budgget"), "{err}");
        let err2 = resolve_config("", &[("surrogate.cc1".into(), "4".into())]).unwrap_err();
        assert!(err2.to_string().contains("surrogate.cc1"));
    }

    #[test]
    fn overrides_beat_file_values() {
        let _g = ENV_LOCK.lock().unwrap();
        let text = "run.budget = 40\nrun.policy = ei\n# comment\ndataset.size = 48\n";
        let cfg = resolve_config(text, &[("run.budget".into(), "25".into())]).unwrap();
        assert_eq!(cfg.experiment.budget, 25);
        assert_eq!(cfg.experiment.policy, Policy::Ei);
        match cfg.dataset {
            DatasetSource::Domains { height, width, .. } => {
                assert_eq!((height, width), (48, 48));
            }
            _ => panic!("expected domains"),
        }
    }

    #[test]
    fn env_seed_fills_in_only_when_config_is_silent() {
        let _g = ENV_LOCK.lock().unwrap();
        unsafe { std::env::set_var(SEED_ENV_VAR, "123") };
        let cfg = resolve_config("", &[]).unwrap();
        assert_eq!(cfg.experiment.master_seed, 123);
        let cfg2 = resolve_config("run.master_seed = 9\n", &[]).unwrap();
        assert_eq!(cfg2.experiment.master_seed, 9);
        unsafe { std::env::set_var(SEED_ENV_VAR, "not-a-seed") };
        assert!(resolve_config("", &[]).is_err());
        // A bad env value must not break configs that set the seed... it
        // still fails fast, by design: the variable is parsed eagerly.
        unsafe { std::env::remove_var(SEED_ENV_VAR) };
        let cfg3 = resolve_config("", &[]).unwrap();
        assert_eq!(cfg3.experiment.master_seed, 0);
    }

    #[test]
    fn render_then_parse_is_identity() {
        let _g = ENV_LOCK.lock().unwrap();
        let text = "dataset.kind = particles\ndataset.size = 40\ndataset.patch_size = 8\n\
                    dataset.n_particles = 5\nrun.policy = mu\nrun.budget = 30\n\
                    acquisition.rho = 0.3\nbench.seeds = 2..5\nsurrogate.cold_start = true\n";
        let cfg = resolve_config(text, &[]).unwrap();
        assert_eq!(cfg.bench_seeds, vec![2, 3, 4]);
        let echoed = render_config(&cfg);
        let reparsed = resolve_config(&echoed, &[]).unwrap();
        assert_eq!(cfg, reparsed);
        // Path-based configs echo the path.
        let pcfg = resolve_config("dataset.path = foo/bar.mdt\n", &[]).unwrap();
        let reparsed2 = resolve_config(&render_config(&pcfg), &[]).unwrap();
        assert_eq!(pcfg, reparsed2);
    }

    #[test]
    fn seed_lists_accept_commas_and_ranges() {
        assert_eq!(parse_seed_list("0,3, 7").unwrap(), vec![0, 3, 7]);
        assert_eq!(parse_seed_list("4..8").unwrap(), vec![4, 5, 6, 7]);
        assert!(parse_seed_list("8..4").is_err());
        assert!(parse_seed_list("a,b").is_err());
    }

    #[test]
    fn malformed_lines_are_reported_with_numbers() {
        let _g = ENV_LOCK.lock().unwrap();
        let err = resolve_config("run.budget = 10\nthis is not kv\n", &[]).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn load_source_generates_both_kinds() {
        let ds = load_source(
            &DatasetSource::Domains {
                height: 32,
                width: 32,
                patch_size: 8,
                stripe_period: 10.0,
                wall_width: 2.0,
                loop_contrast: 1.0,
                noise_std: 0.1,
                seed: 1,
            },
            Path::new("."),
        )
        .unwrap();
        assert_eq!((ds.height(), ds.width()), (32, 32));
        assert!((ds.noise_std() - 0.1).abs() < 1e-9);
        let ps = load_source(
            &DatasetSource::Particles {
                height: 32,
                width: 32,
                patch_size: 8,
                n_particles: 4,
                radius_lo: 2.0,
                radius_hi: 4.0,
                edge_decay: 1.0,
                noise_std: 0.0,
                seed: 2,
            },
            Path::new("."),
        )
        .unwrap();
        assert!(ps.has_map());
    }
}
