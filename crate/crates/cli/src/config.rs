//! Experiment configuration: a TOML document plus command-line overrides
//! (flags win). The resolved configuration is serialized canonically and
//! hashed into the run manifest, so the hash changes exactly when a field
//! does.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Every knob of every subcommand; unused fields keep their defaults and
/// still participate in the manifest hash of the resolved config.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: String,

    // Model geometry.
    pub p: usize,
    pub n: usize,
    pub sigma: f64,

    /// Covariance spec: `identity`, `spiked`, `diag-file:PATH`,
    /// `dense-file:PATH`.
    pub cov: String,
    pub spike_c: f64,
    pub spike_frac: f64,
    /// Spiked-model variant: `fig1a` (identity covariance, spiked latent) or
    /// `fig1b` (spiked covariance, flat latent).
    pub variant: String,
    /// Latent spec for non-spiked covariances: `ones`, `sqrt-lambda`,
    /// `file:PATH`.
    pub beta: String,

    /// Target sparsity fraction s/p.
    pub alpha: f64,
    /// Explicit sweep grid of fitted-feature counts; empty means the default
    /// log-spaced grid.
    pub grid: Vec<usize>,
    /// Size of the default grid.
    pub grid_points: usize,
    pub methods: Vec<String>,
    pub trials: usize,
    pub seed: Option<u64>,

    // Random-features experiment.
    pub d: usize,
    pub p_list: Vec<usize>,
    pub s_list: Vec<usize>,
    pub trials_r: usize,
    pub trials_data: usize,
    pub estimation_samples: usize,
    pub dc_samples: usize,
    pub retrain_supports: usize,

    // dc-sample.
    pub samples: usize,

    // ridge-gamma.
    pub pbar: f64,
    pub lambda: f64,

    // rank-one.
    pub s: usize,
    /// Rank-one direction spec: `ones`, `linear`, `file:PATH`.
    pub lambda_spec: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            kind: String::new(),
            p: 400,
            n: 120,
            sigma: 1.0,
            cov: "identity".into(),
            spike_c: 25.0,
            spike_frac: 0.1,
            variant: "fig1b".into(),
            beta: "ones".into(),
            alpha: 0.1,
            grid: Vec::new(),
            grid_points: 30,
            methods: vec![
                "dense".into(),
                "magnitude".into(),
                "hessian".into(),
                "oracle".into(),
            ],
            trials: 50,
            seed: None,
            d: 10,
            p_list: vec![400],
            s_list: vec![20],
            trials_r: 10,
            trials_data: 5,
            estimation_samples: 200_000,
            dc_samples: 256,
            retrain_supports: 64,
            samples: 64,
            pbar: 2.0,
            lambda: 0.0,
            s: 1,
            lambda_spec: "linear".into(),
        }
    }
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        // Missing keys fall back to defaults; unknown keys are rejected.
        // The placeholder seed keeps the optional key present in the
        // defaults table (TOML drops absent options).
        let user: toml::Value = toml::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let mut merged = toml::Value::try_from(Self { seed: Some(0), ..Self::default() })
            .expect("defaults to value");
        let mut user_has_seed = false;
        if let (Some(m), Some(u)) = (merged.as_table_mut(), user.as_table()) {
            for (k, v) in u {
                if !m.contains_key(k) {
                    bail!("unknown config key {k:?}");
                }
                user_has_seed |= k == "seed";
                m.insert(k.clone(), v.clone());
            }
        } else {
            bail!("config root must be a table");
        }
        let mut cfg: Self = merged.try_into()?;
        if !user_has_seed {
            cfg.seed = None;
        }
        Ok(cfg)
    }

    /// Canonical serialization of the resolved config; field order is fixed
    /// by the struct definition.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| anyhow::anyhow!("a seed is required (pass --seed or set it in the config); runs never default to wall-clock entropy"))
    }
}

/// The default sweep grid: `count` log-spaced feature counts in [s, p],
/// deduplicated, with the interpolation threshold n removed.
pub fn default_grid(s: usize, p: usize, n: usize, count: usize) -> Vec<usize> {
    let lo = s.max(1) as f64;
    let hi = p as f64;
    let mut grid: Vec<usize> = (0..count)
        .map(|i| {
            let t = i as f64 / (count.max(2) - 1) as f64;
            (lo * (hi / lo).powf(t)).round() as usize
        })
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid.retain(|&k| k != n);
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_changes_iff_fields_change() {
        let a = Config { seed: Some(1), ..Config::default() };
        let b = Config { seed: Some(1), ..Config::default() };
        assert_eq!(a.hash(), b.hash());
        let c = Config { seed: Some(2), ..Config::default() };
        assert_ne!(a.hash(), c.hash());
        let d = Config { trials: 51, seed: Some(1), ..Config::default() };
        assert_ne!(a.hash(), d.hash());
    }

    #[test]
    fn default_grid_spans_and_excludes_threshold() {
        let g = default_grid(40, 400, 120, 30);
        assert_eq!(*g.first().unwrap(), 40);
        assert_eq!(*g.last().unwrap(), 400);
        assert!(!g.contains(&120));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn config_file_overlays_defaults() {
        let dir = std::env::temp_dir().join(format!("prune-dc-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(&path, "p = 99\nseed = 3\n").unwrap();
        let cfg = Config::from_file(&path).unwrap();
        assert_eq!(cfg.p, 99);
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.n, Config::default().n);
        std::fs::write(&path, "nope = 1\n").unwrap();
        assert!(Config::from_file(&path).is_err());
        let _ = std::fs::remove_dir_all(&dir);
    }
}
