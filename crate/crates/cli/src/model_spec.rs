//! Builds concrete models from config strings: spiked eigenvalue profiles,
//! covariance/latent file loading, and the rank-one direction specs.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use prune_dc_core::lab::{Covariance, LgpModel};

/// Spiked-profile variants. Both share the same eigenvalue vector `lambda`
/// (the latent saliency scores); they differ in where the spikes live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikedVariant {
    /// Identity covariance with spiked latent weights: `Sigma = I`,
    /// `beta* = sqrt(lambda)`.
    Fig1a,
    /// Spiked covariance with flat latent weights: `Sigma = diag(lambda)`,
    /// `beta* = 1`.
    Fig1b,
}

/// The spiked eigenvalue profile: the first `ceil(s_frac * p)` entries equal
/// `c`, the rest equal 1. Returns `(Sigma diagonal, beta*)` for the chosen
/// variant; the per-index saliency `Sigma_ii beta*_i^2 = lambda_i` is
/// identical across variants by construction.
pub fn spiked_spec(
    p: usize,
    s_frac: f64,
    c: f64,
    variant: SpikedVariant,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if !(s_frac > 0.0 && s_frac < 1.0) {
        bail!("spike fraction must lie in (0, 1), got {s_frac}");
    }
    // Written so that NaN fails the guard.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(c > 0.0) {
        bail!("spike strength must be positive, got {c}");
    }
    let spikes = (s_frac * p as f64).ceil() as usize;
    let lambda = DVector::from_fn(p, |i, _| if i < spikes { c } else { 1.0 });
    Ok(match variant {
        SpikedVariant::Fig1a => {
            let beta = lambda.map(f64::sqrt);
            (DVector::from_element(p, 1.0), beta)
        }
        SpikedVariant::Fig1b => (lambda, DVector::from_element(p, 1.0)),
    })
}

fn read_numbers(path: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(Path::new(path))
        .with_context(|| format!("reading {path}"))?;
    text.split([',', '\n', ' ', '\t'])
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number {t:?} in {path}"))
        })
        .collect()
}

fn beta_from_spec(spec: &str, diag: &DVector<f64>) -> Result<DVector<f64>> {
    let p = diag.len();
    Ok(match spec {
        "ones" => DVector::from_element(p, 1.0),
        "sqrt-lambda" => diag.map(f64::sqrt),
        other => {
            if let Some(path) = other.strip_prefix("file:") {
                let vals = read_numbers(path)?;
                if vals.len() != p {
                    bail!("latent file has {} entries, expected {p}", vals.len());
                }
                DVector::from_vec(vals)
            } else {
                bail!("unknown latent spec {other:?} (ones | sqrt-lambda | file:PATH)");
            }
        }
    })
}

/// Builds the model described by `(cov, beta, ...)` config strings.
pub fn build_model(cfg: &crate::config::Config) -> Result<LgpModel> {
    let p = cfg.p;
    let (cov, beta) = match cfg.cov.as_str() {
        "identity" => {
            let diag = DVector::from_element(p, 1.0);
            let beta = beta_from_spec(&cfg.beta, &diag)?;
            (Covariance::Diagonal(diag), beta)
        }
        "spiked" => {
            let variant = match cfg.variant.as_str() {
                "fig1a" => SpikedVariant::Fig1a,
                "fig1b" => SpikedVariant::Fig1b,
                other => bail!("unknown spiked variant {other:?} (fig1a | fig1b)"),
            };
            let (diag, beta) = spiked_spec(p, cfg.spike_frac, cfg.spike_c, variant)?;
            (Covariance::Diagonal(diag), beta)
        }
        other => {
            if let Some(path) = other.strip_prefix("diag-file:") {
                let vals = read_numbers(path)?;
                if vals.len() != p {
                    bail!("diagonal file has {} entries, expected {p}", vals.len());
                }
                let diag = DVector::from_vec(vals);
                let beta = beta_from_spec(&cfg.beta, &diag)?;
                (Covariance::Diagonal(diag), beta)
            } else if let Some(path) = other.strip_prefix("dense-file:") {
                let vals = read_numbers(path)?;
                if vals.len() != p * p {
                    bail!("dense file has {} entries, expected {}", vals.len(), p * p);
                }
                let m = DMatrix::from_row_slice(p, p, &vals);
                let beta = beta_from_spec(&cfg.beta, &m.diagonal())?;
                (Covariance::Dense(m), beta)
            } else {
                bail!(
                    "unknown covariance spec {other:?} \
                     (identity | spiked | diag-file:PATH | dense-file:PATH)"
                );
            }
        }
    };
    Ok(LgpModel::new(cov, beta, cfg.sigma, cfg.n)?)
}

/// Latent vector relative to a direction vector (used by the rank-one
/// command, where the saliency profile is the direction itself).
pub fn latent_for_direction(spec: &str, direction: &DVector<f64>) -> Result<DVector<f64>> {
    beta_from_spec(spec, &direction.map(f64::abs))
}

/// Rank-one direction from its config spec.
pub fn lambda_from_spec(spec: &str, p: usize) -> Result<DVector<f64>> {
    Ok(match spec {
        "ones" => DVector::from_element(p, 1.0),
        "linear" => DVector::from_fn(p, |i, _| 0.5 + 0.1 * i as f64),
        other => {
            if let Some(path) = other.strip_prefix("file:") {
                let vals = read_numbers(path)?;
                if vals.len() != p {
                    bail!("direction file has {} entries, expected {p}", vals.len());
                }
                DVector::from_vec(vals)
            } else {
                bail!("unknown direction spec {other:?} (ones | linear | file:PATH)");
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiked_profile_counts() {
        let (diag, beta) = spiked_spec(10, 0.1, 25.0, SpikedVariant::Fig1b).unwrap();
        assert_eq!(diag.iter().filter(|&&x| x == 25.0).count(), 1);
        assert_eq!(beta, DVector::from_element(10, 1.0));
    }

    #[test]
    fn saliency_identical_across_variants() {
        let (d_a, b_a) = spiked_spec(20, 0.2, 25.0, SpikedVariant::Fig1a).unwrap();
        let (d_b, b_b) = spiked_spec(20, 0.2, 25.0, SpikedVariant::Fig1b).unwrap();
        for i in 0..20 {
            let sal_a = d_a[i] * b_a[i] * b_a[i];
            let sal_b = d_b[i] * b_b[i] * b_b[i];
            assert!((sal_a - sal_b).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_spike_is_identity_like() {
        let (d, b) = spiked_spec(8, 0.25, 1.0, SpikedVariant::Fig1a).unwrap();
        assert_eq!(d, DVector::from_element(8, 1.0));
        assert_eq!(b, DVector::from_element(8, 1.0));
    }
}
