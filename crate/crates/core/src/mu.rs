//! The joint law mu of (Lambda, B) as a finite weighted atom set.
//!
//! Lambda is a covariance eigenvalue and B the rescaled latent coefficient
//! `sqrt(p) * beta_star_i`. Every theoretical expectation in the crate is a
//! weighted sum over these atoms, evaluated exactly (up to compensated
//! floating-point summation), so the asymptotic formulas and the finite-p
//! predictions share one evaluation path.

use crate::{Error, Result};

/// One atom of the law: an eigenvalue, a rescaled coefficient, and its mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuAtom {
    /// Covariance eigenvalue, strictly positive.
    pub lambda: f64,
    /// Rescaled latent coefficient `sqrt(p) * beta_star_i`.
    pub b: f64,
    /// Probability mass, non-negative.
    pub weight: f64,
}

/// How a distribution was obtained; purely informational.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Built from a concrete (diagonal) model via [`MuDistribution::from_model`].
    ConstructedFromModel,
    /// Hand-assembled, e.g. a synthetic two-point law in tests.
    Synthetic,
}

/// A finite weighted atom set representing the joint law of (Lambda, B).
///
/// Immutable after construction; shared freely across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct MuDistribution {
    atoms: Vec<MuAtom>,
    provenance: Provenance,
}

/// Neumaier-compensated accumulator; keeps 1e-12 tolerances honest at p ~ 1e4.
#[derive(Default, Clone, Copy)]
pub(crate) struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl MuDistribution {
    /// Empirical law of a diagonal model: one atom `(lambda_i, sqrt(p) *
    /// beta_star_i)` of weight `1/p` per index.
    pub fn from_model(sigma_diag: &[f64], beta_star: &[f64]) -> Result<Self> {
        if sigma_diag.len() != beta_star.len() {
            return Err(Error::DimensionMismatch(format!(
                "sigma_diag has {} entries, beta_star has {}",
                sigma_diag.len(),
                beta_star.len()
            )));
        }
        if sigma_diag.is_empty() {
            return Err(Error::DimensionMismatch("model has zero features".into()));
        }
        let p = sigma_diag.len();
        let sqrt_p = (p as f64).sqrt();
        let weight = 1.0 / p as f64;
        let atoms = sigma_diag
            .iter()
            .zip(beta_star)
            .map(|(&lambda, &beta)| {
                if !(lambda > 0.0) {
                    return Err(Error::NonPositiveEigenvalue(lambda));
                }
                Ok(MuAtom {
                    lambda,
                    b: sqrt_p * beta,
                    weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms, Provenance::ConstructedFromModel)
    }

    /// Builds a law from explicit atoms; weights must sum to 1 within 1e-12.
    pub fn from_atoms(atoms: Vec<MuAtom>) -> Result<Self> {
        Self::new(atoms, Provenance::Synthetic)
    }

    fn new(atoms: Vec<MuAtom>, provenance: Provenance) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::DimensionMismatch("atom set is empty".into()));
        }
        let mut total = Accumulator::default();
        for atom in &atoms {
            if !(atom.lambda > 0.0) || !atom.lambda.is_finite() {
                return Err(Error::NonPositiveEigenvalue(atom.lambda));
            }
            if !atom.b.is_finite() || !atom.weight.is_finite() || atom.weight < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "atom (lambda={}, b={}, weight={}) is not finite/non-negative",
                    atom.lambda, atom.b, atom.weight
                )));
            }
            total.add(atom.weight);
        }
        let total = total.value();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "atom weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms, provenance })
    }

    pub fn atoms(&self) -> &[MuAtom] {
        &self.atoms
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// `E_mu[f(Lambda, B)]`, exact for the discrete law.
    pub fn expect(&self, f: impl Fn(f64, f64) -> f64) -> Result<f64> {
        let mut acc = Accumulator::default();
        for atom in &self.atoms {
            let v = f(atom.lambda, atom.b);
            if !v.is_finite() {
                return Err(Error::NonFiniteExpectation {
                    lambda: atom.lambda,
                    b: atom.b,
                });
            }
            acc.add(atom.weight * v);
        }
        Ok(acc.value())
    }

    /// `E_mu[B^2]`, the total rescaled signal energy.
    pub fn signal_energy(&self) -> f64 {
        self.expect(|_, b| b * b).expect("B^2 is finite")
    }

    /// `E_mu[Lambda B^2]`, the saliency-weighted signal energy.
    pub fn weighted_signal_energy(&self) -> f64 {
        self.expect(|l, b| l * b * b).expect("Lambda B^2 is finite")
    }
}
