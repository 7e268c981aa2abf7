//! Shared fixtures for the criterion benchmarks.

use nalgebra::DVector;
use prune_dc_core::lab::{Covariance, LgpModel};
use prune_dc_core::mu::{MuAtom, MuDistribution};

/// A spiked two-atom law with unit latent energy.
pub fn spiked_law() -> MuDistribution {
    MuDistribution::from_atoms(vec![
        MuAtom { lambda: 25.0, b: 1.0, weight: 0.1 },
        MuAtom { lambda: 1.0, b: 1.0, weight: 0.9 },
    ])
    .expect("valid law")
}

/// The spiked diagonal model used by the sweep benchmarks.
pub fn spiked_model(p: usize, n: usize) -> LgpModel {
    let spikes = p / 10;
    let diag = DVector::from_fn(p, |i, _| if i < spikes { 25.0 } else { 1.0 });
    LgpModel::new(Covariance::Diagonal(diag), DVector::from_element(p, 1.0), 1.0, n)
        .expect("valid model")
}
