//! Distributional characterization (DC) of overparameterized min-norm least
//! squares, closed-form pruning/retraining risk predictions, and a
//! Monte-Carlo lab that measures the same quantities empirically.
//!
//! The crate is organized around the pipeline *train → prune → retrain* for
//! linear Gaussian problems (LGPs) and ReLU random-feature regression:
//!
//! * [`mu`] — the joint law of (eigenvalue, rescaled coefficient) atoms over
//!   which every theoretical expectation runs.
//! * [`dc`] — fixed-point solvers for the DC parameters and the Gaussian
//!   mixture law of the rescaled solution.
//! * [`pruning`] — thresholds and closed-form risks for dense, magnitude,
//!   Hessian and oracle pruning, plus the ridge and rank-one formulas.
//! * [`nonasym`] — the finite-dimensional DC with eigen-rotation for general
//!   covariance, its sampler, and the retraining DC.
//! * [`lab`] — data generation, min-norm / restricted least squares, pruning
//!   operators and Monte-Carlo sweeps (the empirical ground truth).
//! * [`rf`] — ReLU random-features regression and its equivalent LGP.
//! * [`report`] — the risk-report table shared with the CLI.

// Validation guards are written as `!(x > 0.0)` so that NaN inputs fail
// them; the un-negated forms would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dc;
pub mod error;
pub mod lab;
mod linalg;
pub mod mu;
pub mod nonasym;
pub mod pruning;
pub mod report;
pub mod rf;
pub mod rng;
pub mod special;
pub mod stats;

pub use dc::{DcRegime, DcSolution, MixtureComponent};
pub use error::Error;
pub use lab::{Covariance, FitResult, LgpModel, Method, RetrainMode};
pub use mu::{MuAtom, MuDistribution};
pub use nonasym::{NonAsymptoticDc, RetrainSpec};
pub use pruning::{RidgeParams, ThresholdResult};
pub use report::{ReportRow, RiskReport};
pub use rf::{EquivalentLgp, RfModel};

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
