//! Weighted-ensemble data assimilation.
//!
//! Three analysis steps share one data model ([`ensemble::WeightedEnsemble`]):
//! the stochastic ensemble Kalman filter, sequential importance sampling,
//! and EnKF-SIS, which moves members with the EnKF and then reweights them
//! by the likelihood times a nearest-neighbour estimate of the ratio between
//! forecast and proposal densities.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix `f64`, which the experiment harness uses throughout.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod filters;
pub mod harness;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod spectral;

pub use error::{Error, Result};
pub use filters::{AnalysisConfig, DegenerateFallback, Filter, NumeratorWeightIndex};
pub use rng::RngStream;
pub use scalar::Real;

pub type State = ensemble::StateVector<f64>;
pub type Ensemble = ensemble::WeightedEnsemble<f64>;
pub type Observation = ensemble::GaussianObservation<f64>;
pub type Basis = spectral::SpectralBasis<f64>;
pub type Decay = spectral::DecaySpec<f64>;
pub type DoubleWell = models::DoubleWellModel<f64>;
pub type Density = oracle::DensityGrid<f64>;
