//! Analysis steps: the EnKF predictor, SIS reweighting, and the EnKF-SIS
//! predictor-corrector that reweights EnKF output by a nearest-neighbour
//! density-ratio estimate.

mod corrector;
mod enkf;
mod knn;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use corrector::{enkf_sis_analysis, enkf_sis_analysis_split, pure_sis_analysis, sis_correct};
pub use enkf::{enkf_analysis, enkf_analysis_with, DataPerturbation};
pub use knn::{default_bandwidth_rank, density_ratio_estimate, knn_bandwidth};

use crate::ensemble::{GaussianObservation, WeightedEnsemble};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;
use crate::spectral::{Euclidean, StateNorm};

/// What `sis_correct` does when every raw weight vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateFallback {
    Error,
    /// Drop the density ratio and weight by the likelihood alone.
    #[default]
    LikelihoodOnly,
}

/// Which forecast weight is summed over the ball in the ratio numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumeratorWeightIndex {
    /// `sum_l w_l^f` over forecast members `l` inside the ball.
    #[default]
    Neighbor,
    /// `w_k^f` times the number of forecast members inside the ball.
    Literal,
}

/// Parameters of the corrector.
#[derive(Clone, Copy)]
pub struct AnalysisConfig<'a, T: Real> {
    /// Neighbour rank defining the bandwidth; `None` means `floor(sqrt(N))`.
    pub bandwidth_rank: Option<usize>,
    /// Count a member as its own nearest neighbour.
    pub knn_include_self: bool,
    pub norm: &'a dyn StateNorm<T>,
    pub degenerate_fallback: DegenerateFallback,
    pub numerator_weight_index: NumeratorWeightIndex,
    /// When false, `enkf_sis_analysis` returns the predictor output unchanged.
    pub corrector_enabled: bool,
    /// Resample to `N` members when `ESS < threshold * N`. Off when `None`.
    pub resample_ess_threshold: Option<T>,
}

impl<T: Real> fmt::Debug for AnalysisConfig<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalysisConfig")
            .field("bandwidth_rank", &self.bandwidth_rank)
            .field("knn_include_self", &self.knn_include_self)
            .field("degenerate_fallback", &self.degenerate_fallback)
            .field("numerator_weight_index", &self.numerator_weight_index)
            .field("corrector_enabled", &self.corrector_enabled)
            .field("resample_ess_threshold", &self.resample_ess_threshold)
            .finish_non_exhaustive()
    }
}

static EUCLIDEAN: Euclidean = Euclidean;

impl<T: Real> Default for AnalysisConfig<'_, T> {
    fn default() -> Self {
        Self::new(&EUCLIDEAN)
    }
}

impl<'a, T: Real> AnalysisConfig<'a, T> {
    pub fn new(norm: &'a dyn StateNorm<T>) -> Self {
        Self {
            bandwidth_rank: None,
            knn_include_self: false,
            norm,
            degenerate_fallback: DegenerateFallback::default(),
            numerator_weight_index: NumeratorWeightIndex::default(),
            corrector_enabled: true,
            resample_ess_threshold: None,
        }
    }

    /// Rank used for an ensemble of `n` members, validated against `n`.
    pub fn rank_for(&self, n: usize) -> Result<usize> {
        let rank = self.bandwidth_rank.unwrap_or_else(|| default_bandwidth_rank(n));
        let max = if self.knn_include_self { n } else { n.saturating_sub(1) };
        if rank < 1 || rank > max {
            return Err(Error::Config(format!("bandwidth rank {rank} outside [1, {max}] for N = {n}")));
        }
        Ok(rank)
    }
}

/// Filter selector used by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Filter {
    #[serde(rename = "enkf")]
    Enkf,
    #[serde(rename = "sis")]
    Sis,
    #[serde(rename = "enkf-sis")]
    EnkfSis,
}

impl Filter {
    pub const ALL: [Filter; 3] = [Filter::Enkf, Filter::Sis, Filter::EnkfSis];

    pub fn as_str(&self) -> &'static str {
        match self {
            Filter::Enkf => "enkf",
            Filter::Sis => "sis",
            Filter::EnkfSis => "enkf-sis",
        }
    }

    /// One analysis step of the selected filter.
    pub fn analyze<T: Real>(
        &self,
        forecast: &WeightedEnsemble<T>,
        obs: &GaussianObservation<T>,
        cfg: &AnalysisConfig<'_, T>,
        rng: &RngStream,
    ) -> Result<WeightedEnsemble<T>> {
        match self {
            Filter::Enkf => enkf_analysis(forecast, obs, rng),
            Filter::Sis => pure_sis_analysis(forecast, obs),
            Filter::EnkfSis => enkf_sis_analysis(forecast, obs, cfg, rng),
        }
    }
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Filter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enkf" => Ok(Filter::Enkf),
            "sis" => Ok(Filter::Sis),
            "enkf-sis" => Ok(Filter::EnkfSis),
            other => Err(Error::Config(format!("unknown filter {other:?}; expected enkf, sis or enkf-sis"))),
        }
    }
}
