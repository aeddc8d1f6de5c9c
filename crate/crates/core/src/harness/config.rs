use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{DegenerateFallback, Filter, NumeratorWeightIndex};
use crate::models::NoiseConvention;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "bimodal")]
    Bimodal,
    #[serde(rename = "doublewell")]
    DoubleWell,
    #[serde(rename = "sine-bimodal")]
    SineBimodal,
    #[serde(rename = "sine-far")]
    SineFar,
}

impl Experiment {
    pub const ALL: [Experiment; 4] =
        [Experiment::Bimodal, Experiment::DoubleWell, Experiment::SineBimodal, Experiment::SineFar];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Bimodal => "bimodal",
            Experiment::DoubleWell => "doublewell",
            Experiment::SineBimodal => "sine-bimodal",
            Experiment::SineFar => "sine-far",
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Experiment::Bimodal | Experiment::DoubleWell)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// How the `N(0, 5)` bimodal prior sampler reads its second parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpreadParameter {
    #[default]
    Variance,
    Std,
}

/// Every tunable of every experiment. Loaded from flat JSON; unknown keys
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub filter: Filter,
    pub ensemble_size: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,

    // analysis
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bandwidth_rank: Option<usize>,
    pub knn_include_self: bool,
    pub degenerate_fallback: DegenerateFallback,
    pub numerator_weight_index: NumeratorWeightIndex,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resample_ess_threshold: Option<f64>,

    // double-well model and reference
    pub kappa: f64,
    pub dt: f64,
    pub t_end: f64,
    pub obs_interval: f64,
    pub obs_var: f64,
    pub noise_convention: NoiseConvention,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_seed: Option<u64>,
    pub reference_u0: f64,
    pub init_mean: f64,
    pub init_var: f64,
    pub switch_time: f64,
    pub switch_tolerance: f64,
    pub max_reference_tries: u64,

    // oracle grid
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_du: f64,

    // bimodal prior and likelihood
    pub prior_spread: f64,
    pub prior_spread_is: SpreadParameter,
    pub bimodal_data: f64,
    pub bimodal_obs_var: f64,

    // function-space experiments
    pub state_dim: usize,
    pub mode_count: usize,
    pub lambda_exponent: f64,
    pub kappa_exponent: f64,
    pub large_ensemble_size: usize,
    pub max_prior_attempts: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sine_data: Option<f64>,
    pub sine_obs_var: f64,

    // histograms
    pub hist_bins: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hist_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hist_hi: Option<f64>,
    pub smoothing_window: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Bimodal,
            filter: Filter::EnkfSis,
            ensemble_size: 100,
            seed: 0,
            output_dir: None,
            bandwidth_rank: None,
            knn_include_self: false,
            degenerate_fallback: DegenerateFallback::LikelihoodOnly,
            numerator_weight_index: NumeratorWeightIndex::Neighbor,
            resample_ess_threshold: None,
            kappa: 0.5,
            dt: 0.01,
            t_end: 2.0,
            obs_interval: 0.1,
            obs_var: 0.1,
            noise_convention: NoiseConvention::EulerMaruyama,
            reference_seed: None,
            reference_u0: -1.0,
            init_mean: -1.0,
            init_var: 0.04,
            switch_time: 1.3,
            switch_tolerance: 0.3,
            max_reference_tries: 200_000,
            grid_lo: -3.0,
            grid_hi: 3.0,
            grid_du: 0.01,
            prior_spread: 5.0,
            prior_spread_is: SpreadParameter::Variance,
            bimodal_data: 0.1,
            bimodal_obs_var: 0.5,
            state_dim: 500,
            mode_count: 500,
            lambda_exponent: 3.0,
            kappa_exponent: 2.0,
            large_ensemble_size: 50_000,
            max_prior_attempts: 10,
            sine_data: None,
            sine_obs_var: 1.0,
            hist_bins: 50,
            hist_lo: None,
            hist_hi: None,
            smoothing_window: 5,
        }
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self { experiment, ..Self::default() }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Histogram range for this experiment.
    pub fn hist_range(&self) -> (f64, f64) {
        let (lo, hi) = match self.experiment {
            Experiment::SineFar => (-8.0, 8.0),
            _ => (-4.0, 4.0),
        };
        (self.hist_lo.unwrap_or(lo), self.hist_hi.unwrap_or(hi))
    }

    /// Observed value in the function-space experiments.
    pub fn sine_observation(&self) -> f64 {
        self.sine_data.unwrap_or(match self.experiment {
            Experiment::SineFar => 7.0,
            _ => 0.1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64| x.is_finite();
        check(self.ensemble_size >= 2, || format!("ensemble_size must be >= 2, got {}", self.ensemble_size))?;
        if let Some(rank) = self.bandwidth_rank {
            let max = if self.knn_include_self { self.ensemble_size } else { self.ensemble_size - 1 };
            check(rank >= 1 && rank <= max, || format!("bandwidth_rank must lie in [1, {max}], got {rank}"))?;
        }
        if let Some(t) = self.resample_ess_threshold {
            check(t > 0.0 && t <= 1.0, || format!("resample_ess_threshold must lie in (0, 1], got {t}"))?;
        }
        check(finite(self.kappa) && self.kappa >= 0.0, || format!("kappa must be >= 0, got {}", self.kappa))?;
        check(finite(self.dt) && self.dt > 0.0, || format!("dt must be > 0, got {}", self.dt))?;
        check(self.dt <= 0.01, || format!("dt = {} exceeds the stability limit 0.01", self.dt))?;
        check(finite(self.t_end) && self.t_end > 0.0, || "t_end must be > 0".into())?;
        check(finite(self.obs_interval) && self.obs_interval > 0.0 && self.obs_interval <= self.t_end, || {
            "obs_interval must lie in (0, t_end]".into()
        })?;
        let steps = self.obs_interval / self.dt;
        check((steps - steps.round()).abs() < 1e-6, || "obs_interval must be a multiple of dt".into())?;
        let cycles = self.t_end / self.obs_interval;
        check((cycles - cycles.round()).abs() < 1e-6, || "t_end must be a multiple of obs_interval".into())?;
        check(finite(self.obs_var) && self.obs_var > 0.0, || "obs_var must be > 0".into())?;
        check(finite(self.init_var) && self.init_var > 0.0, || "init_var must be > 0".into())?;
        check(self.switch_tolerance >= 0.0, || "switch_tolerance must be >= 0".into())?;
        check(self.grid_hi > self.grid_lo && self.grid_du > 0.0, || "grid bounds or step invalid".into())?;
        let cells = (self.grid_hi - self.grid_lo) / self.grid_du;
        check((cells - cells.round()).abs() < 1e-6, || "grid_du must divide [grid_lo, grid_hi]".into())?;
        check(
            self.reference_u0 >= self.grid_lo
                && self.reference_u0 <= self.grid_hi
                && self.init_mean >= self.grid_lo
                && self.init_mean <= self.grid_hi,
            || "reference_u0 and init_mean must lie on the oracle grid".into(),
        )?;
        check(finite(self.prior_spread) && self.prior_spread > 0.0, || "prior_spread must be > 0".into())?;
        check(finite(self.bimodal_obs_var) && self.bimodal_obs_var > 0.0, || "bimodal_obs_var must be > 0".into())?;
        check(self.state_dim >= 4, || "state_dim must be >= 4".into())?;
        check(self.mode_count >= 1 && self.mode_count <= self.state_dim, || {
            format!("mode_count must lie in [1, state_dim = {}]", self.state_dim)
        })?;
        check(self.large_ensemble_size >= self.ensemble_size, || {
            "large_ensemble_size must be >= ensemble_size".into()
        })?;
        check(self.max_prior_attempts >= 1, || "max_prior_attempts must be >= 1".into())?;
        check(finite(self.sine_obs_var) && self.sine_obs_var > 0.0, || "sine_obs_var must be > 0".into())?;
        check(self.hist_bins >= 1, || "hist_bins must be >= 1".into())?;
        let (lo, hi) = self.hist_range();
        check(hi > lo, || format!("histogram range [{lo}, {hi}] is empty"))?;
        check(self.smoothing_window >= 1, || "smoothing_window must be >= 1".into())?;
        Ok(())
    }
}
