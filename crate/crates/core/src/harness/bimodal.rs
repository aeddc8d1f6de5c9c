use rand_distr::{Distribution, Normal};

use super::config::{ExperimentConfig, SpreadParameter};
use super::report::{MarginalTable, RunReport, SeriesRecord, Summary};
use super::stats::{count_modes, histogram_rows, marginal_histogram};
use super::{analysis_config, streams};
use crate::ensemble::{effective_sample_size, weighted_mean, GaussianObservation, StateVector, WeightedEnsemble};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::spectral::Euclidean;

/// Prior weight before normalization.
pub fn bimodal_weight(x: f64) -> f64 {
    (-5.0 * (1.5 - x) * (1.5 - x)).exp() + (-5.0 * (-1.5 - x) * (-1.5 - x)).exp()
}

/// `N` draws from the wide Gaussian, weighted towards `+-1.5`.
pub fn bimodal_prior(cfg: &ExperimentConfig) -> Result<WeightedEnsemble<f64>> {
    let std = match cfg.prior_spread_is {
        SpreadParameter::Variance => cfg.prior_spread.sqrt(),
        SpreadParameter::Std => cfg.prior_spread,
    };
    let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let mut gen = RngStream::new(cfg.seed, streams::INIT).generator();
    let values: Vec<f64> = (0..cfg.ensemble_size).map(|_| normal.sample(&mut gen)).collect();
    let raw: Vec<f64> = values.iter().map(|&x| bimodal_weight(x)).collect();
    let members = values.into_iter().map(StateVector::scalar).collect::<Result<Vec<_>>>()?;
    WeightedEnsemble::from_raw_weights(members, &raw)
}

pub fn run_bimodal(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let prior = bimodal_prior(cfg)?;
    let obs = GaussianObservation::scalar(cfg.bimodal_data, cfg.bimodal_obs_var)?;
    let acfg = analysis_config(cfg, &Euclidean);
    let posterior = cfg.filter.analyze(&prior, &obs, &acfg, &RngStream::new(cfg.seed, streams::ANALYSIS))?;

    let range = cfg.hist_range();
    let bins = cfg.hist_bins;
    let prior_mass = marginal_histogram(&prior, 0, bins, range)?;
    let posterior_mass = marginal_histogram(&posterior, 0, bins, range)?;
    let width = (range.1 - range.0) / bins as f64;
    let likelihood_raw: Vec<f64> = (0..bins)
        .map(|b| {
            let centre = range.0 + (b as f64 + 0.5) * width;
            let r = centre - cfg.bimodal_data;
            (-0.5 * r * r / cfg.bimodal_obs_var).exp()
        })
        .collect();
    let total: f64 = likelihood_raw.iter().sum();
    let likelihood_mass: Vec<f64> = likelihood_raw.iter().map(|l| l / total).collect();

    let ess = effective_sample_size(posterior.weights());
    let summary = Summary {
        posterior_modes: Some(count_modes(&posterior_mass, cfg.smoothing_window)),
        smoothing_window: Some(cfg.smoothing_window),
        final_ess: Some(ess),
        ..Summary::default()
    };
    Ok(RunReport {
        config: cfg.clone(),
        series: vec![SeriesRecord { time: 0.0, filter_mean: weighted_mean(&posterior)[0], optimal_mean: None, ess }],
        marginals: vec![
            MarginalTable { tag: "prior".into(), rows: histogram_rows(0.0, &prior_mass, range) },
            MarginalTable { tag: "likelihood".into(), rows: histogram_rows(0.0, &likelihood_mass, range) },
            MarginalTable {
                tag: format!("posterior_{}", cfg.filter),
                rows: histogram_rows(0.0, &posterior_mass, range),
            },
        ],
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::Filter;

    #[test]
    fn weight_spot_value() {
        assert_eq!(bimodal_weight(1.5), 1.0 + (-45.0f64).exp());
        assert_eq!(bimodal_weight(-1.5), bimodal_weight(1.5));
    }

    #[test]
    fn prior_spread_override() {
        let cfg = ExperimentConfig {
            ensemble_size: 4000,
            prior_spread_is: SpreadParameter::Std,
            prior_spread: 1e-3,
            ..ExperimentConfig::default()
        };
        let prior = bimodal_prior(&cfg).unwrap();
        assert!(prior.component(0).iter().all(|x| x.abs() < 0.01));
    }

    #[test]
    fn report_shape() {
        let cfg = ExperimentConfig { filter: Filter::Sis, ..ExperimentConfig::default() };
        let report = run_bimodal(&cfg).unwrap();
        assert_eq!(report.series.len(), 1);
        assert_eq!(report.marginals.len(), 3);
        assert!(report.marginal("posterior_sis").is_some());
        for m in &report.marginals {
            assert_eq!(m.rows.len(), 50);
            assert!((m.rows.iter().map(|r| r.mass).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
