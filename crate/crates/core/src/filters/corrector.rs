use log::warn;
use rayon::prelude::*;

use crate::ensemble::{
    effective_sample_size, gaussian_loglikelihood, multinomial_resample, normalize_log_weights, GaussianObservation,
    WeightedEnsemble,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Real;

use super::enkf::{enkf_analysis_with, DataPerturbation};
use super::knn::{bandwidth_embedded, embed_all, ratio_embedded};
use super::{AnalysisConfig, DegenerateFallback};

/// Reweight predictor output. The analysis members are treated as a sample
/// from an unknown proposal; `w_k ∝ p(d | u_k^a) * ratio_k`, where `ratio_k`
/// is the nearest-neighbour estimate of forecast over proposal density at
/// `u_k^a`. The weights carried by `analysis` are ignored.
pub fn sis_correct<T: Real>(
    forecast: &WeightedEnsemble<T>,
    analysis: &WeightedEnsemble<T>,
    obs: &GaussianObservation<T>,
    cfg: &AnalysisConfig<'_, T>,
) -> Result<WeightedEnsemble<T>> {
    if forecast.len() != analysis.len() {
        return Err(Error::InvalidEnsemble(format!(
            "forecast has {} members, analysis {}",
            forecast.len(),
            analysis.len()
        )));
    }
    if forecast.dim() != analysis.dim() {
        return Err(Error::DimensionMismatch { expected: forecast.dim(), found: analysis.dim() });
    }
    let rank = cfg.rank_for(analysis.len())?;
    let fp = embed_all(forecast, cfg.norm);
    let ap = embed_all(analysis, cfg.norm);

    let loglik = analysis.members().par_iter().map(|u| gaussian_loglikelihood(obs, u)).collect::<Result<Vec<T>>>()?;
    let ratios: Vec<T> = (0..analysis.len())
        .into_par_iter()
        .map(|k| {
            let h = bandwidth_embedded(k, &ap, rank, cfg.knn_include_self);
            ratio_embedded(k, &ap[k], &fp, forecast.weights(), &ap, h, cfg.numerator_weight_index)
        })
        .collect();

    let log_w: Vec<T> = loglik.iter().zip(&ratios).map(|(&l, &r)| l + r.ln()).collect();
    let weights = match normalize_log_weights(&log_w) {
        Ok(w) => w,
        Err(Error::DegenerateWeights) => match cfg.degenerate_fallback {
            DegenerateFallback::Error => return Err(Error::DegenerateWeights),
            DegenerateFallback::LikelihoodOnly => {
                warn!("corrector: every density ratio vanished; falling back to likelihood-only weights");
                normalize_log_weights(&loglik)?
            }
        },
        Err(e) => return Err(e),
    };
    analysis.with_weights(weights)
}

/// Sequential importance sampling: members stay put, `w_k ∝ w_k^f p(d | u_k)`.
pub fn pure_sis_analysis<T: Real>(
    forecast: &WeightedEnsemble<T>,
    obs: &GaussianObservation<T>,
) -> Result<WeightedEnsemble<T>> {
    let log_w = forecast
        .members()
        .par_iter()
        .zip(forecast.weights())
        .map(|(u, &w)| Ok(w.ln() + gaussian_loglikelihood(obs, u)?))
        .collect::<Result<Vec<T>>>()?;
    forecast.with_weights(normalize_log_weights(&log_w)?)
}

/// EnKF predictor followed by the density-ratio corrector.
pub fn enkf_sis_analysis<T: Real>(
    forecast: &WeightedEnsemble<T>,
    obs: &GaussianObservation<T>,
    cfg: &AnalysisConfig<'_, T>,
    rng: &RngStream,
) -> Result<WeightedEnsemble<T>> {
    enkf_sis_analysis_split(forecast, obs, obs, cfg, DataPerturbation::Sampled(*rng))
}

/// EnKF-SIS with separate observations for the predictor and the corrector.
pub fn enkf_sis_analysis_split<T: Real>(
    forecast: &WeightedEnsemble<T>,
    predictor_obs: &GaussianObservation<T>,
    corrector_obs: &GaussianObservation<T>,
    cfg: &AnalysisConfig<'_, T>,
    perturbation: DataPerturbation,
) -> Result<WeightedEnsemble<T>> {
    let predicted = enkf_analysis_with(forecast, predictor_obs, perturbation)?;
    if !cfg.corrector_enabled {
        return Ok(predicted);
    }
    let corrected = sis_correct(forecast, &predicted, corrector_obs, cfg)?;
    match (cfg.resample_ess_threshold, perturbation) {
        (Some(threshold), DataPerturbation::Sampled(stream)) => {
            let n = corrected.len();
            if effective_sample_size(corrected.weights()) < threshold * T::of_usize(n) {
                return multinomial_resample(&corrected, n, &stream.substream(u64::MAX));
            }
            Ok(corrected)
        }
        _ => Ok(corrected),
    }
}
