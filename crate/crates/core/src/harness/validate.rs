use std::f64::consts::FRAC_PI_2;

use rand::Rng;

use super::config::ExperimentConfig;
use super::sine::SineSetup;
use crate::ensemble::{
    covariance_action, gaussian_loglikelihood, normalize_log_weights, weighted_mean, GaussianObservation,
    ObservationOperator, StateVector, WeightedEnsemble,
};
use crate::error::Result;
use crate::filters::{enkf_analysis, sis_correct, AnalysisConfig};
use crate::linalg::Matrix;
use crate::models::DoubleWellModel;
use crate::oracle::{bayes_update_grid, fp_evolve, DensityGrid};
use crate::rng::{standard_normal, RngStream};
use crate::spectral::sample_initial_ensemble;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Oracle and statistical self-checks, cheap enough to run from the CLI.
pub fn self_checks(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        kalman_check(seed)?,
        covariance_check(seed)?,
        corrector_check(seed)?,
        fokker_planck_check()?,
        bayes_grid_check()?,
        prior_variance_check(seed)?,
    ])
}

fn kalman_check(seed: u64) -> Result<Check> {
    let mut gen = RngStream::new(seed, 11).generator();
    let values: Vec<f64> = (0..10_000).map(|_| standard_normal(&mut gen)).collect();
    let forecast = WeightedEnsemble::from_scalars(&values)?;
    let obs = GaussianObservation::scalar(2.0, 1.0)?;
    let post = enkf_analysis(&forecast, &obs, &RngStream::new(seed, 12))?;
    let x = post.component(0);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (x.len() - 1) as f64;
    Ok(check(
        "enkf matches the Kalman posterior N(1, 1/2)",
        (mean - 1.0).abs() <= 0.05 && (var - 0.5).abs() <= 0.05,
        format!("mean {mean:.4}, variance {var:.4}"),
    ))
}

fn covariance_check(seed: u64) -> Result<Check> {
    let mut gen = RngStream::new(seed, 13).generator();
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = gen.random_range(1..=10);
        let n = gen.random_range(2..=20);
        let p = gen.random_range(1..=m);
        let members = (0..n)
            .map(|_| StateVector::new((0..m).map(|_| standard_normal(&mut gen)).collect()))
            .collect::<Result<Vec<_>>>()?;
        let raw: Vec<f64> = (0..n).map(|_| gen.random_range(0.01..1.0)).collect();
        let ens = WeightedEnsemble::from_raw_weights(members, &raw)?;
        let h = Matrix::from_fn(p, m, |_, _| standard_normal(&mut gen));
        let action = covariance_action(&ens, &ObservationOperator::Dense(h.clone()))?;
        let mean = weighted_mean(&ens);
        let q = Matrix::from_fn(m, m, |i, j| {
            ens.members().iter().zip(ens.weights()).map(|(u, &w)| w * (u[i] - mean[i]) * (u[j] - mean[j])).sum()
        });
        let qht = q.mul(&h.transpose());
        let hqht = h.mul(&qht);
        let rel = |a: &Matrix<f64>, b: &Matrix<f64>| {
            let scale = b.max_abs().max(f64::MIN_POSITIVE);
            let mut diff = 0.0f64;
            for i in 0..a.rows() {
                for j in 0..a.cols() {
                    diff = diff.max((a[(i, j)] - b[(i, j)]).abs());
                }
            }
            diff / scale
        };
        worst = worst.max(rel(&action.qht, &qht)).max(rel(&action.hqht, &hqht));
    }
    Ok(check(
        "ensemble covariance action matches the dense product",
        worst <= 1e-10,
        format!("worst relative error {worst:.2e}"),
    ))
}

fn corrector_check(seed: u64) -> Result<Check> {
    let mut gen = RngStream::new(seed, 14).generator();
    let values: Vec<f64> = (0..50).map(|_| 2.0 * standard_normal::<f64, _>(&mut gen)).collect();
    let ens = WeightedEnsemble::from_scalars(&values)?;
    let obs = GaussianObservation::scalar(0.7, 0.5)?;
    let corrected = sis_correct(&ens, &ens, &obs, &AnalysisConfig::default())?;
    let ll = values.iter().map(|&v| gaussian_loglikelihood(&obs, &[v])).collect::<Result<Vec<_>>>()?;
    let expected = normalize_log_weights(&ll)?;
    let worst = corrected.weights().iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(check(
        "corrector reduces to the likelihood when proposal = forecast",
        worst <= 1e-12,
        format!("max deviation {worst:.2e}"),
    ))
}

fn fokker_planck_check() -> Result<Check> {
    let model = DoubleWellModel::new(0.5, 0.01)?;
    let stationary = DensityGrid::double_well_stationary(-3.0, 3.0, 0.01, 0.5)?;
    let evolved = fp_evolve(&stationary, &model, 1.0)?;
    let drift = evolved.l1_distance(&stationary);
    let mass = (evolved.mass() - 1.0f64).abs();
    Ok(check(
        "Fokker-Planck keeps the stationary density and conserves mass",
        drift <= 1e-3 && mass <= 1e-6,
        format!("L1 change over t = 1: {drift:.2e}, mass error {mass:.2e}"),
    ))
}

fn bayes_grid_check() -> Result<Check> {
    let prior = DensityGrid::gaussian(-6.0, 6.0, 0.01, 0.0, 1.0)?;
    let post = bayes_update_grid(&prior, 1.0, 1.0)?;
    let exact = DensityGrid::gaussian(-6.0, 6.0, 0.01, 0.5, 0.5)?;
    let err = post.values().iter().zip(exact.values()).map(|(a, b): (&f64, &f64)| (a - b).abs()).fold(0.0, f64::max);
    Ok(check("grid Bayes update matches the conjugate posterior", err <= 1e-4, format!("max-norm error {err:.2e}")))
}

fn prior_variance_check(seed: u64) -> Result<Check> {
    let cfg = ExperimentConfig::default();
    let setup = SineSetup::new(&cfg)?;
    let ens = sample_initial_ensemble(setup.basis(), setup.decay(), 10_000, &RngStream::new(seed, 15))?;
    let x = ens.component(setup.obs_node);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let sample = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (x.len() - 1) as f64).sqrt();
    let analytic = setup.prior_std_at(setup.obs_node);
    let rel = (sample - analytic).abs() / analytic;
    Ok(check(
        "random-field prior has the analytic pointwise spread",
        rel <= 0.15,
        format!(
            "std at x = {:.4} (pi/2 = {FRAC_PI_2:.4}): sample {sample:.4}, analytic {analytic:.4}",
            setup.basis().mesh()[setup.obs_node]
        ),
    ))
}
