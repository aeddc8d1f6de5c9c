use rayon::prelude::*;

use crate::ensemble::{covariance_action, GaussianObservation, StateVector, WeightedEnsemble};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::rng::{standard_normal, RngStream};
use crate::scalar::Real;

/// Source of the perturbed data vectors `d_k`.
#[derive(Debug, Clone, Copy)]
pub enum DataPerturbation {
    /// `d_k = d + L xi_k` with `R = L L^T`; member `k` draws from sub-stream `k`.
    Sampled(RngStream),
    /// `d_k = d` for every member.
    Unperturbed,
}

/// Stochastic EnKF with the weighted ensemble covariance. Weights pass
/// through unchanged.
pub fn enkf_analysis<T: Real>(
    forecast: &WeightedEnsemble<T>,
    obs: &GaussianObservation<T>,
    rng: &RngStream,
) -> Result<WeightedEnsemble<T>> {
    enkf_analysis_with(forecast, obs, DataPerturbation::Sampled(*rng))
}

pub fn enkf_analysis_with<T: Real>(
    forecast: &WeightedEnsemble<T>,
    obs: &GaussianObservation<T>,
    perturbation: DataPerturbation,
) -> Result<WeightedEnsemble<T>> {
    if forecast.len() < 2 {
        return Err(Error::InvalidEnsemble("EnKF needs at least two members".into()));
    }
    let ca = covariance_action(forecast, obs.operator())?;
    let innovation_cov = ca.hqht.add(obs.noise_cov());
    let innovation_chol = Cholesky::new(&innovation_cov).map_err(|_| Error::SingularInnovation)?;
    let p = obs.data_dim();

    let members = forecast
        .members()
        .par_iter()
        .enumerate()
        .map(|(k, u)| {
            let mut dk = obs.data().to_vec();
            if let DataPerturbation::Sampled(stream) = perturbation {
                let mut gen = stream.substream(k as u64).generator();
                let xi: Vec<T> = (0..p).map(|_| standard_normal(&mut gen)).collect();
                for (d, e) in dk.iter_mut().zip(obs.noise_factor().mul_lower(&xi)) {
                    *d = *d + e;
                }
            }
            let hu = obs.operator().apply(u);
            let innov: Vec<T> = dk.iter().zip(&hu).map(|(&d, &h)| d - h).collect();
            let z = innovation_chol.solve(&innov);
            let shift = ca.qht.mul_vec(&z);
            StateVector::new(u.iter().zip(&shift).map(|(&x, &s)| x + s).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedEnsemble::new(members, forecast.weights().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_ens(values: &[f64]) -> WeightedEnsemble<f64> {
        WeightedEnsemble::from_scalars(values).unwrap()
    }

    #[test]
    fn infinite_noise_leaves_forecast() {
        let ens = scalar_ens(&[-1.0, 0.5, 2.0, 3.0]);
        let obs = GaussianObservation::scalar(10.0, 1e12).unwrap();
        let out = enkf_analysis(&ens, &obs, &RngStream::new(3, 0)).unwrap();
        for (a, f) in out.members().iter().zip(ens.members()) {
            assert!((a[0] - f[0]).abs() <= 1e-4 * f[0].abs().max(1.0));
        }
    }

    #[test]
    fn unit_gain_halves_innovation() {
        // members +-1 with equal weights: Q = 1, so K = 1/2 for R = 1
        let ens = scalar_ens(&[1.0, -1.0]);
        let obs = GaussianObservation::scalar(3.0, 1.0).unwrap();
        let out = enkf_analysis_with(&ens, &obs, DataPerturbation::Unperturbed).unwrap();
        assert!((out.member(0)[0] - (1.0 + 0.5 * (3.0 - 1.0))).abs() < 1e-15);
        assert!((out.member(1)[0] - (-1.0 + 0.5 * (3.0 + 1.0))).abs() < 1e-15);
    }

    #[test]
    fn weights_shape_preserved() {
        let members: Vec<_> = [0.0, 1.0, 4.0].iter().map(|&v| StateVector::scalar(v).unwrap()).collect();
        let ens = WeightedEnsemble::new(members, vec![0.2, 0.3, 0.5]).unwrap();
        let obs = GaussianObservation::scalar(2.0, 0.5).unwrap();
        let out = enkf_analysis(&ens, &obs, &RngStream::new(1, 1)).unwrap();
        assert_eq!(out.weights(), ens.weights());
        assert_eq!(out.len(), 3);
        assert_eq!(out.dim(), 1);
    }

    #[test]
    fn single_member_is_rejected() {
        let ens = scalar_ens(&[1.0]);
        let obs = GaussianObservation::scalar(0.0, 1.0).unwrap();
        assert!(enkf_analysis(&ens, &obs, &RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn affine_equivariance_with_matched_draws() {
        let values = [0.3, -1.2, 2.5, 0.9, -0.4];
        let (a, b) = (2.5, -1.0);
        let ens = scalar_ens(&values);
        let moved = scalar_ens(&values.map(|v| a * v + b));
        let obs = GaussianObservation::scalar(1.5, 0.7).unwrap();
        let obs_moved = GaussianObservation::scalar(a * 1.5 + b, a * a * 0.7).unwrap();
        let rng = RngStream::new(11, 4);
        let out = enkf_analysis(&ens, &obs, &rng).unwrap();
        let out_moved = enkf_analysis(&moved, &obs_moved, &rng).unwrap();
        for (x, y) in out.members().iter().zip(out_moved.members()) {
            assert!((a * x[0] + b - y[0]).abs() < 1e-12);
        }
    }
}
