//! Weighted ensembles and the statistics every filter is built from.
//!
//! A [`WeightedEnsemble`] is the discrete stand-in for a probability
//! distribution: `N` states `u_k` with nonnegative weights `w_k` summing to
//! one. Weighted moments, Gaussian log-likelihoods, weight normalization and
//! multinomial resampling live here.

use std::ops::Deref;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::rng::RngStream;
use crate::scalar::Real;

/// A point in state space: grid values of a function, or one scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T>(Vec<T>);

impl<T: Real> StateVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidState("state vector is empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidState(format!("entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn scalar(value: T) -> Result<Self> {
        Self::new(vec![value])
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for StateVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> AsRef<[T]> for StateVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

fn weight_tolerance<T: Real>(n: usize) -> T {
    T::of(1e-12).max(T::epsilon() * T::of_usize(n).sqrt() * T::of(64.0))
}

/// `N` members of common dimension with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble<T> {
    members: Vec<StateVector<T>>,
    weights: Vec<T>,
}

impl<T: Real> WeightedEnsemble<T> {
    pub fn new(members: Vec<StateVector<T>>, weights: Vec<T>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidEnsemble("ensemble has no members".into()));
        }
        if weights.len() != members.len() {
            return Err(Error::InvalidEnsemble(format!("{} members but {} weights", members.len(), weights.len())));
        }
        let dim = members[0].dim();
        if let Some(bad) = members.iter().find(|u| u.dim() != dim) {
            return Err(Error::InvalidEnsemble(format!("member dimension {} differs from {dim}", bad.dim())));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidEnsemble("weights must be finite and nonnegative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > weight_tolerance::<T>(weights.len()) {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { members, weights })
    }

    /// Equal weights `1/N`.
    pub fn uniform(members: Vec<StateVector<T>>) -> Result<Self> {
        let n = members.len();
        let w = T::one() / T::of_usize(n.max(1));
        Self::new(members, vec![w; n])
    }

    /// Members with unnormalized nonnegative weights.
    pub fn from_raw_weights(members: Vec<StateVector<T>>, raw: &[T]) -> Result<Self> {
        let weights = normalize_weights(raw)?;
        Self::new(members, weights)
    }

    /// Scalar members from plain values, equal weights.
    pub fn from_scalars(values: &[T]) -> Result<Self> {
        let members = values.iter().map(|&v| StateVector::scalar(v)).collect::<Result<_>>()?;
        Self::uniform(members)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    pub fn members(&self) -> &[StateVector<T>] {
        &self.members
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn member(&self, k: usize) -> &StateVector<T> {
        &self.members[k]
    }

    /// Same members carrying new (already normalized) weights.
    pub fn with_weights(&self, weights: Vec<T>) -> Result<Self> {
        Self::new(self.members.clone(), weights)
    }

    /// Values of every member at one state component.
    pub fn component(&self, index: usize) -> Vec<T> {
        self.members.iter().map(|u| u[index]).collect()
    }

    pub fn into_parts(self) -> (Vec<StateVector<T>>, Vec<T>) {
        (self.members, self.weights)
    }
}

/// Linear observation operator `H`.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationOperator<T> {
    /// Full `p x m` matrix.
    Dense(Matrix<T>),
    /// Point evaluations: row `i` picks state component `indices[i]`.
    Points { indices: Vec<usize>, state_dim: usize },
}

impl<T: Real> ObservationOperator<T> {
    pub fn identity(dim: usize) -> Self {
        Self::Points { indices: (0..dim).collect(), state_dim: dim }
    }

    pub fn data_dim(&self) -> usize {
        match self {
            Self::Dense(h) => h.rows(),
            Self::Points { indices, .. } => indices.len(),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            Self::Dense(h) => h.cols(),
            Self::Points { state_dim, .. } => *state_dim,
        }
    }

    /// `H u`.
    pub fn apply(&self, u: &[T]) -> Vec<T> {
        match self {
            Self::Dense(h) => h.mul_vec(u),
            Self::Points { indices, .. } => indices.iter().map(|&i| u[i]).collect(),
        }
    }

    pub fn to_dense(&self) -> Matrix<T> {
        match self {
            Self::Dense(h) => h.clone(),
            Self::Points { indices, state_dim } => {
                Matrix::from_fn(indices.len(), *state_dim, |i, j| if indices[i] == j { T::one() } else { T::zero() })
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Self::Points { indices, state_dim } = self {
            if let Some(&i) = indices.iter().find(|&&i| i >= *state_dim) {
                return Err(Error::DimensionMismatch { expected: *state_dim, found: i + 1 });
            }
        }
        Ok(())
    }
}

/// Data `d`, operator `H` and Gaussian data-error covariance `R`.
#[derive(Debug, Clone)]
pub struct GaussianObservation<T> {
    data: Vec<T>,
    operator: ObservationOperator<T>,
    noise_cov: Matrix<T>,
    noise_chol: Cholesky<T>,
}

impl<T: Real> GaussianObservation<T> {
    pub fn new(data: Vec<T>, operator: ObservationOperator<T>, noise_cov: Matrix<T>) -> Result<Self> {
        operator.validate()?;
        if operator.data_dim() != data.len() {
            return Err(Error::DimensionMismatch { expected: operator.data_dim(), found: data.len() });
        }
        if noise_cov.rows() != data.len() || noise_cov.cols() != data.len() {
            return Err(Error::DimensionMismatch { expected: data.len(), found: noise_cov.rows() });
        }
        let noise_chol = Cholesky::new(&noise_cov)?;
        Ok(Self { data, operator, noise_cov, noise_chol })
    }

    /// One value observed at state component `index` with variance `var`.
    pub fn point(value: T, index: usize, state_dim: usize, var: T) -> Result<Self> {
        Self::new(
            vec![value],
            ObservationOperator::Points { indices: vec![index], state_dim },
            Matrix::diagonal(&[var]),
        )
    }

    /// Scalar state observed directly.
    pub fn scalar(value: T, var: T) -> Result<Self> {
        Self::point(value, 0, 1, var)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn operator(&self) -> &ObservationOperator<T> {
        &self.operator
    }

    pub fn noise_cov(&self) -> &Matrix<T> {
        &self.noise_cov
    }

    pub fn noise_factor(&self) -> &Cholesky<T> {
        &self.noise_chol
    }

    pub fn data_dim(&self) -> usize {
        self.data.len()
    }

    /// Same operator and data with `R` replaced.
    pub fn with_noise_cov(&self, noise_cov: Matrix<T>) -> Result<Self> {
        Self::new(self.data.clone(), self.operator.clone(), noise_cov)
    }

    /// Residual `d - H u`.
    pub fn residual(&self, u: &[T]) -> Vec<T> {
        self.operator.apply(u).iter().zip(&self.data).map(|(&hu, &d)| d - hu).collect()
    }
}

/// `sum_k w_k u_k`.
pub fn weighted_mean<T: Real>(ens: &WeightedEnsemble<T>) -> StateVector<T> {
    let mut mean = vec![T::zero(); ens.dim()];
    for (u, &w) in ens.members().iter().zip(ens.weights()) {
        if w == T::zero() {
            continue;
        }
        for (m, &x) in mean.iter_mut().zip(u.iter()) {
            *m = *m + w * x;
        }
    }
    StateVector(mean)
}

/// Weighted anomalies `a_k = sqrt(w_k) (u_k - mean)`.
pub fn weighted_anomalies<T: Real>(ens: &WeightedEnsemble<T>) -> Vec<Vec<T>> {
    let mean = weighted_mean(ens);
    ens.members()
        .iter()
        .zip(ens.weights())
        .map(|(u, &w)| {
            let s = w.sqrt();
            u.iter().zip(mean.iter()).map(|(&x, &m)| s * (x - m)).collect()
        })
        .collect()
}

/// `Q H^T` and `H Q H^T` for the weighted ensemble covariance `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAction<T> {
    /// `m x p`
    pub qht: Matrix<T>,
    /// `p x p`
    pub hqht: Matrix<T>,
}

/// Products of the weighted covariance with `H^T`, accumulated member by
/// member from the anomalies; the `m x m` matrix `Q` is never formed.
pub fn covariance_action<T: Real>(
    ens: &WeightedEnsemble<T>,
    operator: &ObservationOperator<T>,
) -> Result<CovarianceAction<T>> {
    let m = ens.dim();
    if operator.state_dim() != m {
        return Err(Error::DimensionMismatch { expected: m, found: operator.state_dim() });
    }
    let p = operator.data_dim();
    let mut qht = Matrix::zeros(m, p);
    let mut hqht = Matrix::zeros(p, p);
    let mean = weighted_mean(ens);
    for (u, &w) in ens.members().iter().zip(ens.weights()) {
        if w == T::zero() {
            continue;
        }
        // w (u - mean)(H(u - mean))^T, the same sum as a_k (H a_k)^T
        let dev: Vec<T> = u.iter().zip(mean.iter()).map(|(&x, &m)| x - m).collect();
        let hdev = operator.apply(&dev);
        let whdev: Vec<T> = hdev.iter().map(|&h| w * h).collect();
        for i in 0..m {
            if dev[i] == T::zero() {
                continue;
            }
            for j in 0..p {
                qht[(i, j)] = qht[(i, j)] + dev[i] * whdev[j];
            }
        }
        for i in 0..p {
            for j in 0..p {
                hqht[(i, j)] = hqht[(i, j)] + hdev[i] * whdev[j];
            }
        }
    }
    Ok(CovarianceAction { qht, hqht })
}

/// `-1/2 (d - Hu)^T R^{-1} (d - Hu)`, without the normalizing constant.
pub fn gaussian_loglikelihood<T: Real>(obs: &GaussianObservation<T>, u: &[T]) -> Result<T> {
    if u.len() != obs.operator().state_dim() {
        return Err(Error::DimensionMismatch { expected: obs.operator().state_dim(), found: u.len() });
    }
    let r = obs.residual(u);
    Ok(-T::of(0.5) * obs.noise_factor().inv_quadratic_form(&r))
}

/// `raw / sum(raw)`.
pub fn normalize_weights<T: Real>(raw: &[T]) -> Result<Vec<T>> {
    if raw.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(Error::InvalidEnsemble("raw weights must be finite and nonnegative".into()));
    }
    let total: T = raw.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::DegenerateWeights);
    }
    Ok(raw.iter().map(|&w| w / total).collect())
}

/// Normalize weights given as logarithms. The maximum is subtracted before
/// exponentiating; `-inf` entries become exact zeros.
pub fn normalize_log_weights<T: Real>(log_raw: &[T]) -> Result<Vec<T>> {
    if log_raw.iter().any(|w| w.is_nan() || *w == T::infinity()) {
        return Err(Error::InvalidEnsemble("log-weights must be NaN-free and below +inf".into()));
    }
    let max = log_raw.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Err(Error::DegenerateWeights);
    }
    let shifted: Vec<T> = log_raw.iter().map(|&l| (l - max).exp()).collect();
    normalize_weights(&shifted)
}

/// `1 / sum w_k^2`.
pub fn effective_sample_size<T: Real>(weights: &[T]) -> T {
    let s: T = weights.iter().map(|&w| w * w).sum();
    T::one() / s
}

/// Draw `target_size` members i.i.d. with probabilities equal to the weights;
/// the result carries uniform weights.
pub fn multinomial_resample<T: Real>(
    ens: &WeightedEnsemble<T>,
    target_size: usize,
    rng: &RngStream,
) -> Result<WeightedEnsemble<T>> {
    let picks = multinomial_indices(ens.weights(), target_size, rng)?;
    let members = picks.into_iter().map(|k| ens.member(k).clone()).collect();
    WeightedEnsemble::uniform(members)
}

/// Member indices selected by multinomial resampling.
pub fn multinomial_indices<T: Real>(weights: &[T], target_size: usize, rng: &RngStream) -> Result<Vec<usize>> {
    if target_size == 0 {
        return Err(Error::InvalidEnsemble("resample target size must be at least 1".into()));
    }
    let normalized = normalize_weights(weights)?;
    let mut cdf = Vec::with_capacity(normalized.len());
    let mut acc = 0.0f64;
    for w in &normalized {
        acc += w.to_f64_lossy();
        cdf.push(acc);
    }
    let total = acc;
    // last index with positive weight absorbs rounding at the top of the cdf
    let last_positive = normalized.iter().rposition(|w| *w > T::zero()).ok_or(Error::DegenerateWeights)?;
    let mut gen = rng.generator();
    Ok((0..target_size)
        .map(|_| {
            let u: f64 = gen.random::<f64>() * total;
            let k = cdf.partition_point(|&c| c <= u);
            k.min(last_positive)
        })
        .collect())
}
