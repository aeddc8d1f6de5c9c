//! Forward models that move ensemble members between analyses.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{StateVector, WeightedEnsemble};
use crate::error::{Error, Result};
use crate::rng::{standard_normal, RngStream};
use crate::scalar::Real;

/// How the random perturbation enters an Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    /// `u + dt * drift(u) + kappa * sqrt(dt) * xi`.
    #[default]
    EulerMaruyama,
    /// `u + dt * (drift(u) + kappa * eta)` with `eta ~ N(0, sqrt(dt))`,
    /// i.e. standard deviation `dt^(1/4)`.
    RhsPerturbation,
}

/// `du/dt = 4u - 4u^3 + kappa * eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleWellModel<T> {
    pub kappa: T,
    pub dt: T,
    pub noise: NoiseConvention,
}

/// Minus the derivative of the potential `-2u^2 + u^4`.
#[inline]
pub fn drift<T: Real>(u: T) -> T {
    let four = T::of(4.0);
    four * u - four * u * u * u
}

impl<T: Real> DoubleWellModel<T> {
    pub fn new(kappa: T, dt: T) -> Result<Self> {
        if !(kappa >= T::zero()) || !kappa.is_finite() {
            return Err(Error::Config(format!("kappa must be >= 0, got {kappa}")));
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::Config(format!("dt must be > 0, got {dt}")));
        }
        Ok(Self { kappa, dt, noise: NoiseConvention::EulerMaruyama })
    }

    pub fn with_noise(mut self, noise: NoiseConvention) -> Self {
        self.noise = noise;
        self
    }

    /// Standard deviation of the additive noise in one step.
    pub fn step_noise_std(&self) -> T {
        match self.noise {
            NoiseConvention::EulerMaruyama => self.kappa * self.dt.sqrt(),
            NoiseConvention::RhsPerturbation => self.kappa * self.dt * self.dt.sqrt().sqrt(),
        }
    }

    /// One explicit Euler step with a random perturbation.
    pub fn step<R: Rng + ?Sized>(&self, u: T, rng: &mut R) -> T {
        let deterministic = u + self.dt * drift(u);
        if self.kappa == T::zero() {
            return deterministic;
        }
        deterministic + self.step_noise_std() * standard_normal::<T, _>(rng)
    }

    /// Number of steps covering `t_span`, which must be a multiple of `dt`.
    pub fn steps_for(&self, t_span: T) -> Result<usize> {
        if t_span < T::zero() {
            return Err(Error::Config(format!("negative time span {t_span}")));
        }
        let ratio = t_span / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > T::of(1e-6) * steps.max(T::one()) {
            return Err(Error::Config(format!("time span {t_span} is not a multiple of dt = {}", self.dt)));
        }
        Ok(steps.to_usize().expect("nonnegative step count"))
    }

    pub fn advance<R: Rng + ?Sized>(&self, mut u: T, steps: usize, rng: &mut R) -> T {
        for _ in 0..steps {
            u = self.step(u, rng);
        }
        u
    }
}

/// A simulated truth and its noisy observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRun<T> {
    /// State after every step, starting with `u0` at time 0.
    pub trajectory: Vec<T>,
    pub obs_times: Vec<T>,
    pub observations: Vec<T>,
}

impl<T: Real> ReferenceRun<T> {
    pub fn state_at_step(&self, step: usize) -> T {
        self.trajectory[step]
    }
}

/// Integrate one trajectory to `t_end` and observe it at `obs_times` with
/// additive `N(0, obs_var)` errors.
pub fn simulate_reference<T: Real>(
    model: &DoubleWellModel<T>,
    u0: T,
    t_end: T,
    obs_times: &[T],
    obs_var: T,
    rng: &RngStream,
) -> Result<ReferenceRun<T>> {
    if !(obs_var >= T::zero()) {
        return Err(Error::Config(format!("observation variance must be >= 0, got {obs_var}")));
    }
    let total = model.steps_for(t_end)?;
    let obs_steps = obs_times
        .iter()
        .map(|&t| {
            if t < T::zero() || t > t_end {
                return Err(Error::Config(format!("observation time {t} outside [0, {t_end}]")));
            }
            model.steps_for(t)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut dynamics = rng.substream(0).generator();
    let mut trajectory = Vec::with_capacity(total + 1);
    let mut u = u0;
    trajectory.push(u);
    for _ in 0..total {
        u = model.step(u, &mut dynamics);
        trajectory.push(u);
    }

    let mut errors = rng.substream(1).generator();
    let sd = obs_var.sqrt();
    let observations = obs_steps
        .iter()
        .map(|&s| {
            let e: T = standard_normal(&mut errors);
            trajectory[s] + sd * e
        })
        .collect();
    Ok(ReferenceRun { trajectory, obs_times: obs_times.to_vec(), observations })
}

/// Advance every member independently over `t_span`; member `k` uses
/// sub-stream `k` of `rng`. Weights are untouched.
pub fn advance_ensemble<T: Real>(
    model: &DoubleWellModel<T>,
    ens: &WeightedEnsemble<T>,
    t_span: T,
    rng: &RngStream,
) -> Result<WeightedEnsemble<T>> {
    if ens.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, found: ens.dim() });
    }
    let steps = model.steps_for(t_span)?;
    if steps == 0 {
        return Ok(ens.clone());
    }
    let members = ens
        .members()
        .par_iter()
        .enumerate()
        .map(|(k, u)| {
            let mut gen = rng.substream(k as u64).generator();
            StateVector::scalar(model.advance(u[0], steps, &mut gen))
        })
        .collect::<Result<Vec<_>>>()?;
    WeightedEnsemble::new(members, ens.weights().to_vec())
}

/// Model that leaves states unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaticModel;

impl StaticModel {
    pub fn advance<T: Real>(&self, ens: &WeightedEnsemble<T>) -> WeightedEnsemble<T> {
        ens.clone()
    }
}
