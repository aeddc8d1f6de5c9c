//! Sine-basis machinery on `[0, pi]`.
//!
//! States are stored as grid values. The basis matrix maps mode
//! coefficients to grid values; analysis is the discrete projection under
//! the trapezoid inner product. Random smooth fields are sums of basis
//! functions with independent normal coefficients scaled by `lambda_n`, and
//! the U-norm weighs coefficients by `1 / kappa_n`.

use rayon::prelude::*;

use crate::ensemble::{StateVector, WeightedEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};
use crate::rng::{standard_normal, RngStream};
use crate::scalar::Real;

/// Orthonormal sine modes sampled on a uniform interior mesh.
#[derive(Debug, Clone)]
pub struct SpectralBasis<T> {
    mesh: Vec<T>,
    quad_weights: Vec<T>,
    /// `nodes x modes`, entry `(j, n)` is `phi_{n+1}(x_j)`.
    basis: Matrix<T>,
}

impl<T: Real> SpectralBasis<T> {
    /// `nodes` interior points `x_j = j pi / (nodes + 1)` and `modes` sine
    /// functions `sin(n x)`, each scaled to unit norm under the trapezoid
    /// rule (boundary values are zero, so interior weights are all `pi / (nodes + 1)`).
    pub fn sine(nodes: usize, modes: usize) -> Result<Self> {
        if nodes == 0 || modes == 0 {
            return Err(Error::Config("spectral basis needs at least one node and one mode".into()));
        }
        if modes > nodes {
            return Err(Error::Config(format!("{modes} modes cannot be resolved on {nodes} nodes")));
        }
        let h = T::PI() / T::of_usize(nodes + 1);
        let mesh: Vec<T> = (1..=nodes).map(|j| T::of_usize(j) * h).collect();
        let quad_weights = vec![h; nodes];
        let mut basis = Matrix::from_fn(nodes, modes, |j, n| (T::of_usize(n + 1) * mesh[j]).sin());
        for n in 0..modes {
            let norm2: T = (0..nodes).map(|j| quad_weights[j] * basis[(j, n)] * basis[(j, n)]).sum();
            let s = T::one() / norm2.sqrt();
            for j in 0..nodes {
                basis[(j, n)] = basis[(j, n)] * s;
            }
        }
        Ok(Self { mesh, quad_weights, basis })
    }

    pub fn mode_count(&self) -> usize {
        self.basis.cols()
    }

    pub fn node_count(&self) -> usize {
        self.basis.rows()
    }

    pub fn mesh(&self) -> &[T] {
        &self.mesh
    }

    pub fn quad_weights(&self) -> &[T] {
        &self.quad_weights
    }

    pub fn basis_matrix(&self) -> &Matrix<T> {
        &self.basis
    }

    /// Grid node closest to `x`.
    pub fn nearest_node(&self, x: T) -> usize {
        let mut best = 0;
        for (j, &xj) in self.mesh.iter().enumerate() {
            if (xj - x).abs() < (self.mesh[best] - x).abs() {
                best = j;
            }
        }
        best
    }

    /// `Phi^T W Phi`; the identity up to rounding.
    pub fn gram(&self) -> Matrix<T> {
        let modes = self.mode_count();
        Matrix::from_fn(modes, modes, |a, b| {
            (0..self.node_count()).map(|j| self.quad_weights[j] * self.basis[(j, a)] * self.basis[(j, b)]).sum()
        })
    }

    /// Coefficients `c = Phi^T W u`.
    pub fn analyze(&self, u: &[T]) -> Vec<T> {
        assert_eq!(u.len(), self.node_count(), "state is not sampled on this mesh");
        let wu: Vec<T> = u.iter().zip(&self.quad_weights).map(|(&x, &w)| x * w).collect();
        self.basis.tr_mul_vec(&wu)
    }

    /// Grid values `u = Phi c`.
    pub fn synthesize(&self, c: &[T]) -> Vec<T> {
        self.basis.mul_vec(c)
    }

    /// `u(x_node)` for the function with coefficients `c`.
    pub fn evaluate_at(&self, node: usize, c: &[T]) -> T {
        crate::linalg::dot(self.basis.row(node), c)
    }
}

/// Decay sequences: `lambda_n` scales initial coefficients, `kappa_n`
/// scales the U-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySpec<T> {
    lambda: Vec<T>,
    kappa: Vec<T>,
}

impl<T: Real> DecaySpec<T> {
    /// `lambda_n >= 0` (a zero switches a mode off), `kappa_n > 0`.
    pub fn new(lambda: Vec<T>, kappa: Vec<T>) -> Result<Self> {
        if lambda.len() != kappa.len() {
            return Err(Error::DimensionMismatch { expected: lambda.len(), found: kappa.len() });
        }
        if lambda.iter().any(|l| !(*l >= T::zero()) || !l.is_finite()) {
            return Err(Error::Config("lambda_n must be finite and nonnegative".into()));
        }
        if kappa.iter().any(|k| !(*k > T::zero()) || !k.is_finite()) {
            return Err(Error::Config("kappa_n must be finite and positive".into()));
        }
        Ok(Self { lambda, kappa })
    }

    /// `lambda_n = n^-lambda_exp`, `kappa_n = n^-kappa_exp`.
    pub fn power_law(modes: usize, lambda_exp: T, kappa_exp: T) -> Result<Self> {
        let n = |i: usize| T::of_usize(i + 1);
        Self::new(
            (0..modes).map(|i| n(i).powf(-lambda_exp)).collect(),
            (0..modes).map(|i| n(i).powf(-kappa_exp)).collect(),
        )
    }

    pub fn lambda(&self) -> &[T] {
        &self.lambda
    }

    pub fn kappa(&self) -> &[T] {
        &self.kappa
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }
}

/// `sqrt(sum c_n^2 / kappa_n^2)`.
pub fn u_norm<T: Real>(decay: &DecaySpec<T>, c: &[T]) -> T {
    assert_eq!(c.len(), decay.len(), "coefficient and kappa lengths differ");
    c.iter().zip(decay.kappa()).map(|(&c, &k)| (c / k) * (c / k)).sum::<T>().sqrt()
}

/// Random coefficient vectors `lambda_n d_n`, one per member, each member
/// drawing from its own sub-stream.
pub fn sample_coefficients<T: Real>(decay: &DecaySpec<T>, size: usize, rng: &RngStream) -> Vec<Vec<T>> {
    (0..size).into_par_iter().map(|k| member_coefficients(decay, rng, k)).collect()
}

/// Coefficients of member `k` of [`sample_coefficients`], regenerated alone.
pub fn member_coefficients<T: Real>(decay: &DecaySpec<T>, rng: &RngStream, k: usize) -> Vec<T> {
    let mut gen = rng.substream(k as u64).generator();
    decay.lambda().iter().map(|&l| l * standard_normal::<T, _>(&mut gen)).collect()
}

/// Variance of `u(x_node)` under the random-field prior.
pub fn pointwise_variance<T: Real>(basis: &SpectralBasis<T>, decay: &DecaySpec<T>, node: usize) -> T {
    basis.basis_matrix().row(node).iter().zip(decay.lambda()).map(|(&p, &l)| (l * p) * (l * p)).sum()
}

/// `N` random smooth fields `u = sum lambda_n d_n phi_n` with equal weights.
pub fn sample_initial_ensemble<T: Real>(
    basis: &SpectralBasis<T>,
    decay: &DecaySpec<T>,
    size: usize,
    rng: &RngStream,
) -> Result<WeightedEnsemble<T>> {
    if decay.len() != basis.mode_count() {
        return Err(Error::DimensionMismatch { expected: basis.mode_count(), found: decay.len() });
    }
    let members = sample_coefficients(decay, size, rng)
        .into_par_iter()
        .map(|c| StateVector::new(basis.synthesize(&c)))
        .collect::<Result<Vec<_>>>()?;
    WeightedEnsemble::uniform(members)
}

/// A norm on states, represented by an embedding into a space where it is
/// Euclidean. Distances between many members then cost one embedding each.
pub trait StateNorm<T: Real>: Sync {
    fn embed(&self, u: &[T]) -> Vec<T>;

    fn norm(&self, u: &[T]) -> T {
        self.embed(u).iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    fn distance(&self, u: &[T], v: &[T]) -> T {
        squared_distance(&self.embed(u), &self.embed(v)).sqrt()
    }
}

/// Plain Euclidean norm of the state vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl<T: Real> StateNorm<T> for Euclidean {
    fn embed(&self, u: &[T]) -> Vec<T> {
        u.to_vec()
    }
}

/// `||u||_U` through the coefficients of `u` in the sine basis.
#[derive(Debug, Clone)]
pub struct UNorm<T> {
    pub basis: SpectralBasis<T>,
    pub decay: DecaySpec<T>,
}

impl<T: Real> UNorm<T> {
    pub fn new(basis: SpectralBasis<T>, decay: DecaySpec<T>) -> Result<Self> {
        if decay.len() != basis.mode_count() {
            return Err(Error::DimensionMismatch { expected: basis.mode_count(), found: decay.len() });
        }
        Ok(Self { basis, decay })
    }
}

impl<T: Real> StateNorm<T> for UNorm<T> {
    fn embed(&self, u: &[T]) -> Vec<T> {
        self.basis.analyze(u).iter().zip(self.decay.kappa()).map(|(&c, &k)| c / k).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_under_quadrature() {
        let basis = SpectralBasis::<f64>::sine(500, 500).unwrap();
        let g = basis.gram();
        let mut worst = 0.0f64;
        for a in 0..500 {
            for b in 0..500 {
                let want = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g[(a, b)] - want).abs());
            }
        }
        assert!(worst < 1e-8, "gram deviation {worst}");
    }

    #[test]
    fn analyze_examples() {
        let basis = SpectralBasis::<f64>::sine(64, 64).unwrap();
        let phi2: Vec<f64> = (0..64).map(|j| basis.basis_matrix()[(j, 1)]).collect();
        let c = basis.analyze(&phi2);
        for (n, &cn) in c.iter().enumerate() {
            let want = if n == 1 { 1.0 } else { 0.0 };
            assert!((cn - want).abs() < 1e-12);
        }
        assert!(basis.analyze(&[0.0; 64]).iter().all(|&x| x == 0.0));

        let mut coeffs = vec![0.0; 64];
        coeffs[0] = 2.0;
        coeffs[3] = -3.0;
        let u = basis.synthesize(&coeffs);
        let c = basis.analyze(&u);
        for (a, b) in c.iter().zip(&coeffs) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = basis.synthesize(&c);
        for (a, b) in back.iter().zip(&u) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn u_norm_examples() {
        let ones = DecaySpec::new(vec![1.0; 3], vec![1.0; 3]).unwrap();
        let c = [3.0f64, 4.0, 12.0];
        assert!((u_norm(&ones, &c) - 13.0).abs() < 1e-14);
        let d = DecaySpec::new(vec![1.0], vec![2.0]).unwrap();
        assert_eq!(u_norm(&d, &[1.0]), 0.5);
        let d = DecaySpec::new(vec![1.0, 1.0], vec![1.0, 2.0]).unwrap();
        assert!((u_norm(&d, &[1.0f64, 1.0]) - 1.118_033_988_749_895).abs() < 1e-12);
    }

    #[test]
    fn power_law_ratio_is_nonincreasing() {
        let d = DecaySpec::<f64>::power_law(50, 3.0, 2.0).unwrap();
        let ratio: Vec<f64> = d.lambda().iter().zip(d.kappa()).map(|(l, k)| l / k).collect();
        assert!(ratio.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(d.lambda()[1], 0.125);
        assert_eq!(d.kappa()[1], 0.25);
    }

    #[test]
    fn decay_spec_validation() {
        assert!(DecaySpec::new(vec![1.0], vec![0.0]).is_err());
        assert!(DecaySpec::new(vec![-1.0], vec![1.0]).is_err());
        assert!(DecaySpec::new(vec![1.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn zero_lambda_gives_zero_members() {
        let basis = SpectralBasis::<f64>::sine(16, 16).unwrap();
        let decay = DecaySpec::new(vec![0.0; 16], vec![1.0; 16]).unwrap();
        let ens = sample_initial_ensemble(&basis, &decay, 10, &RngStream::new(1, 2)).unwrap();
        assert!(ens.members().iter().all(|u| u.iter().all(|&x| x == 0.0)));
        assert!(ens.weights().iter().all(|&w| w == 0.1));
    }

    #[test]
    fn mismatched_decay_is_rejected() {
        let basis = SpectralBasis::<f64>::sine(16, 16).unwrap();
        let decay = DecaySpec::<f64>::power_law(8, 3.0, 2.0).unwrap();
        assert!(sample_initial_ensemble(&basis, &decay, 4, &RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn unorm_embedding_matches_coefficient_norm() {
        let basis = SpectralBasis::<f64>::sine(32, 32).unwrap();
        let decay = DecaySpec::power_law(32, 3.0, 2.0).unwrap();
        let norm = UNorm::new(basis.clone(), decay.clone()).unwrap();
        let u: Vec<f64> = basis.mesh().iter().map(|x| x.sin() + 0.2 * (3.0 * x).sin()).collect();
        let direct = u_norm(&decay, &basis.analyze(&u));
        assert!((norm.norm(&u) - direct).abs() < 1e-12);
    }
}
