//! Nearest-neighbour bandwidths and the count-based density ratio.
//!
//! Distances are evaluated brute force between embedded members; every
//! comparison against a bandwidth reuses the exact same distance routine so
//! that closed-ball membership is decided without rounding drift.

use rayon::prelude::*;

use crate::ensemble::WeightedEnsemble;
use crate::linalg::squared_distance;
use crate::scalar::Real;
use crate::spectral::StateNorm;

use super::{AnalysisConfig, NumeratorWeightIndex};
use crate::error::Result;

/// `floor(sqrt(N))`.
pub fn default_bandwidth_rank(n: usize) -> usize {
    let mut r = (n as f64).sqrt().floor() as usize;
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    while r * r > n {
        r -= 1;
    }
    r
}

#[inline]
pub(crate) fn distance<T: Real>(a: &[T], b: &[T]) -> T {
    squared_distance(a, b).sqrt()
}

pub(crate) fn embed_all<T: Real>(ens: &WeightedEnsemble<T>, norm: &dyn StateNorm<T>) -> Vec<Vec<T>> {
    ens.members().par_iter().map(|u| norm.embed(u)).collect()
}

/// `rank`-th smallest distance from point `k` to the others.
pub(crate) fn bandwidth_embedded<T: Real>(k: usize, points: &[Vec<T>], rank: usize, include_self: bool) -> T {
    let mut d: Vec<T> = points
        .iter()
        .enumerate()
        .filter(|&(l, _)| include_self || l != k)
        .map(|(_, p)| distance(&points[k], p))
        .collect();
    assert!(rank >= 1 && rank <= d.len(), "bandwidth rank {rank} out of range");
    let (_, nth, _) = d.select_nth_unstable_by(rank - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
    *nth
}

/// Numerator and denominator of the density ratio around `center`.
pub(crate) fn ratio_embedded<T: Real>(
    k: usize,
    center: &[T],
    forecast_points: &[Vec<T>],
    forecast_weights: &[T],
    analysis_points: &[Vec<T>],
    h: T,
    index: NumeratorWeightIndex,
) -> T {
    let n = analysis_points.len();
    let mut numerator = T::zero();
    for (l, f) in forecast_points.iter().enumerate() {
        if distance(f, center) <= h {
            numerator = numerator
                + match index {
                    NumeratorWeightIndex::Neighbor => forecast_weights[l],
                    NumeratorWeightIndex::Literal => forecast_weights[k],
                };
        }
    }
    let inside = analysis_points.iter().filter(|a| distance(a, center) <= h).count();
    let denominator = T::of_usize(inside) / T::of_usize(n);
    numerator / denominator
}

/// Bandwidth `h_k` of analysis member `k`: the distance to its
/// `rank`-th nearest analysis member in the configured norm.
pub fn knn_bandwidth<T: Real>(k: usize, analysis: &WeightedEnsemble<T>, cfg: &AnalysisConfig<'_, T>) -> Result<T> {
    let rank = cfg.rank_for(analysis.len())?;
    let points = embed_all(analysis, cfg.norm);
    Ok(bandwidth_embedded(k, &points, rank, cfg.knn_include_self))
}

/// Forecast weight inside the closed ball of radius `h` around analysis
/// member `k`, divided by the fraction of analysis members inside it.
/// The denominator is at least `1/N` because the centre belongs to its own ball.
pub fn density_ratio_estimate<T: Real>(
    k: usize,
    forecast: &WeightedEnsemble<T>,
    analysis: &WeightedEnsemble<T>,
    h: T,
    norm: &dyn StateNorm<T>,
    index: NumeratorWeightIndex,
) -> T {
    let fp = embed_all(forecast, norm);
    let ap = embed_all(analysis, norm);
    ratio_embedded(k, &ap[k], &fp, forecast.weights(), &ap, h, index)
}
