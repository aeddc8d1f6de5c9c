use serde::{Deserialize, Serialize};

use crate::ensemble::WeightedEnsemble;
use crate::error::{Error, Result};

/// One bin of a marginal histogram at a fixed grid coordinate `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalRow {
    pub x: f64,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub mass: f64,
}

/// Weighted histogram of member values at state index `x_index`, normalized
/// to unit mass. Values outside `range` are dropped before normalizing; if
/// nothing lands inside, every bin is zero.
pub fn marginal_histogram(
    ens: &WeightedEnsemble<f64>,
    x_index: usize,
    bins: usize,
    range: (f64, f64),
) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if x_index >= ens.dim() {
        return Err(Error::DimensionMismatch { expected: ens.dim(), found: x_index });
    }
    let values = ens.component(x_index);
    Ok(weighted_histogram(&values, ens.weights(), bins, range))
}

/// Histogram with half-open bins `[lo, hi)`; the last bin also takes `hi`.
pub fn weighted_histogram(values: &[f64], weights: &[f64], bins: usize, (lo, hi): (f64, f64)) -> Vec<f64> {
    let width = (hi - lo) / bins as f64;
    let mut mass = vec![0.0; bins];
    for (&v, &w) in values.iter().zip(weights) {
        if !(v >= lo && v <= hi) {
            continue;
        }
        let b = (((v - lo) / width).floor() as usize).min(bins - 1);
        mass[b] += w;
    }
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        mass.iter_mut().for_each(|m| *m /= total);
    }
    mass
}

pub fn bin_edges(bins: usize, (lo, hi): (f64, f64)) -> Vec<(f64, f64)> {
    let width = (hi - lo) / bins as f64;
    (0..bins).map(|b| (lo + b as f64 * width, if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width })).collect()
}

pub fn histogram_rows(x: f64, mass: &[f64], range: (f64, f64)) -> Vec<MarginalRow> {
    bin_edges(mass.len(), range)
        .into_iter()
        .zip(mass)
        .map(|((bin_lo, bin_hi), &mass)| MarginalRow { x, bin_lo, bin_hi, mass })
        .collect()
}

pub fn compute_rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sq / a.len() as f64).sqrt())
}

/// Centered moving average with zero padding outside the table.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + window - half).min(values.len());
            values[lo..hi].iter().sum::<f64>() / window as f64
        })
        .collect()
}

/// Number of strict local maxima, treating a plateau as a single point and
/// the outside of the table as zero.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let mut runs: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        if runs.last() != Some(&v) {
            runs.push(v);
        }
    }
    (0..runs.len())
        .filter(|&i| {
            let left = if i == 0 { 0.0 } else { runs[i - 1] };
            let right = runs.get(i + 1).copied().unwrap_or(0.0);
            runs[i] > left && runs[i] > right
        })
        .count()
}

pub fn count_modes(mass: &[f64], window: usize) -> usize {
    count_local_maxima(&moving_average(mass, window))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
