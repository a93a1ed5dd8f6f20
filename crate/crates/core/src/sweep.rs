//! Loss values under rescaled positions.
//!
//! A scale-invariant objective returns the same value for `c * positions` at
//! every `c > 0`; one that mixes in a magnitude term drifts with `ln c`.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::losses::LossSpec;

/// `n` points from `lo` to `hi` evenly spaced in log scale.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo) || n < 2 {
        return Err(Error::InvalidConfig("log grid needs 0 < lo < hi and n >= 2".into()));
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    Ok((0..n).map(|i| libm::exp(a + (b - a) * i as f64 / (n - 1) as f64)).collect())
}

/// Seeded Gaussian positions and returns of length `n`, with standard
/// deviations `position_scale` and `return_scale`.
pub fn gaussian_pair(n: usize, position_scale: f64, return_scale: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positions = (0..n).map(|_| position_scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let returns = (0..n).map(|_| return_scale * rng.sample::<f64, _>(StandardNormal)).collect();
    (positions, returns)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepPoint {
    pub scale: f64,
    pub value: f64,
}

/// Loss of `scale * positions` against `returns` for every scale.
pub fn loss_sweep(spec: &LossSpec, positions: &[f64], returns: &[f64], scales: &[f64]) -> Result<Vec<SweepPoint>> {
    scales
        .iter()
        .map(|&c| {
            let scaled: Vec<f64> = positions.iter().map(|p| c * p).collect();
            Ok(SweepPoint { scale: c, value: spec.eval(&scaled, returns)?.value })
        })
        .collect()
}

/// Ordinary least squares `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when `y` is constant and fitted exactly.
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: xs.len() });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("constant regressor"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}
