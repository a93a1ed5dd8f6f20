//! Central finite differences against analytic gradients.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::losses::{LossSpec, TvrRegSpec};
use crate::models::{batch_objective, Architecture, DirectHead, ModelKind, ModelParams, Sample, TrainConfig};

/// Outcome of comparing one analytic gradient with finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// `|a - n| / max(|a|, |n|)` in the L2 norm; 0 when both vanish.
    pub relative_error: f64,
    /// Some coordinate's forward and backward one-sided slopes disagree,
    /// meaning a kink lies within `h` of the point.
    pub near_kink: bool,
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = libm::sqrt(analytic.iter().zip(numeric).map(|(a, n)| (a - n) * (a - n)).sum());
    let scale = norm(analytic).max(norm(numeric));
    if scale == 0.0 { 0.0 } else { diff / scale }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Compares `analytic` with the central difference of `f` at `x`, step `h`.
pub fn check<F>(mut f: F, x: &[f64], analytic: &[f64], h: f64) -> Result<GradCheck>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let f0 = f(x)?;
    let mut numeric = Vec::with_capacity(x.len());
    let mut near_kink = false;
    let mut point = x.to_vec();
    let slope_scale = analytic.iter().fold(0.0_f64, |m, g| m.max(g.abs())).max(1e-12);
    for i in 0..x.len() {
        point[i] = x[i] + h;
        let up = f(&point)?;
        point[i] = x[i] - h;
        let down = f(&point)?;
        point[i] = x[i];
        let (fwd, bwd) = ((up - f0) / h, (f0 - down) / h);
        if (fwd - bwd).abs() > 1e-4 * slope_scale {
            near_kink = true;
        }
        numeric.push((up - down) / (2.0 * h));
    }
    Ok(GradCheck { relative_error: relative_error(analytic, &numeric), near_kink })
}

/// Random model, inputs and returns for a full-chain check. Every dimension
/// is drawn from `2..=10`; the batch spans 3 to 8 days.
pub struct ChainInstance {
    pub params: ModelParams,
    pub samples: Vec<Sample>,
}

impl ChainInstance {
    pub fn random(kind: ModelKind, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inputs = rng.random_range(2..=10);
        let outputs = rng.random_range(2..=10);
        let (arch, input_len) = match kind {
            ModelKind::Linear => (Architecture::Linear { inputs, outputs }, inputs),
            ModelKind::Mlp => {
                let hidden = rng.random_range(2..=10);
                (Architecture::Mlp { dims: alloc::vec![inputs, hidden, outputs] }, inputs)
            }
            ModelKind::Lstm => {
                let hidden = rng.random_range(2..=10);
                let steps = rng.random_range(2..=10);
                (Architecture::Lstm { input_width: inputs, hidden, outputs }, inputs * steps)
            }
        };
        let params = ModelParams::init(arch, rng.random())?;
        let days = rng.random_range(3..=8);
        let samples = (0..days)
            .map(|_| Sample {
                input: (0..input_len).map(|_| rng.sample(StandardNormal)).collect(),
                target: (0..outputs).map(|_| 0.05 * rng.sample::<f64, _>(StandardNormal)).collect(),
            })
            .collect();
        Ok(Self { params, samples })
    }

    /// Checks the gradient of `loss` (plus `tvr_reg` if given) over all weights.
    pub fn check(&self, loss: LossSpec, tvr_reg: Option<TvrRegSpec>, h: f64) -> Result<GradCheck> {
        let config = TrainConfig { loss, tvr_reg, ..TrainConfig::default() };
        let range = 0..self.samples.len();
        let (_, grad) = batch_objective(&self.params, &self.samples, range.clone(), &config, &DirectHead)?;
        let objective = |w: &[f64]| {
            let p = ModelParams { weights: w.to_vec(), ..self.params.clone() };
            Ok(batch_objective(&p, &self.samples, range.clone(), &config, &DirectHead)?.0)
        };
        check(objective, &self.params.weights, &grad, h)
    }
}
