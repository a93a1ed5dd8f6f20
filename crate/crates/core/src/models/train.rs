//! Mini-batch gradient descent of a model against a position loss.
//!
//! A batch is a run of consecutive samples (days). The model maps each
//! sample's input to raw outputs, a [`PositionHead`] turns outputs into
//! positions, and the loss sees the batch as a `days × width` matrix whose
//! daily pnl is the row dot product with the targets.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::optim::{Optimizer, OptimizerState};
use super::windows::ForecastMode;
use super::{ModelParams, Trace};
use crate::error::{Error, Result};
use crate::losses::{combine, tvr_reg, LossSpec, TvrRegSpec};

/// One day of training data: model input and the returns the positions will earn.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Linear map from model outputs to positions, with its transpose.
pub trait PositionHead {
    fn positions(&self, sample: usize, output: &[f64]) -> Vec<f64>;
    fn pullback(&self, sample: usize, output: &[f64], grad_positions: &[f64]) -> Vec<f64>;
}

/// Outputs are the positions.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectHead;

impl PositionHead for DirectHead {
    fn positions(&self, _: usize, output: &[f64]) -> Vec<f64> {
        output.to_vec()
    }

    fn pullback(&self, _: usize, _: &[f64], grad_positions: &[f64]) -> Vec<f64> {
        grad_positions.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Days per loss batch.
    pub batch_window: usize,
    pub optimizer: Optimizer,
    pub loss: LossSpec,
    pub tvr_reg: Option<TvrRegSpec>,
    pub mode: ForecastMode,
    pub seed: u64,
    /// Visit batches in a seeded random order each epoch.
    pub shuffle: bool,
    /// Rescale the weight gradient to at most this L2 norm.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 50,
            batch_window: 20,
            optimizer: Optimizer::default(),
            loss: LossSpec::default(),
            tvr_reg: None,
            mode: ForecastMode::Singular,
            seed: 0,
            shuffle: true,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_window < 2 {
            return Err(Error::InvalidConfig("batch_window must be at least 2".into()));
        }
        self.loss.validate()?;
        if let Some(t) = &self.tvr_reg {
            t.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub params: ModelParams,
    /// Mean batch loss per epoch.
    pub loss_trace: Vec<f64>,
}

pub fn train(params: ModelParams, samples: &[Sample], config: &TrainConfig) -> Result<TrainReport> {
    train_with_head(params, samples, config, &DirectHead)
}

/// Batch boundaries: consecutive runs of `window` samples; a trailing run
/// shorter than two samples is dropped.
pub(crate) fn batches(n: usize, window: usize) -> Vec<core::ops::Range<usize>> {
    (0..n)
        .step_by(window)
        .map(|s| s..(s + window).min(n))
        .filter(|r| r.len() >= 2)
        .collect()
}

pub fn train_with_head<H: PositionHead + ?Sized>(
    mut params: ModelParams,
    samples: &[Sample],
    config: &TrainConfig,
    head: &H,
) -> Result<TrainReport> {
    config.validate()?;
    if samples.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: samples.len() });
    }
    let mut order = batches(samples.len(), config.batch_window);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = OptimizerState::new(config.optimizer, params.weights.len());
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for range in &order {
            let (value, mut grad) = batch_objective(&params, samples, range.clone(), config, head)?;
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::DivergenceDetected { epoch });
            }
            if let Some(max) = config.clip_norm {
                let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
                if norm > max {
                    grad.iter_mut().for_each(|g| *g *= max / norm);
                }
            }
            state.step(&mut params.weights, &grad, config.learning_rate);
            total += value;
        }
        let mean = total / order.len() as f64;
        if !mean.is_finite() || params.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::DivergenceDetected { epoch });
        }
        loss_trace.push(mean);
    }
    Ok(TrainReport { params, loss_trace })
}

/// Loss of one batch (plus the turnover penalty when configured) and its
/// gradient with respect to the model weights.
pub fn batch_objective<H: PositionHead + ?Sized>(
    params: &ModelParams,
    samples: &[Sample],
    range: core::ops::Range<usize>,
    config: &TrainConfig,
    head: &H,
) -> Result<(f64, Vec<f64>)> {
    let batch = &samples[range.clone()];
    let traces: Vec<Trace> = batch.iter().map(|s| params.forward_trace(&s.input)).collect::<Result<_>>()?;
    let mut positions = Vec::new();
    let mut targets = Vec::new();
    let mut width = None;
    for (k, (s, t)) in batch.iter().zip(&traces).enumerate() {
        let p = head.positions(range.start + k, t.output());
        if p.len() != s.target.len() || width.is_some_and(|w| w != p.len()) {
            return Err(Error::DimensionMismatch { expected: s.target.len(), got: p.len() });
        }
        width = Some(p.len());
        positions.extend(p);
        targets.extend_from_slice(&s.target);
    }
    let width = width.unwrap_or(1);
    let mut eval = config.loss.eval_grouped(&positions, &targets, width)?;
    if let Some(spec) = &config.tvr_reg {
        eval = combine(&eval, &tvr_reg(&positions, width, spec)?)?;
    }
    let mut grad = vec![0.0; params.weights.len()];
    for (k, t) in traces.iter().enumerate() {
        let gp = &eval.grad[k * width..(k + 1) * width];
        if gp.iter().all(|&g| g == 0.0) {
            continue;
        }
        let go = head.pullback(range.start + k, t.output(), gp);
        params.backward_trace(t, &go, &mut grad)?;
    }
    Ok((eval.value, grad))
}
