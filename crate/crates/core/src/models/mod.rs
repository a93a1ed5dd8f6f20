//! Trainable position generators: linear regression, MLP and a single-layer LSTM
//! with a linear head, each with a hand-written reverse pass.

mod lstm;
mod mlp;
mod optim;
mod train;
pub(crate) mod windows;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use optim::{Optimizer, OptimizerState};
pub use train::{batch_objective, train, train_with_head, DirectHead, PositionHead, Sample, TrainConfig, TrainReport};
pub use windows::{fit, predict_positions, FitReport, ForecastMode, Forecaster, ModelSpec, SequenceLayout, WindowSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    Linear,
    Mlp,
    Lstm,
}

impl ModelKind {
    pub fn code(self) -> u8 {
        match self {
            ModelKind::Linear => 0,
            ModelKind::Mlp => 1,
            ModelKind::Lstm => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        [ModelKind::Linear, ModelKind::Mlp, ModelKind::Lstm].into_iter().find(|k| k.code() == code)
    }
}

/// Network shape. Weight layout is fixed by the shape:
///
/// * affine layers store `W` row-major (`outputs × inputs`) followed by `b`;
/// * the MLP stores its affine layers in order, tanh between them;
/// * the LSTM stores input weights `4H × W`, recurrent weights `4H × H`,
///   gate biases `4H` (gate order input, forget, cell, output), then the
///   linear head as an affine layer `H → outputs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Architecture {
    Linear { inputs: usize, outputs: usize },
    Mlp { dims: Vec<usize> },
    Lstm { input_width: usize, hidden: usize, outputs: usize },
}

impl Architecture {
    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::Linear { .. } => ModelKind::Linear,
            Architecture::Mlp { .. } => ModelKind::Mlp,
            Architecture::Lstm { .. } => ModelKind::Lstm,
        }
    }

    /// Shape as a flat list: `[in, out]`, the MLP dims, or `[width, hidden, out]`.
    pub fn dims(&self) -> Vec<usize> {
        match self {
            Architecture::Linear { inputs, outputs } => vec![*inputs, *outputs],
            Architecture::Mlp { dims } => dims.clone(),
            Architecture::Lstm { input_width, hidden, outputs } => vec![*input_width, *hidden, *outputs],
        }
    }

    pub fn from_dims(kind: ModelKind, dims: &[usize]) -> Result<Self> {
        let arch = match (kind, dims) {
            (ModelKind::Linear, &[inputs, outputs]) => Architecture::Linear { inputs, outputs },
            (ModelKind::Mlp, d) => Architecture::Mlp { dims: d.to_vec() },
            (ModelKind::Lstm, &[input_width, hidden, outputs]) => Architecture::Lstm { input_width, hidden, outputs },
            _ => return Err(Error::InvalidConfig("dims do not match model kind".into())),
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Architecture::Linear { inputs, outputs } => *inputs > 0 && *outputs > 0,
            Architecture::Mlp { dims } => dims.len() >= 2 && dims.iter().all(|&d| d > 0),
            Architecture::Lstm { input_width, hidden, outputs } => *input_width > 0 && *hidden > 0 && *outputs > 0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("model dimensions must be positive".into()))
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            Architecture::Linear { outputs, .. } | Architecture::Lstm { outputs, .. } => *outputs,
            Architecture::Mlp { dims } => *dims.last().unwrap_or(&0),
        }
    }

    /// `(fan_in, parameter count)` of every initialization block, in layout order.
    fn blocks(&self) -> Vec<(usize, usize)> {
        match self {
            Architecture::Linear { inputs, outputs } => vec![(*inputs, inputs * outputs), (*inputs, *outputs)],
            Architecture::Mlp { dims } => dims
                .windows(2)
                .flat_map(|w| [(w[0], w[0] * w[1]), (w[0], w[1])])
                .collect(),
            Architecture::Lstm { input_width, hidden, outputs } => vec![
                (*hidden, 4 * hidden * input_width),
                (*hidden, 4 * hidden * hidden),
                (*hidden, 4 * hidden),
                (*hidden, hidden * outputs),
                (*hidden, *outputs),
            ],
        }
    }

    pub fn weight_count(&self) -> usize {
        self.blocks().iter().map(|b| b.1).sum()
    }
}

/// Architecture plus its flat weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub weights: Vec<f64>,
    pub seed: u64,
}

impl ModelParams {
    /// Uniform initialization in `[-s, s]` with `s = 1/sqrt(fan_in)` per block.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(arch.weight_count());
        for (fan_in, count) in arch.blocks() {
            let s = 1.0 / libm::sqrt(fan_in as f64);
            weights.extend((0..count).map(|_| rng.random_range(-s..=s)));
        }
        Ok(Self { arch, weights, seed })
    }

    pub fn from_weights(arch: Architecture, weights: Vec<f64>, seed: u64) -> Result<Self> {
        arch.validate()?;
        if weights.len() != arch.weight_count() {
            return Err(Error::DimensionMismatch { expected: arch.weight_count(), got: weights.len() });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("weights must be finite".into()));
        }
        Ok(Self { arch, weights, seed })
    }

    pub fn kind(&self) -> ModelKind {
        self.arch.kind()
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.output().to_vec())
    }

    /// Gradient of `grad_output · forward(input)` with respect to the weights.
    pub fn backward(&self, input: &[f64], grad_output: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_trace(input)?;
        let mut grad = vec![0.0; self.weights.len()];
        self.backward_trace(&trace, grad_output, &mut grad)?;
        Ok(grad)
    }

    pub(crate) fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        match &self.arch {
            Architecture::Linear { inputs, outputs } => {
                mlp::forward(&self.weights, &[*inputs, *outputs], input).map(Trace::Mlp)
            }
            Architecture::Mlp { dims } => mlp::forward(&self.weights, dims, input).map(Trace::Mlp),
            Architecture::Lstm { input_width, hidden, outputs } => {
                lstm::forward(&self.weights, *input_width, *hidden, *outputs, input).map(Trace::Lstm)
            }
        }
    }

    /// Accumulates into `grad`.
    pub(crate) fn backward_trace(&self, trace: &Trace, grad_output: &[f64], grad: &mut [f64]) -> Result<()> {
        if grad_output.len() != self.arch.outputs() {
            return Err(Error::DimensionMismatch { expected: self.arch.outputs(), got: grad_output.len() });
        }
        match (&self.arch, trace) {
            (Architecture::Linear { inputs, outputs }, Trace::Mlp(t)) => {
                mlp::backward(&self.weights, &[*inputs, *outputs], t, grad_output, grad)
            }
            (Architecture::Mlp { dims }, Trace::Mlp(t)) => mlp::backward(&self.weights, dims, t, grad_output, grad),
            (Architecture::Lstm { input_width, hidden, outputs }, Trace::Lstm(t)) => {
                lstm::backward(&self.weights, *input_width, *hidden, *outputs, t, grad_output, grad)
            }
            _ => unreachable!("trace produced by a different architecture"),
        }
        Ok(())
    }
}

pub(crate) enum Trace {
    Mlp(mlp::MlpTrace),
    Lstm(lstm::LstmTrace),
}

impl Trace {
    pub(crate) fn output(&self) -> &[f64] {
        match self {
            Trace::Mlp(t) => t.output(),
            Trace::Lstm(t) => &t.output,
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
