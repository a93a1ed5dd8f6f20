//! Fitting models to per-asset feature windows and turning their outputs into
//! a daily positions matrix.
//!
//! In singular mode one model sees every asset's window and emits the whole
//! position vector. In ensemble mode each asset gets its own model with a
//! scalar output, and the outputs are concatenated per day.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::{Days, NaiveDate};

use super::train::{train, Sample, TrainConfig};
use super::{Architecture, ModelKind, ModelParams};
use crate::alphas::PositionsMatrix;
use crate::data::{FeatureWindow, WindowLayout};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ForecastMode {
    #[default]
    Singular,
    Ensemble,
}

/// How an LSTM reads a feature window as a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SequenceLayout {
    /// One step per feature.
    #[default]
    Scalar,
    /// One step per calendar day of the window, carrying that day's mean, min and max.
    DayPooled(WindowLayout),
}

impl SequenceLayout {
    fn step_width(&self) -> usize {
        match self {
            SequenceLayout::Scalar => 1,
            SequenceLayout::DayPooled(_) => 3,
        }
    }

    /// Splits one asset's features into steps of `step_width()` values.
    fn steps(&self, features: &[f64]) -> Result<Vec<f64>> {
        match self {
            SequenceLayout::Scalar => Ok(features.to_vec()),
            SequenceLayout::DayPooled(layout) => {
                if features.len() != layout.feature_len() {
                    return Err(Error::DimensionMismatch { expected: layout.feature_len(), got: features.len() });
                }
                let hourly = crate::data::Frequency::Hourly.per_day();
                let m15 = crate::data::Frequency::M15.per_day();
                let (d, rest) = features.split_at(layout.daily_days);
                let (h, q) = rest.split_at(layout.hourly_days * hourly);
                let mut out = Vec::with_capacity(3 * layout.span_days());
                let day_chunks = d.chunks(1).chain(h.chunks(hourly)).chain(q.chunks(m15));
                for day in day_chunks {
                    let mean = day.iter().sum::<f64>() / day.len() as f64;
                    let lo = day.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = day.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    out.extend([mean, lo, hi]);
                }
                Ok(out)
            }
        }
    }
}

/// Model family and size, independent of the universe it is fitted on.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// MLP hidden layer widths.
    pub hidden_layers: Vec<usize>,
    /// LSTM hidden state size.
    pub hidden_dim: usize,
    pub sequence: SequenceLayout,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { kind: ModelKind::Lstm, hidden_layers: vec![64], hidden_dim: 16, sequence: SequenceLayout::Scalar }
    }
}

impl ModelSpec {
    /// Architecture for a model that reads `assets` windows of `feature_len`
    /// features and emits `outputs` positions.
    pub fn architecture(&self, feature_len: usize, assets: usize, outputs: usize) -> Result<Architecture> {
        let arch = match self.kind {
            ModelKind::Linear => Architecture::Linear { inputs: feature_len * assets, outputs },
            ModelKind::Mlp => {
                let mut dims = vec![feature_len * assets];
                dims.extend(&self.hidden_layers);
                dims.push(outputs);
                Architecture::Mlp { dims }
            }
            ModelKind::Lstm => Architecture::Lstm {
                input_width: self.sequence.step_width() * assets,
                hidden: self.hidden_dim,
                outputs,
            },
        };
        arch.validate()?;
        Ok(arch)
    }
}

/// Feature windows indexed by `(as_of date, asset)` over a fixed universe.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    assets: Vec<String>,
    feature_len: usize,
    cells: BTreeMap<(NaiveDate, usize), (Vec<f64>, f64)>,
}

impl WindowSet {
    pub fn new(assets: Vec<String>, windows: Vec<FeatureWindow>) -> Result<Self> {
        let mut feature_len = None;
        let mut cells = BTreeMap::new();
        for w in windows {
            let a = assets.iter().position(|x| *x == w.asset_id).ok_or(Error::AssetMismatch)?;
            let len = *feature_len.get_or_insert(w.features.len());
            if w.features.len() != len {
                return Err(Error::DimensionMismatch { expected: len, got: w.features.len() });
            }
            cells.insert((w.as_of_date, a), (w.features, w.target));
        }
        let feature_len = feature_len.ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        Ok(Self { assets, feature_len, cells })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    /// Distinct `as_of` dates, ascending.
    pub fn dates(&self) -> Vec<NaiveDate> {
        let mut out: Vec<NaiveDate> = self.cells.keys().map(|k| k.0).collect();
        out.dedup();
        out
    }

    pub fn get(&self, date: NaiveDate, asset: usize) -> Option<(&[f64], f64)> {
        self.cells.get(&(date, asset)).map(|(f, t)| (f.as_slice(), *t))
    }

    /// Windows with `as_of` in `range`.
    pub fn restrict(&self, range: impl core::ops::RangeBounds<NaiveDate>) -> Self {
        let cells = self.cells.iter().filter(|(k, _)| range.contains(&k.0)).map(|(k, v)| (*k, v.clone())).collect();
        Self { assets: self.assets.clone(), feature_len: self.feature_len, cells }
    }

    fn complete_row(&self, date: NaiveDate) -> Option<Vec<(&[f64], f64)>> {
        (0..self.assets.len()).map(|a| self.get(date, a)).collect()
    }
}

/// Step-major model input for several assets: step `t` of asset `a` lands at
/// `x[(t * assets + a) * k .. + k]` with `k` values per step.
pub(crate) fn model_input(features: &[&[f64]], sequence: &SequenceLayout) -> Result<Vec<f64>> {
    let k = sequence.step_width();
    let steps: Vec<Vec<f64>> = features.iter().map(|f| sequence.steps(f)).collect::<Result<_>>()?;
    let n_steps = steps.first().map_or(0, |s| s.len() / k);
    let mut x = Vec::with_capacity(n_steps * k * steps.len());
    for t in 0..n_steps {
        for s in &steps {
            x.extend_from_slice(&s[t * k..(t + 1) * k]);
        }
    }
    Ok(x)
}

/// A fitted singular model or per-asset ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecaster {
    pub mode: ForecastMode,
    pub sequence: SequenceLayout,
    /// One model in singular mode, one per asset (universe order) in ensemble mode.
    pub models: Vec<ModelParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub forecaster: Forecaster,
    /// Per-epoch loss of every trained model.
    pub loss_traces: Vec<Vec<f64>>,
}

/// Training samples for the singular model: dates on which every asset has a window.
fn singular_samples(windows: &WindowSet, sequence: &SequenceLayout) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for date in windows.dates() {
        if let Some(row) = windows.complete_row(date) {
            let feats: Vec<&[f64]> = row.iter().map(|c| c.0).collect();
            out.push(Sample { input: model_input(&feats, sequence)?, target: row.iter().map(|c| c.1).collect() });
        }
    }
    Ok(out)
}

fn asset_samples(windows: &WindowSet, asset: usize, sequence: &SequenceLayout) -> Result<Vec<Sample>> {
    windows
        .dates()
        .into_iter()
        .filter_map(|d| windows.get(d, asset))
        .map(|(f, t)| Ok(Sample { input: model_input(&[f], sequence)?, target: vec![t] }))
        .collect()
}

/// Initializes and trains the model(s) for `config.mode`. Ensemble member `a`
/// is seeded with `config.seed + a`.
pub fn fit(windows: &WindowSet, spec: &ModelSpec, config: &TrainConfig) -> Result<FitReport> {
    let m = windows.assets().len();
    let f = windows.feature_len();
    let mut models = Vec::new();
    let mut loss_traces = Vec::new();
    match config.mode {
        ForecastMode::Singular => {
            let arch = spec.architecture(f, m, m)?;
            let samples = singular_samples(windows, &spec.sequence)?;
            let report = train(ModelParams::init(arch, config.seed)?, &samples, config)?;
            models.push(report.params);
            loss_traces.push(report.loss_trace);
        }
        ForecastMode::Ensemble => {
            for a in 0..m {
                let arch = spec.architecture(f, 1, 1)?;
                let seed = config.seed.wrapping_add(a as u64);
                let samples = asset_samples(windows, a, &spec.sequence)?;
                let report = train(ModelParams::init(arch, seed)?, &samples, config)?;
                models.push(report.params);
                loss_traces.push(report.loss_trace);
            }
        }
    }
    Ok(FitReport { forecaster: Forecaster { mode: config.mode, sequence: spec.sequence, models }, loss_traces })
}

/// Positions for every `as_of` date in `windows`. The row for `as_of` is dated
/// one day earlier: the window closes then, and the position earns `r(as_of)`
/// under a one-day lag.
pub fn predict_positions(forecaster: &Forecaster, windows: &WindowSet) -> Result<PositionsMatrix> {
    let m = windows.assets().len();
    let expected = match forecaster.mode {
        ForecastMode::Singular => 1,
        ForecastMode::Ensemble => m,
    };
    if forecaster.models.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: forecaster.models.len() });
    }
    let as_of = windows.dates();
    let mut values = Vec::with_capacity(as_of.len() * m);
    for &date in &as_of {
        let mut row = Vec::with_capacity(m);
        for a in 0..m {
            let (f, _) = windows
                .get(date, a)
                .ok_or_else(|| Error::MissingWindow { date, asset: windows.assets()[a].clone() })?;
            row.push(f);
        }
        match forecaster.mode {
            ForecastMode::Singular => {
                let out = forecaster.models[0].forward(&model_input(&row, &forecaster.sequence)?)?;
                if out.len() != m {
                    return Err(Error::DimensionMismatch { expected: m, got: out.len() });
                }
                values.extend(out);
            }
            ForecastMode::Ensemble => {
                for (model, f) in forecaster.models.iter().zip(&row) {
                    values.push(model.forward(&model_input(&[f], &forecaster.sequence)?)?[0]);
                }
            }
        }
    }
    let dates = as_of.iter().map(|d| *d - Days::new(1)).collect();
    PositionsMatrix::new(dates, windows.assets().to_vec(), values)
}
