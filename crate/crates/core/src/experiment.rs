//! Train-then-backtest over a daily returns panel.

use alloc::vec::Vec;

use crate::alphas::PositionsMatrix;
use crate::backtest::{run, BacktestConfig, BacktestResult};
use crate::data::{panel_windows, ReturnsPanel, Scaling};
use crate::error::{Error, Result};
use crate::models::{fit, predict_positions, ModelSpec, TrainConfig, WindowSet};

/// Daily-window model experiment: train on the first `train_days` panel
/// dates, predict every date with a full lookback, backtest with the test
/// interval starting at panel date `train_days`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelExperiment {
    pub lookback: usize,
    pub scaling: Scaling,
    pub train_days: usize,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub backtest: BacktestConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub positions: PositionsMatrix,
    pub result: BacktestResult,
    pub loss_traces: Vec<Vec<f64>>,
}

impl PanelExperiment {
    pub fn run(&self, panel: &ReturnsPanel) -> Result<ExperimentOutcome> {
        if self.train_days <= self.lookback + 1 || self.train_days >= panel.n_dates() {
            return Err(Error::InvalidConfig("train_days must leave room for a lookback and a test interval".into()));
        }
        let windows = WindowSet::new(panel.assets().to_vec(), panel_windows(panel, self.lookback, self.scaling)?)?;
        let split = panel.dates()[self.train_days];
        // the window for `as_of` earns r(as_of); training stops before the test interval
        let fitted = fit(&windows.restrict(..split), &self.model, &self.train)?;
        let positions = predict_positions(&fitted.forecaster, &windows)?;
        let config = BacktestConfig { test_start: split, ..self.backtest.clone() };
        let result = run(&positions, panel, &config)?;
        Ok(ExperimentOutcome { positions, result, loss_traces: fitted.loss_traces })
    }
}
