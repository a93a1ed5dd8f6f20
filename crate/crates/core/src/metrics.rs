//! Evaluation metrics over realized daily pnl: Sharpe, total pnl, maximum drawdown, turnover.

use alloc::vec::Vec;
use core::ops::RangeInclusive;

use chrono::NaiveDate;

use crate::alphas::PositionsMatrix;
use crate::backtest;
use crate::data::ReturnsPanel;
use crate::error::{Error, Result};
use crate::stats::{mean, std_pop};

/// Daily portfolio pnl, one value per date.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PnlSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl PnlSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::LengthMismatch { left: dates.len(), right: values.len() });
        }
        Ok(Self { dates, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `sqrt(N) * mean / std` with population std and `N` the series length.
pub fn sharpe_ratio(pnl: &[f64]) -> Result<f64> {
    sharpe_with_scale(pnl, pnl.len() as f64)
}

/// Sharpe scaled by `sqrt(periods)` instead of the series length.
pub fn annualized_sharpe(pnl: &[f64], periods: f64) -> Result<f64> {
    sharpe_with_scale(pnl, periods)
}

fn sharpe_with_scale(pnl: &[f64], periods: f64) -> Result<f64> {
    if pnl.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: pnl.len() });
    }
    let m = mean(pnl);
    let s = std_pop(pnl, m);
    // relative threshold: a constant series can leave rounding residue in std
    if s <= 1e-14 * m.abs() || s == 0.0 {
        return Err(Error::ZeroVolatility);
    }
    Ok(libm::sqrt(periods) * m / s)
}

pub fn total_pnl(pnl: &[f64]) -> f64 {
    pnl.iter().sum()
}

/// Which running maximum drawdown is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DrawdownMode {
    /// Cumulative pnl against its running maximum, starting from a zero equity level.
    #[default]
    Cumulative,
    /// `min(cumsum(pnl) - cummax(pnl))` with the running maximum of the raw daily pnl.
    Literal,
}

/// Largest decline of cumulative pnl from its running peak, reported as a value `<= 0`.
///
/// The equity curve starts at 0 before the first day, so a loss on day one
/// counts as drawdown.
pub fn max_drawdown(pnl: &[f64]) -> f64 {
    let mut cum = 0.0;
    let mut peak = 0.0_f64;
    let mut worst = 0.0_f64;
    for &p in pnl {
        cum += p;
        peak = peak.max(cum);
        worst = worst.min(cum - peak);
    }
    worst
}

/// Drawdown under the chosen running-maximum reading.
pub fn drawdown(pnl: &[f64], mode: DrawdownMode) -> f64 {
    match mode {
        DrawdownMode::Cumulative => max_drawdown(pnl),
        DrawdownMode::Literal => {
            let mut cum = 0.0;
            let mut peak = f64::NEG_INFINITY;
            let mut worst = f64::INFINITY;
            for &p in pnl {
                cum += p;
                peak = peak.max(p);
                worst = worst.min(cum - peak);
            }
            if worst.is_finite() { worst } else { 0.0 }
        }
    }
}

/// Daily L1 distance between consecutive position rows.
pub fn turnover(positions: &PositionsMatrix) -> Result<Vec<f64>> {
    if positions.n_dates() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: positions.n_dates() });
    }
    Ok(turnover_rows(positions.values(), positions.n_assets()))
}

pub(crate) fn turnover_rows(values: &[f64], width: usize) -> Vec<f64> {
    if width == 0 {
        return Vec::new();
    }
    values
        .chunks_exact(width)
        .collect::<Vec<_>>()
        .windows(2)
        .map(|w| w[0].iter().zip(w[1]).map(|(a, b)| (b - a).abs()).sum())
        .collect()
}

/// One strategy's metrics on one interval.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    /// `None` when the pnl has zero volatility or fewer than two days.
    pub sharpe: Option<f64>,
    pub profit_pct: f64,
    pub max_drawdown: f64,
    pub mean_daily_turnover: f64,
    pub n_days: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct MetricsConfig {
    /// Scale Sharpe by `sqrt(annualization)` instead of `sqrt(N)`.
    pub annualization: Option<f64>,
    pub drawdown: DrawdownMode,
}

/// Aggregates pnl and the position rows that produced it.
///
/// `position_rows` is row-major with `width` columns; turnover is averaged
/// over consecutive pairs and is 0 when fewer than two rows are given.
pub fn summarize(pnl: &[f64], position_rows: &[f64], width: usize, config: &MetricsConfig) -> MetricsReport {
    let sharpe = match config.annualization {
        Some(periods) => annualized_sharpe(pnl, periods),
        None => sharpe_ratio(pnl),
    }
    .ok();
    let tvr = turnover_rows(position_rows, width);
    MetricsReport {
        sharpe,
        profit_pct: total_pnl(pnl) * 100.0,
        max_drawdown: drawdown(pnl, config.drawdown),
        mean_daily_turnover: if tvr.is_empty() { 0.0 } else { mean(&tvr) },
        n_days: pnl.len(),
    }
}

/// Metrics of `positions` traded against `panel` with the given execution lag,
/// restricted to pnl dates inside `interval`.
pub fn evaluate(
    positions: &PositionsMatrix,
    panel: &ReturnsPanel,
    interval: RangeInclusive<NaiveDate>,
    lag: usize,
    config: &MetricsConfig,
) -> Result<MetricsReport> {
    let aligned = backtest::align(positions, panel)?;
    let pnl = backtest::daily_pnl(&aligned, panel, lag);
    let idx: Vec<usize> = (lag..panel.n_dates()).filter(|&i| interval.contains(&panel.dates()[i])).collect();
    let values: Vec<f64> = idx.iter().map(|&i| pnl[i - lag]).collect();
    let m = panel.n_assets();
    let rows: Vec<f64> = idx.iter().flat_map(|&i| aligned.row(i - lag).iter().copied()).collect();
    Ok(summarize(&values, &rows, m, config))
}
