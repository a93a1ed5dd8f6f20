//! Heuristic strategies and the position post-processing every strategy shares.
//!
//! Rows of a [`PositionsMatrix`] are indexed by decision date: the row dated
//! `d` is built from information available at the close of `d` and earns the
//! returns of the following day in the backtester. Under that convention
//! "reversion at d = -r(d-1)" (position held during day `d`) is the row dated
//! `d - 1`, equal to minus that day's return.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::data::ReturnsPanel;
use crate::error::{Error, Result};

/// Date × asset matrix of portfolio weights, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionsMatrix {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    values: Vec<f64>,
}

impl PositionsMatrix {
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != dates.len() * assets.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len() * assets.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("positions must be finite".into()));
        }
        Ok(Self { dates, assets, values })
    }

    pub fn zeros(dates: Vec<NaiveDate>, assets: Vec<String>) -> Self {
        let values = vec![0.0; dates.len() * assets.len()];
        Self { dates, assets, values }
    }

    /// Zero matrix shaped like the panel.
    pub fn zeros_like(panel: &ReturnsPanel) -> Self {
        Self::zeros(panel.dates().to_vec(), panel.assets().to_vec())
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn row(&self, d: usize) -> &[f64] {
        let m = self.assets.len();
        &self.values[d * m..(d + 1) * m]
    }

    pub fn row_mut(&mut self, d: usize) -> &mut [f64] {
        let m = self.assets.len();
        &mut self.values[d * m..(d + 1) * m]
    }

    pub fn get(&self, d: usize, a: usize) -> f64 {
        self.values[d * self.assets.len() + a]
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Indices of rows that are entirely zero.
    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.n_dates()).filter(|&d| self.row(d).iter().all(|&v| v == 0.0)).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    /// Rows `range` as a new matrix.
    pub fn slice(&self, range: core::ops::Range<usize>) -> Self {
        let m = self.assets.len();
        Self {
            dates: self.dates[range.clone()].to_vec(),
            assets: self.assets.clone(),
            values: self.values[range.start * m..range.end * m].to_vec(),
        }
    }
}

/// Which heuristic a named alpha runs.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AlphaKind {
    Reversion,
    Momentum,
    MeanReversion,
    BuyHold,
    /// Positions generated by a trained model checkpoint.
    Model(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlphaDef {
    pub name: String,
    pub kind: AlphaKind,
    pub window: usize,
}

impl AlphaDef {
    /// Positions for the heuristic kinds. Model alphas are produced by the models module.
    pub fn positions(&self, panel: &ReturnsPanel) -> Result<PositionsMatrix> {
        match &self.kind {
            AlphaKind::Reversion => Ok(reversion(panel)),
            AlphaKind::Momentum => momentum(panel, self.window),
            AlphaKind::MeanReversion => mean_reversion(panel, self.window),
            AlphaKind::BuyHold => Ok(buy_and_hold(panel)),
            AlphaKind::Model(_) => Err(Error::InvalidConfig("model alphas need a checkpoint".into())),
        }
    }
}

/// Short yesterday's winners: the row dated `d` is `-r(d)`.
pub fn reversion(panel: &ReturnsPanel) -> PositionsMatrix {
    let mut out = PositionsMatrix::zeros_like(panel);
    out.values.iter_mut().zip(panel.values()).for_each(|(p, r)| *p = -r);
    out
}

/// Trailing simple moving average of returns over `w` days ending at the row date.
/// The first `w - 1` rows lack history and stay zero.
pub fn momentum(panel: &ReturnsPanel, w: usize) -> Result<PositionsMatrix> {
    if w == 0 {
        return Err(Error::InvalidConfig("moving-average window must be at least 1".into()));
    }
    let m = panel.n_assets();
    let mut out = PositionsMatrix::zeros_like(panel);
    for d in w.saturating_sub(1)..panel.n_dates() {
        for a in 0..m {
            let s: f64 = (d + 1 - w..=d).map(|k| panel.get(k, a)).sum();
            out.values[d * m + a] = s / w as f64;
        }
    }
    Ok(out)
}

pub fn mean_reversion(panel: &ReturnsPanel, w: usize) -> Result<PositionsMatrix> {
    Ok(momentum(panel, w)?.map_values(|v| -v))
}

/// Constant equal weights `1/M`.
pub fn buy_and_hold(panel: &ReturnsPanel) -> PositionsMatrix {
    let mut out = PositionsMatrix::zeros_like(panel);
    let w = 1.0 / panel.n_assets().max(1) as f64;
    out.values.iter_mut().for_each(|v| *v = w);
    out
}

/// Divides each row by its L1 norm; all-zero rows stay zero.
pub fn l1_normalize(positions: &PositionsMatrix) -> PositionsMatrix {
    let mut out = positions.clone();
    for d in 0..out.n_dates() {
        normalize_row(out.row_mut(d));
    }
    out
}

pub(crate) fn normalize_row(row: &mut [f64]) {
    let norm: f64 = row.iter().map(|v| v.abs()).sum();
    if norm > 0.0 {
        row.iter_mut().for_each(|v| *v /= norm);
    }
}
