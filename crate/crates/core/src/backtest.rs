//! Lag-correct simulation of positions against a returns panel.
//!
//! `pnl(d) = sum_a position_a(d - lag) * r_a(d)`, arithmetic and non-compounding.
//! The first `lag` panel dates have no pnl.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use chrono::NaiveDate;

use crate::alphas::{l1_normalize, PositionsMatrix};
use crate::data::ReturnsPanel;
use crate::error::{Error, Result};
use crate::metrics::{summarize, MetricsConfig, MetricsReport, PnlSeries};

/// First day of the held-out interval used throughout the experiments.
pub fn default_test_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 4, 25).expect("valid date")
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BacktestConfig {
    pub lag_days: usize,
    pub test_start: NaiveDate,
    /// L1-normalize every position row before trading (booksize 1).
    pub normalize: bool,
    /// Permits `lag_days == 0`, which trades on same-day information.
    pub allow_lookahead: bool,
    pub metrics: MetricsConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            lag_days: 1,
            test_start: default_test_start(),
            normalize: true,
            allow_lookahead: false,
            metrics: MetricsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestResult {
    pub pnl: PnlSeries,
    pub cum_pnl: Vec<f64>,
    pub report_total: MetricsReport,
    /// `None` when no pnl date falls on or after `test_start`.
    pub report_test: Option<MetricsReport>,
}

/// Expands `positions` onto the panel's dates. Panel dates without a position row get zeros.
pub fn align(positions: &PositionsMatrix, panel: &ReturnsPanel) -> Result<PositionsMatrix> {
    if positions.assets() != panel.assets() {
        return Err(Error::AssetMismatch);
    }
    if positions.dates() == panel.dates() {
        return Ok(positions.clone());
    }
    let mut out = PositionsMatrix::zeros_like(panel);
    for (d, date) in positions.dates().iter().enumerate() {
        let i = panel.date_index(*date).ok_or(Error::DateMisalignment(*date))?;
        out.row_mut(i).copy_from_slice(positions.row(d));
    }
    Ok(out)
}

/// pnl for panel dates `lag..`, given positions already aligned to the panel.
pub(crate) fn daily_pnl(aligned: &PositionsMatrix, panel: &ReturnsPanel, lag: usize) -> Vec<f64> {
    (lag..panel.n_dates())
        .map(|i| aligned.row(i - lag).iter().zip(panel.row(i)).map(|(p, r)| p * r).sum())
        .collect()
}

pub fn run(positions: &PositionsMatrix, panel: &ReturnsPanel, config: &BacktestConfig) -> Result<BacktestResult> {
    if config.lag_days == 0 && !config.allow_lookahead {
        return Err(Error::InvalidConfig("lag_days = 0 trades on future data; set allow_lookahead".into()));
    }
    let lag = config.lag_days;
    let mut aligned = align(positions, panel)?;
    if config.normalize {
        aligned = l1_normalize(&aligned);
    }
    let pnl = daily_pnl(&aligned, panel, lag);
    let dates: Vec<NaiveDate> = panel.dates().iter().skip(lag).copied().collect();
    let cum_pnl = pnl
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();

    let m = panel.n_assets();
    let traded = &aligned.values()[..pnl.len() * m];
    let report_total = summarize(&pnl, traded, m, &config.metrics);
    let split = dates.partition_point(|d| *d < config.test_start);
    let report_test = (split < pnl.len())
        .then(|| summarize(&pnl[split..], &traded[split * m..], m, &config.metrics));

    Ok(BacktestResult { pnl: PnlSeries { dates, values: pnl }, cum_pnl, report_total, report_test })
}

/// Symmetric matrix of pairwise correlations, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub n: usize,
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Pearson correlation of daily pnl between every pair of results, each pair
/// over the dates both series share. A constant series correlates 0 with others.
pub fn correlation_matrix(results: &[&PnlSeries]) -> Result<CorrelationMatrix> {
    let n = results.len();
    let mut values = alloc::vec![0.0; n * n];
    let lookups: Vec<BTreeMap<NaiveDate, f64>> = results
        .iter()
        .map(|s| s.dates.iter().copied().zip(s.values.iter().copied()).collect())
        .collect();
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let (xs, ys): (Vec<f64>, Vec<f64>) = lookups[i]
                .iter()
                .filter_map(|(d, x)| lookups[j].get(d).map(|y| (*x, *y)))
                .unzip();
            if xs.len() < 3 {
                return Err(Error::InsufficientOverlap { left: i, right: j });
            }
            let c = pearson(&xs, &ys);
            values[i * n + j] = c;
            values[j * n + i] = c;
        }
    }
    Ok(CorrelationMatrix { n, values })
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0)
}
