//! Candles, returns panels and the mixed-frequency feature windows models train on.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{NaiveDate, TimeDelta};

use crate::error::{Error, Result};

const SECONDS_PER_DAY: i64 = 86_400;

/// Candle interval of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Frequency {
    Daily,
    Hourly,
    M15,
}

impl Frequency {
    pub const ALL: [Frequency; 3] = [Frequency::Daily, Frequency::Hourly, Frequency::M15];

    pub fn seconds(self) -> i64 {
        match self {
            Frequency::Daily => SECONDS_PER_DAY,
            Frequency::Hourly => 3_600,
            Frequency::M15 => 900,
        }
    }

    pub fn per_day(self) -> usize {
        (SECONDS_PER_DAY / self.seconds()) as usize
    }

    /// Tag used in `<asset>_<tag>.csv` file names.
    pub fn tag(self) -> &'static str {
        match self {
            Frequency::Daily => "1d",
            Frequency::Hourly => "1h",
            Frequency::M15 => "15m",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Frequency::ALL.into_iter().find(|f| f.tag() == tag)
    }
}

/// One OHLCV record. `timestamp` is the candle open in UTC epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candle {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub base_volume: f64,
    pub quote_volume: f64,
    pub taker_buy_base: f64,
    pub taker_buy_quote: f64,
    pub num_trades: u64,
}

/// Validated candle sequence for one asset at one frequency.
///
/// Timestamps are strictly increasing. Gaps (missing candles) are allowed and
/// reported by [`CandleSeries::gaps`]; consumers that need a contiguous span
/// fail with [`Error::FrequencyGap`] instead of interpolating.
#[derive(Debug, Clone, PartialEq)]
pub struct CandleSeries {
    asset_id: String,
    frequency: Frequency,
    rows: Vec<Candle>,
}

impl CandleSeries {
    pub fn new(asset_id: impl Into<String>, frequency: Frequency, rows: Vec<Candle>) -> Result<Self> {
        for (i, c) in rows.iter().enumerate() {
            let prices = [c.open, c.high, c.low, c.close];
            let volumes = [c.base_volume, c.quote_volume, c.taker_buy_base, c.taker_buy_quote];
            if prices.iter().chain(volumes.iter()).any(|v| !v.is_finite()) {
                return Err(Error::MalformedRow { row: i, reason: "non-finite value".into() });
            }
            if prices.iter().any(|&p| p <= 0.0) {
                return Err(Error::NegativePrice { row: i });
            }
            if volumes.iter().any(|&v| v < 0.0) {
                return Err(Error::MalformedRow { row: i, reason: "negative volume".into() });
            }
            if c.high < c.open.max(c.close) || c.low > c.open.min(c.close) || c.low > c.high {
                return Err(Error::InvalidRange { row: i });
            }
            if i > 0 && c.timestamp <= rows[i - 1].timestamp {
                return Err(Error::NonMonotonicTimestamp { row: i, timestamp: c.timestamp });
            }
        }
        Ok(Self { asset_id: asset_id.into(), frequency, rows })
    }

    pub fn asset_id(&self) -> &str {
        &self.asset_id
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn rows(&self) -> &[Candle] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Indices `i` where the step from row `i - 1` to row `i` is not exactly one interval.
    pub fn gaps(&self) -> Vec<usize> {
        let step = self.frequency.seconds();
        self.rows
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].timestamp - w[0].timestamp != step)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// Position of the candle opening exactly at `timestamp`.
    pub fn position(&self, timestamp: i64) -> Option<usize> {
        self.rows.binary_search_by_key(&timestamp, |c| c.timestamp).ok()
    }

    fn close_at(&self, timestamp: i64) -> Result<f64> {
        match self.position(timestamp) {
            Some(i) => Ok(self.rows[i].close),
            None => {
                let first = self.rows.first().map(|c| c.timestamp);
                let last = self.rows.last().map(|c| c.timestamp);
                match (first, last) {
                    (Some(f), Some(l)) if timestamp > f && timestamp < l => Err(Error::FrequencyGap {
                        asset: self.asset_id.clone(),
                        timestamp,
                    }),
                    _ => Err(Error::InsufficientHistory {
                        as_of: date_of(timestamp),
                        detail: format!(
                            "{} {} candle at {} outside available range",
                            self.asset_id,
                            self.frequency.tag(),
                            timestamp
                        ),
                    }),
                }
            }
        }
    }
}

fn epoch() -> NaiveDate {
    NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid epoch")
}

/// UTC epoch seconds at 00:00 of `date`.
pub fn day_start(date: NaiveDate) -> i64 {
    date.signed_duration_since(epoch()).num_days() * SECONDS_PER_DAY
}

/// UTC calendar date containing `timestamp`.
pub fn date_of(timestamp: i64) -> NaiveDate {
    epoch() + TimeDelta::days(timestamp.div_euclid(SECONDS_PER_DAY))
}

/// Simple close-to-close returns: `close[i+1] / close[i] - 1`.
pub fn compute_returns(series: &CandleSeries) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: series.len() });
    }
    Ok(series.rows.windows(2).map(|w| w[1].close / w[0].close - 1.0).collect())
}

/// Date × asset matrix of simple returns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    values: Vec<f64>,
}

impl ReturnsPanel {
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != dates.len() * assets.len() {
            return Err(Error::DimensionMismatch {
                expected: dates.len() * assets.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v > -1.0)) {
            return Err(Error::MalformedRow {
                row: i / assets.len().max(1),
                reason: "return must be finite and greater than -1".into(),
            });
        }
        if dates.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("panel dates must be strictly increasing".into()));
        }
        Ok(Self { dates, assets, values })
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

    pub fn get(&self, d: usize, a: usize) -> f64 {
        self.values[d * self.assets.len() + a]
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Returns of one asset over all dates.
    pub fn column(&self, a: usize) -> Vec<f64> {
        (0..self.n_dates()).map(|d| self.get(d, a)).collect()
    }

    /// Rows `range` of the panel as a new panel.
    pub fn slice(&self, range: core::ops::Range<usize>) -> ReturnsPanel {
        let m = self.assets.len();
        ReturnsPanel {
            dates: self.dates[range.clone()].to_vec(),
            assets: self.assets.clone(),
            values: self.values[range.start * m..range.end * m].to_vec(),
        }
    }
}

/// Joins daily series into a panel over the dates every series shares.
///
/// A row for date `d` is emitted when both `d` and the previous calendar day
/// are common to every series, so every return is a genuine one-day return.
pub fn build_panel(series_list: &[CandleSeries]) -> Result<ReturnsPanel> {
    if series_list.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let mut common: Option<BTreeSet<i64>> = None;
    for s in series_list {
        if s.frequency != Frequency::Daily {
            return Err(Error::WrongFrequency { asset: s.asset_id.clone() });
        }
        let days: BTreeSet<i64> = s.rows.iter().map(|c| c.timestamp).collect();
        common = Some(match common {
            None => days,
            Some(acc) => acc.intersection(&days).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    let row_days: Vec<i64> = common
        .iter()
        .copied()
        .filter(|t| common.contains(&(t - SECONDS_PER_DAY)))
        .collect();
    if row_days.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let m = series_list.len();
    let mut values = alloc::vec![0.0; row_days.len() * m];
    for (a, s) in series_list.iter().enumerate() {
        for (d, &t) in row_days.iter().enumerate() {
            let now = s.close_at(t)?;
            let prev = s.close_at(t - SECONDS_PER_DAY)?;
            values[d * m + a] = now / prev - 1.0;
        }
    }
    ReturnsPanel::new(
        row_days.into_iter().map(date_of).collect(),
        series_list.iter().map(|s| s.asset_id.clone()).collect(),
        values,
    )
}

/// Maps `v` onto `[0, 1]` by its own minimum and maximum. A constant vector maps to zeros.
pub fn minmax_scale(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return alloc::vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / span).collect()
}

/// How raw window returns are normalized before they reach a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scaling {
    /// Min-max over the whole concatenated window.
    #[default]
    MinMaxWindow,
    /// Min-max applied to each frequency segment separately.
    MinMaxSegment,
    /// Raw returns.
    None,
}

/// Day counts of the daily, hourly and fifteen-minute segments of a window,
/// oldest first. The segments are disjoint and consecutive, ending the day
/// before `as_of`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WindowLayout {
    pub daily_days: usize,
    pub hourly_days: usize,
    pub m15_days: usize,
    pub scaling: Scaling,
}

impl Default for WindowLayout {
    fn default() -> Self {
        Self { daily_days: 14, hourly_days: 3, m15_days: 3, scaling: Scaling::MinMaxWindow }
    }
}

impl WindowLayout {
    pub fn span_days(&self) -> usize {
        self.daily_days + self.hourly_days + self.m15_days
    }

    /// Feature count: 14 + 3·24 + 3·96 = 374 for the default layout.
    pub fn feature_len(&self) -> usize {
        self.daily_days
            + self.hourly_days * Frequency::Hourly.per_day()
            + self.m15_days * Frequency::M15.per_day()
    }
}

/// One training sample: normalized history features and the raw return realized on `as_of`.
///
/// Features only use candles that close before `as_of` begins, so a position
/// derived from them is decided on the previous day.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub asset_id: String,
    pub as_of_date: NaiveDate,
    pub features: Vec<f64>,
    pub target: f64,
}

fn segment_returns(series: &CandleSeries, start: i64, count: usize) -> Result<Vec<f64>> {
    let step = series.frequency.seconds();
    let mut out = Vec::with_capacity(count);
    let mut prev = series.close_at(start - step)?;
    for k in 0..count as i64 {
        let close = series.close_at(start + k * step)?;
        out.push(close / prev - 1.0);
        prev = close;
    }
    Ok(out)
}

fn scale_in_place(values: &mut [f64]) {
    let scaled = minmax_scale(values);
    values.copy_from_slice(&scaled);
}

/// Builds the mixed-frequency window for `as_of` from one asset's three series.
pub fn make_windows(
    daily: &CandleSeries,
    hourly: &CandleSeries,
    m15: &CandleSeries,
    as_of: NaiveDate,
    layout: &WindowLayout,
) -> Result<FeatureWindow> {
    for (s, f) in [(daily, Frequency::Daily), (hourly, Frequency::Hourly), (m15, Frequency::M15)] {
        if s.frequency != f {
            return Err(Error::WrongFrequency { asset: s.asset_id.clone() });
        }
    }
    let anchor = day_start(as_of);
    let span = layout.span_days() as i64;
    let available = daily.rows.iter().filter(|c| c.timestamp < anchor).count();
    if available < layout.span_days() + 1 {
        return Err(Error::InsufficientHistory {
            as_of,
            detail: format!("{} daily candles before as_of, need {}", available, span + 1),
        });
    }

    let daily_start = anchor - span * SECONDS_PER_DAY;
    let hourly_start = daily_start + layout.daily_days as i64 * SECONDS_PER_DAY;
    let m15_start = hourly_start + layout.hourly_days as i64 * SECONDS_PER_DAY;

    let mut d = segment_returns(daily, daily_start, layout.daily_days)?;
    let mut h = segment_returns(hourly, hourly_start, layout.hourly_days * Frequency::Hourly.per_day())?;
    let mut q = segment_returns(m15, m15_start, layout.m15_days * Frequency::M15.per_day())?;
    let target = segment_returns(daily, anchor, 1)?[0];

    if layout.scaling == Scaling::MinMaxSegment {
        scale_in_place(&mut d);
        scale_in_place(&mut h);
        scale_in_place(&mut q);
    }
    let mut features = d;
    features.append(&mut h);
    features.append(&mut q);
    if layout.scaling == Scaling::MinMaxWindow {
        scale_in_place(&mut features);
    }
    Ok(FeatureWindow { asset_id: daily.asset_id.clone(), as_of_date: as_of, features, target })
}

/// Daily-only windows over a returns panel: for every date index `i >= lookback`
/// and every asset, features are the `lookback` returns before `i` and the
/// target is the return at `i`. Ordered by date, then asset.
pub fn panel_windows(panel: &ReturnsPanel, lookback: usize, scaling: Scaling) -> Result<Vec<FeatureWindow>> {
    if lookback == 0 {
        return Err(Error::InvalidConfig("lookback must be at least 1".into()));
    }
    if panel.n_dates() <= lookback {
        return Err(Error::InsufficientData { needed: lookback + 1, got: panel.n_dates() });
    }
    let mut out = Vec::with_capacity((panel.n_dates() - lookback) * panel.n_assets());
    for i in lookback..panel.n_dates() {
        for (a, asset) in panel.assets.iter().enumerate() {
            let raw: Vec<f64> = (i - lookback..i).map(|d| panel.get(d, a)).collect();
            let features = match scaling {
                Scaling::None => raw,
                Scaling::MinMaxWindow | Scaling::MinMaxSegment => minmax_scale(&raw),
            };
            out.push(FeatureWindow {
                asset_id: asset.clone(),
                as_of_date: panel.dates[i],
                features,
                target: panel.get(i, a),
            });
        }
    }
    Ok(out)
}
