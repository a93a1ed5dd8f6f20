//! Seeded synthetic markets for experiments and tests.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::alphas::PositionsMatrix;
use crate::data::{day_start, date_of, Candle, CandleSeries, Frequency, ReturnsPanel};
use crate::error::{Error, Result};
use crate::portfolio::AlphaStack;

/// Independent AR(1) return series per asset:
/// `x(t) = rho * x(t-1) + sigma_a * e(t)`, `r(t) = drift + x(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ArMarket {
    pub n_assets: usize,
    pub n_days: usize,
    pub rho: f64,
    /// Innovation scale of the median asset.
    pub vol: f64,
    /// Asset `a` gets `vol * exp(vol_spread * u_a)` with `u_a` uniform in `[-1, 1]`.
    pub vol_spread: f64,
    pub drift: f64,
    pub start: NaiveDate,
}

impl Default for ArMarket {
    fn default() -> Self {
        Self {
            n_assets: 20,
            n_days: 500,
            rho: -0.3,
            vol: 0.02,
            vol_spread: 0.0,
            drift: 0.0,
            start: NaiveDate::from_ymd_opt(2022, 1, 1).expect("valid date"),
        }
    }
}

impl ArMarket {
    pub fn generate(&self, seed: u64) -> Result<ReturnsPanel> {
        if self.n_assets == 0 || self.n_days == 0 {
            return Err(Error::InvalidConfig("market needs at least one asset and one day".into()));
        }
        if !(self.rho.abs() < 1.0) || !(self.vol > 0.0) {
            return Err(Error::InvalidConfig("need |rho| < 1 and vol > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigmas: Vec<f64> = (0..self.n_assets)
            .map(|_| self.vol * libm::exp(self.vol_spread * rng.random_range(-1.0..=1.0)))
            .collect();
        // start from the stationary distribution
        let mut x: Vec<f64> = sigmas
            .iter()
            .map(|s| s / libm::sqrt(1.0 - self.rho * self.rho) * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mut values = Vec::with_capacity(self.n_days * self.n_assets);
        for _ in 0..self.n_days {
            for (xa, s) in x.iter_mut().zip(&sigmas) {
                *xa = self.rho * *xa + s * rng.sample::<f64, _>(StandardNormal);
                values.push((self.drift + *xa).max(-0.95));
            }
        }
        ReturnsPanel::new(dates_from(self.start, self.n_days), asset_names(self.n_assets), values)
    }
}

pub fn dates_from(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start.iter_days().take(n).collect()
}

/// `S00, S01, ...`
pub fn asset_names(n: usize) -> Vec<String> {
    (0..n).map(|a| format!("S{a:02}")).collect()
}

/// `n_alphas` independent strategies, each holding one unit of its own asset.
/// Asset returns are i.i.d. normal with `mean / std = sharpe / sqrt(n_days)`,
/// so each alpha's expected full-horizon Sharpe is `sharpe`.
pub fn independent_alphas(
    n_alphas: usize,
    n_days: usize,
    sharpe: f64,
    vol: f64,
    seed: u64,
) -> Result<(ReturnsPanel, AlphaStack)> {
    if n_days < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n_days });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // n_days + 1 panel dates: the first position row earns the second date's return
    let n = n_days + 1;
    let mu = vol * sharpe / libm::sqrt(n_days as f64);
    let values: Vec<f64> = (0..n * n_alphas).map(|_| mu + vol * rng.sample::<f64, _>(StandardNormal)).collect();
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let dates = dates_from(start, n);
    let assets = asset_names(n_alphas);
    let panel = ReturnsPanel::new(dates.clone(), assets.clone(), values)?;
    let alphas = (0..n_alphas)
        .map(|l| {
            let mut p = PositionsMatrix::zeros(dates.clone(), assets.clone());
            for d in 0..n {
                p.row_mut(d)[l] = 1.0;
            }
            p
        })
        .collect();
    let names = (0..n_alphas).map(|l| format!("alpha{l:02}")).collect();
    Ok((panel, AlphaStack::new(names, alphas)?))
}

/// Candles for one asset at 15-minute, hourly and daily frequency, the coarser
/// series aggregated from the 15-minute one. Daily closes follow a mean-reverting
/// log-price path with daily volatility `vol`.
pub fn synthetic_candles(asset: &str, start: NaiveDate, days: usize, vol: f64, seed: u64) -> Result<[CandleSeries; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_day = Frequency::M15.per_day();
    let step_vol = vol / libm::sqrt(per_day as f64);
    let mut price = 100.0 * libm::exp(rng.random_range(-1.0..1.0));
    let mut prev_day = 0.0;
    let mut m15 = Vec::with_capacity(days * per_day);
    let t0 = day_start(start);
    for d in 0..days {
        // reverse part of yesterday's move over the day
        let pull = -0.3 * prev_day / per_day as f64;
        let open_of_day = price;
        for k in 0..per_day {
            let open = price;
            let z: f64 = rng.sample(StandardNormal);
            price = open * libm::exp(pull + step_vol * z);
            let wick_hi: f64 = rng.sample::<f64, _>(StandardNormal).abs() * step_vol * 0.5;
            let wick_lo: f64 = rng.sample::<f64, _>(StandardNormal).abs() * step_vol * 0.5;
            let base = 1_000.0 * libm::exp(0.3 * rng.sample::<f64, _>(StandardNormal));
            let vwap = 0.5 * (open + price);
            let taker: f64 = rng.random_range(0.3..0.7);
            // rounding is monotone, so the high/low bounds survive it
            m15.push(Candle {
                timestamp: t0 + (d * per_day + k) as i64 * Frequency::M15.seconds(),
                open: round_to(open, 1e4),
                high: round_to(open.max(price) * libm::exp(wick_hi), 1e4),
                low: round_to(open.min(price) * libm::exp(-wick_lo), 1e4),
                close: round_to(price, 1e4),
                base_volume: round_to(base, 1e2),
                quote_volume: round_to(base * vwap, 1e2),
                taker_buy_base: round_to(base * taker, 1e2),
                taker_buy_quote: round_to(base * taker * vwap, 1e2),
                num_trades: rng.random_range(50..500),
            });
        }
        prev_day = libm::log(price / open_of_day);
    }
    let tidy = |rows: Vec<Candle>| -> Vec<Candle> {
        rows.into_iter()
            .map(|c| Candle {
                base_volume: round_to(c.base_volume, 1e2),
                quote_volume: round_to(c.quote_volume, 1e2),
                taker_buy_base: round_to(c.taker_buy_base, 1e2),
                taker_buy_quote: round_to(c.taker_buy_quote, 1e2),
                ..c
            })
            .collect()
    };
    let hourly = tidy(aggregate(&m15, Frequency::M15, Frequency::Hourly));
    let daily = tidy(aggregate(&m15, Frequency::M15, Frequency::Daily));
    Ok([
        CandleSeries::new(asset, Frequency::Daily, daily)?,
        CandleSeries::new(asset, Frequency::Hourly, hourly)?,
        CandleSeries::new(asset, Frequency::M15, m15)?,
    ])
}

fn round_to(x: f64, scale: f64) -> f64 {
    libm::round(x * scale) / scale
}

/// Merges contiguous runs of fine candles into coarse ones.
pub fn aggregate(rows: &[Candle], fine: Frequency, coarse: Frequency) -> Vec<Candle> {
    let k = (coarse.seconds() / fine.seconds()) as usize;
    rows.chunks_exact(k)
        .map(|c| Candle {
            timestamp: c[0].timestamp,
            open: c[0].open,
            high: c.iter().map(|x| x.high).fold(f64::NEG_INFINITY, f64::max),
            low: c.iter().map(|x| x.low).fold(f64::INFINITY, f64::min),
            close: c[k - 1].close,
            base_volume: c.iter().map(|x| x.base_volume).sum(),
            quote_volume: c.iter().map(|x| x.quote_volume).sum(),
            taker_buy_base: c.iter().map(|x| x.taker_buy_base).sum(),
            taker_buy_quote: c.iter().map(|x| x.taker_buy_quote).sum(),
            num_trades: c.iter().map(|x| x.num_trades).sum(),
        })
        .collect()
}

/// Convenience for tests: the date a synthetic series starts on.
pub fn first_date(series: &CandleSeries) -> Option<NaiveDate> {
    series.rows().first().map(|c| date_of(c.timestamp))
}
