//! Experiment configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use alphaforge_core::alphas::{AlphaDef, AlphaKind};
use alphaforge_core::backtest::BacktestConfig;
use alphaforge_core::data::WindowLayout;
use alphaforge_core::losses::{LossKind, LossSpec, TvrRegSpec};
use alphaforge_core::models::{ForecastMode, ModelKind, ModelSpec, Optimizer, TrainConfig};
use alphaforge_core::portfolio::WeightScheme;
use alphaforge_core::synth::ArMarket;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};
use crate::report::SortColumn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Source of all randomness: model initialization, batch order, synthetic data.
    pub seed: u64,
    pub data: DataConfig,
    pub alphas: Vec<AlphaDef>,
    pub loss: LossSpec,
    pub tvr_reg: TvrRegConfig,
    pub model: ModelSpec,
    pub train: TrainSection,
    pub backtest: BacktestConfig,
    pub portfolio: PortfolioConfig,
    pub report: ReportConfig,
    pub sweep: SweepConfig,
    pub synth: SynthConfig,
}

impl Default for Config {
    fn default() -> Self {
        let alpha = |name: &str, kind, window| AlphaDef { name: name.into(), kind, window };
        Self {
            seed: 0,
            data: DataConfig::default(),
            alphas: vec![
                alpha("reversion", AlphaKind::Reversion, 1),
                alpha("momentum", AlphaKind::Momentum, 20),
                alpha("mean_reversion", AlphaKind::MeanReversion, 20),
                alpha("buy_hold", AlphaKind::BuyHold, 1),
            ],
            loss: LossSpec::default(),
            tvr_reg: TvrRegConfig::default(),
            model: ModelSpec::default(),
            train: TrainSection::default(),
            backtest: BacktestConfig::default(),
            portfolio: PortfolioConfig::default(),
            report: ReportConfig::default(),
            sweep: SweepConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Directory of `<asset>_<freq>.csv` files; relative paths resolve against the config file.
    pub dir: PathBuf,
    /// Assets to use; empty means every asset with a daily file.
    pub assets: Vec<String>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    /// Feature window: 14 daily, 3 hourly and 3 fifteen-minute days (20 in total).
    pub layout: WindowLayout,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("data"), assets: Vec::new(), start: None, end: None, layout: WindowLayout::default() }
    }
}

/// Turnover regularizer; off unless `enabled`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TvrRegConfig {
    pub enabled: bool,
    #[serde(flatten)]
    pub spec: TvrRegSpec,
}

/// Optimizer settings. The loss, regularizer and seed come from their own sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_window: usize,
    pub optimizer: Optimizer,
    pub mode: ForecastMode,
    pub shuffle: bool,
    pub clip_norm: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_window: t.batch_window,
            optimizer: t.optimizer,
            mode: t.mode,
            shuffle: t.shuffle,
            clip_norm: t.clip_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortfolioConfig {
    pub scheme: WeightScheme,
    /// Weight model for learned schemes.
    pub model: ModelSpec,
    pub stack_dir: Option<PathBuf>,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        Self {
            scheme: WeightScheme::default(),
            model: ModelSpec { kind: ModelKind::Linear, ..ModelSpec::default() },
            stack_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub sort_by: SortColumn,
}

/// Loss value against position magnitude on seeded Gaussian positions and returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub losses: Vec<LossKind>,
    pub c_min: f64,
    pub c_max: f64,
    pub points: usize,
    pub days: usize,
    pub position_scale: f64,
    pub return_scale: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            losses: vec![LossKind::Sharpe, LossKind::ModSharpe, LossKind::Pnl],
            c_min: 1e-2,
            c_max: 1e2,
            points: 41,
            days: 250,
            position_scale: 100.0,
            return_scale: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub candles: CandleSynth,
    pub market: ArMarket,
    pub alphas: AlphaSynth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandleSynth {
    pub assets: usize,
    pub days: usize,
    pub start: NaiveDate,
    pub vol: f64,
}

impl Default for CandleSynth {
    fn default() -> Self {
        Self { assets: 3, days: 60, start: NaiveDate::from_ymd_opt(2024, 2, 20).expect("valid date"), vol: 0.03 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaSynth {
    pub count: usize,
    pub days: usize,
    pub sharpe: f64,
    pub vol: f64,
}

impl Default for AlphaSynth {
    fn default() -> Self {
        Self { count: 10, days: 500, sharpe: 1.0, vol: 0.01 }
    }
}

impl Config {
    /// Reads and validates `path`. Relative data and stack directories are
    /// resolved against the directory holding the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: Config = serde_json::from_str(&text)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.data.dir.is_relative() {
            cfg.data.dir = base.join(&cfg.data.dir);
        }
        if let Some(dir) = cfg.portfolio.stack_dir.as_mut().filter(|d| d.is_relative()) {
            *dir = base.join(&*dir);
        }
        cfg.validate().map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        self.loss.validate().map_err(|e| e.to_string())?;
        self.tvr_reg.spec.validate().map_err(|e| e.to_string())?;
        self.train_config().validate().map_err(|e| e.to_string())?;
        self.portfolio.scheme.validate().map_err(|e| e.to_string())?;
        let mut names: Vec<&str> = self.alphas.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err("alpha names must be unique".into());
        }
        let s = &self.sweep;
        if !(s.c_min > 0.0 && s.c_max > s.c_min) || s.points < 2 || s.days < 2 {
            return Err("sweep needs 0 < c_min < c_max, points >= 2 and days >= 2".into());
        }
        Ok(())
    }

    /// Training settings with the loss, regularizer and seed filled in.
    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_window: t.batch_window,
            optimizer: t.optimizer,
            loss: self.loss,
            tvr_reg: self.tvr_reg.enabled.then_some(self.tvr_reg.spec),
            mode: t.mode,
            seed: self.seed,
            shuffle: t.shuffle,
            clip_norm: t.clip_norm,
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
