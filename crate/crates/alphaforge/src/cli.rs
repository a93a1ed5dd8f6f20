//! Subcommands wiring data, alphas, models, backtests, portfolios and reports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use alphaforge_core::alphas::PositionsMatrix;
use alphaforge_core::backtest::{correlation_matrix, run, BacktestResult};
use alphaforge_core::data::{build_panel, make_windows, CandleSeries, FeatureWindow, Frequency, ReturnsPanel, WindowLayout};
use alphaforge_core::metrics::{MetricsReport, PnlSeries};
use alphaforge_core::models::{fit, predict_positions, ForecastMode, Forecaster, ModelSpec, SequenceLayout, TrainConfig, WindowSet};
use alphaforge_core::portfolio::{combine, train_combiner, AlphaStack, WeightKind};
use alphaforge_core::sweep::{gaussian_pair, linear_fit, log_spaced, loss_sweep};
use alphaforge_core::synth::{independent_alphas, synthetic_candles};
use alphaforge_core::losses::LossSpec;
use chrono::{DateTime, NaiveDate};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{AppError, Result};
use crate::io;
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "alphaforge", version, about = "Train, backtest and combine trading alphas")]
pub struct Cli {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate candle files and cache the daily returns panel.
    Ingest {
        /// Candle directory; defaults to the config's data.dir.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Backtest heuristic alphas from the config (all of them when no names are given).
    Alpha { names: Vec<String> },
    /// Train a position model and write a checkpoint.
    Train,
    /// Backtest a model checkpoint.
    Backtest {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Combine an alpha stack into one portfolio.
    Portfolio {
        /// Stack directory with manifest.json; defaults to portfolio.stack_dir.
        #[arg(long)]
        stack: Option<PathBuf>,
    },
    /// Loss value against position magnitude.
    Sweep,
    /// Generate seeded synthetic candles, a synthetic market and an alpha stack.
    Synth,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Alpha { .. } => "alpha",
            Command::Train => "train",
            Command::Backtest { .. } => "backtest",
            Command::Portfolio { .. } => "portfolio",
            Command::Sweep => "sweep",
            Command::Synth => "synth",
        }
    }
}

/// Written files, relative to the output directory, in write order.
struct Outputs {
    root: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn path(&mut self, rel: &str) -> PathBuf {
        self.files.push(rel.to_string());
        self.root.join(rel)
    }

    fn text(&mut self, rel: &str, text: &str) -> Result<()> {
        let p = self.path(rel);
        io::write_text(&p, text)
    }
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    version: &'a str,
    config_hash: String,
    seed: u64,
    started_at: String,
    finished_at: String,
    outputs: &'a [String],
}

fn now_rfc3339() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0);
    DateTime::from_timestamp(secs, 0).map(|t| t.to_rfc3339()).unwrap_or_default()
}

pub fn run_cli(cli: &Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let started_at = now_rfc3339();
    let mut out = Outputs { root: cli.out.clone(), files: Vec::new() };
    match &cli.command {
        Command::Ingest { data } => cmd_ingest(data.as_deref().unwrap_or(&config.data.dir), &config, &mut out)?,
        Command::Alpha { names } => cmd_alpha(&config, names, &mut out)?,
        Command::Train => cmd_train(&config, &mut out)?,
        Command::Backtest { checkpoint } => cmd_backtest(&config, checkpoint, &mut out)?,
        Command::Portfolio { stack } => {
            let dir = stack
                .clone()
                .or_else(|| config.portfolio.stack_dir.clone())
                .ok_or_else(|| AppError::Config("portfolio needs --stack or portfolio.stack_dir".into()))?;
            cmd_portfolio(&config, &dir, &mut out)?
        }
        Command::Sweep => cmd_sweep(&config, &mut out)?,
        Command::Synth => cmd_synth(&config, &mut out)?,
    }
    let name = cli.command.name();
    let manifest = RunManifest {
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        config_hash: config.hash(),
        seed: config.seed,
        started_at,
        finished_at: now_rfc3339(),
        outputs: &out.files,
    };
    io::write_json(&cli.out.join("runs").join(format!("{name}.json")), &manifest)
}

fn selected_assets(config: &Config, dir: &Path, found: &BTreeMap<String, BTreeMap<Frequency, PathBuf>>) -> Result<Vec<String>> {
    if config.data.assets.is_empty() {
        let all: Vec<String> = found.iter().filter(|(_, f)| f.contains_key(&Frequency::Daily)).map(|(a, _)| a.clone()).collect();
        if all.is_empty() {
            return Err(AppError::Config(format!("no <asset>_1d.csv files in {}", dir.display())));
        }
        return Ok(all);
    }
    for a in &config.data.assets {
        if !found.get(a).is_some_and(|f| f.contains_key(&Frequency::Daily)) {
            return Err(AppError::Config(format!("asset {a} has no daily file in {}", dir.display())));
        }
    }
    Ok(config.data.assets.clone())
}

/// Loads the requested frequencies for every selected asset.
fn load_series(config: &Config, dir: &Path, freqs: &[Frequency]) -> Result<Vec<(String, Vec<CandleSeries>)>> {
    let found = io::discover(dir)?;
    let assets = selected_assets(config, dir, &found)?;
    assets
        .into_iter()
        .map(|a| {
            let files = &found[&a];
            let series = freqs
                .iter()
                .map(|f| {
                    let path = files
                        .get(f)
                        .ok_or_else(|| AppError::Config(format!("{}: missing {}", dir.display(), io::candle_file_name(&a, *f))))?;
                    io::load_candles(path, &a, *f)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((a, series))
        })
        .collect()
}

/// Daily panel restricted to the configured date range.
fn panel_from(config: &Config, daily: &[CandleSeries]) -> Result<ReturnsPanel> {
    let panel = build_panel(daily)?;
    let dates = panel.dates();
    let lo = config.data.start.map_or(0, |s| dates.partition_point(|d| *d < s));
    let hi = config.data.end.map_or(dates.len(), |e| dates.partition_point(|d| *d <= e));
    if hi <= lo + 1 {
        return Err(AppError::Config("data.start..data.end leaves fewer than two panel dates".into()));
    }
    Ok(panel.slice(lo..hi))
}

fn load_panel(config: &Config) -> Result<ReturnsPanel> {
    let series = load_series(config, &config.data.dir, &[Frequency::Daily])?;
    let daily: Vec<CandleSeries> = series.into_iter().flat_map(|(_, s)| s).collect();
    panel_from(config, &daily)
}

fn cmd_ingest(dir: &Path, config: &Config, out: &mut Outputs) -> Result<()> {
    let found = io::discover(dir)?;
    let assets = selected_assets(config, dir, &found)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["asset", "frequency", "rows", "first", "last", "gaps"]).expect("in-memory write");
    let mut daily = Vec::new();
    for a in &assets {
        for (f, path) in &found[a] {
            let s = io::load_candles(path, a, *f)?;
            let (first, last) = match (s.rows().first(), s.rows().last()) {
                (Some(x), Some(y)) => (x.timestamp.to_string(), y.timestamp.to_string()),
                _ => (String::new(), String::new()),
            };
            w.write_record([a.clone(), f.tag().to_string(), s.len().to_string(), first, last, s.gaps().len().to_string()])
                .expect("in-memory write");
            if *f == Frequency::Daily {
                daily.push(s);
            }
        }
    }
    out.text("tables/ingest.csv", &String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"))?;
    let panel = panel_from(config, &daily)?;
    let p = out.path("cache/panel.csv");
    io::write_panel(&p, &panel)
}

/// Writes metrics tables for both intervals, pnl files, a cumulative pnl plot and,
/// with two or more strategies, a correlation heatmap.
fn report_results(
    prefix: &str,
    results: &[(String, BacktestResult)],
    config: &Config,
    out: &mut Outputs,
) -> Result<()> {
    let total: Vec<(String, MetricsReport)> = results.iter().map(|(n, r)| (n.clone(), r.report_total.clone())).collect();
    out.text(&format!("tables/{prefix}_total.csv"), &report::metrics_table(&total, config.report.sort_by))?;
    let test: Vec<(String, MetricsReport)> =
        results.iter().filter_map(|(n, r)| r.report_test.clone().map(|t| (n.clone(), t))).collect();
    if !test.is_empty() {
        out.text(&format!("tables/{prefix}_test.csv"), &report::metrics_table(&test, config.report.sort_by))?;
    }
    for (name, r) in results {
        let p = out.path(&format!("tables/pnl/{prefix}_{name}.csv"));
        io::write_pnl(&p, r)?;
    }
    let series: Vec<(String, &PnlSeries)> = results.iter().map(|(n, r)| (n.clone(), &r.pnl)).collect();
    out.text(&format!("plots/{prefix}_pnl.svg"), &report::pnl_plot(&series, Some(config.backtest.test_start)))?;
    if results.len() >= 2 {
        let refs: Vec<&PnlSeries> = series.iter().map(|s| s.1).collect();
        let names: Vec<String> = series.iter().map(|s| s.0.clone()).collect();
        if let Ok(corr) = correlation_matrix(&refs) {
            out.text(&format!("tables/{prefix}_corr.csv"), &report::correlation_table(&corr, &names))?;
            out.text(&format!("plots/{prefix}_corr.svg"), &report::heatmap(&corr, &names))?;
        }
    }
    Ok(())
}

fn cmd_alpha(config: &Config, names: &[String], out: &mut Outputs) -> Result<()> {
    for n in names {
        if !config.alphas.iter().any(|a| &a.name == n) {
            return Err(AppError::Config(format!("no alpha named {n:?} in the config")));
        }
    }
    let defs: Vec<_> = config.alphas.iter().filter(|a| names.is_empty() || names.contains(&a.name)).collect();
    if defs.is_empty() {
        return Err(AppError::Config("no alphas configured".into()));
    }
    let panel = load_panel(config)?;
    let mut results = Vec::new();
    let mut positions = Vec::new();
    for def in defs {
        let p = def.positions(&panel)?;
        results.push((def.name.clone(), run(&p, &panel, &config.backtest)?));
        positions.push((def.name.clone(), p));
    }
    report_results("alphas", &results, config, out)?;
    if positions.len() >= 2 {
        let (names, alphas): (Vec<String>, Vec<PositionsMatrix>) = positions.into_iter().unzip();
        let stack = AlphaStack::new(names, alphas)?;
        io::write_stack(&out.root.join("stack"), &stack, Some(&panel))?;
        out.files.push("stack/manifest.json".into());
    }
    Ok(())
}

/// Everything besides weights needed to reuse a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub train: TrainConfig,
    pub model: ModelSpec,
    pub layout: WindowLayout,
    pub mode: ForecastMode,
    pub sequence: SequenceLayout,
    pub assets: Vec<String>,
}

/// Mixed-frequency windows for every panel date and asset. Dates without
/// enough history, or with a missing intraday candle, are skipped.
fn candle_windows(series: &[(String, Vec<CandleSeries>)], panel: &ReturnsPanel, layout: &WindowLayout) -> Result<WindowSet> {
    let mut windows: Vec<FeatureWindow> = Vec::new();
    for date in panel.dates() {
        for (_, s) in series {
            match make_windows(&s[0], &s[1], &s[2], *date, layout) {
                Ok(w) => windows.push(w),
                Err(alphaforge_core::Error::InsufficientHistory { .. } | alphaforge_core::Error::FrequencyGap { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(WindowSet::new(series.iter().map(|(a, _)| a.clone()).collect(), windows)?)
}

const ALL_FREQS: [Frequency; 3] = [Frequency::Daily, Frequency::Hourly, Frequency::M15];

fn load_windows(config: &Config, layout: &WindowLayout) -> Result<(ReturnsPanel, WindowSet)> {
    let series = load_series(config, &config.data.dir, &ALL_FREQS)?;
    let daily: Vec<CandleSeries> = series.iter().map(|(_, s)| s[0].clone()).collect();
    let panel = panel_from(config, &daily)?;
    let windows = candle_windows(&series, &panel, layout)?;
    Ok((panel, windows))
}

fn cmd_train(config: &Config, out: &mut Outputs) -> Result<()> {
    let (_, windows) = load_windows(config, &config.data.layout)?;
    let train = config.train_config();
    let fitted = fit(&windows.restrict(..config.backtest.test_start), &config.model, &train)?;
    let ckpt = out.path("models/model.afmd");
    io::write_models(&ckpt, &fitted.forecaster.models)?;
    let meta = CheckpointMeta {
        train,
        model: config.model.clone(),
        layout: config.data.layout,
        mode: fitted.forecaster.mode,
        sequence: fitted.forecaster.sequence,
        assets: windows.assets().to_vec(),
    };
    let side = out.path("models/model.json");
    io::write_json(&side, &meta)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["epoch".to_string()];
    header.extend((0..fitted.loss_traces.len()).map(|m| format!("model_{m}")));
    w.write_record(&header).expect("in-memory write");
    let epochs = fitted.loss_traces.iter().map(Vec::len).max().unwrap_or(0);
    for e in 0..epochs {
        let mut rec = vec![e.to_string()];
        rec.extend(fitted.loss_traces.iter().map(|t| t.get(e).map(|v| io::num(*v)).unwrap_or_default()));
        w.write_record(&rec).expect("in-memory write");
    }
    out.text("tables/train_loss.csv", &String::from_utf8(w.into_inner().expect("flush")).expect("utf-8"))
}

fn cmd_backtest(config: &Config, checkpoint: &Path, out: &mut Outputs) -> Result<()> {
    let models = io::read_models(checkpoint)?;
    let meta: CheckpointMeta = io::read_json(&io::sidecar_path(checkpoint))?;
    let config = Config { data: crate::config::DataConfig { assets: meta.assets.clone(), ..config.data.clone() }, ..config.clone() };
    let (panel, windows) = load_windows(&config, &meta.layout)?;
    let forecaster = Forecaster { mode: meta.mode, sequence: meta.sequence, models };
    let positions = predict_positions(&forecaster, &windows)?;
    let name = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("model").to_string();
    let result = run(&positions, &panel, &config.backtest)?;
    let p = out.path(&format!("positions/{name}.csv"));
    io::write_positions(&p, &positions)?;
    report_results("backtest", &[(name, result)], &config, out)
}

fn before(p: &PositionsMatrix, date: NaiveDate) -> PositionsMatrix {
    p.slice(0..p.dates().partition_point(|d| *d < date))
}

fn cmd_portfolio(config: &Config, dir: &Path, out: &mut Outputs) -> Result<()> {
    let (stack, bundled) = io::load_stack(dir)?;
    let panel = match bundled {
        Some(p) => p,
        None => load_panel(config)?,
    };
    let scheme = &config.portfolio.scheme;
    let split = config.backtest.test_start;
    let combiner = if scheme.kind == WeightKind::EqualWeighted {
        None
    } else {
        let cut = panel.dates().partition_point(|d| *d < split);
        let train_stack = AlphaStack::new(stack.names().to_vec(), stack.alphas().iter().map(|a| before(a, split)).collect())?;
        let report = train_combiner(&train_stack, &panel.slice(0..cut), scheme, &config.portfolio.model, &config.train_config())?;
        let trace: String = std::iter::once("epoch,loss\n".to_string())
            .chain(report.loss_trace.iter().enumerate().map(|(e, v)| format!("{e},{}\n", io::num(*v))))
            .collect();
        out.text("tables/combiner_loss.csv", &trace)?;
        Some(report.combiner)
    };
    let positions = combine(&stack, &panel, scheme, combiner.as_ref())?;
    let p = out.path("positions/portfolio.csv");
    io::write_positions(&p, &positions)?;
    let mut results = vec![("portfolio".to_string(), run(&positions, &panel, &config.backtest)?)];
    for (name, alpha) in stack.names().iter().zip(stack.alphas()) {
        results.push((name.clone(), run(alpha, &panel, &config.backtest)?));
    }
    report_results("portfolio", &results, config, out)
}

fn cmd_sweep(config: &Config, out: &mut Outputs) -> Result<()> {
    let s = &config.sweep;
    let (alpha, r) = gaussian_pair(s.days, s.position_scale, s.return_scale, config.seed);
    let scales = log_spaced(s.c_min, s.c_max, s.points)?;
    let curves = s
        .losses
        .iter()
        .map(|k| Ok((*k, loss_sweep(&LossSpec { kind: *k, ..config.loss }, &alpha, &r, &scales)?)))
        .collect::<Result<Vec<_>>>()?;
    out.text("tables/loss_sweep.csv", &report::sweep_table(&curves))?;
    out.text("plots/loss_sweep.svg", &report::sweep_plot(&curves))?;
    let mut fits = String::from("loss,slope,intercept,r_squared\n");
    for (k, pts) in &curves {
        let xs: Vec<f64> = pts.iter().map(|p| p.scale.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.value).collect();
        let f = linear_fit(&xs, &ys)?;
        fits += &format!("{},{},{},{}\n", k.label(), io::num(f.slope), io::num(f.intercept), io::num(f.r_squared));
    }
    out.text("tables/loss_sweep_fit.csv", &fits)
}

fn cmd_synth(config: &Config, out: &mut Outputs) -> Result<()> {
    let c = &config.synth.candles;
    for a in 0..c.assets {
        let asset = format!("SYN{a}");
        let series = synthetic_candles(&asset, c.start, c.days, c.vol, config.seed.wrapping_add(a as u64))?;
        for s in &series {
            let p = out.path(&format!("data/{}", io::candle_file_name(&asset, s.frequency())));
            io::write_candles(&p, s)?;
        }
    }
    let market = config.synth.market.generate(config.seed)?;
    let p = out.path("tables/market_panel.csv");
    io::write_panel(&p, &market)?;
    let s = &config.synth.alphas;
    let (panel, stack) = independent_alphas(s.count, s.days, s.sharpe, s.vol, config.seed)?;
    io::write_stack(&out.root.join("stack"), &stack, Some(&panel))?;
    out.files.push("stack/manifest.json".into());
    Ok(())
}
