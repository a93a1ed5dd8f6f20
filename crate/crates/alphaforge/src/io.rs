//! File formats: candle CSVs, panel/positions/pnl CSVs, model checkpoints and
//! alpha stack manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use alphaforge_core::alphas::PositionsMatrix;
use alphaforge_core::backtest::BacktestResult;
use alphaforge_core::data::{Candle, CandleSeries, Frequency, ReturnsPanel};
use alphaforge_core::models::{Architecture, ModelKind, ModelParams};
use alphaforge_core::portfolio::AlphaStack;
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const CANDLE_HEADER: [&str; 10] = [
    "timestamp",
    "open",
    "high",
    "low",
    "close",
    "base_volume",
    "quote_volume",
    "taker_buy_base",
    "taker_buy_quote",
    "num_trades",
];

/// Shortest round-trip decimal form; the same value always prints the same text.
pub fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> AppError + '_ {
    move |source| AppError::Csv { path: path.to_path_buf(), source }
}

pub fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(true).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    create_parent(path)?;
    csv::Writer::from_path(path).map_err(csv_err(path))
}

/// Loads one candle file. The header must be exactly [`CANDLE_HEADER`];
/// rows must already be in timestamp order.
pub fn load_candles(path: &Path, asset: &str, frequency: Frequency) -> Result<CandleSeries> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().map(str::trim).ne(CANDLE_HEADER) {
        return Err(AppError::format(path, format!("expected header {}", CANDLE_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let malformed = |reason: String| AppError::Data {
            path: path.to_path_buf(),
            source: alphaforge_core::Error::MalformedRow { row: i, reason },
        };
        let rec = rec.map_err(|e| malformed(e.to_string()))?;
        if rec.len() != CANDLE_HEADER.len() {
            return Err(malformed(format!("{} fields", rec.len())));
        }
        let f = |k: usize| -> Result<f64> {
            rec[k].trim().parse::<f64>().map_err(|_| malformed(format!("{} = {:?}", CANDLE_HEADER[k], &rec[k])))
        };
        let timestamp = rec[0].trim().parse::<i64>().map_err(|_| malformed(format!("timestamp = {:?}", &rec[0])))?;
        let num_trades = rec[9].trim().parse::<u64>().map_err(|_| malformed(format!("num_trades = {:?}", &rec[9])))?;
        rows.push(Candle {
            timestamp,
            open: f(1)?,
            high: f(2)?,
            low: f(3)?,
            close: f(4)?,
            base_volume: f(5)?,
            quote_volume: f(6)?,
            taker_buy_base: f(7)?,
            taker_buy_quote: f(8)?,
            num_trades,
        });
    }
    CandleSeries::new(asset, frequency, rows).map_err(|source| AppError::Data { path: path.to_path_buf(), source })
}

pub fn write_candles(path: &Path, series: &CandleSeries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CANDLE_HEADER).map_err(csv_err(path))?;
    for c in series.rows() {
        w.write_record([
            c.timestamp.to_string(),
            num(c.open),
            num(c.high),
            num(c.low),
            num(c.close),
            num(c.base_volume),
            num(c.quote_volume),
            num(c.taker_buy_base),
            num(c.taker_buy_quote),
            c.num_trades.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn candle_file_name(asset: &str, frequency: Frequency) -> String {
    format!("{asset}_{}.csv", frequency.tag())
}

/// Candle files in `dir` named `<asset>_<1d|1h|15m>.csv`, keyed by asset.
pub fn discover(dir: &Path) -> Result<BTreeMap<String, BTreeMap<Frequency, PathBuf>>> {
    let mut out: BTreeMap<String, BTreeMap<Frequency, PathBuf>> = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| AppError::io(dir, e))? {
        let path = entry.map_err(|e| AppError::io(dir, e))?.path();
        let Some(stem) = path.extension().filter(|e| *e == "csv").and(path.file_stem()).and_then(|s| s.to_str()) else {
            continue;
        };
        let Some((asset, tag)) = stem.rsplit_once('_') else { continue };
        if let Some(freq) = Frequency::from_tag(tag) {
            out.entry(asset.to_string()).or_default().insert(freq, path.clone());
        }
    }
    Ok(out)
}

fn parse_date(path: &Path, row: usize, s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|_| AppError::format(path, format!("row {row}: bad date {s:?}")))
}

fn parse_num(path: &Path, row: usize, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| AppError::format(path, format!("row {row}: bad number {s:?}")))
}

fn write_matrix(path: &Path, dates: &[NaiveDate], assets: &[String], values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["date".to_string()];
    header.extend(assets.iter().cloned());
    w.write_record(&header).map_err(csv_err(path))?;
    let m = assets.len();
    for (d, date) in dates.iter().enumerate() {
        let mut rec = vec![date.to_string()];
        rec.extend(values[d * m..(d + 1) * m].iter().map(|v| num(*v)));
        w.write_record(&rec).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

type Matrix = (Vec<NaiveDate>, Vec<String>, Vec<f64>);

fn read_matrix(path: &Path) -> Result<Matrix> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.get(0) != Some("date") {
        return Err(AppError::format(path, "first column must be date"));
    }
    let assets: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let (mut dates, mut values) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        if rec.len() != assets.len() + 1 {
            return Err(AppError::format(path, format!("row {i}: expected {} fields", assets.len() + 1)));
        }
        dates.push(parse_date(path, i, &rec[0])?);
        for s in rec.iter().skip(1) {
            values.push(parse_num(path, i, s)?);
        }
    }
    Ok((dates, assets, values))
}

pub fn write_panel(path: &Path, panel: &ReturnsPanel) -> Result<()> {
    write_matrix(path, panel.dates(), panel.assets(), panel.values())
}

pub fn read_panel(path: &Path) -> Result<ReturnsPanel> {
    let (d, a, v) = read_matrix(path)?;
    ReturnsPanel::new(d, a, v).map_err(|source| AppError::Data { path: path.to_path_buf(), source })
}

pub fn write_positions(path: &Path, positions: &PositionsMatrix) -> Result<()> {
    write_matrix(path, positions.dates(), positions.assets(), positions.values())
}

pub fn read_positions(path: &Path) -> Result<PositionsMatrix> {
    let (d, a, v) = read_matrix(path)?;
    PositionsMatrix::new(d, a, v).map_err(|source| AppError::Data { path: path.to_path_buf(), source })
}

/// `date,pnl,cum_pnl`, one row per pnl date.
pub fn write_pnl(path: &Path, result: &BacktestResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["date", "pnl", "cum_pnl"]).map_err(csv_err(path))?;
    for ((d, p), c) in result.pnl.dates.iter().zip(&result.pnl.values).zip(&result.cum_pnl) {
        w.write_record([d.to_string(), num(*p), num(*c)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

const MAGIC: &[u8; 4] = b"AFMD";
const VERSION: u16 = 1;

/// Binary checkpoint: per model, `AFMD`, version `u16`, kind `u8`, dim count
/// `u32`, dims as `u32`, seed `u64`, weight count `u64`, then the weights as
/// `f64`. All little-endian. Ensembles are the records back to back.
pub fn encode_models(models: &[ModelParams]) -> Vec<u8> {
    let mut out = Vec::new();
    for m in models {
        let dims = m.arch.dims();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(m.kind().code());
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&m.seed.to_le_bytes());
        out.extend_from_slice(&(m.weights.len() as u64).to_le_bytes());
        for w in &m.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.buf.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|s| s.try_into().expect("length checked"))
    }
}

pub fn decode_models(bytes: &[u8]) -> std::result::Result<Vec<ModelParams>, String> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    let mut models = Vec::new();
    let truncated = || "truncated checkpoint".to_string();
    while cur.pos < bytes.len() {
        if cur.take(4) != Some(MAGIC.as_slice()) {
            return Err(format!("bad magic at byte {}", cur.pos.saturating_sub(4)));
        }
        let version = u16::from_le_bytes(cur.array().ok_or_else(truncated)?);
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let code = cur.array::<1>().ok_or_else(truncated)?[0];
        let kind = ModelKind::from_code(code).ok_or_else(|| format!("unknown model kind {code}"))?;
        let n_dims = u32::from_le_bytes(cur.array().ok_or_else(truncated)?) as usize;
        let dims = (0..n_dims)
            .map(|_| cur.array().map(|b| u32::from_le_bytes(b) as usize).ok_or_else(truncated))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let seed = u64::from_le_bytes(cur.array().ok_or_else(truncated)?);
        let n = u64::from_le_bytes(cur.array().ok_or_else(truncated)?) as usize;
        let raw = cur.take(n.checked_mul(8).ok_or_else(truncated)?).ok_or_else(truncated)?;
        let weights = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        let arch = Architecture::from_dims(kind, &dims).map_err(|e| e.to_string())?;
        models.push(ModelParams::from_weights(arch, weights, seed).map_err(|e| e.to_string())?);
    }
    if models.is_empty() {
        return Err("empty checkpoint".into());
    }
    Ok(models)
}

pub fn write_models(path: &Path, models: &[ModelParams]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, encode_models(models)).map_err(|e| AppError::io(path, e))
}

pub fn read_models(path: &Path) -> Result<Vec<ModelParams>> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode_models(&bytes).map_err(|reason| AppError::format(path, reason))
}

/// Path of the JSON sidecar that accompanies a checkpoint.
pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| AppError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| AppError::Json { path: path.to_path_buf(), source })
}

/// `manifest.json` of an alpha stack directory. Paths are relative to the directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackManifest {
    /// Returns panel the positions were built against, if bundled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel: Option<String>,
    pub alphas: Vec<StackEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackEntry {
    pub name: String,
    pub file: String,
}

pub const STACK_MANIFEST: &str = "manifest.json";

/// Writes positions and a manifest into `dir`.
pub fn write_stack(dir: &Path, stack: &AlphaStack, panel: Option<&ReturnsPanel>) -> Result<()> {
    let mut manifest = StackManifest { panel: None, alphas: Vec::new() };
    if let Some(p) = panel {
        write_panel(&dir.join("panel.csv"), p)?;
        manifest.panel = Some("panel.csv".into());
    }
    for (name, alpha) in stack.names().iter().zip(stack.alphas()) {
        let file = format!("{name}.csv");
        write_positions(&dir.join(&file), alpha)?;
        manifest.alphas.push(StackEntry { name: name.clone(), file });
    }
    write_json(&dir.join(STACK_MANIFEST), &manifest)
}

pub fn load_stack(dir: &Path) -> Result<(AlphaStack, Option<ReturnsPanel>)> {
    let manifest_path = dir.join(STACK_MANIFEST);
    let manifest: StackManifest = read_json(&manifest_path)?;
    let mut names = Vec::new();
    let mut alphas = Vec::new();
    for e in &manifest.alphas {
        names.push(e.name.clone());
        alphas.push(read_positions(&dir.join(&e.file))?);
    }
    let stack = AlphaStack::new(names, alphas).map_err(|source| AppError::Data { path: manifest_path, source })?;
    let panel = manifest.panel.as_ref().map(|p| read_panel(&dir.join(p))).transpose()?;
    Ok((stack, panel))
}
