//! Training objectives over predicted positions and realized returns.
//!
//! Every loss is minimized. Objectives that are naturally maximized (Sharpe,
//! pnl) carry a negative sign. Each evaluation returns the value together
//! with the analytic gradient with respect to the positions.
//!
//! Losses come in two flavours:
//!
//! * the plain form `(positions, returns)` where the pnl vector is the
//!   element-wise product `positions[i] * returns[i]`;
//! * the grouped form used for multi-asset batches, where both vectors are
//!   row-major `days × width` and the pnl of a day is the row's dot product.
//!   With `width == 1` the two coincide.
//!
//! Mean, standard deviation and drawdown are statistics of the pnl series
//! within the batch. The squared-deviation term is averaged over elements.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::stats::{mean, sign, std_pop};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LossKind {
    Mse,
    Pnl,
    Sharpe,
    ModSharpe,
    Mdd,
    LogMdd,
    RiskAdj,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        LossKind::Mse,
        LossKind::Pnl,
        LossKind::Sharpe,
        LossKind::ModSharpe,
        LossKind::Mdd,
        LossKind::LogMdd,
        LossKind::RiskAdj,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LossKind::Mse => "MSELoss",
            LossKind::Pnl => "PnLLoss",
            LossKind::Sharpe => "SharpeLoss",
            LossKind::ModSharpe => "ModSharpeLoss",
            LossKind::Mdd => "MDDLoss",
            LossKind::LogMdd => "LogMDDLoss",
            LossKind::RiskAdj => "RiskAdjLoss",
        }
    }

    /// Losses built on drawdown are only piecewise differentiable.
    pub fn is_piecewise(self) -> bool {
        matches!(self, LossKind::Mdd | LossKind::LogMdd | LossKind::RiskAdj)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct LossSpec {
    pub kind: LossKind,
    /// Added to the pnl standard deviation in Sharpe denominators.
    pub epsilon: f64,
    /// Added inside the logarithm of the modified Sharpe loss.
    pub epsilon_log: f64,
    /// Drawdown weight of the risk-adjusted loss.
    pub riskadj_lambda: f64,
    /// Squared-deviation weight of the risk-adjusted loss.
    pub riskadj_gamma: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self { kind: LossKind::Mse, epsilon: 1e-8, epsilon_log: 1e-12, riskadj_lambda: 0.3, riskadj_gamma: 0.01 }
    }
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.epsilon_log > 0.0) {
            return Err(Error::InvalidConfig("loss epsilons must be positive".into()));
        }
        Ok(())
    }

    /// Evaluates with element-wise pnl.
    pub fn eval(&self, positions: &[f64], returns: &[f64]) -> Result<LossEval> {
        self.eval_grouped(positions, returns, 1)
    }

    /// Evaluates a `days × width` batch whose daily pnl is the row dot product.
    pub fn eval_grouped(&self, positions: &[f64], returns: &[f64], width: usize) -> Result<LossEval> {
        self.validate()?;
        let batch = Batch::new(positions, returns, width)?;
        let (value, grad) = match self.kind {
            LossKind::Mse => mse_term(&batch),
            LossKind::Pnl => pnl_term(&batch),
            LossKind::Sharpe => {
                let (v, dp) = sharpe_term(&batch.pnl, self.epsilon);
                (v, batch.chain(&dp))
            }
            LossKind::ModSharpe => modsharpe_term(&batch, self.epsilon, self.epsilon_log)?,
            LossKind::Mdd => {
                let (v, dp) = drawdown_term(&batch.pnl);
                (v, batch.chain(&dp))
            }
            LossKind::LogMdd => {
                let (v, dp) = drawdown_term(&batch.pnl);
                let scale = 1.0 / (1.0 + v);
                let dp: Vec<f64> = dp.iter().map(|d| d * scale).collect();
                (libm::log1p(v), batch.chain(&dp))
            }
            LossKind::RiskAdj => {
                let (vp, mut g) = pnl_term(&batch);
                let (vd, dp) = drawdown_term(&batch.pnl);
                let gd = batch.chain(&dp);
                let (vm, gm) = mse_term(&batch);
                let (lambda, gamma) = (self.riskadj_lambda, self.riskadj_gamma);
                for ((g, d), m) in g.iter_mut().zip(&gd).zip(&gm) {
                    *g += lambda * d + gamma * m;
                }
                (vp + lambda * vd + gamma * vm, g)
            }
        };
        Ok(LossEval { value, grad })
    }
}

/// Loss value and its gradient with respect to the positions.
#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossEval {
    pub fn zero(len: usize) -> Self {
        Self { value: 0.0, grad: vec![0.0; len] }
    }
}

struct Batch<'a> {
    positions: &'a [f64],
    returns: &'a [f64],
    width: usize,
    pnl: Vec<f64>,
}

impl<'a> Batch<'a> {
    fn new(positions: &'a [f64], returns: &'a [f64], width: usize) -> Result<Self> {
        if positions.len() != returns.len() {
            return Err(Error::LengthMismatch { left: positions.len(), right: returns.len() });
        }
        if width == 0 || !positions.len().is_multiple_of(width) {
            return Err(Error::DimensionMismatch { expected: width, got: positions.len() });
        }
        let days = positions.len() / width;
        if days < 2 {
            return Err(Error::InsufficientRows { needed: 2, got: days });
        }
        let pnl = positions
            .chunks_exact(width)
            .zip(returns.chunks_exact(width))
            .map(|(a, r)| a.iter().zip(r).map(|(x, y)| x * y).sum())
            .collect();
        Ok(Self { positions, returns, width, pnl })
    }

    fn days(&self) -> usize {
        self.pnl.len()
    }

    /// Pulls a gradient over daily pnl back to the positions.
    fn chain(&self, dpnl: &[f64]) -> Vec<f64> {
        self.returns
            .iter()
            .enumerate()
            .map(|(k, r)| dpnl[k / self.width] * r)
            .collect()
    }
}

fn mse_term(b: &Batch) -> (f64, Vec<f64>) {
    let n = b.positions.len() as f64;
    let mut value = 0.0;
    let grad = b
        .positions
        .iter()
        .zip(b.returns)
        .map(|(a, r)| {
            let d = a - r;
            value += d * d;
            2.0 * d / n
        })
        .collect();
    (value / n, grad)
}

fn pnl_term(b: &Batch) -> (f64, Vec<f64>) {
    let n = b.days() as f64;
    (-mean(&b.pnl), b.returns.iter().map(|r| -(r / n)).collect())
}

/// `-mean / (std + eps)` and its gradient over pnl.
fn sharpe_term(pnl: &[f64], eps: f64) -> (f64, Vec<f64>) {
    let n = pnl.len() as f64;
    let m = mean(pnl);
    let s = std_pop(pnl, m);
    let denom = s + eps;
    let grad = pnl
        .iter()
        .map(|p| {
            let ds = if s > 0.0 { (p - m) / (n * s) } else { 0.0 };
            -((1.0 / n) / denom - m * ds / (denom * denom))
        })
        .collect();
    (-m / denom, grad)
}

fn modsharpe_term(b: &Batch, eps: f64, eps_log: f64) -> Result<(f64, Vec<f64>)> {
    let (mse, gmse) = mse_term(b);
    if mse == 0.0 {
        return Err(Error::DegenerateInput("positions equal returns exactly"));
    }
    let (neg_sharpe, dneg) = sharpe_term(&b.pnl, eps);
    let sharpe = -neg_sharpe;
    let log_mse = libm::log(mse + eps_log);
    let gs = b.chain(&dneg);
    let grad = gmse
        .iter()
        .zip(&gs)
        .map(|(gm, gs)| sharpe * gm / (mse + eps_log) - log_mse * gs)
        .collect();
    Ok((log_mse * sharpe, grad))
}

/// Drawdown magnitude of the cumulative pnl path (starting from 0) and its
/// subgradient: `-1` on days in `(peak, trough]`, zero elsewhere.
/// Ties resolve to the earliest trough, then the earliest peak.
fn drawdown_term(pnl: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; pnl.len()];
    let (value, peak, trough) = drawdown_extent(pnl);
    if value > 0.0 {
        for g in &mut grad[peak..=trough] {
            *g = -1.0;
        }
    }
    (value, grad)
}

/// Returns `(magnitude, first day after the peak, trough day)`.
pub(crate) fn drawdown_extent(pnl: &[f64]) -> (f64, usize, usize) {
    let mut cum = 0.0;
    let mut running_max = 0.0_f64;
    let mut worst = 0.0_f64;
    let mut trough = 0;
    let mut levels = Vec::with_capacity(pnl.len());
    for (t, &p) in pnl.iter().enumerate() {
        cum += p;
        levels.push(cum);
        running_max = running_max.max(cum);
        let dd = cum - running_max;
        if dd < worst {
            worst = dd;
            trough = t;
        }
    }
    if worst == 0.0 {
        return (0.0, 0, 0);
    }
    // the peak is the earliest level (the zero origin included) reaching the running max at the trough
    let peak_level = levels[..=trough].iter().copied().fold(0.0_f64, f64::max);
    let start = if peak_level == 0.0 {
        0
    } else {
        levels.iter().position(|&l| l == peak_level).map_or(0, |i| i + 1)
    };
    (-worst, start, trough)
}

/// Turnover regularizer band and strength.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TvrRegSpec {
    pub strength: f64,
    pub top: f64,
    pub bottom: f64,
    /// Floor of each hinge; 0 gives a standard hinge, 1 the literal `max(1, ·)` form.
    pub hinge_floor: f64,
    /// Measure turnover on L1-normalized rows, matching the normalized backtest.
    pub normalize_rows: bool,
}

impl Default for TvrRegSpec {
    fn default() -> Self {
        Self { strength: 1.0, top: 1.0, bottom: 0.3, hinge_floor: 0.0, normalize_rows: true }
    }
}

impl TvrRegSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bottom > self.top {
            return Err(Error::InvalidConfig("turnover band bottom exceeds top".into()));
        }
        if !(self.strength >= 0.0) {
            return Err(Error::InvalidConfig("turnover strength must be non-negative".into()));
        }
        Ok(())
    }

    /// Penalty for a given mean daily turnover, and its derivative in `tvr`.
    pub fn penalty(&self, tvr: f64) -> (f64, f64) {
        let upper = tvr - self.top;
        let lower = self.bottom - tvr;
        let value = self.strength * (upper.max(self.hinge_floor) + lower.max(self.hinge_floor));
        let mut slope = 0.0;
        if upper > self.hinge_floor {
            slope += self.strength;
        }
        if lower > self.hinge_floor {
            slope -= self.strength;
        }
        (value, slope)
    }
}

/// Hinge penalty on the mean daily turnover of a `days × width` position window.
pub fn tvr_reg(window: &[f64], width: usize, spec: &TvrRegSpec) -> Result<LossEval> {
    spec.validate()?;
    if width == 0 || !window.len().is_multiple_of(width) {
        return Err(Error::DimensionMismatch { expected: width, got: window.len() });
    }
    let days = window.len() / width;
    if days < 2 {
        return Err(Error::InsufficientRows { needed: 2, got: days });
    }
    let mut rows = window.to_vec();
    let mut norms = vec![1.0; days];
    if spec.normalize_rows {
        for (row, norm) in rows.chunks_exact_mut(width).zip(norms.iter_mut()) {
            *norm = row.iter().map(|v| v.abs()).sum();
            if *norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= *norm);
            }
        }
    }
    let pairs = (days - 1) as f64;
    let mut total = 0.0;
    let mut gu = vec![0.0; window.len()];
    for d in 1..days {
        for a in 0..width {
            let diff = rows[d * width + a] - rows[(d - 1) * width + a];
            total += diff.abs();
            let s = sign(diff) / pairs;
            gu[d * width + a] += s;
            gu[(d - 1) * width + a] -= s;
        }
    }
    let tvr = total / pairs;
    let (value, slope) = spec.penalty(tvr);
    gu.iter_mut().for_each(|g| *g *= slope);

    if spec.normalize_rows {
        for (d, &norm) in norms.iter().enumerate().take(days) {
            let range = d * width..(d + 1) * width;
            if norm == 0.0 {
                gu[range].iter_mut().for_each(|g| *g = 0.0);
                continue;
            }
            let dot: f64 = gu[range.clone()].iter().zip(&rows[range.clone()]).map(|(g, u)| g * u).sum();
            for k in range {
                gu[k] = (gu[k] - sign(window[k]) * dot) / norm;
            }
        }
    }
    Ok(LossEval { value, grad: gu })
}

/// Mean daily turnover of a `days × width` window, optionally on normalized rows.
pub fn window_turnover(window: &[f64], width: usize, normalize_rows: bool) -> f64 {
    let mut rows = window.to_vec();
    if normalize_rows {
        rows.chunks_exact_mut(width).for_each(crate::alphas::normalize_row);
    }
    let t = crate::metrics::turnover_rows(&rows, width);
    if t.is_empty() { 0.0 } else { mean(&t) }
}

/// Element-wise sum of a loss and a regularizer.
pub fn combine(loss: &LossEval, reg: &LossEval) -> Result<LossEval> {
    if loss.grad.len() != reg.grad.len() {
        return Err(Error::LengthMismatch { left: loss.grad.len(), right: reg.grad.len() });
    }
    Ok(LossEval {
        value: loss.value + reg.value,
        grad: loss.grad.iter().zip(&reg.grad).map(|(a, b)| a + b).collect(),
    })
}

pub fn mse_loss(positions: &[f64], returns: &[f64]) -> Result<LossEval> {
    LossSpec::new(LossKind::Mse).eval(positions, returns)
}

pub fn pnl_loss(positions: &[f64], returns: &[f64]) -> Result<LossEval> {
    LossSpec::new(LossKind::Pnl).eval(positions, returns)
}

pub fn sharpe_loss(positions: &[f64], returns: &[f64]) -> Result<LossEval> {
    LossSpec::new(LossKind::Sharpe).eval(positions, returns)
}

pub fn modsharpe_loss(positions: &[f64], returns: &[f64]) -> Result<LossEval> {
    LossSpec::new(LossKind::ModSharpe).eval(positions, returns)
}

pub fn mdd_loss(positions: &[f64], returns: &[f64]) -> Result<LossEval> {
    LossSpec::new(LossKind::Mdd).eval(positions, returns)
}

pub fn logmdd_loss(positions: &[f64], returns: &[f64]) -> Result<LossEval> {
    LossSpec::new(LossKind::LogMdd).eval(positions, returns)
}

pub fn riskadj_loss(positions: &[f64], returns: &[f64], lambda: f64, gamma: f64) -> Result<LossEval> {
    LossSpec { kind: LossKind::RiskAdj, riskadj_lambda: lambda, riskadj_gamma: gamma, ..LossSpec::default() }
        .eval(positions, returns)
}
