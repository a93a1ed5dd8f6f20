//! Combining several alphas into one portfolio: an equal-weight baseline and
//! weights learned per alpha or per (alpha, asset) cell.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::alphas::{l1_normalize, PositionsMatrix};
use crate::backtest::{align, daily_pnl};
use crate::data::ReturnsPanel;
use crate::error::{Error, Result};
use crate::models::windows::model_input;
use crate::models::{train_with_head, ModelParams, ModelSpec, PositionHead, Sample, SequenceLayout, TrainConfig};

/// `L >= 2` alphas over identical dates and assets.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaStack {
    names: Vec<String>,
    alphas: Vec<PositionsMatrix>,
}

impl AlphaStack {
    pub fn new(names: Vec<String>, alphas: Vec<PositionsMatrix>) -> Result<Self> {
        if names.len() != alphas.len() {
            return Err(Error::LengthMismatch { left: names.len(), right: alphas.len() });
        }
        if alphas.len() < 2 {
            return Err(Error::InsufficientData { needed: 2, got: alphas.len() });
        }
        let first = &alphas[0];
        for a in &alphas[1..] {
            if a.assets() != first.assets() {
                return Err(Error::AssetMismatch);
            }
            if a.dates() != first.dates() {
                let bad = a.dates().iter().zip(first.dates()).find(|(x, y)| x != y).map(|p| *p.0);
                let date = bad.or_else(|| a.dates().last().copied()).unwrap_or_default();
                return Err(Error::DateMisalignment(date));
            }
        }
        Ok(Self { names, alphas })
    }

    /// Expands every alpha onto the panel's dates (missing rows are zero).
    pub fn aligned_to(&self, panel: &ReturnsPanel) -> Result<Self> {
        let alphas = self.alphas.iter().map(|a| align(a, panel)).collect::<Result<_>>()?;
        Ok(Self { names: self.names.clone(), alphas })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn alphas(&self) -> &[PositionsMatrix] {
        &self.alphas
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    fn template(&self) -> &PositionsMatrix {
        &self.alphas[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum WeightKind {
    #[default]
    EqualWeighted,
    /// One weight per alpha per day.
    SingleWeighted,
    /// One weight per alpha and asset per day.
    PointWiseWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct WeightScheme {
    pub kind: WeightKind,
    /// Days of constituent pnl the combiner model sees.
    pub lookback: usize,
    /// L1-normalize each combined row.
    pub normalize: bool,
}

impl Default for WeightScheme {
    fn default() -> Self {
        Self { kind: WeightKind::EqualWeighted, lookback: 20, normalize: true }
    }
}

impl WeightScheme {
    pub fn validate(&self) -> Result<()> {
        if self.kind != WeightKind::EqualWeighted && self.lookback < 2 {
            return Err(Error::InvalidConfig("learned weights need lookback >= 2".into()));
        }
        Ok(())
    }

    fn outputs(&self, alphas: usize, assets: usize) -> usize {
        match self.kind {
            WeightKind::PointWiseWeighted => alphas * assets,
            _ => alphas,
        }
    }
}

fn finish(stack: &AlphaStack, values: Vec<f64>, normalize: bool) -> Result<PositionsMatrix> {
    let t = stack.template();
    let out = PositionsMatrix::new(t.dates().to_vec(), t.assets().to_vec(), values)?;
    Ok(if normalize { l1_normalize(&out) } else { out })
}

/// Mean of the alphas, row by row.
pub fn combine_equal(stack: &AlphaStack, normalize: bool) -> Result<PositionsMatrix> {
    let w = 1.0 / stack.len() as f64;
    let mut values = vec![0.0; stack.template().values().len()];
    for a in stack.alphas() {
        values.iter_mut().zip(a.values()).for_each(|(v, x)| *v += w * x);
    }
    finish(stack, values, normalize)
}

/// `sum_l w_l(d) * alpha_l(d)` with `weights` row-major `dates × L`.
pub fn combine_single(stack: &AlphaStack, weights: &[f64], normalize: bool) -> Result<PositionsMatrix> {
    let (n, l, m) = (stack.template().n_dates(), stack.len(), stack.template().n_assets());
    if weights.len() != n * l {
        return Err(Error::WeightShapeMismatch { expected: n * l, got: weights.len() });
    }
    let mut values = vec![0.0; n * m];
    for d in 0..n {
        for (k, a) in stack.alphas().iter().enumerate() {
            let w = weights[d * l + k];
            values[d * m..(d + 1) * m].iter_mut().zip(a.row(d)).for_each(|(v, x)| *v += w * x);
        }
    }
    finish(stack, values, normalize)
}

/// `sum_l W_{l,a}(d) * alpha_l(d)_a` with `weights` row-major `dates × L × M`.
pub fn combine_pointwise(stack: &AlphaStack, weights: &[f64], normalize: bool) -> Result<PositionsMatrix> {
    let (n, l, m) = (stack.template().n_dates(), stack.len(), stack.template().n_assets());
    if weights.len() != n * l * m {
        return Err(Error::WeightShapeMismatch { expected: n * l * m, got: weights.len() });
    }
    let mut values = vec![0.0; n * m];
    for d in 0..n {
        for (k, a) in stack.alphas().iter().enumerate() {
            let w = &weights[(d * l + k) * m..(d * l + k + 1) * m];
            for (j, x) in a.row(d).iter().enumerate() {
                values[d * m + j] += w[j] * x;
            }
        }
    }
    finish(stack, values, normalize)
}

/// Maps combiner outputs to portfolio positions for one day; linear in the outputs.
struct MixHead<'a> {
    rows: Vec<Vec<&'a [f64]>>,
    pointwise: bool,
}

impl PositionHead for MixHead<'_> {
    fn positions(&self, sample: usize, output: &[f64]) -> Vec<f64> {
        mix(&self.rows[sample], output, self.pointwise)
    }

    fn pullback(&self, sample: usize, _: &[f64], grad_positions: &[f64]) -> Vec<f64> {
        let rows = &self.rows[sample];
        if self.pointwise {
            rows.iter().flat_map(|r| r.iter().zip(grad_positions).map(|(x, g)| x * g)).collect()
        } else {
            rows.iter().map(|r| r.iter().zip(grad_positions).map(|(x, g)| x * g).sum()).collect()
        }
    }
}

fn mix(rows: &[&[f64]], w: &[f64], pointwise: bool) -> Vec<f64> {
    let m = rows.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; m];
    for (k, r) in rows.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            out[j] += if pointwise { w[k * m + j] } else { w[k] } * x;
        }
    }
    out
}

/// A trained weight model for one stack layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Combiner {
    pub scheme: WeightScheme,
    pub model: ModelParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinerReport {
    pub combiner: Combiner,
    pub loss_trace: Vec<f64>,
}

/// Constituents with L1-normalized rows and their daily pnl, both on the panel's dates.
/// `pnl[l][i]` is alpha `l`'s pnl realized on panel date `i` (0 for `i = 0`).
fn prepared(stack: &AlphaStack, panel: &ReturnsPanel) -> Result<(Vec<PositionsMatrix>, Vec<Vec<f64>>)> {
    let alphas: Vec<PositionsMatrix> =
        stack.alphas().iter().map(|a| align(a, panel).map(|x| l1_normalize(&x))).collect::<Result<_>>()?;
    let pnl = alphas
        .iter()
        .map(|a| {
            let mut p = vec![0.0];
            p.extend(daily_pnl(a, panel, 1));
            p
        })
        .collect();
    Ok((alphas, pnl))
}

/// Model input for decision row `d`: each alpha's pnl over `d - lookback + 1 ..= d`, step-major.
fn combiner_input(pnl: &[Vec<f64>], d: usize, lookback: usize) -> Result<Vec<f64>> {
    let windows: Vec<&[f64]> = pnl.iter().map(|p| &p[d + 1 - lookback..=d]).collect();
    model_input(&windows, &SequenceLayout::Scalar)
}

/// Trains a model that reads trailing constituent pnl and emits mixing
/// weights, optimizing `config.loss` on the combined portfolio's next-day pnl.
///
/// Decision rows `lookback ..= n - 2` of the panel form the training set.
pub fn train_combiner(
    stack: &AlphaStack,
    panel: &ReturnsPanel,
    scheme: &WeightScheme,
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<CombinerReport> {
    scheme.validate()?;
    if scheme.kind == WeightKind::EqualWeighted {
        return Err(Error::InvalidConfig("equal weights are not trained".into()));
    }
    let (alphas, pnl) = prepared(stack, panel)?;
    let (n, l, m) = (panel.n_dates(), stack.len(), panel.n_assets());
    if n < scheme.lookback + 2 {
        return Err(Error::InsufficientData { needed: scheme.lookback + 2, got: n });
    }
    let decision: Vec<usize> = (scheme.lookback..n - 1).collect();
    let samples = decision
        .iter()
        .map(|&d| Ok(Sample { input: combiner_input(&pnl, d, scheme.lookback)?, target: panel.row(d + 1).to_vec() }))
        .collect::<Result<Vec<_>>>()?;
    let head = MixHead {
        rows: decision.iter().map(|&d| alphas.iter().map(|a| a.row(d)).collect()).collect(),
        pointwise: scheme.kind == WeightKind::PointWiseWeighted,
    };
    let spec = ModelSpec { sequence: SequenceLayout::Scalar, ..spec.clone() };
    let arch = spec.architecture(scheme.lookback, l, scheme.outputs(l, m))?;
    let report = train_with_head(ModelParams::init(arch, config.seed)?, &samples, config, &head)?;
    Ok(CombinerReport { combiner: Combiner { scheme: *scheme, model: report.params }, loss_trace: report.loss_trace })
}

impl Combiner {
    /// Weights for every panel date, row-major `dates × outputs`. Rows without
    /// a full lookback of pnl are zero.
    pub fn weights(&self, stack: &AlphaStack, panel: &ReturnsPanel) -> Result<Vec<f64>> {
        let (_, pnl) = prepared(stack, panel)?;
        let width = self.scheme.outputs(stack.len(), panel.n_assets());
        if self.model.arch.outputs() != width {
            return Err(Error::WeightShapeMismatch { expected: width, got: self.model.arch.outputs() });
        }
        let mut out = vec![0.0; panel.n_dates() * width];
        for d in self.scheme.lookback..panel.n_dates() {
            let w = self.model.forward(&combiner_input(&pnl, d, self.scheme.lookback)?)?;
            out[d * width..(d + 1) * width].copy_from_slice(&w);
        }
        Ok(out)
    }

    /// Portfolio positions on the panel's dates.
    pub fn positions(&self, stack: &AlphaStack, panel: &ReturnsPanel) -> Result<PositionsMatrix> {
        let weights = self.weights(stack, panel)?;
        let (alphas, _) = prepared(stack, panel)?;
        let normalized = AlphaStack { names: stack.names.clone(), alphas };
        match self.scheme.kind {
            WeightKind::PointWiseWeighted => combine_pointwise(&normalized, &weights, self.scheme.normalize),
            _ => combine_single(&normalized, &weights, self.scheme.normalize),
        }
    }
}

/// Positions under `scheme`; learned schemes need a trained combiner.
pub fn combine(
    stack: &AlphaStack,
    panel: &ReturnsPanel,
    scheme: &WeightScheme,
    combiner: Option<&Combiner>,
) -> Result<PositionsMatrix> {
    match (scheme.kind, combiner) {
        (WeightKind::EqualWeighted, _) => combine_equal(&stack.aligned_to(panel)?, scheme.normalize),
        (_, Some(c)) => c.positions(stack, panel),
        (_, None) => Err(Error::InvalidConfig("learned weights need a trained combiner".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::date_of;
    use crate::losses::{LossKind, LossSpec};
    use crate::models::ModelKind;
    use alloc::string::ToString;

    fn pm(rows: &[&[f64]]) -> PositionsMatrix {
        let dates = (0..rows.len()).map(|i| date_of(i as i64 * 86_400)).collect();
        let assets = (0..rows[0].len()).map(|a| alloc::format!("A{a}")).collect();
        PositionsMatrix::new(dates, assets, rows.concat()).unwrap()
    }

    fn stack(alphas: Vec<PositionsMatrix>) -> AlphaStack {
        let names = (0..alphas.len()).map(|i| i.to_string()).collect();
        AlphaStack::new(names, alphas).unwrap()
    }

    #[test]
    fn identical_alphas_average_to_themselves() {
        let a = pm(&[&[0.2, -0.6], &[1.0, 1.0]]);
        let out = combine_equal(&stack(vec![a.clone(), a.clone(), a.clone()]), true).unwrap();
        assert_eq!(out, l1_normalize(&a));
    }

    #[test]
    fn opposite_alphas_cancel() {
        let a = pm(&[&[0.5, -0.5]]);
        let out = combine_equal(&stack(vec![a.clone(), a.scaled(-1.0)]), true).unwrap();
        assert_eq!(out.zero_rows(), vec![0]);
    }

    #[test]
    fn hand_averaged_three() {
        let s = stack(vec![pm(&[&[0.3, 0.0]]), pm(&[&[0.0, 0.6]]), pm(&[&[-0.3, 0.3]])]);
        let out = combine_equal(&s, false).unwrap();
        assert!((out.get(0, 0) - 0.0).abs() < 1e-15);
        assert!((out.get(0, 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_weights() {
        let s = stack(vec![pm(&[&[1.0, 2.0], &[3.0, 4.0]]), pm(&[&[5.0, 6.0], &[7.0, 8.0]])]);
        let one_hot = combine_single(&s, &[0.0, 1.0, 0.0, 1.0], false).unwrap();
        assert_eq!(one_hot, s.alphas()[1]);
        let uniform = combine_single(&s, &[0.5; 4], true).unwrap();
        assert_eq!(uniform, combine_equal(&s, true).unwrap());
        // day 0: 2*[1,2] - 1*[5,6] = [-3,-2]; day 1: 0.5*[3,4] + 0.5*[7,8] = [5,6]
        let hand = combine_single(&s, &[2.0, -1.0, 0.5, 0.5], false).unwrap();
        assert_eq!(hand.values(), &[-3.0, -2.0, 5.0, 6.0]);
        assert!(matches!(combine_single(&s, &[1.0; 3], false), Err(Error::WeightShapeMismatch { .. })));
    }

    #[test]
    fn pointwise_weights() {
        let s = stack(vec![pm(&[&[1.0, 2.0]]), pm(&[&[5.0, 6.0]])]);
        let ones = combine_pointwise(&s, &[1.0; 4], false).unwrap();
        assert_eq!(ones.values(), &[6.0, 8.0]);
        let cell = combine_pointwise(&s, &[0.0, 0.0, 0.0, 1.0], false).unwrap();
        assert_eq!(cell.values(), &[0.0, 6.0]);
        let broadcast = combine_pointwise(&s, &[0.3, 0.3, -2.0, -2.0], true).unwrap();
        assert_eq!(broadcast, combine_single(&s, &[0.3, -2.0], true).unwrap());
        assert!(matches!(combine_pointwise(&s, &[1.0; 2], false), Err(Error::WeightShapeMismatch { .. })));
    }

    #[test]
    fn stack_validation() {
        let a = pm(&[&[1.0, 2.0]]);
        assert!(AlphaStack::new(vec!["a".into()], vec![a.clone()]).is_err());
        let b = pm(&[&[1.0, 2.0], &[1.0, 2.0]]);
        assert!(matches!(AlphaStack::new(vec!["a".into(), "b".into()], vec![a, b]), Err(Error::DateMisalignment(_))));
    }

    #[test]
    fn head_pullback_is_transpose() {
        let r0: &[f64] = &[1.0, -2.0];
        let r1: &[f64] = &[0.5, 3.0];
        for pointwise in [false, true] {
            let head = MixHead { rows: vec![vec![r0, r1]], pointwise };
            let n = if pointwise { 4 } else { 2 };
            let w: Vec<f64> = (0..n).map(|i| 0.1 * i as f64 - 0.2).collect();
            let g = [0.7, -1.1];
            let p = head.positions(0, &w);
            let back = head.pullback(0, &w, &g);
            // <g, P w> == <P^T g, w>
            let lhs: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
            let rhs: f64 = back.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn combiner_trains_and_predicts() {
        let n = 40;
        let dates: Vec<_> = (0..n).map(|i| date_of(i as i64 * 86_400)).collect();
        let values: Vec<f64> = (0..n * 2).map(|k| 0.01 * libm::cos(k as f64 * 1.3)).collect();
        let panel = ReturnsPanel::new(dates, vec!["A".into(), "B".into()], values).unwrap();
        let s = stack(vec![crate::alphas::reversion(&panel), crate::alphas::buy_and_hold(&panel)]);
        let spec = ModelSpec { kind: ModelKind::Lstm, hidden_dim: 3, ..ModelSpec::default() };
        let cfg = TrainConfig { epochs: 3, batch_window: 8, loss: LossSpec::new(LossKind::Sharpe), ..TrainConfig::default() };
        for kind in [WeightKind::SingleWeighted, WeightKind::PointWiseWeighted] {
            let scheme = WeightScheme { kind, lookback: 5, normalize: true };
            let rep = train_combiner(&s, &panel, &scheme, &spec, &cfg).unwrap();
            assert_eq!(rep.loss_trace.len(), 3);
            let pos = combine(&s, &panel, &scheme, Some(&rep.combiner)).unwrap();
            assert_eq!(pos.n_dates(), n);
            assert_eq!(pos.zero_rows()[..5], [0, 1, 2, 3, 4]);
        }
    }
}
