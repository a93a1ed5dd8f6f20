use alphaforge_core::alphas::{l1_normalize, mean_reversion, reversion, PositionsMatrix};
use alphaforge_core::backtest::{run, BacktestConfig};
use alphaforge_core::data::ReturnsPanel;
use alphaforge_core::losses::{tvr_reg, window_turnover, LossKind, LossSpec, TvrRegSpec};
use alphaforge_core::metrics::{max_drawdown, sharpe_ratio, total_pnl, turnover};
use alphaforge_core::portfolio::{combine_equal, combine_pointwise, combine_single, AlphaStack};
use alphaforge_core::Error;
use chrono::NaiveDate;
use proptest::prelude::*;

fn dates(n: usize) -> Vec<NaiveDate> {
    NaiveDate::from_ymd_opt(2023, 1, 1).unwrap().iter_days().take(n).collect()
}

fn names(m: usize) -> Vec<String> {
    (0..m).map(|a| format!("A{a}")).collect()
}

fn brute_sharpe(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mut m = 0.0;
    for v in x {
        m += v;
    }
    m /= n;
    let mut var = 0.0;
    for v in x {
        var += (v - m) * (v - m);
    }
    n.sqrt() * m / (var / n).sqrt()
}

/// Worst drop between any two points of the equity curve, zero origin included.
fn brute_drawdown(x: &[f64]) -> f64 {
    let mut curve = vec![0.0];
    for v in x {
        curve.push(curve.last().unwrap() + v);
    }
    let mut worst = 0.0_f64;
    for i in 0..curve.len() {
        for j in i..curve.len() {
            worst = worst.min(curve[j] - curve[i]);
        }
    }
    worst
}

fn series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0..1.0f64, 2..=50)
}

fn matrix(max_days: usize, max_assets: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2..=max_days, 1..=max_assets).prop_flat_map(|(n, m)| (Just(m), prop::collection::vec(-1.0..1.0f64, n * m)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sharpe_matches_oracle(x in series()) {
        match sharpe_ratio(&x) {
            Ok(s) => prop_assert!((s - brute_sharpe(&x)).abs() < 1e-12),
            Err(e) => prop_assert_eq!(e, Error::ZeroVolatility),
        }
    }

    #[test]
    fn pnl_and_drawdown_match_oracle(x in series()) {
        let mut sum = 0.0;
        for v in &x {
            sum += v;
        }
        prop_assert!((total_pnl(&x) - sum).abs() < 1e-12);
        let dd = max_drawdown(&x);
        prop_assert!(dd <= 0.0);
        prop_assert!((dd - brute_drawdown(&x)).abs() < 1e-12);
    }

    #[test]
    fn turnover_matches_oracle((m, v) in matrix(20, 6)) {
        let n = v.len() / m;
        let p = PositionsMatrix::new(dates(n), names(m), v.clone()).unwrap();
        let t = turnover(&p).unwrap();
        prop_assert_eq!(t.len(), n - 1);
        for d in 1..n {
            let mut s = 0.0;
            for a in 0..m {
                s += (v[d * m + a] - v[(d - 1) * m + a]).abs();
            }
            prop_assert!((t[d - 1] - s).abs() < 1e-12);
            prop_assert!(t[d - 1] >= 0.0);
        }
    }

    #[test]
    fn normalization_is_idempotent((m, v) in matrix(10, 6)) {
        let p = PositionsMatrix::new(dates(v.len() / m), names(m), v).unwrap();
        let once = l1_normalize(&p);
        for d in 0..once.n_dates() {
            let norm: f64 = once.row(d).iter().map(|x| x.abs()).sum();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-12);
        }
        let twice = l1_normalize(&once);
        for (a, b) in once.values().iter().zip(twice.values()) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn backtest_matches_double_loop((m, v) in matrix(15, 5), seed in 0u64..1000) {
        let n = v.len() / m;
        let r: Vec<f64> = (0..n * m).map(|k| 0.01 * (((k as u64 * 7919 + seed) % 200) as f64 - 100.0) / 100.0).collect();
        let panel = ReturnsPanel::new(dates(n), names(m), r.clone()).unwrap();
        let pos = PositionsMatrix::new(dates(n), names(m), v.clone()).unwrap();
        let cfg = BacktestConfig { normalize: false, ..BacktestConfig::default() };
        let res = run(&pos, &panel, &cfg).unwrap();
        for i in 1..n {
            let mut s = 0.0;
            for a in 0..m {
                s += v[(i - 1) * m + a] * r[i * m + a];
            }
            prop_assert!((res.pnl.values[i - 1] - s).abs() < 1e-15);
        }
    }

    #[test]
    fn reversion_is_window_one_mean_reversion((m, v) in matrix(12, 4)) {
        let v: Vec<f64> = v.iter().map(|x| 0.1 * x).collect();
        let panel = ReturnsPanel::new(dates(v.len() / m), names(m), v).unwrap();
        prop_assert_eq!(reversion(&panel), mean_reversion(&panel, 1).unwrap());
    }

    #[test]
    fn sharpe_loss_ignores_scale(x in prop::collection::vec(-1.0..1.0f64, 5..30), c in 0.1..10.0f64) {
        let r: Vec<f64> = (0..x.len()).map(|i| 0.02 * ((i * 37 % 11) as f64 - 5.0)).collect();
        let spec = LossSpec::new(LossKind::Sharpe);
        let base = spec.eval(&x, &r).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let other = spec.eval(&scaled, &r).unwrap();
        prop_assume!(base.value.abs() > 1e-6);
        // only the epsilon in the denominator breaks invariance: relative drift <= eps * max(1, 1/c) / std
        let pnl: Vec<f64> = x.iter().zip(&r).map(|(a, b)| a * b).collect();
        let mean = pnl.iter().sum::<f64>() / pnl.len() as f64;
        let std = (pnl.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / pnl.len() as f64).sqrt();
        let bound = spec.epsilon * (1.0f64).max(1.0 / c) / std;
        prop_assert!(((other.value - base.value) / base.value).abs() <= 1.01 * bound + 1e-12);
        // scale invariance: the gradient is orthogonal to the positions
        let dot: f64 = base.grad.iter().zip(&x).map(|(g, p)| g * p).sum();
        let gn: f64 = base.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let xn: f64 = x.iter().map(|g| g * g).sum::<f64>().sqrt();
        prop_assert!(dot.abs() <= 1e-6 * gn * xn + 1e-12);
    }

    #[test]
    fn turnover_penalty_vanishes_inside_band((m, v) in matrix(10, 5)) {
        let t = window_turnover(&v, m, true);
        let spec = TvrRegSpec::default();
        let e = tvr_reg(&v, m, &spec).unwrap();
        if t > spec.bottom && t < spec.top {
            prop_assert_eq!(e.value, 0.0);
            prop_assert!(e.grad.iter().all(|g| *g == 0.0));
        } else {
            prop_assert!(e.value >= 0.0);
        }
    }

    #[test]
    fn combination_reductions((m, v) in matrix(8, 4), w in prop::collection::vec(-2.0..2.0f64, 3)) {
        let n = v.len() / m;
        let a = PositionsMatrix::new(dates(n), names(m), v.clone()).unwrap();
        let b = a.map_values(|x| x * x - 0.3);
        let c = a.map_values(|x| 0.5 - x);
        let stack = AlphaStack::new(names(3), vec![a, b, c]).unwrap();
        let uniform = vec![1.0 / 3.0; n * 3];
        prop_assert_eq!(combine_equal(&stack, true).unwrap(), combine_single(&stack, &uniform, true).unwrap());
        let per_day: Vec<f64> = (0..n).flat_map(|_| w.iter().copied()).collect();
        let broadcast: Vec<f64> = (0..n).flat_map(|_| w.iter().flat_map(|x| std::iter::repeat_n(*x, m))).collect();
        prop_assert_eq!(
            combine_single(&stack, &per_day, true).unwrap(),
            combine_pointwise(&stack, &broadcast, true).unwrap()
        );
    }

    #[test]
    fn portfolio_pnl_is_linear((m, v) in matrix(12, 4), w in prop::collection::vec(-2.0..2.0f64, 2)) {
        let n = v.len() / m;
        let r: Vec<f64> = (0..n * m).map(|k| 0.01 * ((k * 13 % 7) as f64 - 3.0)).collect();
        let panel = ReturnsPanel::new(dates(n), names(m), r).unwrap();
        let a = PositionsMatrix::new(dates(n), names(m), v).unwrap();
        let b = a.map_values(|x| x.sin());
        let stack = AlphaStack::new(names(2), vec![a.clone(), b.clone()]).unwrap();
        let per_day: Vec<f64> = (0..n).flat_map(|_| w.iter().copied()).collect();
        let combined = combine_single(&stack, &per_day, false).unwrap();
        let cfg = BacktestConfig { normalize: false, ..BacktestConfig::default() };
        let pc = run(&combined, &panel, &cfg).unwrap().pnl.values;
        let pa = run(&a, &panel, &cfg).unwrap().pnl.values;
        let pb = run(&b, &panel, &cfg).unwrap().pnl.values;
        for i in 0..pc.len() {
            prop_assert!((pc[i] - (w[0] * pa[i] + w[1] * pb[i])).abs() < 1e-12);
        }
    }
}
