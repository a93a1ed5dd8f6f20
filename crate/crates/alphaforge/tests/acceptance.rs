//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use alphaforge_core::alphas::{reversion, PositionsMatrix};
use alphaforge_core::backtest::{run, BacktestConfig};
use alphaforge_core::data::{ReturnsPanel, Scaling};
use alphaforge_core::experiment::PanelExperiment;
use alphaforge_core::gradcheck::ChainInstance;
use alphaforge_core::losses::{LossKind, LossSpec, TvrRegSpec};
use alphaforge_core::metrics::{max_drawdown, sharpe_ratio, total_pnl, turnover};
use alphaforge_core::models::{ModelKind, ModelSpec, TrainConfig};
use alphaforge_core::portfolio::combine_equal;
use alphaforge_core::sweep::{gaussian_pair, linear_fit, log_spaced, loss_sweep};
use alphaforge_core::synth::{asset_names, dates_from, independent_alphas, ArMarket};
use chrono::NaiveDate;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// 1. analytic vs central-difference gradients through every model and loss

fn gradients() -> Outcome {
    const H: f64 = 1e-6;
    const TOL: f64 = 1e-4;
    const N: usize = 100;
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut excluded = 0;
    let mut failures = Vec::new();
    for model in [ModelKind::Linear, ModelKind::Mlp, ModelKind::Lstm] {
        for loss in LossKind::ALL {
            let (mut accepted, mut seed) = (0, 0u64);
            while accepted < N && seed < 4 * N as u64 {
                seed += 1;
                let c = ChainInstance::random(model, seed).and_then(|i| i.check(LossSpec::new(loss), None, H));
                let c = match c {
                    Ok(c) => c,
                    Err(e) => {
                        failures.push(format!("{model:?}/{loss:?} seed {seed}: {e}"));
                        accepted += 1;
                        continue;
                    }
                };
                // drawdown-based losses are piecewise; skip instances within h of a kink
                if c.near_kink && loss.is_piecewise() {
                    excluded += 1;
                    continue;
                }
                if c.relative_error >= TOL {
                    failures.push(format!("{model:?}/{loss:?} seed {seed}: {:.2e}", c.relative_error));
                }
                worst = worst.max(c.relative_error);
                accepted += 1;
            }
            if accepted < N {
                failures.push(format!("{model:?}/{loss:?}: only {accepted} instances away from kinks"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "21 pairs x {N} instances, worst relative error {worst:.2e} (< {TOL:.0e}), {excluded} near-kink instances excluded, {:.0}s (< 120s){}",
            elapsed.as_secs_f64(),
            failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()
        ),
    )
}

// 2. metrics against brute-force implementations

fn brute_sharpe(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
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
    if var == 0.0 {
        return None;
    }
    Some(n.sqrt() * m / (var / n).sqrt())
}

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

fn metric_oracles() -> Outcome {
    let mut err = 0.0_f64;
    let mut mismatches = 0;
    for seed in 0..1000u64 {
        let n = 1 + (seed % 50) as usize;
        let m = 1 + (seed % 5) as usize;
        let (x, _) = gaussian_pair(n, 0.02, 1.0, seed);
        match (sharpe_ratio(&x).ok(), brute_sharpe(&x)) {
            (Some(a), Some(b)) => err = err.max((a - b).abs()),
            (None, None) => {}
            _ => mismatches += 1,
        }
        let mut sum = 0.0;
        for v in &x {
            sum += v;
        }
        err = err.max((total_pnl(&x) - sum).abs());
        err = err.max((max_drawdown(&x) - brute_drawdown(&x)).abs());

        // turnover and lagged pnl on an n x m positions matrix
        let (p, r) = gaussian_pair(n * m, 1.0, 0.02, seed + 10_000);
        let dates = dates_from(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), n);
        let pos = PositionsMatrix::new(dates.clone(), asset_names(m), p.clone()).unwrap();
        if n >= 2 {
            let t = turnover(&pos).unwrap();
            for d in 1..n {
                let mut s = 0.0;
                for a in 0..m {
                    s += (p[d * m + a] - p[(d - 1) * m + a]).abs();
                }
                err = err.max((t[d - 1] - s).abs());
            }
            let panel = ReturnsPanel::new(dates, asset_names(m), r.clone()).unwrap();
            let cfg = BacktestConfig { normalize: false, ..BacktestConfig::default() };
            let res = run(&pos, &panel, &cfg).unwrap();
            for d in 1..n {
                let mut s = 0.0;
                for a in 0..m {
                    s += p[(d - 1) * m + a] * r[d * m + a];
                }
                err = err.max((res.pnl.values[d - 1] - s).abs());
            }
        }
    }
    outcome(
        err < 1e-12 && mismatches == 0,
        format!("1000 series (length 1..=50): max abs error {err:.2e} (< 1e-12), {mismatches} defined/undefined mismatches"),
    )
}

// 3. loss value against position magnitude

fn magnitude_sweep() -> Outcome {
    let (alpha, r) = gaussian_pair(250, 100.0, 0.05, 0);
    let scales = log_spaced(1e-2, 1e2, 41).unwrap();
    let sharpe = loss_sweep(&LossSpec::new(LossKind::Sharpe), &alpha, &r, &scales).unwrap();
    let values: Vec<f64> = sharpe.iter().map(|p| p.value).collect();
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let variation = (hi - lo) / values[0].abs();
    let modsharpe = loss_sweep(&LossSpec::new(LossKind::ModSharpe), &alpha, &r, &scales).unwrap();
    let xs: Vec<f64> = scales.iter().map(|c| c.ln()).collect();
    let ys: Vec<f64> = modsharpe.iter().map(|p| p.value).collect();
    let fit = linear_fit(&xs, &ys).unwrap();
    outcome(
        variation < 1e-6 && fit.slope.abs() > 0.0 && fit.r_squared > 0.99,
        format!(
            "SharpeLoss relative variation {variation:.2e} (< 1e-6); ModSharpeLoss on ln c: slope {:.4}, R^2 {:.6} (> 0.99)",
            fit.slope, fit.r_squared
        ),
    )
}

// 4. turnover band under the regularizer

fn lstm_experiment(lookback: usize, train_days: usize, loss: LossSpec, tvr: Option<TvrRegSpec>, seed: u64) -> PanelExperiment {
    PanelExperiment {
        lookback,
        scaling: Scaling::MinMaxWindow,
        train_days,
        model: ModelSpec { kind: ModelKind::Lstm, hidden_dim: 8, ..ModelSpec::default() },
        train: TrainConfig { learning_rate: 1e-3, epochs: 30, batch_window: 20, loss, tvr_reg: tvr, seed, ..TrainConfig::default() },
        backtest: BacktestConfig::default(),
    }
}

fn turnover_band() -> Outcome {
    let start = Instant::now();
    let band = TvrRegSpec { strength: 1.0, top: 1.0, bottom: 0.3, hinge_floor: 0.0, ..TvrRegSpec::default() };
    let (mut inside, mut differs) = (0, 0);
    let mut pairs = Vec::new();
    for seed in 0..10 {
        let panel = ArMarket { n_assets: 20, n_days: 500, ..ArMarket::default() }.generate(seed).unwrap();
        let tvr = |reg| {
            let out = lstm_experiment(10, 350, LossSpec::new(LossKind::Mse), reg, seed).run(&panel).unwrap();
            out.result.report_total.mean_daily_turnover
        };
        let (with, without) = (tvr(Some(band)), tvr(None));
        inside += usize::from((0.2..=1.1).contains(&with));
        differs += usize::from((with - without).abs() > 0.05);
        pairs.push(format!("{with:.2}/{without:.2}"));
    }
    let elapsed = start.elapsed();
    outcome(
        inside >= 8 && differs >= 7 && elapsed < Duration::from_secs(600),
        format!(
            "regularized turnover in [0.2, 1.1] in {inside}/10 (>= 8), differs from unregularized by > 0.05 in {differs}/10 (>= 7), {:.0}s; with/without: {}",
            elapsed.as_secs_f64(),
            pairs.join(" ")
        ),
    )
}

// 5. reversion on negatively autocorrelated returns

fn reversion_sanity() -> Outcome {
    let mut positive = 0;
    let mut sharpes = Vec::new();
    for seed in 0..20 {
        let panel = ArMarket { n_assets: 20, n_days: 2000, rho: -0.3, ..ArMarket::default() }.generate(seed).unwrap();
        let res = run(&reversion(&panel), &panel, &BacktestConfig::default()).unwrap();
        positive += usize::from(res.report_total.profit_pct > 0.0);
        sharpes.push(res.report_total.sharpe.unwrap_or(f64::NEG_INFINITY));
    }
    sharpes.sort_by(f64::total_cmp);
    let median = 0.5 * (sharpes[9] + sharpes[10]);
    outcome(
        positive >= 18 && median > 1.0,
        format!("positive total pnl in {positive}/20 (>= 18), median Sharpe {median:.2} (> 1)"),
    )
}

// 6. diversification across independent alphas

fn diversification() -> Outcome {
    let target = 10f64.sqrt();
    let sharpes: Vec<f64> = (0..20)
        .map(|seed| {
            let (panel, stack) = independent_alphas(10, 2000, 1.0, 0.01, seed).unwrap();
            let combined = combine_equal(&stack, true).unwrap();
            run(&combined, &panel, &BacktestConfig::default()).unwrap().report_total.sharpe.unwrap()
        })
        .collect();
    let mean = sharpes.iter().sum::<f64>() / sharpes.len() as f64;
    outcome(
        (mean - target).abs() <= 0.3 * target,
        format!("mean portfolio Sharpe over 20 seeds {mean:.2}, target sqrt(10) = {target:.2} +/- 30%"),
    )
}

// 7. risk-aware losses against MSE out of sample

fn loss_ranking() -> Outcome {
    let start = Instant::now();
    let (mut sharpe_wins, mut modsharpe_wins) = (0, 0);
    let mut rows = Vec::new();
    for seed in 0..10 {
        let market = ArMarket { n_assets: 10, n_days: 750, vol_spread: 1.5, ..ArMarket::default() };
        let panel = market.generate(seed).unwrap();
        let oos = |kind| {
            let out = lstm_experiment(5, 500, LossSpec::new(kind), None, seed).run(&panel).unwrap();
            out.result.report_test.and_then(|r| r.sharpe).unwrap_or(f64::NAN)
        };
        let (mse, sh, ms) = (oos(LossKind::Mse), oos(LossKind::Sharpe), oos(LossKind::ModSharpe));
        sharpe_wins += usize::from(sh >= mse);
        modsharpe_wins += usize::from(ms >= mse);
        rows.push(format!("{mse:.2}/{sh:.2}/{ms:.2}"));
    }
    let elapsed = start.elapsed();
    outcome(
        sharpe_wins >= 6 && modsharpe_wins >= 6 && elapsed < Duration::from_secs(900),
        format!(
            "SharpeLoss >= MSE in {sharpe_wins}/10, ModSharpeLoss >= MSE in {modsharpe_wins}/10 (>= 6 each), {:.0}s; mse/sharpe/modsharpe: {}",
            elapsed.as_secs_f64(),
            rows.join(" ")
        ),
    )
}

// 8. byte-identical reruns of the command-line pipeline

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if let Err(e) = common::run_smoke(a.path()).and_then(|_| common::run_smoke(b.path())) {
        return outcome(false, e);
    }
    let (fa, fb) = (common::csv_files(a.path()), common::csv_files(b.path()));
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    outcome(
        !fa.is_empty() && fa.len() == fb.len() && differing.is_empty(),
        format!("{} CSV files compared, {} differ", fa.len(), differing.len()),
    )
}

// 9. the published crypto dataset, when present locally

fn published_dataset() -> Outcome {
    let dir = common::crate_dir().join("../../data/cryptotrading");
    if !dir.is_dir() {
        return outcome(true, format!("not applicable: no dataset at {}", dir.display()));
    }
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("config.json");
    let text = format!(
        r#"{{"data": {{"dir": {:?}, "start": "2022-01-01", "end": "2025-07-01"}}}}"#,
        dir.canonicalize().unwrap().display().to_string()
    );
    std::fs::write(&cfg, text).unwrap();
    let o = out.path().join("out");
    for cmd in ["ingest", "alpha"] {
        let r = common::run(&["--config", cfg.to_str().unwrap(), "--out", o.to_str().unwrap(), cmd]);
        if !r.status.success() {
            return outcome(false, format!("{cmd} failed: {}", String::from_utf8_lossy(&r.stderr).trim()));
        }
    }
    let panel = alphaforge::io::read_panel(&o.join("cache/panel.csv")).unwrap();
    let table = std::fs::read_to_string(o.join("tables/alphas_total.csv")).unwrap();
    let header_ok = table.lines().next() == Some("alpha,turnover,max_drawdown,profit_pct,sharpe");
    outcome(
        panel.n_assets() == 61 && header_ok,
        format!("{} assets, {} panel dates, table header ok: {header_ok}", panel.n_assets(), panel.n_dates()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("gradient suite", gradients),
        ("metric oracles", metric_oracles),
        ("loss vs position magnitude", magnitude_sweep),
        ("turnover band control", turnover_band),
        ("reversion sanity", reversion_sanity),
        ("diversification", diversification),
        ("loss ranking", loss_ranking),
        ("determinism", determinism),
        ("published dataset", published_dataset),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| outcome(false, "panicked".into()));
        failed += usize::from(!o.pass);
        println!("criterion {} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
