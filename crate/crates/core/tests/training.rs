use alphaforge_core::backtest::BacktestConfig;
use alphaforge_core::data::Scaling;
use alphaforge_core::experiment::PanelExperiment;
use alphaforge_core::gradcheck::ChainInstance;
use alphaforge_core::losses::{LossKind, LossSpec};
use alphaforge_core::metrics::{evaluate, MetricsConfig};
use alphaforge_core::models::{
    batch_objective, train, Architecture, DirectHead, ModelKind, ModelParams, ModelSpec, Optimizer, OptimizerState,
    Sample, TrainConfig,
};
use alphaforge_core::synth::ArMarket;

#[test]
fn mse_gradient_is_least_squares_gradient() {
    let xs = [[0.5, -1.0, 2.0], [1.5, 0.3, -0.7], [-0.2, 0.8, 0.1], [1.0, 1.0, 1.0]];
    let ys = [0.4, -0.1, 0.9, 0.3];
    let w = vec![0.3, -0.2, 0.7, 0.05];
    let params = ModelParams::from_weights(Architecture::Linear { inputs: 3, outputs: 1 }, w.clone(), 0).unwrap();
    let samples: Vec<Sample> =
        xs.iter().zip(ys).map(|(x, y)| Sample { input: x.to_vec(), target: vec![y] }).collect();
    let cfg = TrainConfig { loss: LossSpec::new(LossKind::Mse), ..TrainConfig::default() };
    let (_, grad) = batch_objective(&params, &samples, 0..4, &cfg, &DirectHead).unwrap();

    // 2 X^T (X w - y) / n with X augmented by a ones column for the bias
    let n = xs.len() as f64;
    let mut expected = [0.0; 4];
    for (x, y) in xs.iter().zip(ys) {
        let resid = x[0] * w[0] + x[1] * w[1] + x[2] * w[2] + w[3] - y;
        for k in 0..3 {
            expected[k] += 2.0 * x[k] * resid / n;
        }
        expected[3] += 2.0 * resid / n;
    }
    for (g, e) in grad.iter().zip(expected) {
        assert!((g - e).abs() < 1e-14, "{g} vs {e}");
    }
}

#[test]
fn small_sgd_step_descends() {
    let smooth = [LossKind::Mse, LossKind::Pnl, LossKind::Sharpe, LossKind::ModSharpe];
    for model in [ModelKind::Linear, ModelKind::Mlp, ModelKind::Lstm] {
        for loss in smooth {
            for seed in 0..20 {
                let inst = ChainInstance::random(model, seed).unwrap();
                let cfg = TrainConfig { loss: LossSpec::new(loss), ..TrainConfig::default() };
                let range = 0..inst.samples.len();
                let (before, grad) = batch_objective(&inst.params, &inst.samples, range.clone(), &cfg, &DirectHead).unwrap();
                let mut stepped = inst.params.clone();
                OptimizerState::new(Optimizer::Sgd, grad.len()).step(&mut stepped.weights, &grad, 1e-5);
                let (after, _) = batch_objective(&stepped, &inst.samples, range, &cfg, &DirectHead).unwrap();
                assert!(after <= before, "{model:?}/{loss:?} seed {seed}: {before} -> {after}");
            }
        }
    }
}

#[test]
fn one_dimensional_regression() {
    let samples: Vec<Sample> = (0..50)
        .map(|i| {
            let x = (i as f64 - 25.0) / 12.5;
            Sample { input: vec![x], target: vec![2.0 * x] }
        })
        .collect();
    let cfg = TrainConfig {
        learning_rate: 0.05,
        epochs: 500,
        batch_window: 10,
        loss: LossSpec::new(LossKind::Mse),
        ..TrainConfig::default()
    };
    let p = ModelParams::init(Architecture::Linear { inputs: 1, outputs: 1 }, 42).unwrap();
    let trained = train(p, &samples, &cfg).unwrap().params;
    assert!((trained.weights[0] - 2.0).abs() < 1e-3);
}

fn experiment(loss: LossKind, seed: u64) -> PanelExperiment {
    PanelExperiment {
        lookback: 5,
        scaling: Scaling::MinMaxWindow,
        train_days: 300,
        model: ModelSpec { kind: ModelKind::Lstm, hidden_dim: 8, ..ModelSpec::default() },
        train: TrainConfig { epochs: 20, loss: LossSpec::new(loss), seed, ..TrainConfig::default() },
        backtest: BacktestConfig::default(),
    }
}

#[test]
fn sharpe_training_beats_mse_in_sample() {
    let market = ArMarket { n_assets: 8, n_days: 400, vol_spread: 1.5, ..ArMarket::default() };
    let panel = market.generate(3).unwrap();
    let in_sample = |loss| {
        let exp = experiment(loss, 3);
        let out = exp.run(&panel).unwrap();
        let interval = panel.dates()[0]..=panel.dates()[exp.train_days - 1];
        evaluate(&out.positions, &panel, interval, 1, &MetricsConfig::default()).unwrap().sharpe.unwrap()
    };
    let mse = in_sample(LossKind::Mse);
    let sharpe = in_sample(LossKind::Sharpe);
    assert!(sharpe > mse, "sharpe-trained {sharpe} vs mse-trained {mse}");
}

#[test]
fn identical_runs_identical_outputs() {
    let panel = ArMarket { n_assets: 4, n_days: 120, ..ArMarket::default() }.generate(1).unwrap();
    let mut exp = experiment(LossKind::ModSharpe, 9);
    exp.train_days = 80;
    exp.train.epochs = 3;
    let a = exp.run(&panel).unwrap();
    let b = exp.run(&panel).unwrap();
    assert_eq!(a, b);
    exp.train.seed = 10;
    assert_ne!(exp.run(&panel).unwrap().positions, a.positions);
}
