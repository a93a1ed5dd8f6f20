use std::fs;

use alphaforge::io::{
    decode_models, discover, encode_models, load_candles, load_stack, read_panel, read_positions, write_candles,
    write_panel, write_positions, write_stack,
};
use alphaforge::AppError;
use alphaforge_core::alphas::PositionsMatrix;
use alphaforge_core::data::{Frequency, ReturnsPanel};
use alphaforge_core::models::{Architecture, ModelParams};
use alphaforge_core::portfolio::AlphaStack;
use alphaforge_core::Error;
use chrono::NaiveDate;

const HEADER: &str = "timestamp,open,high,low,close,base_volume,quote_volume,taker_buy_base,taker_buy_quote,num_trades\n";

fn candle_file(rows: &[&str]) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("BTC_1d.csv");
    fs::write(&path, format!("{HEADER}{}\n", rows.join("\n"))).unwrap();
    (dir, path)
}

fn core_error(e: AppError) -> Error {
    match e {
        AppError::Data { source, .. } => source,
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn three_row_file_loads() {
    let (_d, p) = candle_file(&[
        "1704067200,10,11,9,10.5,1,10,0.5,5,3",
        "1704153600,10.5,12,10,11,2,22,1,11,4",
        "1704240000,11,11.5,10.5,11.2,1,11,0.5,5.5,2",
    ]);
    let s = load_candles(&p, "BTC", Frequency::Daily).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s.rows()[1].close, 11.0);
    assert_eq!(s.rows()[2].num_trades, 2);
}

#[test]
fn negative_close_rejected() {
    let (_d, p) = candle_file(&["1704067200,10,11,9,10.5,1,10,0.5,5,3", "1704153600,10.5,12,10,-1,2,22,1,11,4"]);
    assert_eq!(core_error(load_candles(&p, "BTC", Frequency::Daily).unwrap_err()), Error::NegativePrice { row: 1 });
}

#[test]
fn duplicate_timestamp_rejected() {
    let (_d, p) = candle_file(&["1704067200,10,11,9,10.5,1,10,0.5,5,3", "1704067200,10.5,12,10,11,2,22,1,11,4"]);
    assert!(matches!(
        core_error(load_candles(&p, "BTC", Frequency::Daily).unwrap_err()),
        Error::NonMonotonicTimestamp { row: 1, .. }
    ));
}

#[test]
fn bad_number_reports_row() {
    let (_d, p) = candle_file(&["1704067200,10,11,9,10.5,1,10,0.5,5,3", "1704153600,10.5,abc,10,11,2,22,1,11,4"]);
    assert!(matches!(core_error(load_candles(&p, "BTC", Frequency::Daily).unwrap_err()), Error::MalformedRow { row: 1, .. }));
}

#[test]
fn wrong_header_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("X_1d.csv");
    fs::write(&p, "time,open,high,low,close\n1,1,1,1,1\n").unwrap();
    let err = load_candles(&p, "X", Frequency::Daily).unwrap_err();
    assert!(matches!(err, AppError::Format { .. }), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn candles_round_trip_and_discovery() {
    let series = alphaforge_core::synth::synthetic_candles("ETH", NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(), 3, 0.02, 1).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for s in &series {
        write_candles(&dir.path().join(format!("ETH_{}.csv", s.frequency().tag())), s).unwrap();
    }
    fs::write(dir.path().join("notes.txt"), "x").unwrap();
    fs::write(dir.path().join("ETH_4h.csv"), HEADER).unwrap();
    let found = discover(dir.path()).unwrap();
    assert_eq!(found.len(), 1);
    assert_eq!(found["ETH"].len(), 3);
    for s in &series {
        let back = load_candles(&found["ETH"][&s.frequency()], "ETH", s.frequency()).unwrap();
        assert_eq!(&back, s);
    }
}

fn dates(n: usize) -> Vec<NaiveDate> {
    NaiveDate::from_ymd_opt(2024, 1, 1).unwrap().iter_days().take(n).collect()
}

#[test]
fn matrices_round_trip_exactly() {
    let values = vec![0.1, -1e-9, 0.30000000000000004, 2.5e-300, -0.0, 1.0 / 3.0];
    let assets = vec!["A".to_string(), "B,C".to_string()];
    let panel = ReturnsPanel::new(dates(3), assets.clone(), values.clone()).unwrap();
    let pos = PositionsMatrix::new(dates(3), assets, values).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_panel(&dir.path().join("p.csv"), &panel).unwrap();
    write_positions(&dir.path().join("q.csv"), &pos).unwrap();
    assert_eq!(read_panel(&dir.path().join("p.csv")).unwrap(), panel);
    assert_eq!(read_positions(&dir.path().join("q.csv")).unwrap(), pos);
}

#[test]
fn checkpoint_round_trip() {
    let models = vec![
        ModelParams::init(Architecture::Lstm { input_width: 3, hidden: 4, outputs: 3 }, 5).unwrap(),
        ModelParams::init(Architecture::Mlp { dims: vec![6, 5, 4, 1] }, 6).unwrap(),
        ModelParams::init(Architecture::Linear { inputs: 2, outputs: 1 }, 7).unwrap(),
    ];
    let bytes = encode_models(&models);
    assert_eq!(&bytes[..4], b"AFMD");
    assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
    assert_eq!(bytes[6], 2);
    assert_eq!(decode_models(&bytes).unwrap(), models);
    assert!(decode_models(&bytes[..bytes.len() - 3]).is_err());
    assert!(decode_models(b"").is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode_models(&bad).unwrap_err().contains("magic"));
}

#[test]
fn stack_round_trip() {
    let a = PositionsMatrix::new(dates(3), vec!["A".into(), "B".into()], vec![1.0, 0.0, 0.5, 0.5, 0.0, 1.0]).unwrap();
    let b = a.map_values(|x| -x);
    let stack = AlphaStack::new(vec!["up".into(), "down".into()], vec![a, b]).unwrap();
    let panel = ReturnsPanel::new(dates(3), vec!["A".into(), "B".into()], vec![0.01; 6]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_stack(dir.path(), &stack, Some(&panel)).unwrap();
    let (back, p) = load_stack(dir.path()).unwrap();
    assert_eq!(back.names(), stack.names());
    assert_eq!(back.alphas(), stack.alphas());
    assert_eq!(p.unwrap(), panel);
}
