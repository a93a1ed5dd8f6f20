#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_alphaforge"))
}

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn smoke_config() -> PathBuf {
    crate_dir().join("smoke/config.json")
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Ingest, alphas, training, checkpoint backtest, portfolio and sweep on the
/// bundled smoke data, all into `out`.
pub fn run_smoke(out: &Path) -> Result<(), String> {
    let cfg = smoke_config();
    let cfg = cfg.to_str().unwrap();
    let o = out.to_str().unwrap();
    let ckpt = out.join("models/model.afmd");
    let stack = out.join("stack");
    let steps: [Vec<&str>; 6] = [
        vec!["ingest"],
        vec!["alpha"],
        vec!["train"],
        vec!["backtest", "--checkpoint", ckpt.to_str().unwrap()],
        vec!["portfolio", "--stack", stack.to_str().unwrap()],
        vec!["sweep"],
    ];
    for step in steps {
        let mut args = vec!["--config", cfg, "--out", o];
        args.extend(step.iter().copied());
        let r = run(&args);
        if !r.status.success() {
            return Err(format!("{:?} failed: {}", step, String::from_utf8_lossy(&r.stderr)));
        }
    }
    Ok(())
}

/// Every CSV under `root`, keyed by relative path.
pub fn csv_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
