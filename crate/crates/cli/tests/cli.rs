use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use spreadwave_core::scaling::SpreadSurface;
use spreadwave_core::spread::{general_spread, SpreadModelParams};
use spreadwave_core::stats::log_space;
use tempfile::TempDir;

fn spreadwave(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spreadwave"))
        .args(args)
        .current_dir(dir)
        .env_clear()
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

/// Column `name` of a CSV file as floats; empty cells read as NaN.
fn column(path: impl AsRef<Path>, name: &str) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines
        .map(|l| match l.split(',').nth(idx).unwrap() {
            "" => f64::NAN,
            cell => cell.parse().unwrap(),
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn one_step_simulation() {
    let dir = TempDir::new().unwrap();
    let out = spreadwave(dir.path(), &["simulate", "--steps", "1", "--seed", "7"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bars = std::fs::read_to_string(dir.path().join("out/bars.csv")).unwrap();
    assert_eq!(bars.lines().count(), 2);
    assert!(bars.starts_with("timestamp,open,high,low,close,volume,h\n"));
    let summary = json(dir.path().join("out/summary.json"));
    assert_eq!(summary["result"]["bars"], 1);
    assert!(summary["result"]["empirical_volatility"].is_null());
    assert_eq!(summary["config"]["seed"], 7);
}

#[test]
fn simulation_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for (out, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let o = spreadwave(
            dir.path(),
            &["simulate", "--steps", "500", "--seed", seed, "--out", out],
        );
        assert_eq!(code(&o), 0);
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("bars.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn summary_volatility_matches_prediction() {
    let dir = TempDir::new().unwrap();
    let o = spreadwave(dir.path(), &["simulate", "--steps", "100000", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    let r = &json(dir.path().join("out/summary.json"))["result"];
    let (emp, pred) = (
        r["empirical_volatility"].as_f64().unwrap(),
        r["predicted_volatility"].as_f64().unwrap(),
    );
    assert!((emp / pred - 1.0).abs() < 0.02, "{emp} vs {pred}");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "blocker", "");
    let out = spreadwave(dir.path(), &["simulate", "--steps", "1", "--out", "blocker/out"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("blocker/out"));
}

#[test]
fn missing_column_is_invalid_input() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "bars.csv",
        "timestamp,open,high,low,volume\n1,10,11,9,100\n",
    );
    let out = spreadwave(
        dir.path(),
        &[
            "calibrate",
            "--input",
            "bars.csv",
            "--source",
            "bar",
            "--n",
            "10",
            "--sigma",
            "0.01",
            "--price",
            "10",
        ],
    );
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("close"), "{}", stderr(&out));
}

#[test]
fn curve_without_usable_rows_is_invalid() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "quotes.csv", "timestamp,bid,ask\n1,10,9\n");
    write(dir.path(), "trades.csv", "timestamp,price,size\n1,10,5\n");
    let out = spreadwave(
        dir.path(),
        &["curve", "--input", "quotes.csv", "--trades", "trades.csv"],
    );
    assert_eq!(code(&out), 3);
}

/// Quotes every second with the given spread function and one trade per
/// quote whose size cycles through a range.
fn quotes_and_trades(dir: &Path, spread: impl Fn(usize) -> f64) {
    let mut quotes = String::from("timestamp,bid,ask\n");
    let mut trades = String::from("timestamp,price,size\n");
    for i in 0..2000 {
        let t = 1000 * (i as i64 + 1);
        quotes.push_str(&format!("{t},10,{}\n", 10.0 + spread(i)));
        trades.push_str(&format!("{t},10,{}\n", 1 + (i * 37) % 100));
    }
    write(dir, "quotes.csv", &quotes);
    write(dir, "trades.csv", &trades);
}

#[test]
fn constant_spread_gives_flat_curve() {
    let dir = TempDir::new().unwrap();
    quotes_and_trades(dir.path(), |_| 0.25);
    let out = spreadwave(
        dir.path(),
        &[
            "curve",
            "--input",
            "quotes.csv",
            "--trades",
            "trades.csv",
            "--buckets",
            "8",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let curve = column(dir.path().join("out/curve.csv"), "spread_q");
    assert_eq!(curve.len(), 8);
    assert!(curve.iter().all(|&s| (s - 0.25).abs() < 1e-12));
    assert!(dir.path().join("out/histogram.csv").exists());
    let report = json(dir.path().join("out/curve.json"));
    assert_eq!(report["inputs"].as_object().unwrap().len(), 2);
}

#[test]
fn higher_quantile_curve_lies_above() {
    let dir = TempDir::new().unwrap();
    quotes_and_trades(dir.path(), |i| 0.01 + ((i * 7919) % 101) as f64 * 1e-3);
    for (q, out) in [("0.5", "median"), ("0.9", "upper")] {
        let o = spreadwave(
            dir.path(),
            &[
                "curve",
                "--input",
                "quotes.csv",
                "--trades",
                "trades.csv",
                "--quantile",
                q,
                "--out",
                out,
            ],
        );
        assert_eq!(code(&o), 0);
    }
    let lo = column(dir.path().join("median/curve.csv"), "spread_q");
    let hi = column(dir.path().join("upper/curve.csv"), "spread_q");
    let pairs: Vec<(f64, f64)> = lo.into_iter().zip(hi).filter(|(a, _)| !a.is_nan()).collect();
    assert!(pairs.len() > 10);
    assert!(pairs.iter().all(|(a, b)| a <= b));
    assert!(pairs.iter().any(|(a, b)| a < b));
}

fn law_curve(dir: &Path, perturb: impl Fn(usize) -> f64) {
    let p = SpreadModelParams {
        price_s: 20.0,
        sigma: 0.01,
        lambda_risk: 3.5,
        rho_risk: 0.7,
        avg_trade_size_n: 50.0,
        tau0: 0.02,
    };
    let mut text = String::from("v_lo,v_hi,v_mid,spread_q,count\n");
    for (i, e) in log_space(1.0, 1e4, 21).windows(2).enumerate() {
        let mid = (e[0] * e[1]).sqrt();
        let s = general_spread(&p, mid).unwrap() * perturb(i);
        text.push_str(&format!("{},{},{mid},{s},50\n", e[0], e[1]));
    }
    write(dir, "curve.csv", &text);
}

#[test]
fn noiseless_curve_is_recovered() {
    let dir = TempDir::new().unwrap();
    law_curve(dir.path(), |_| 1.0);
    let out = spreadwave(
        dir.path(),
        &[
            "calibrate",
            "--curve",
            "curve.csv",
            "--n",
            "50",
            "--sigma",
            "0.01",
            "--price",
            "20",
            "--tau0",
            "0.02",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let fit = &json(dir.path().join("out/calibration.json"))["result"]["fit"];
    assert!((fit["lambda_hat"].as_f64().unwrap() / 3.5 - 1.0).abs() < 1e-6);
    assert!((fit["rho_hat"].as_f64().unwrap() / 0.7 - 1.0).abs() < 1e-6);
    assert_eq!(column(dir.path().join("out/overlay.csv"), "spread_model").len(), 20);
}

#[test]
fn failed_fit_writes_best_so_far() {
    let dir = TempDir::new().unwrap();
    law_curve(dir.path(), |i| 1.0 + 0.05 * ((i * 13 % 7) as f64 - 3.0));
    write(
        dir.path(),
        "run.toml",
        "[calibrate]\nmax_iterations = 1\ntolerance = 1e-300\n",
    );
    let out = spreadwave(
        dir.path(),
        &[
            "calibrate",
            "--config",
            "run.toml",
            "--curve",
            "curve.csv",
            "--n",
            "50",
            "--sigma",
            "0.01",
            "--price",
            "20",
            "--tau0",
            "0.02",
        ],
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let fit = &json(dir.path().join("out/calibration.json"))["result"]["fit"];
    assert_eq!(fit["converged"], false);
    assert!(fit["lambda_hat"].as_f64().unwrap() > 0.0);
}

#[test]
fn horizon_scaling_table() {
    let dir = TempDir::new().unwrap();
    let out = spreadwave(
        dir.path(),
        &[
            "scale",
            "--base-spread",
            "0.4",
            "--eta",
            "0.1",
            "--lambda",
            "3",
            "--t1",
            "2",
            "--horizons",
            "2,20,2e6",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let path = dir.path().join("out/scaling.csv");
    assert_eq!(column(&path, "delta_quantum")[0], 0.4);
    assert_eq!(column(&path, "delta_classical")[0], 0.4);
    let (q, c) = (column(&path, "delta_quantum")[2], column(&path, "delta_classical")[2]);
    assert!((q / (0.3 * 1e3) - 1.0).abs() < 1e-3 && c > q);

    let below = spreadwave(
        dir.path(),
        &[
            "scale",
            "--base-spread",
            "0.4",
            "--eta",
            "0.1",
            "--t1",
            "2",
            "--horizons",
            "1,2",
        ],
    );
    assert_eq!(code(&below), 3);
}

#[test]
fn surface_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = spreadwave(dir.path(), &["scale", "--surface"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let bytes = std::fs::read(dir.path().join("out/surface.csv")).unwrap();
    assert!(bytes.starts_with(b"T,v,delta\n"));
    let surface = SpreadSurface::read_csv(bytes.as_slice()).unwrap();
    assert_eq!((surface.horizons.len(), surface.volumes.len()), (20, 50));
    assert!(surface.values.iter().all(|row| row.windows(2).all(|w| w[1] >= w[0])));
}

#[test]
fn policy_dominates_naive_quoting() {
    let dir = TempDir::new().unwrap();
    let out = spreadwave(
        dir.path(),
        &["optimize", "--a", "10", "--commission", "3", "--lambda0", "3"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let path = dir.path().join("out/policy.csv");
    let (opt, naive) = (column(&path, "pnl_opt"), column(&path, "pnl_naive"));
    assert_eq!(opt.len(), 41);
    assert!(opt.iter().zip(&naive).all(|(o, n)| o >= n));

    let free = spreadwave(
        dir.path(),
        &["optimize", "--a", "10", "--commission", "0", "--out", "free"],
    );
    assert_eq!(code(&free), 0);
    assert_eq!(json(dir.path().join("free/policy.json"))["result"]["halted_points"], 0);
}

#[test]
fn infeasible_optimizer_config_is_invalid() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        code(&spreadwave(dir.path(), &["optimize", "--a", "10", "--lambda0", "-1"])),
        3
    );
    assert_eq!(code(&spreadwave(dir.path(), &["optimize"])), 3);
    assert_eq!(
        code(&spreadwave(dir.path(), &["optimize", "--a", "10", "--volumes", "2,1"])),
        3
    );
}

#[test]
fn config_precedence_is_file_then_env_then_flags() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "run.toml", "seed = 1\n[simulate]\nsteps = 3\n");
    let seed_of = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_spreadwave"));
        cmd.args(["simulate", "--config", "run.toml"])
            .current_dir(dir.path())
            .env_clear();
        if let Some(e) = env {
            cmd.env("SPREADWAVE_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.status().unwrap().success());
        let report = json(dir.path().join("out/summary.json"));
        assert_eq!(report["result"]["bars"], 3);
        report["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(None, None), 1);
    assert_eq!(seed_of(Some("2"), None), 2);
    assert_eq!(seed_of(Some("2"), Some("3")), 3);
}

#[test]
fn bad_configs_and_usage_are_invalid() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "typo.toml", "[simulate]\nstepz = 3\n");
    let out = spreadwave(dir.path(), &["simulate", "--config", "typo.toml"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("stepz"));
    assert_eq!(
        code(&spreadwave(dir.path(), &["simulate", "--config", "absent.toml"])),
        2
    );
    assert_eq!(code(&spreadwave(dir.path(), &["simulate", "--steps", "many"])), 3);
    assert_eq!(code(&spreadwave(dir.path(), &["frobnicate"])), 3);
    assert_eq!(code(&spreadwave(dir.path(), &["--help"])), 0);
}

#[test]
fn horizon_durations_use_the_time_unit() {
    let dir = TempDir::new().unwrap();
    let out = spreadwave(
        dir.path(),
        &["simulate", "--steps", "1", "--horizon", "5m", "--time-unit-ms", "60000"],
    );
    assert_eq!(code(&out), 0);
    let cfg = &json(dir.path().join("out/summary.json"))["config"];
    assert_eq!(cfg["horizon"], 5.0);
    assert_eq!(code(&spreadwave(dir.path(), &["simulate", "--horizon", "5y"])), 3);
}
