use dlp::analytics::expected_gain_loss;
use dlp::policy::{MarketBounds, PolicyConfig};
use dlp::sim::GbmJumpParams;
use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dlp(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlp"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Data rows of a CSV written with a leading `# config:` line.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.starts_with("# config: {"), "missing provenance in {}", path.display());
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_prices(dir: &Path, name: &str, prices: &[f64]) -> String {
    let mut text = String::from("timestamp,price\n");
    for (i, p) in prices.iter().enumerate() {
        text.push_str(&format!("{},{p}\n", 1_700_000_000 + 86_400 * i as i64));
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn analyze_hand_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = dlp(dir.path(), &["analyze", "--alpha", "0.5", "--w", "constant:0.5", "--mu", "0.1", "--k", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&dir.path().join("analyze.json"));
    let mean = doc["results"][0]["mean"].as_f64().unwrap();
    assert!((mean - 0.0025).abs() < 1e-15);
    assert_eq!(doc["config"]["policy"]["alpha"], 0.5);
    assert_eq!(doc["config"]["w"], "constant:0.5");
}

#[test]
fn analyze_zero_mean_and_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = dlp(dir.path(), &["analyze", "--mu", "0,-0.2,0.2", "--k", "1,5"]);
    assert_eq!(code(&o), 0);
    let doc = read_json(&dir.path().join("analyze.json"));
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 6);
    assert_eq!(results[0]["mean"].as_f64().unwrap(), 0.0);
    // alpha = 1/2 makes the expectation even in mu
    assert_eq!(results[3]["mean"], results[5]["mean"]);
}

#[test]
fn invalid_alpha_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = dlp(dir.path(), &["analyze", "--alpha", "1.5"]);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&dlp(dir.path(), &["frobnicate"])), 1);
    assert_eq!(code(&dlp(dir.path(), &["analyze", "--k", "two"])), 1);
    assert_eq!(code(&dlp(dir.path(), &["--help"])), 0);
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"alpha": 0.7, "w": "constant:0.5", "mu": [0.1], "k": [2], "v0": 2.0}"#).unwrap();
    let c = cfg.to_string_lossy();
    assert_eq!(code(&dlp(dir.path(), &["--config", &c, "analyze", "--alpha", "0.5"])), 0);
    let doc = read_json(&dir.path().join("analyze.json"));
    assert_eq!(doc["config"]["policy"]["alpha"], 0.5);
    assert_eq!(doc["config"]["policy"]["v0"], 2.0);
    assert!((doc["results"][0]["mean"].as_f64().unwrap() - 0.005).abs() < 1e-15);

    fs::write(&cfg, "[1, 2]").unwrap();
    assert_eq!(code(&dlp(dir.path(), &["--config", &c, "analyze"])), 1);
}

#[test]
fn simulate_degenerate_noise_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--paths", "1", "--sigma-star", "0", "--lambda", "0", "--mu-star", "0.3", "--w", "log_ramp",
    ];
    assert_eq!(code(&dlp(dir.path(), &args)), 0);
    let doc = read_json(&dir.path().join("simulate.json"));
    let point = &doc["results"]["log_ramp"][0];
    let mean = point["mean_gain"].as_f64().unwrap();
    assert_eq!(point["std_error"].as_f64().unwrap(), 0.0);

    let params = GbmJumpParams { sigma_star: 0.0, lambda: 0.0, ..GbmJumpParams::daily(0.3) };
    let (mu, var) = params.period_moments();
    assert_eq!(var, 0.0);
    let config = PolicyConfig::frictionless(0.5, 1.0, MarketBounds::new(-0.9, 1.0).unwrap()).unwrap();
    let w: Vec<f64> = (0..252).map(|k| (k as f64 / 252.0 * (std::f64::consts::E - 1.0)).ln_1p()).collect();
    let closed = expected_gain_loss(&config, &w, mu, 252).unwrap();
    assert!((mean - closed).abs() <= 1e-12 * closed.abs(), "{mean} vs {closed}");

    let rows = csv_rows(&dir.path().join("sweep_log_ramp.csv"));
    assert_eq!(rows[0], ["mu_star", "mean_gain", "std_error"]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn simulate_is_byte_deterministic_across_thread_caps() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "simulate", "--paths", "300", "--sweep-points", "5", "--n-periods", "40", "--seed", "11", "--w",
        "constant:0.8", "--w", "edge_sin", "--dump-paths", "3",
    ];
    assert_eq!(code(&dlp(a.path(), &[&["--threads", "1"][..], &args].concat())), 0);
    assert_eq!(code(&dlp(b.path(), &[&["--threads", "3"][..], &args].concat())), 0);
    for name in ["sweep_constant_0.8.csv", "sweep_edge_sin.csv", "paths.csv"] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
    let doc = read_json(&a.path().join("simulate.json"));
    assert_eq!(doc["config"]["seed"], 11);
    assert_eq!(csv_rows(&a.path().join("sweep_edge_sin.csv")).len(), 6);
    assert_eq!(csv_rows(&a.path().join("paths.csv")).len(), 1 + 3 * 41);
}

#[test]
fn simulate_rejects_bad_params() {
    let dir = tempfile::tempdir().unwrap();
    assert_ne!(code(&dlp(dir.path(), &["simulate", "--delta", "1.5", "--paths", "10"])), 0);
    assert_ne!(code(&dlp(dir.path(), &["simulate", "--paths", "0"])), 0);
}

#[test]
fn backtest_hand_example_and_batch() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write_prices(dir.path(), "syn.csv", &[100.0, 110.0, 99.0]);
    let o = dlp(dir.path(), &["backtest", "--csv", &csv, "--w", "constant:0.5", "--curve"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&dir.path().join("backtest.json"));
    let g = doc["reports"][0]["gain_loss"].as_f64().unwrap();
    assert!((g + 0.0025).abs() < 1e-15);
    assert_eq!(doc["config"]["symbol"], "syn");
    let curve = csv_rows(&dir.path().join("curve_constant_0.5.csv"));
    assert_eq!(curve[0], ["stage", "gain"]);
    assert_eq!(curve[2], ["1", "0"]);

    let prices: Vec<f64> = (0..120).map(|i| 100.0 + 10.0 * (i as f64 / 7.0).sin() + 0.1 * i as f64).collect();
    let csv = write_prices(dir.path(), "wave.csv", &prices);
    let o = dlp(
        dir.path(),
        &["backtest", "--csv", &csv, "--w", "ma:5", "--w", "ma:10", "--w", "ma:20", "--w", "ma:30"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = read_json(&dir.path().join("backtest_table.json"));
    assert_eq!(table["columns"].as_array().unwrap().len(), 4);
    let rows = csv_rows(&dir.path().join("backtest_table.csv"));
    assert_eq!(rows[0], ["metric", "ma:5", "ma:10", "ma:20", "ma:30"]);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>()[1..], ["Gain-Loss", "Variance", "Sharpe Ratio"]);

    let o = dlp(dir.path(), &["backtest", "--csv", &csv, "--w", "ma:5", "--with-bh"]);
    assert_eq!(code(&o), 0);
    assert_eq!(csv_rows(&dir.path().join("backtest_table.csv"))[0], ["metric", "B&H", "ma:5"]);
}

#[test]
fn backtest_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = dlp(dir.path(), &["backtest", "--csv", &missing.to_string_lossy()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "timestamp,price\n2,100\n1,101\n").unwrap();
    let o = dlp(dir.path(), &["backtest", "--csv", &bad.to_string_lossy()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nonmonotone timestamps"));
    assert_eq!(code(&dlp(dir.path(), &["backtest"])), 1);
}

#[test]
fn verify_rpe_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dlp(dir.path(), &["verify-rpe", "--weights", "0.5,0.3,0.7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("minimum expected gain"));
    assert!(stdout.contains("certified"));

    assert_eq!(code(&dlp(dir.path(), &["verify-rpe"])), 0);
    assert_eq!(code(&dlp(dir.path(), &["verify-rpe", "--w", "log_ramp", "--k-max", "12"])), 0);

    let o = dlp(dir.path(), &["verify-rpe", "--alpha", "0.6"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("not certifiable"));

    let o = dlp(dir.path(), &["verify-rpe", "--weights", "0.5,0"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("two strictly positive"));
    let doc = read_json(&dir.path().join("verify_rpe.json"));
    assert_eq!(doc["verdict"]["status"], "not_certifiable");

    assert_eq!(code(&dlp(dir.path(), &["verify-rpe", "--weights", "1.5,0.5"])), 1);
}

#[test]
fn weights_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&dlp(dir.path(), &["weights", "--w", "log_ramp", "--n", "252"])), 0);
    let rows = csv_rows(&dir.path().join("weights.csv"));
    assert_eq!(rows[0], ["stage", "weight"]);
    assert_eq!(rows.len() - 1, 252);
    let last: f64 = rows[252][1].parse().unwrap();
    assert!((last - 1.0).abs() < 1e-15);

    assert_eq!(code(&dlp(dir.path(), &["weights", "--w", "constant:0.8"])), 0);
    let rows = csv_rows(&dir.path().join("weights.csv"));
    assert!(rows[1..].iter().all(|r| r[1] == "0.8"));

    assert_eq!(code(&dlp(dir.path(), &["weights", "--w", "sin_burst", "--n", "252"])), 0);
    let rows = csv_rows(&dir.path().join("weights.csv"));
    let mid = rows.iter().find(|r| r[0] == "126").unwrap();
    assert_eq!(mid[1], "0.5");

    assert_eq!(code(&dlp(dir.path(), &["weights", "--w", "ramp"])), 1);
    assert_eq!(code(&dlp(dir.path(), &["weights", "--w", "ma:5"])), 1);
}

#[test]
fn table_spec_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("w.csv");
    fs::write(&table, "stage,weight\n0,0.2\n1,0.6\n2,0.4\n").unwrap();
    let spec = format!("table:{}", table.to_string_lossy());
    let o = dlp(dir.path(), &["verify-rpe", "--w", &spec, "--k-max", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_json(&dir.path().join("verify_rpe.json"));
    assert_eq!(doc["config"]["weights"], serde_json::json!([0.2, 0.6, 0.4]));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dlp"))
        .env(dlp::cli::OUT_DIR_ENV, dir.path())
        .args(["weights", "--w", "edge_sin", "--n", "20"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(csv_rows(&dir.path().join("weights.csv")).len(), 21);
}
