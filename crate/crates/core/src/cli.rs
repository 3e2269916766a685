//! Command-line surface.
//!
//! Every subcommand resolves its parameters as flags, then the optional JSON
//! config file (`--config`, keys named like the long flags in snake_case),
//! then built-in defaults. The resolved parameters and seed are written into
//! every output file: JSON outputs carry a `config` object, CSV outputs start
//! with a `# config: {...}` comment line.
//!
//! `weights` tabulates stages `1..=N`, so the last row is `w(N)`.
//!
//! Exit codes: 0 success or certified, 1 usage or runtime error, 2 RPE not
//! certifiable because the hypotheses do not hold.

use crate::analytics::{
    expected_gain_loss, rpe_scan, second_moment_gain_loss, variance_gain_loss, ReturnMoments,
    ScanVerdict,
};
use crate::backtest::{
    buy_and_hold, ingest_csv_path, run_batch, write_batch_table_csv, BacktestReport, BoundsMode,
};
use crate::policy::{MarketBounds, PolicyConfig};
use crate::sim::{
    linspace, monte_carlo_gain_loss, simulate_path, write_paths_csv, GbmJumpParams,
    MonteCarloResult, ReturnGenerator, DEFAULT_DELTA, DEFAULT_LAMBDA, DEFAULT_PATHS,
    DEFAULT_PERIODS, DEFAULT_SIGMA_STAR, DEFAULT_SWEEP_POINTS,
};
use crate::weights::{eval_domain, load_weights_csv, write_weights_csv_from, WeightKind, WeightSpec};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CERTIFIABLE: i32 = 2;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "DLP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "dlp", version, about = "Double linear long-short policy toolkit")]
pub struct Cli {
    /// Output directory
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    pub out: PathBuf,
    /// JSON config file; flags take precedence over its values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker thread cap; outputs do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form expected gain-loss and variance on a (mu, k) grid
    Analyze(AnalyzeArgs),
    /// Jump-diffusion Monte Carlo, single drift or a drift sweep
    Simulate(SimulateArgs),
    /// Run the policy on a `timestamp,price` CSV
    Backtest(BacktestArgs),
    /// Certify strictly positive expected gain over a grid
    VerifyRpe(VerifyArgs),
    /// Tabulate a weighting function as `stage,weight`
    Weights(WeightsArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PolicyArgs {
    /// Long fraction of the initial capital
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Initial account value
    #[arg(long)]
    pub v0: Option<f64>,
    /// Per-period return lower bound
    #[arg(long, allow_negative_numbers = true)]
    pub x_min: Option<f64>,
    /// Per-period return upper bound
    #[arg(long, allow_negative_numbers = true)]
    pub x_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyArgs,
    /// Weight spec
    #[arg(long)]
    pub w: Option<String>,
    /// Schedule horizon N (defaults to the largest k)
    #[arg(long)]
    pub n: Option<usize>,
    /// Per-period mean return(s), comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default)]
    pub mu: Vec<f64>,
    /// Per-period return variance
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Horizon(s), comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub k: Vec<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyArgs,
    /// Weight spec(s); repeat for several
    #[arg(long)]
    #[serde(default)]
    pub w: Vec<String>,
    /// Single annualized drift; omit to sweep
    #[arg(long, allow_negative_numbers = true)]
    pub mu_star: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu_max: Option<f64>,
    #[arg(long)]
    pub sweep_points: Option<usize>,
    #[arg(long)]
    pub sigma_star: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub n_periods: Option<usize>,
    #[arg(long)]
    pub s0: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Clip simulated returns into [x_min, x_max]
    #[arg(long)]
    #[serde(default)]
    pub clip_returns: bool,
    /// Dump the first N price paths of the first drift to paths.csv
    #[arg(long)]
    pub dump_paths: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BacktestArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyArgs,
    /// Price file with header `timestamp,price`
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Weight spec(s); several produce a batch table
    #[arg(long)]
    #[serde(default)]
    pub w: Vec<String>,
    /// Derive x_min / x_max from the observed returns
    #[arg(long)]
    #[serde(default)]
    pub bounds_from_data: bool,
    /// Add a buy-and-hold column to the batch table
    #[arg(long)]
    #[serde(default)]
    pub with_bh: bool,
    /// Write `stage,gain` curves
    #[arg(long)]
    #[serde(default)]
    pub curve: bool,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub policy: PolicyArgs,
    /// Weight spec for the schedule
    #[arg(long, conflicts_with = "weights")]
    pub w: Option<String>,
    /// Explicit schedule, comma separated
    #[arg(long, value_delimiter = ',')]
    #[serde(default)]
    pub weights: Vec<f64>,
    /// Mean returns to scan, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(default)]
    pub mu_grid: Vec<f64>,
    /// Largest horizon scanned
    #[arg(long)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct WeightsArgs {
    #[arg(long)]
    pub w: Option<String>,
    /// Horizon N; rows cover stages 1..=N
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub w_max: Option<f64>,
}

const DEFAULT_SPEC: &str = "constant:0.8";
const RPE_MU_GRID: [f64; 12] = [
    -0.9, -0.5, -0.3, -0.1, -0.05, -0.01, 0.01, 0.05, 0.1, 0.3, 0.5, 0.9,
];

/// Effective policy parameters after precedence resolution.
#[derive(Debug, Clone, Copy, Serialize)]
struct PolicyParams {
    alpha: f64,
    v0: f64,
    x_min: f64,
    x_max: f64,
}

impl PolicyArgs {
    fn resolve(&self, x_min: f64, x_max: f64) -> PolicyParams {
        PolicyParams {
            alpha: self.alpha.unwrap_or(0.5),
            v0: self.v0.unwrap_or(1.0),
            x_min: self.x_min.unwrap_or(x_min),
            x_max: self.x_max.unwrap_or(x_max),
        }
    }
}

impl PolicyParams {
    fn config(&self) -> Result<PolicyConfig> {
        let bounds = MarketBounds::new(self.x_min, self.x_max)?;
        Ok(PolicyConfig::frictionless(self.alpha, self.v0, bounds)?)
    }
}

/// Overlays the flags that were given onto the config-file object.
fn merge<T: Serialize + DeserializeOwned>(flags: &T, file: Option<&Value>) -> Result<T> {
    let mut base = match file {
        Some(Value::Object(m)) => m.clone(),
        Some(_) => bail!("config file must hold a JSON object"),
        None => Map::new(),
    };
    if let Value::Object(over) = serde_json::to_value(flags)? {
        for (key, value) in over {
            let unset = match &value {
                Value::Null | Value::Bool(false) => true,
                Value::Array(a) => a.is_empty(),
                _ => false,
            };
            if !unset {
                base.insert(key, value);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).context("invalid config file")
}

/// Parses the CLI weight grammar, loading `table:<path>` from disk.
pub fn parse_weight_kind(text: &str) -> Result<WeightKind> {
    if let Some(path) = text.strip_prefix("table:") {
        let values = load_weights_csv(path).with_context(|| format!("loading weight table {path}"))?;
        return Ok(WeightKind::Table { values });
    }
    Ok(text.parse()?)
}

fn spec_label(text: &str) -> String {
    text.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' { c } else { '_' })
        .collect()
}

struct Output<'a> {
    dir: &'a Path,
}

impl Output<'_> {
    fn path(&self, name: &str) -> Result<PathBuf> {
        fs::create_dir_all(self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        Ok(self.dir.join(name))
    }

    fn json(&self, name: &str, value: &Value) -> Result<PathBuf> {
        let path = self.path(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// CSV with a leading provenance comment.
    fn csv(&self, name: &str, config: &Value, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<PathBuf> {
        let path = self.path(name)?;
        let mut buf = Vec::new();
        writeln!(buf, "# config: {}", serde_json::to_string(config)?)?;
        body(&mut buf)?;
        fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

pub fn run(cli: &Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(serde_json::from_str::<Value>(&text).with_context(|| format!("parsing {}", path.display()))?)
        }
        None => None,
    };
    let out = Output { dir: &cli.out };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Analyze(a) => cmd_analyze(&merge(a, file.as_ref())?, &out),
        Command::Simulate(a) => cmd_simulate(&merge(a, file.as_ref())?, &out),
        Command::Backtest(a) => cmd_backtest(&merge(a, file.as_ref())?, &out),
        Command::VerifyRpe(a) => cmd_verify_rpe(&merge(a, file.as_ref())?, &out),
        Command::Weights(a) => cmd_weights(&merge(a, file.as_ref())?, &out),
    })
}

fn cmd_analyze(args: &AnalyzeArgs, out: &Output) -> Result<i32> {
    let policy = args.policy.resolve(-0.5, 1.0);
    let config = policy.config()?;
    let w_text = args.w.clone().unwrap_or_else(|| DEFAULT_SPEC.into());
    let mus = if args.mu.is_empty() { vec![0.1] } else { args.mu.clone() };
    let ks = if args.k.is_empty() { vec![2] } else { args.k.clone() };
    let sigma2 = args.sigma2.unwrap_or(0.01);
    let n = args.n.unwrap_or_else(|| ks.iter().copied().max().unwrap_or(0));
    let spec = WeightSpec::new(parse_weight_kind(&w_text)?, config.w_max())?;
    let weights = spec.schedule(n, None)?;

    let mut results = Vec::new();
    for &mu in &mus {
        let moments = ReturnMoments::new(mu, sigma2)?;
        for &k in &ks {
            results.push(json!({
                "mu": mu,
                "k": k,
                "mean": expected_gain_loss(&config, &weights, mu, k)?,
                "variance": variance_gain_loss(&config, &weights, &moments, k)?,
                "second_moment": second_moment_gain_loss(&config, &weights, &moments, k)?,
            }));
        }
    }
    let effective = json!({
        "command": "analyze",
        "policy": policy,
        "w": w_text,
        "n": n,
        "mu": mus,
        "sigma2": sigma2,
        "k": ks,
    });
    let path = out.json("analyze.json", &json!({ "config": effective, "results": results }))?;
    println!("analyze: {} grid points -> {}", results.len(), path.display());
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SimulatePoint {
    mu_star: f64,
    #[serde(flatten)]
    result: MonteCarloResult,
}

fn cmd_simulate(args: &SimulateArgs, out: &Output) -> Result<i32> {
    let policy = args.policy.resolve(-0.9, 1.0);
    let config = policy.config()?;
    let specs_text = if args.w.is_empty() { vec![DEFAULT_SPEC.to_string()] } else { args.w.clone() };
    let base = GbmJumpParams {
        mu_star: args.mu_star.unwrap_or(0.0),
        sigma_star: args.sigma_star.unwrap_or(DEFAULT_SIGMA_STAR),
        lambda: args.lambda.unwrap_or(DEFAULT_LAMBDA),
        delta: args.delta.unwrap_or(DEFAULT_DELTA),
        dt: args.dt.unwrap_or(1.0 / DEFAULT_PERIODS as f64),
        n_periods: args.n_periods.unwrap_or(DEFAULT_PERIODS),
        s0: args.s0.unwrap_or(100.0),
        clip_returns: args.clip_returns,
    };
    base.validate()?;
    let grid = match args.mu_star {
        Some(mu) => vec![mu],
        None => linspace(
            args.mu_min.unwrap_or(-1.0),
            args.mu_max.unwrap_or(1.0),
            args.sweep_points.unwrap_or(DEFAULT_SWEEP_POINTS),
        ),
    };
    if grid.is_empty() {
        bail!("drift grid is empty");
    }
    let paths = args.paths.unwrap_or(DEFAULT_PATHS);
    let seed = args.seed.unwrap_or(0);

    let effective = json!({
        "command": "simulate",
        "policy": policy,
        "w": specs_text,
        "gbm": base,
        "mu_star_grid": grid,
        "paths": paths,
        "seed": seed,
    });

    let mut runs = Map::new();
    for text in &specs_text {
        let spec = WeightSpec::new(parse_weight_kind(text)?, config.w_max())?;
        let mut points = Vec::with_capacity(grid.len());
        for &mu_star in &grid {
            let generator = ReturnGenerator::GbmJump(GbmJumpParams { mu_star, ..base });
            let result = monte_carlo_gain_loss(&config, &spec, &generator, paths, seed)?;
            points.push(SimulatePoint { mu_star, result });
        }
        let csv_path = out.csv(&format!("sweep_{}.csv", spec_label(text)), &effective, |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["mu_star", "mean_gain", "std_error"])?;
            for p in &points {
                w.write_record([p.mu_star.to_string(), p.result.mean_gain.to_string(), p.result.std_error.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
        println!("simulate {text}: {} drifts -> {}", points.len(), csv_path.display());
        runs.insert(text.clone(), serde_json::to_value(&points)?);
    }
    if let Some(n) = args.dump_paths {
        let params = GbmJumpParams { mu_star: grid[0], ..base };
        let dumped = (0..n as u64)
            .map(|i| simulate_path(&params, seed, i))
            .collect::<Result<Vec<_>, _>>()?;
        out.csv("paths.csv", &effective, |buf| Ok(write_paths_csv(buf, &dumped)?))?;
    }
    out.json("simulate.json", &json!({ "config": effective, "results": runs }))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct ReportSummary<'a> {
    label: &'a str,
    gain_loss: f64,
    variance: f64,
    sharpe: f64,
    degenerate_sharpe: bool,
    n_periods: usize,
}

impl<'a> From<&'a BacktestReport> for ReportSummary<'a> {
    fn from(r: &'a BacktestReport) -> Self {
        Self {
            label: &r.label,
            gain_loss: r.gain_loss,
            variance: r.variance,
            sharpe: r.sharpe,
            degenerate_sharpe: r.degenerate_sharpe,
            n_periods: r.n_periods,
        }
    }
}

fn cmd_backtest(args: &BacktestArgs, out: &Output) -> Result<i32> {
    let policy = args.policy.resolve(-0.5, 1.0);
    let config = policy.config()?;
    let csv_path = args.csv.as_ref().ok_or_else(|| anyhow!("--csv is required"))?;
    let series = ingest_csv_path(csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
    let specs_text = if args.w.is_empty() { vec![DEFAULT_SPEC.to_string()] } else { args.w.clone() };
    let specs = specs_text
        .iter()
        .map(|t| Ok(WeightSpec::new(parse_weight_kind(t)?, 1.0)?))
        .collect::<Result<Vec<_>>>()?;
    let mode = if args.bounds_from_data { BoundsMode::FromData } else { BoundsMode::Configured };
    let mut reports = run_batch(&config, &specs, &series, mode)?;
    for (r, text) in reports.iter_mut().zip(&specs_text) {
        r.label = text.clone();
    }
    let effective = json!({
        "command": "backtest",
        "policy": policy,
        "csv": csv_path,
        "symbol": series.symbol,
        "w": specs_text,
        "bounds_mode": mode,
        "with_bh": args.with_bh,
    });

    let summaries: Vec<ReportSummary> = reports.iter().map(ReportSummary::from).collect();
    let path = out.json("backtest.json", &json!({ "config": effective, "reports": summaries }))?;
    for s in &summaries {
        println!(
            "{}: gain_loss={} variance={} sharpe={}{}",
            s.label,
            s.gain_loss,
            s.variance,
            s.sharpe,
            if s.degenerate_sharpe { " (degenerate)" } else { "" }
        );
    }
    println!("-> {}", path.display());

    if args.curve {
        for r in &reports {
            out.csv(&format!("curve_{}.csv", spec_label(&r.label)), &effective, |buf| Ok(r.write_curve_csv(buf)?))?;
        }
    }
    if reports.len() > 1 || args.with_bh {
        let mut table = Vec::new();
        if args.with_bh {
            table.push(buy_and_hold(config.v0, &series, config.bounds)?);
        }
        table.extend(reports.iter().cloned());
        let columns: Vec<&str> = table.iter().map(|r| r.label.as_str()).collect();
        let rows = json!({
            "Gain-Loss": table.iter().map(|r| r.gain_loss).collect::<Vec<_>>(),
            "Variance": table.iter().map(|r| r.variance).collect::<Vec<_>>(),
            "Sharpe Ratio": table.iter().map(|r| r.sharpe).collect::<Vec<_>>(),
        });
        out.json("backtest_table.json", &json!({ "config": effective, "columns": columns, "rows": rows }))?;
        out.csv("backtest_table.csv", &effective, |buf| Ok(write_batch_table_csv(buf, &table)?))?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify_rpe(args: &VerifyArgs, out: &Output) -> Result<i32> {
    let policy = args.policy.resolve(-0.5, 1.0);
    let config = policy.config()?;
    let (source, weights, k_max) = if !args.weights.is_empty() {
        let k_max = args.k_max.unwrap_or(args.weights.len());
        ("weights".to_string(), args.weights.clone(), k_max)
    } else {
        let text = args.w.clone().unwrap_or_else(|| "constant:0.5".into());
        let k_max = args.k_max.unwrap_or(30);
        let spec = WeightSpec::new(parse_weight_kind(&text)?, config.w_max())?;
        let weights = spec.schedule(k_max, None)?;
        (text, weights, k_max)
    };
    let mu_grid = if args.mu_grid.is_empty() { RPE_MU_GRID.to_vec() } else { args.mu_grid.clone() };
    let report = rpe_scan(&config, &weights, &mu_grid, k_max)?;

    let effective = json!({
        "command": "verify-rpe",
        "policy": policy,
        "schedule": source,
        "weights": weights,
        "mu_grid": mu_grid,
        "k_max": k_max,
    });
    out.json(
        "verify_rpe.json",
        &json!({ "config": effective, "verdict": report.verdict, "min": report.min, "entries": report.entries }),
    )?;
    if let Some((gain, mu, k)) = report.min {
        println!("minimum expected gain {gain:e} at mu={mu}, k={k}");
    }
    Ok(match &report.verdict {
        ScanVerdict::Certified => {
            println!("certified: expected gain-loss > 0 for all mu != 0, 2 <= k <= {k_max}");
            EXIT_OK
        }
        ScanVerdict::NotCertifiable { reason } => {
            println!("not certifiable: {reason}");
            EXIT_NOT_CERTIFIABLE
        }
        ScanVerdict::Violated { mu, k, gain } => {
            println!("violated: expected gain {gain:e} at mu={mu}, k={k}");
            EXIT_ERROR
        }
    })
}

fn cmd_weights(args: &WeightsArgs, out: &Output) -> Result<i32> {
    let text = args.w.clone().unwrap_or_else(|| DEFAULT_SPEC.into());
    let n = args.n.unwrap_or(DEFAULT_PERIODS);
    let w_max = args.w_max.unwrap_or(1.0);
    let spec = WeightSpec::new(parse_weight_kind(&text)?, w_max)?;
    let values = eval_domain(&spec, n)?;
    let effective = json!({ "command": "weights", "w": text, "n": n, "w_max": w_max });
    let path = out.csv("weights.csv", &effective, |buf| Ok(write_weights_csv_from(buf, 1, &values[1..])?))?;
    println!("weights {text}: {} rows -> {}", values.len(), path.display());
    Ok(EXIT_OK)
}
