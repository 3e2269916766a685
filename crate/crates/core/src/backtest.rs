//! Running the policy on a recorded price series.
//!
//! Reported metrics are per-period conventions:
//!
//! - **Gain-Loss**: terminal `V(k) - V0`.
//! - **Variance**: sample variance (`n - 1` denominator) of the per-period
//!   account returns `r(k) = V(k+1)/V(k) - 1`.
//! - **Sharpe Ratio**: `mean(r) / sd(r)` with zero riskless rate, not
//!   annualized. A zero standard deviation yields 0 with `degenerate_sharpe`
//!   set.

use crate::policy::{derive_w_max, evolve, MarketBounds, PolicyConfig, PolicyError};
use crate::sim::{prices_to_returns, SimError};
use crate::weights::{WeightError, WeightSpec};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("price file is empty")]
    Empty,
    #[error("row {row}: nonpositive price {price}")]
    NonpositivePrice { row: usize, price: f64 },
    #[error("row {row}: nonmonotone timestamps ({previous} then {current})")]
    NonmonotoneTimestamps {
        row: usize,
        previous: i64,
        current: i64,
    },
    #[error("row {row}: {source}")]
    Parse {
        row: usize,
        #[source]
        source: csv::Error,
    },
    #[error("series needs at least two prices, got {0}")]
    TooShort(usize),
    #[error("sharpe ratio needs at least two period returns, got {0}")]
    TooFewReturns(usize),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub symbol: String,
    pub timestamps: Vec<i64>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    /// Builds a validated series; row numbers in errors are 1-based.
    pub fn new(symbol: impl Into<String>, timestamps: Vec<i64>, prices: Vec<f64>) -> Result<Self, BacktestError> {
        if prices.is_empty() {
            return Err(BacktestError::Empty);
        }
        assert_eq!(timestamps.len(), prices.len(), "timestamps and prices differ in length");
        for (i, &price) in prices.iter().enumerate() {
            if !(price > 0.0 && price.is_finite()) {
                return Err(BacktestError::NonpositivePrice { row: i + 1, price });
            }
        }
        for (i, pair) in timestamps.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(BacktestError::NonmonotoneTimestamps {
                    row: i + 2,
                    previous: pair[0],
                    current: pair[1],
                });
            }
        }
        Ok(Self {
            symbol: symbol.into(),
            timestamps,
            prices,
        })
    }

    /// Series with ordinal timestamps `0, 1, 2, ...`.
    pub fn from_prices(symbol: impl Into<String>, prices: Vec<f64>) -> Result<Self, BacktestError> {
        let timestamps = (0..prices.len() as i64).collect();
        Self::new(symbol, timestamps, prices)
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// The first `n` observations.
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            symbol: self.symbol.clone(),
            timestamps: self.timestamps[..n].to_vec(),
            prices: self.prices[..n].to_vec(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    timestamp: i64,
    price: f64,
}

/// Reads a UTF-8 `timestamp,price` CSV.
pub fn ingest_csv(reader: impl Read, symbol: &str) -> Result<PriceSeries, BacktestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    for (i, rec) in rdr.deserialize::<PriceRow>().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|source| BacktestError::Parse { row, source })?;
        if !(rec.price > 0.0 && rec.price.is_finite()) {
            return Err(BacktestError::NonpositivePrice { row, price: rec.price });
        }
        if let Some(&previous) = timestamps.last() {
            if rec.timestamp <= previous {
                return Err(BacktestError::NonmonotoneTimestamps {
                    row,
                    previous,
                    current: rec.timestamp,
                });
            }
        }
        timestamps.push(rec.timestamp);
        prices.push(rec.price);
    }
    PriceSeries::new(symbol, timestamps, prices)
}

pub fn ingest_csv_path(path: impl AsRef<Path>) -> Result<PriceSeries, BacktestError> {
    let path = path.as_ref();
    let symbol = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    ingest_csv(std::fs::File::open(path)?, &symbol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpeRatio {
    pub value: f64,
    pub degenerate: bool,
}

/// Unannualized Sharpe ratio of per-period returns with zero riskless rate.
pub fn sharpe_ratio(period_returns: &[f64]) -> Result<SharpeRatio, BacktestError> {
    let n = period_returns.len();
    if n < 2 {
        return Err(BacktestError::TooFewReturns(n));
    }
    let first = period_returns[0];
    let sd = sample_variance(period_returns).sqrt();
    if period_returns.iter().all(|&r| r == first) || sd == 0.0 {
        return Ok(SharpeRatio {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(SharpeRatio {
        value: mean(period_returns) / sd,
        degenerate: false,
    })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// `n - 1` denominator; 0 for fewer than two values.
fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// How the return bounds used for admissibility are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsMode {
    /// Use the bounds in the policy config; out-of-range returns are errors.
    #[default]
    Configured,
    /// Take `x_min`/`x_max` from the observed returns, keeping the configured
    /// value on a side the data never reaches.
    FromData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub label: String,
    pub gain_loss: f64,
    pub variance: f64,
    pub sharpe: f64,
    pub degenerate_sharpe: bool,
    pub n_periods: usize,
    pub bounds: MarketBounds,
    /// `(stage, gain)` for stages `0..=n_periods`.
    pub curve: Vec<(usize, f64)>,
    pub weights_used: Vec<f64>,
}

impl BacktestReport {
    fn from_values(label: String, values: &[f64], gains: &[f64], bounds: MarketBounds, weights_used: Vec<f64>) -> Self {
        let period_returns: Vec<f64> = values.windows(2).map(|v| v[1] / v[0] - 1.0).collect();
        let sharpe = sharpe_ratio(&period_returns).unwrap_or(SharpeRatio {
            value: 0.0,
            degenerate: true,
        });
        let curve: Vec<(usize, f64)> = gains.iter().copied().enumerate().collect();
        Self {
            label,
            gain_loss: curve.last().map_or(0.0, |c| c.1),
            variance: sample_variance(&period_returns),
            sharpe: sharpe.value,
            degenerate_sharpe: sharpe.degenerate,
            n_periods: period_returns.len(),
            bounds,
            curve,
            weights_used,
        }
    }

    /// Writes the gain-loss curve as `stage,gain`.
    pub fn write_curve_csv(&self, writer: impl Write) -> Result<(), BacktestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["stage", "gain"])?;
        for (stage, gain) in &self.curve {
            w.write_record([stage.to_string(), gain.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn effective_bounds(configured: MarketBounds, returns: &[f64], mode: BoundsMode) -> Result<MarketBounds, PolicyError> {
    match mode {
        BoundsMode::Configured => Ok(configured),
        BoundsMode::FromData => {
            let lo = returns.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let x_min = if lo < 0.0 { lo } else { configured.x_min() };
            let x_max = if hi > 0.0 { hi } else { configured.x_max() };
            MarketBounds::new(x_min, x_max)
        }
    }
}

/// Runs the policy over `series`. The weight at stage `k` sees
/// `prices[0..=k]` and applies to the return from `k` to `k + 1`.
pub fn run_backtest(
    config: &PolicyConfig,
    spec: &WeightSpec,
    series: &PriceSeries,
    mode: BoundsMode,
) -> Result<BacktestReport, BacktestError> {
    if series.len() < 2 {
        return Err(BacktestError::TooShort(series.len()));
    }
    let returns = prices_to_returns(&series.prices)?;
    let bounds = effective_bounds(config.bounds, &returns, mode)?;
    let config = PolicyConfig { bounds, ..*config };
    let spec = spec.capped(derive_w_max(&bounds));
    let weights = spec.schedule(returns.len(), Some(&series.prices))?;
    let trajectory = evolve(&config, &weights, &returns)?;
    let values: Vec<f64> = trajectory.values().collect();
    Ok(BacktestReport::from_values(spec.label(), &values, &trajectory.gains, bounds, weights))
}

/// Long-only, fully invested baseline: `V(k) = V0 S(k) / S(0)`.
pub fn buy_and_hold(v0: f64, series: &PriceSeries, bounds: MarketBounds) -> Result<BacktestReport, BacktestError> {
    if series.len() < 2 {
        return Err(BacktestError::TooShort(series.len()));
    }
    let s0 = series.prices[0];
    let values: Vec<f64> = series.prices.iter().map(|s| v0 * s / s0).collect();
    let gains: Vec<f64> = values.iter().map(|v| v - v0).collect();
    let weights = vec![1.0; series.len() - 1];
    Ok(BacktestReport::from_values("B&H".into(), &values, &gains, bounds, weights))
}

/// Reports for several weight specs run on the same series.
pub fn run_batch(
    config: &PolicyConfig,
    specs: &[WeightSpec],
    series: &PriceSeries,
    mode: BoundsMode,
) -> Result<Vec<BacktestReport>, BacktestError> {
    use rayon::prelude::*;
    specs
        .par_iter()
        .map(|spec| run_backtest(config, spec, series, mode))
        .collect()
}

/// `metric,<label>,...` with rows Gain-Loss, Variance, Sharpe Ratio.
pub fn write_batch_table_csv(writer: impl Write, reports: &[BacktestReport]) -> Result<(), BacktestError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["metric".to_string()];
    header.extend(reports.iter().map(|r| r.label.clone()));
    w.write_record(&header)?;
    let rows: [(&str, fn(&BacktestReport) -> f64); 3] = [
        ("Gain-Loss", |r| r.gain_loss),
        ("Variance", |r| r.variance),
        ("Sharpe Ratio", |r| r.sharpe),
    ];
    for (name, get) in rows {
        let mut rec = vec![name.to_string()];
        rec.extend(reports.iter().map(|r| get(r).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
