//! Return-path generators and the Monte Carlo harness.
//!
//! Prices follow geometric Brownian motion with downward Poisson jumps,
//! `S_t = S_0 exp((mu* - sigma*^2 / 2) t + sigma* W_t) (1 - delta)^{N_t}`,
//! sampled exactly at period ends:
//!
//! ```text
//! S(k+1) = S(k) exp((mu* - sigma*^2/2) dt + sigma* sqrt(dt) Z_k) (1 - delta)^{dN_k}
//! ```
//!
//! with `Z_k ~ N(0, 1)` and `dN_k ~ Poisson(lambda dt)`.
//!
//! Randomness: every path owns a ChaCha8 stream, seeded with `seed` and
//! positioned on stream `path_index` (`rand_chacha` 0.9, `rand_distr` 0.5,
//! versions pinned). Within a step the normal draw precedes the Poisson draw.
//! Per-path gains are reduced in path order with compensated summation, so
//! results are bit-identical for any number of worker threads.

use crate::analytics::{Neumaier, ReturnMoments, TwoPointModel};
use crate::policy::{terminal_gain, PolicyConfig, PolicyError};
use crate::weights::{WeightError, WeightSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error("nonpositive price {price} at index {index}")]
    NonpositivePrice { index: usize, price: f64 },
    #[error("need at least two prices, got {0}")]
    TooFewPrices(usize),
    #[error("n_paths must be at least 1")]
    NoPaths,
    #[error("price-driven weights `{0}` need a price-generating model")]
    NeedsPrices(String),
    #[error("path {path}: {source}")]
    Path {
        path: usize,
        #[source]
        source: PolicyError,
    },
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Annual volatility used by default for the jump-diffusion experiments.
pub const DEFAULT_SIGMA_STAR: f64 = 0.3563;
pub const DEFAULT_LAMBDA: f64 = 0.2;
pub const DEFAULT_DELTA: f64 = 0.1;
pub const DEFAULT_PERIODS: usize = 252;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_SWEEP_POINTS: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmJumpParams {
    /// Annualized drift.
    pub mu_star: f64,
    /// Annualized volatility.
    pub sigma_star: f64,
    /// Jump intensity per year.
    pub lambda: f64,
    /// Jump magnitude, `0 <= delta < 1`.
    pub delta: f64,
    /// Period length in years.
    pub dt: f64,
    pub n_periods: usize,
    pub s0: f64,
    /// Clip each simulated return into the policy's market bounds.
    #[serde(default)]
    pub clip_returns: bool,
}

impl GbmJumpParams {
    /// One year of daily periods with the default volatility and jump settings.
    pub fn daily(mu_star: f64) -> Self {
        Self {
            mu_star,
            sigma_star: DEFAULT_SIGMA_STAR,
            lambda: DEFAULT_LAMBDA,
            delta: DEFAULT_DELTA,
            dt: 1.0 / DEFAULT_PERIODS as f64,
            n_periods: DEFAULT_PERIODS,
            s0: 100.0,
            clip_returns: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidParams(m));
        if !self.mu_star.is_finite() {
            return bad(format!("mu_star must be finite, got {}", self.mu_star));
        }
        if !(self.sigma_star >= 0.0 && self.sigma_star.is_finite()) {
            return bad(format!("sigma_star must be >= 0, got {}", self.sigma_star));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return bad(format!("delta must lie in [0, 1), got {}", self.delta));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be > 0, got {}", self.dt));
        }
        if self.n_periods == 0 {
            return bad("n_periods must be at least 1".into());
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return bad(format!("s0 must be > 0, got {}", self.s0));
        }
        Ok(())
    }

    /// Exact per-period moments of `X = S(k+1)/S(k) - 1`.
    ///
    /// `E[1 + X] = exp(mu* dt) exp(-lambda delta dt)` and
    /// `E[(1 + X)^2] = exp((2 mu* + sigma*^2) dt) exp(lambda dt ((1 - delta)^2 - 1))`.
    pub fn period_moments(&self) -> (f64, f64) {
        let dt = self.dt;
        let m1 = (self.mu_star * dt - self.lambda * self.delta * dt).exp();
        let jump2 = (1.0 - self.delta).powi(2) - 1.0;
        let m2 = ((2.0 * self.mu_star + self.sigma_star.powi(2)) * dt + self.lambda * dt * jump2).exp();
        (m1 - 1.0, m2 - m1 * m1)
    }

    pub fn return_moments(&self) -> Option<ReturnMoments> {
        let (mu, var) = self.period_moments();
        ReturnMoments::new(mu, var).ok()
    }
}

pub(crate) fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Prices `S(0..=n_periods)` of one path.
pub fn simulate_path(params: &GbmJumpParams, seed: u64, path_index: u64) -> Result<Vec<f64>, SimError> {
    params.validate()?;
    let mut rng = path_rng(seed, path_index);
    let jumps = if params.lambda > 0.0 {
        Some(
            Poisson::new(params.lambda * params.dt)
                .map_err(|e| SimError::InvalidParams(e.to_string()))?,
        )
    } else {
        None
    };
    let drift = (params.mu_star - 0.5 * params.sigma_star * params.sigma_star) * params.dt;
    let vol = params.sigma_star * params.dt.sqrt();
    let mut prices = Vec::with_capacity(params.n_periods + 1);
    let mut s = params.s0;
    prices.push(s);
    for _ in 0..params.n_periods {
        let z: f64 = rng.sample(StandardNormal);
        let mut growth = (drift + vol * z).exp();
        if let Some(jumps) = &jumps {
            let n: f64 = jumps.sample(&mut rng);
            if n > 0.0 && params.delta > 0.0 {
                growth *= (1.0 - params.delta).powi(n as i32);
            }
        }
        s *= growth;
        prices.push(s);
    }
    Ok(prices)
}

/// `X(k) = (S(k+1) - S(k)) / S(k)`.
pub fn prices_to_returns(prices: &[f64]) -> Result<Vec<f64>, SimError> {
    if prices.len() < 2 {
        return Err(SimError::TooFewPrices(prices.len()));
    }
    if let Some((index, &price)) = prices.iter().enumerate().find(|(_, &p)| !(p > 0.0)) {
        return Err(SimError::NonpositivePrice { index, price });
    }
    Ok(prices.windows(2).map(|p| (p[1] - p[0]) / p[0]).collect())
}

fn two_point_draws(model: &TwoPointModel, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..k)
        .map(|_| {
            if rng.random::<f64>() < model.p_up {
                model.x_up
            } else {
                model.x_down
            }
        })
        .collect()
}

/// `k` i.i.d. draws from a two-point model.
pub fn simulate_two_point(model: &TwoPointModel, k: usize, seed: u64) -> Vec<f64> {
    two_point_draws(model, k, &mut path_rng(seed, 0))
}

/// Source of return paths for the Monte Carlo harness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum ReturnGenerator {
    GbmJump(GbmJumpParams),
    TwoPoint { model: TwoPointModel, n_periods: usize },
}

impl ReturnGenerator {
    pub fn n_periods(&self) -> usize {
        match self {
            ReturnGenerator::GbmJump(p) => p.n_periods,
            ReturnGenerator::TwoPoint { n_periods, .. } => *n_periods,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub mean_gain: f64,
    pub std_error: f64,
    pub sample_variance: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Terminal gains of paths `0..n_paths`, in path order.
pub fn simulate_gains(
    config: &PolicyConfig,
    spec: &WeightSpec,
    generator: &ReturnGenerator,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>, SimError> {
    if n_paths == 0 {
        return Err(SimError::NoPaths);
    }
    let spec = spec.capped(config.w_max());
    let n = generator.n_periods();
    let fixed = if spec.is_price_driven() {
        if matches!(generator, ReturnGenerator::TwoPoint { .. }) {
            return Err(SimError::NeedsPrices(spec.label()));
        }
        None
    } else {
        Some(spec.schedule(n, None)?)
    };
    if let ReturnGenerator::GbmJump(p) = generator {
        p.validate()?;
    }
    (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let (returns, weights) = match generator {
                ReturnGenerator::GbmJump(p) => {
                    let prices = simulate_path(p, seed, path as u64)?;
                    let mut returns = prices_to_returns(&prices)?;
                    if p.clip_returns {
                        let b = config.bounds;
                        for x in &mut returns {
                            *x = x.clamp(b.x_min(), b.x_max());
                        }
                    }
                    let weights = match &fixed {
                        Some(w) => w.clone(),
                        None => spec.schedule(n, Some(&prices))?,
                    };
                    (returns, weights)
                }
                ReturnGenerator::TwoPoint { model, n_periods } => {
                    let mut rng = path_rng(seed, path as u64);
                    let weights = fixed.clone().expect("checked above");
                    (two_point_draws(model, *n_periods, &mut rng), weights)
                }
            };
            terminal_gain(config, &weights, &returns).map_err(|source| SimError::Path { path, source })
        })
        .collect()
}

/// Mean, sample variance and standard error of the terminal gain.
pub fn monte_carlo_gain_loss(
    config: &PolicyConfig,
    spec: &WeightSpec,
    generator: &ReturnGenerator,
    n_paths: usize,
    seed: u64,
) -> Result<MonteCarloResult, SimError> {
    let gains = simulate_gains(config, spec, generator, n_paths, seed)?;
    Ok(summarize(&gains, seed))
}

fn summarize(gains: &[f64], seed: u64) -> MonteCarloResult {
    let n = gains.len();
    let mut sum = Neumaier::default();
    gains.iter().for_each(|&g| sum.add(g));
    let mean = sum.total() / n as f64;
    let sample_variance = if n > 1 {
        let mut dev = Neumaier::default();
        gains.iter().for_each(|&g| dev.add((g - mean) * (g - mean)));
        dev.total() / (n - 1) as f64
    } else {
        0.0
    };
    MonteCarloResult {
        mean_gain: mean,
        std_error: (sample_variance / n as f64).sqrt(),
        sample_variance,
        n_paths: n,
        seed,
    }
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub mu_star: f64,
    pub mean_gain: f64,
    pub std_error: f64,
}

/// Mean terminal gain across a drift grid. Each grid point reuses the same
/// seed, so neighbouring points share their normal and Poisson draws.
pub fn mu_star_sweep(
    config: &PolicyConfig,
    spec: &WeightSpec,
    base: &GbmJumpParams,
    mu_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>, SimError> {
    mu_grid
        .iter()
        .map(|&mu_star| {
            let params = GbmJumpParams { mu_star, ..*base };
            let r = monte_carlo_gain_loss(config, spec, &ReturnGenerator::GbmJump(params), n_paths, seed)?;
            Ok(SweepPoint {
                mu_star,
                mean_gain: r.mean_gain,
                std_error: r.std_error,
            })
        })
        .collect()
}

/// Writes `path_id,stage,price` rows.
pub fn write_paths_csv(writer: impl Write, paths: &[Vec<f64>]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["path_id", "stage", "price"])?;
    for (id, path) in paths.iter().enumerate() {
        for (stage, price) in path.iter().enumerate() {
            w.write_record([id.to_string(), stage.to_string(), price.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
