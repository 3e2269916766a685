//! Double linear long-short feedback policy.
//!
//! A long leg invests `w(k) V_L(k)` and a short leg sells `w(k) V_S(k)` each
//! period. The crate provides the account dynamics ([`policy`]), elementary
//! symmetric polynomial expansions ([`esp`]), closed-form gain-loss moments
//! and positivity certificates ([`analytics`]), weighting functions
//! ([`weights`]), a jump-diffusion Monte Carlo ([`sim`]) and a price-series
//! backtester ([`backtest`]). The `dlp` binary wraps them in [`cli`].
//!
//! ```
//! use dlp::policy::{MarketBounds, PolicyConfig, terminal_gain};
//!
//! let bounds = MarketBounds::new(-0.5, 1.0).unwrap();
//! let config = PolicyConfig::frictionless(0.5, 1.0, bounds).unwrap();
//! let g = terminal_gain(&config, &[0.5, 0.5], &[0.1, -0.1]).unwrap();
//! assert!((g - -0.0025).abs() < 1e-15);
//! ```

pub mod analytics;
pub mod backtest;
pub mod cli;
pub mod esp;
pub mod policy;
pub mod sim;
pub mod weights;

pub use analytics::{expected_gain_loss, gain_loss_stats, rpe_scan, variance_gain_loss, ReturnMoments};
pub use backtest::{run_backtest, BacktestReport, PriceSeries};
pub use policy::{evolve, AccountState, MarketBounds, PolicyConfig, Trajectory};
pub use sim::{monte_carlo_gain_loss, GbmJumpParams, ReturnGenerator};
pub use weights::{WeightKind, WeightSpec};
