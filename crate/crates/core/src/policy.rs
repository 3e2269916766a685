//! Double linear policy state machine.
//!
//! The account is split into a long leg holding `alpha * v0` and a short leg
//! holding `(1 - alpha) * v0`. At every stage both legs take the same
//! exposure fraction `w(k)`: the long leg buys `w * V_L`, the short leg sells
//! `w * V_S`. With a riskless rate `rf` the uninvested part of the long leg
//! accrues interest; the short proceeds are held as collateral and earn
//! nothing.
//!
//! Each leg carries its cumulative trading profit alongside its value, and
//! the gain-loss is the sum of the two profits. At stage 1 with `alpha = 1/2`
//! the two legs book exactly opposite amounts, so the gain is exactly zero.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("invalid market bounds: need -1 < x_min < 0 < x_max < inf, got x_min={x_min}, x_max={x_max}")]
    InvalidBounds { x_min: f64, x_max: f64 },
    #[error("invalid policy config: {0}")]
    InvalidConfig(String),
    #[error("inadmissible weight {w} at stage {stage}: must lie in [0, {w_max}]")]
    InadmissibleWeight { stage: usize, w: f64, w_max: f64 },
    #[error("return {x} at stage {stage} outside market bounds [{x_min}, {x_max}]")]
    ReturnOutOfBounds {
        stage: usize,
        x: f64,
        x_min: f64,
        x_max: f64,
    },
    #[error("length mismatch: {weights} weights but {returns} returns")]
    LengthMismatch { weights: usize, returns: usize },
}

/// Known per-period return bounds `-1 < x_min < 0 < x_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketBounds {
    x_min: f64,
    x_max: f64,
}

impl MarketBounds {
    pub fn new(x_min: f64, x_max: f64) -> Result<Self, PolicyError> {
        let ok = x_min > -1.0 && x_min < 0.0 && x_max > 0.0 && x_max.is_finite();
        if !ok {
            return Err(PolicyError::InvalidBounds { x_min, x_max });
        }
        Ok(Self { x_min, x_max })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Largest admissible weight, `min(1, 1 / x_max)`.
    pub fn w_max(&self) -> f64 {
        derive_w_max(self)
    }
}

pub fn derive_w_max(bounds: &MarketBounds) -> f64 {
    (1.0 / bounds.x_max).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub alpha: f64,
    pub v0: f64,
    pub rf: f64,
    pub bounds: MarketBounds,
}

impl PolicyConfig {
    pub fn new(alpha: f64, v0: f64, rf: f64, bounds: MarketBounds) -> Result<Self, PolicyError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(PolicyError::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {alpha}"
            )));
        }
        if !(v0 > 0.0 && v0.is_finite()) {
            return Err(PolicyError::InvalidConfig(format!(
                "v0 must be positive, got {v0}"
            )));
        }
        if !(rf >= 0.0 && rf.is_finite()) {
            return Err(PolicyError::InvalidConfig(format!(
                "rf must be nonnegative, got {rf}"
            )));
        }
        Ok(Self {
            alpha,
            v0,
            rf,
            bounds,
        })
    }

    /// Frictionless config (`rf = 0`), the setting all analytics assume.
    pub fn frictionless(alpha: f64, v0: f64, bounds: MarketBounds) -> Result<Self, PolicyError> {
        Self::new(alpha, v0, 0.0, bounds)
    }

    pub fn w_max(&self) -> f64 {
        self.bounds.w_max()
    }

    pub fn initial_state(&self) -> AccountState {
        AccountState {
            v_long: self.alpha * self.v0,
            v_short: (1.0 - self.alpha) * self.v0,
            stage: 0,
            pnl_long: 0.0,
            pnl_short: 0.0,
        }
    }

    /// Checks `0 <= w <= w_max` for every entry, reporting the first bad index.
    pub fn check_admissible(&self, weights: &[f64]) -> Result<(), PolicyError> {
        let w_max = self.w_max();
        for (stage, &w) in weights.iter().enumerate() {
            if !(0.0..=w_max).contains(&w) {
                return Err(PolicyError::InadmissibleWeight { stage, w, w_max });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccountState {
    pub v_long: f64,
    pub v_short: f64,
    pub stage: usize,
    /// Cumulative profit of the long leg since stage 0.
    pub pnl_long: f64,
    /// Cumulative profit of the short leg since stage 0.
    pub pnl_short: f64,
}

impl AccountState {
    pub fn total(&self) -> f64 {
        self.v_long + self.v_short
    }

    /// Cumulative gain-loss `V(k) - V0`.
    pub fn gain(&self) -> f64 {
        self.pnl_long + self.pnl_short
    }
}

/// Account states at stages `0..=k` and the cumulative gain-loss at each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<AccountState>,
    pub gains: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn final_state(&self) -> &AccountState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn final_gain(&self) -> f64 {
        *self.gains.last().expect("trajectory always holds the initial gain")
    }

    /// Total account values `V(0..=k)`.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(AccountState::total)
    }
}

/// Applies one stage of the recursion with weight `w` and realized return `x`.
pub fn step_account(
    state: &AccountState,
    w: f64,
    x: f64,
    config: &PolicyConfig,
) -> Result<AccountState, PolicyError> {
    let w_max = config.w_max();
    if !(0.0..=w_max).contains(&w) {
        return Err(PolicyError::InadmissibleWeight {
            stage: state.stage,
            w,
            w_max,
        });
    }
    if !config.bounds.contains(x) {
        return Err(PolicyError::ReturnOutOfBounds {
            stage: state.stage,
            x,
            x_min: config.bounds.x_min,
            x_max: config.bounds.x_max,
        });
    }
    Ok(advance(state, w, x, config.rf))
}

#[inline]
fn advance(state: &AccountState, w: f64, x: f64, rf: f64) -> AccountState {
    // w x <= 1, so neither leg moves by more than its own value; the same
    // rounding guard on both legs keeps their moves exact negatives
    let long_position = w * state.v_long;
    let mut long_profit = (long_position * x).min(state.v_long);
    if rf != 0.0 {
        long_profit += (state.v_long - long_position) * rf;
    }
    let short_profit = -(w * state.v_short * x).min(state.v_short);
    AccountState {
        v_long: state.v_long + long_profit,
        v_short: state.v_short + short_profit,
        stage: state.stage + 1,
        pnl_long: state.pnl_long + long_profit,
        pnl_short: state.pnl_short + short_profit,
    }
}

/// Runs the policy over a whole return path.
pub fn evolve(
    config: &PolicyConfig,
    weights: &[f64],
    returns: &[f64],
) -> Result<Trajectory, PolicyError> {
    if weights.len() != returns.len() {
        return Err(PolicyError::LengthMismatch {
            weights: weights.len(),
            returns: returns.len(),
        });
    }
    let mut state = config.initial_state();
    let mut states = Vec::with_capacity(weights.len() + 1);
    let mut gains = Vec::with_capacity(weights.len() + 1);
    states.push(state);
    gains.push(state.gain());
    for (&w, &x) in weights.iter().zip(returns) {
        state = step_account(&state, w, x, config)?;
        states.push(state);
        gains.push(state.gain());
    }
    Ok(Trajectory { states, gains })
}

/// Terminal gain only, without materializing the trajectory.
pub fn terminal_gain(
    config: &PolicyConfig,
    weights: &[f64],
    returns: &[f64],
) -> Result<f64, PolicyError> {
    if weights.len() != returns.len() {
        return Err(PolicyError::LengthMismatch {
            weights: weights.len(),
            returns: returns.len(),
        });
    }
    let mut state = config.initial_state();
    for (&w, &x) in weights.iter().zip(returns) {
        state = step_account(&state, w, x, config)?;
    }
    Ok(state.gain())
}

/// Worst-case lower bounds `(V_L(k), V_S(k))` over admissible weights and
/// bounded returns.
pub fn survivability_bound(config: &PolicyConfig, k: u32) -> (f64, f64) {
    let w_max = config.w_max();
    let b = &config.bounds;
    let long = config.v0 * config.alpha * (1.0 + w_max * b.x_min).powi(k as i32);
    let short = config.v0 * (1.0 - config.alpha) * (1.0 - w_max * b.x_max).max(0.0).powi(k as i32);
    (long, short)
}
