//! Weighting functions.
//!
//! Named schedules over a horizon `N` (evaluated at stages `k = 0..N`):
//!
//! - `constant(w)`: `w`
//! - `log_ramp`: `ln(1 + (k/N)(e - 1))`, rising from 0 to 1
//! - `sin_burst`: `(sin(1 / (0.02 k / N - 0.01)) + 1) / 2`, pinned to 0.5 at
//!   the singular stage `k = N/2`
//! - `edge_sin`: `f sin(1/f)` where positive, else 0, with `f = 4k/N - 2`;
//!   the removable singularity at `k = N/2` is 0
//!
//! plus the price-driven moving-average indicator, which invests `w` only
//! when `S(k)` strictly exceeds the trailing `d`-period mean and is 0 during
//! warm-up. Weight `w(k)` is decided once `S(k)` is known and applies to the
//! return over `[k, k+1]`.
//!
//! Every emitted weight is clamped into `[0, w_max]`; tabulated schedules are
//! instead rejected when out of range.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("invalid weight spec `{0}`")]
    Parse(String),
    #[error("w_max must lie in (0, 1], got {0}")]
    InvalidWMax(f64),
    #[error("weight {w} at stage {stage} outside [0, {w_max}]")]
    OutOfRange { stage: usize, w: f64, w_max: f64 },
    #[error("moving-average window must be at least 1")]
    ZeroWindow,
    #[error("insufficient history: stage {k} needs {d} prices")]
    InsufficientHistory { k: usize, d: usize },
    #[error("price-driven schedule `{0}` needs a price series")]
    NeedsPrices(String),
    #[error("need prices up to stage {needed}, got {available}")]
    ShortPrices { needed: usize, available: usize },
    #[error("table holds {len} weights, horizon needs {n}")]
    TableTooShort { len: usize, n: usize },
    #[error("weight table row {row}: expected stage {expected}, found {found}")]
    TableStage {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("weight table: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Kinds of weighting function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    Constant { w: f64 },
    LogRamp,
    SinBurst,
    EdgeSin,
    MaIndicator { d: usize, w: f64 },
    Table { values: Vec<f64> },
}

/// Weight used by `ma:<d>` when no explicit weight is given.
pub const DEFAULT_MA_WEIGHT: f64 = 0.8;

impl WeightKind {
    pub fn is_price_driven(&self) -> bool {
        matches!(self, WeightKind::MaIndicator { .. })
    }

    /// Unclamped value at stage `k` of a horizon-`n` deterministic schedule.
    ///
    /// Returns `None` for price-driven kinds and for table stages past the end.
    pub fn raw_value(&self, k: usize, n: usize) -> Option<f64> {
        let nf = n as f64;
        let kf = k as f64;
        let v = match self {
            WeightKind::Constant { w } => *w,
            WeightKind::LogRamp => (kf / nf * (std::f64::consts::E - 1.0)).ln_1p(),
            WeightKind::SinBurst => {
                if 2 * k == n {
                    0.5
                } else {
                    // 0.02 k / N - 0.01 = 0.01 (2k - N) / N
                    let arg = 0.01 * (2.0 * kf - nf) / nf;
                    0.5 * ((1.0 / arg).sin() + 1.0)
                }
            }
            WeightKind::EdgeSin => {
                if 2 * k == n {
                    0.0
                } else {
                    let f = (4.0 * kf - 2.0 * nf) / nf;
                    let v = f * (1.0 / f).sin();
                    if v >= 0.0 {
                        v
                    } else {
                        0.0
                    }
                }
            }
            WeightKind::Table { values } => return values.get(k).copied(),
            WeightKind::MaIndicator { .. } => return None,
        };
        Some(v)
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightKind::Constant { w } => write!(f, "constant:{w}"),
            WeightKind::LogRamp => write!(f, "log_ramp"),
            WeightKind::SinBurst => write!(f, "sin_burst"),
            WeightKind::EdgeSin => write!(f, "edge_sin"),
            WeightKind::MaIndicator { d, w } => write!(f, "ma:{d}:{w}"),
            WeightKind::Table { values } => write!(f, "table[{}]", values.len()),
        }
    }
}

/// Parses `constant:<w>`, `log_ramp`, `sin_burst`, `edge_sin` and
/// `ma:<d>[:<w>]`. Tables come from [`read_weights_csv`] (the CLI resolves
/// `table:<path>`).
impl FromStr for WeightKind {
    type Err = WeightError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WeightError::Parse(s.to_string());
        let mut parts = s.trim().split(':');
        let head = parts.next().ok_or_else(bad)?;
        let rest: Vec<&str> = parts.collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let kind = match (head, rest.as_slice()) {
            ("constant", [w]) => WeightKind::Constant { w: num(w)? },
            ("log_ramp", []) => WeightKind::LogRamp,
            ("sin_burst", []) => WeightKind::SinBurst,
            ("edge_sin", []) => WeightKind::EdgeSin,
            ("ma", [d]) | ("ma", [d, _]) => {
                let d: usize = d.parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(WeightError::ZeroWindow);
                }
                let w = match rest.get(1) {
                    Some(w) => num(w)?,
                    None => DEFAULT_MA_WEIGHT,
                };
                WeightKind::MaIndicator { d, w }
            }
            _ => return Err(bad()),
        };
        Ok(kind)
    }
}

/// A weighting function together with the admissible cap `w_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub w_max: f64,
}

impl WeightSpec {
    pub fn new(kind: WeightKind, w_max: f64) -> Result<Self, WeightError> {
        if !(w_max > 0.0 && w_max <= 1.0) {
            return Err(WeightError::InvalidWMax(w_max));
        }
        Ok(Self { kind, w_max })
    }

    /// Same kind with the cap lowered to `min(self.w_max, w_max)`.
    pub fn capped(&self, w_max: f64) -> Self {
        Self {
            kind: self.kind.clone(),
            w_max: self.w_max.min(w_max),
        }
    }

    pub fn is_price_driven(&self) -> bool {
        self.kind.is_price_driven()
    }

    pub fn label(&self) -> String {
        self.kind.to_string()
    }

    /// Weights for stages `0..n`. Price-driven kinds read `prices[0..=k]` at
    /// stage `k`, so `prices` needs at least `n` entries.
    pub fn schedule(&self, n: usize, prices: Option<&[f64]>) -> Result<Vec<f64>, WeightError> {
        match &self.kind {
            WeightKind::MaIndicator { d, w } => {
                let prices = prices.ok_or_else(|| WeightError::NeedsPrices(self.label()))?;
                if prices.len() < n {
                    return Err(WeightError::ShortPrices {
                        needed: n,
                        available: prices.len(),
                    });
                }
                check_weight(*w, self.w_max, 0)?;
                (0..n)
                    .map(|k| ma_indicator_weight(&prices[..=k], k, *d, *w, self.w_max))
                    .collect()
            }
            _ => eval_schedule(self, n),
        }
    }
}

fn check_weight(w: f64, w_max: f64, stage: usize) -> Result<(), WeightError> {
    if !(0.0..=w_max).contains(&w) {
        return Err(WeightError::OutOfRange { stage, w, w_max });
    }
    Ok(())
}

/// Deterministic schedule for stages `0..n` with horizon `N = n`.
pub fn eval_schedule(spec: &WeightSpec, n: usize) -> Result<Vec<f64>, WeightError> {
    eval_stages(spec, 0..n, n)
}

/// Schedule over the closed domain `0..=n`, for plotting the function itself.
pub fn eval_domain(spec: &WeightSpec, n: usize) -> Result<Vec<f64>, WeightError> {
    eval_stages(spec, 0..n + 1, n)
}

fn eval_stages(
    spec: &WeightSpec,
    stages: std::ops::Range<usize>,
    n: usize,
) -> Result<Vec<f64>, WeightError> {
    if spec.is_price_driven() {
        return Err(WeightError::NeedsPrices(spec.label()));
    }
    if let WeightKind::Table { values } = &spec.kind {
        if values.len() < stages.end {
            return Err(WeightError::TableTooShort {
                len: values.len(),
                n: stages.end,
            });
        }
        for (stage, &w) in values[..stages.end].iter().enumerate() {
            check_weight(w, spec.w_max, stage)?;
        }
        return Ok(values[stages].to_vec());
    }
    let mut clamped = 0usize;
    let out = stages
        .map(|k| {
            let raw = spec.kind.raw_value(k, n).expect("deterministic kind");
            let v = raw.clamp(0.0, spec.w_max);
            if v != raw {
                clamped += 1;
            }
            v
        })
        .collect();
    if clamped > 0 {
        log::debug!("{}: clamped {clamped} weights to [0, {}]", spec.label(), spec.w_max);
    }
    Ok(out)
}

/// Trailing `d`-period simple average `(1/d) sum_{i<d} prices[k - i]`.
pub fn ma_value(prices: &[f64], k: usize, d: usize) -> Result<f64, WeightError> {
    if d == 0 {
        return Err(WeightError::ZeroWindow);
    }
    if k + 1 < d {
        return Err(WeightError::InsufficientHistory { k, d });
    }
    if prices.len() <= k {
        return Err(WeightError::ShortPrices {
            needed: k + 1,
            available: prices.len(),
        });
    }
    let window = &prices[k + 1 - d..=k];
    Ok(window.iter().sum::<f64>() / d as f64)
}

/// `w` if `prices[k] > MA_d(k)` with a full window available, else 0.
pub fn ma_indicator_weight(
    prices: &[f64],
    k: usize,
    d: usize,
    w: f64,
    w_max: f64,
) -> Result<f64, WeightError> {
    check_weight(w, w_max, k)?;
    MovingAverage { window: d }.gate(prices, k, w)
}

/// A price-level indicator: invest when the current price is strictly above
/// the indicator level.
pub trait PriceIndicator {
    /// Level at stage `k`, or `None` during warm-up.
    fn level(&self, prices: &[f64], k: usize) -> Result<Option<f64>, WeightError>;

    fn gate(&self, prices: &[f64], k: usize, w: f64) -> Result<f64, WeightError> {
        let Some(level) = self.level(prices, k)? else {
            return Ok(0.0);
        };
        Ok(if prices[k] > level { w } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MovingAverage {
    pub window: usize,
}

impl PriceIndicator for MovingAverage {
    fn level(&self, prices: &[f64], k: usize) -> Result<Option<f64>, WeightError> {
        match ma_value(prices, k, self.window) {
            Ok(v) => Ok(Some(v)),
            Err(WeightError::InsufficientHistory { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

/// Elementwise `min(max(v, 0), w_max)`.
pub fn clamp_admissible(values: &[f64], w_max: f64) -> Vec<f64> {
    values.iter().map(|v| v.max(0.0).min(w_max)).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightRow {
    stage: usize,
    weight: f64,
}

/// Reads a `stage,weight` CSV. Stages must run `0, 1, 2, ...`. Lines starting
/// with `#` are ignored.
pub fn read_weights_csv(reader: impl Read) -> Result<Vec<f64>, WeightError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, rec) in rdr.deserialize::<WeightRow>().enumerate() {
        let rec = rec?;
        if rec.stage != row {
            return Err(WeightError::TableStage {
                row: row + 1,
                expected: row,
                found: rec.stage,
            });
        }
        out.push(rec.weight);
    }
    Ok(out)
}

pub fn load_weights_csv(path: impl AsRef<Path>) -> Result<Vec<f64>, WeightError> {
    read_weights_csv(std::fs::File::open(path)?)
}

/// Writes `stage,weight` rows starting at stage 0.
pub fn write_weights_csv(writer: impl Write, weights: &[f64]) -> Result<(), WeightError> {
    write_weights_csv_from(writer, 0, weights)
}

/// Writes `stage,weight` rows numbered from `first`.
pub fn write_weights_csv_from(writer: impl Write, first: usize, weights: &[f64]) -> Result<(), WeightError> {
    let mut w = csv::Writer::from_writer(writer);
    for (i, &weight) in weights.iter().enumerate() {
        w.serialize(WeightRow { stage: first + i, weight })?;
    }
    w.flush()?;
    Ok(())
}
