//! Closed-form moments of the cumulative gain-loss and the RPE verifier.
//!
//! Everything here assumes a frictionless market (`rf = 0`) and independent
//! per-period returns with common mean `mu` and variance `sigma2`. The
//! statements certified are exactly those: nothing is claimed for serially
//! dependent returns.
//!
//! Numerics: the expected gain is evaluated through the even/odd split of the
//! two leg products. Writing `R+ = E + O` and `R- = E - O`, multiplying both
//! legs by `(1 + c)` and `(1 - c)` maps `(E, O)` to `(E + cO, O + cE)`. With
//! `A = E - 1` every update adds same-signed terms, so at `alpha = 1/2` the
//! gain `V0 * A` is accumulated without cancellation. The variance is the
//! six-product expression grouped into three product differences, each
//! evaluated as `prod(q) * expm1(sum ln(1 + d/q))`.

use crate::esp::count_positive;
use crate::policy::{PolicyConfig, PolicyError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("analytics assume a frictionless market (rf = 0), got rf = {0}")]
    NonzeroRiskless(f64),
    #[error("horizon {k} exceeds schedule length {len}")]
    HorizonTooLong { k: usize, len: usize },
    #[error("mean return must satisfy |mu| < 1, got {0}")]
    MeanOutOfRange(f64),
    #[error("variance must be positive, got {0}")]
    NonpositiveVariance(f64),
    #[error("invalid two-point model: {0}")]
    InvalidModel(String),
    #[error("brute-force enumeration limited to k <= {max}, got {k}")]
    EnumerationTooLarge { k: usize, max: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Common per-period mean and variance of the returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnMoments {
    pub mu: f64,
    pub sigma2: f64,
}

impl ReturnMoments {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self, AnalyticsError> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(AnalyticsError::NonpositiveVariance(sigma2));
        }
        if !mu.is_finite() {
            return Err(AnalyticsError::MeanOutOfRange(mu));
        }
        Ok(Self { mu, sigma2 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainLossStats {
    pub mean: f64,
    pub variance: f64,
    pub horizon: usize,
}

/// Returns take `x_up` with probability `p_up`, otherwise `x_down`.
///
/// `p_up` may sit at 0 or 1 for simulation; the moment-matching oracle needs
/// `0 < p_up < 1` so that `sigma2 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointModel {
    pub x_up: f64,
    pub x_down: f64,
    pub p_up: f64,
}

impl TwoPointModel {
    pub fn new(x_up: f64, x_down: f64, p_up: f64) -> Result<Self, AnalyticsError> {
        if !(x_down > -1.0 && x_down < 0.0 && x_up > 0.0 && x_up.is_finite()) {
            return Err(AnalyticsError::InvalidModel(format!(
                "need -1 < x_down < 0 < x_up, got x_down={x_down}, x_up={x_up}"
            )));
        }
        if !(0.0..=1.0).contains(&p_up) {
            return Err(AnalyticsError::InvalidModel(format!(
                "p_up must lie in [0, 1], got {p_up}"
            )));
        }
        Ok(Self { x_up, x_down, p_up })
    }

    pub fn mean(&self) -> f64 {
        self.p_up * self.x_up + (1.0 - self.p_up) * self.x_down
    }

    pub fn variance(&self) -> f64 {
        let spread = self.x_up - self.x_down;
        self.p_up * (1.0 - self.p_up) * spread * spread
    }

    /// Matched moments `mu = p x_up + (1-p) x_down`, `sigma2 = p(1-p)(x_up - x_down)^2`.
    pub fn moments(&self) -> Result<ReturnMoments, AnalyticsError> {
        ReturnMoments::new(self.mean(), self.variance())
    }
}

fn check_frictionless(config: &PolicyConfig) -> Result<(), AnalyticsError> {
    if config.rf != 0.0 {
        return Err(AnalyticsError::NonzeroRiskless(config.rf));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<(), AnalyticsError> {
    if !(mu.abs() < 1.0) {
        return Err(AnalyticsError::MeanOutOfRange(mu));
    }
    Ok(())
}

/// Validates the common preconditions and returns the first `k` weights.
fn horizon_weights<'a>(
    config: &PolicyConfig,
    weights: &'a [f64],
    mu: f64,
    k: usize,
) -> Result<&'a [f64], AnalyticsError> {
    check_frictionless(config)?;
    check_mu(mu)?;
    if k > weights.len() {
        return Err(AnalyticsError::HorizonTooLong {
            k,
            len: weights.len(),
        });
    }
    let head = &weights[..k];
    config.check_admissible(head)?;
    Ok(head)
}

/// Even excess `A = (R+ + R-)/2 - 1` and odd part `O = (R+ - R-)/2` of the
/// expected leg growth factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ParityParts {
    pub even_excess: f64,
    pub odd: f64,
}

pub(crate) fn parity_parts(weights: &[f64], mu: f64) -> ParityParts {
    let (mut a, mut o) = (0.0_f64, 0.0_f64);
    for &w in weights {
        let c = w * mu;
        let next_a = a + c * o;
        o += c * (1.0 + a);
        a = next_a;
    }
    ParityParts {
        even_excess: a,
        odd: o,
    }
}

/// `V0 * (alpha R+(k) + (1 - alpha) R-(k) - 1)` with
/// `R+-(k) = prod_{j<k} (1 +- w(j) mu)`.
///
/// At `alpha = 1/2` with two strictly positive weights among the first `k`
/// and `mu != 0` the result is strictly positive.
pub fn expected_gain_loss(
    config: &PolicyConfig,
    weights: &[f64],
    mu: f64,
    k: usize,
) -> Result<f64, AnalyticsError> {
    let head = horizon_weights(config, weights, mu, k)?;
    let parts = parity_parts(head, mu);
    Ok(config.v0 * (parts.even_excess + (2.0 * config.alpha - 1.0) * parts.odd))
}

/// Constant-weight reduction `V0 * (alpha (1 + w mu)^k + (1 - alpha)(1 - w mu)^k - 1)`,
/// with each power taken as `expm1(k ln1p(+-w mu))` so the `- 1` does not cancel.
pub fn expected_gain_loss_constant(
    config: &PolicyConfig,
    w: f64,
    mu: f64,
    k: usize,
) -> Result<f64, AnalyticsError> {
    check_frictionless(config)?;
    check_mu(mu)?;
    config.check_admissible(&[w])?;
    let n = k as f64;
    let a = config.alpha;
    let up = (n * (w * mu).ln_1p()).exp_m1();
    let down = (n * (-w * mu).ln_1p()).exp_m1();
    Ok(config.v0 * (a * up + (1.0 - a) * down))
}

/// `prod(q_j + d_j) - prod(q_j)`.
fn product_difference(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut q_prod = 1.0;
    let mut p_prod = 1.0;
    let mut log_ratio = 0.0;
    let mut stable = true;
    for (q, d) in terms {
        q_prod *= q;
        p_prod *= q + d;
        if stable {
            let r = d / q;
            if q > 0.0 && r > -1.0 {
                log_ratio += r.ln_1p();
            } else {
                stable = false;
            }
        }
    }
    if stable {
        q_prod * log_ratio.exp_m1()
    } else {
        p_prod - q_prod
    }
}

/// The three centered pieces of the variance expression.
struct VarianceParts {
    /// `prod(w^2 s^2 + (1 + w mu)^2) - prod (1 + w mu)^2 = var(R+)`
    long: f64,
    /// `prod(w^2 s^2 + (1 - w mu)^2) - prod (1 - w mu)^2 = var(R-)`
    short: f64,
    /// `prod(1 - w^2 (s^2 + mu^2)) - prod(1 - w^2 mu^2) = cov(R+, R-)`
    cross: f64,
}

fn variance_parts(weights: &[f64], m: &ReturnMoments) -> VarianceParts {
    let mu = m.mu;
    let s2 = m.sigma2;
    let long = product_difference(weights.iter().map(|&w| {
        let g = 1.0 + w * mu;
        (g * g, w * w * s2)
    }));
    let short = product_difference(weights.iter().map(|&w| {
        let g = 1.0 - w * mu;
        (g * g, w * w * s2)
    }));
    let cross = product_difference(weights.iter().map(|&w| {
        let wm = w * mu;
        (1.0 - wm * wm, -w * w * s2)
    }));
    VarianceParts { long, short, cross }
}

/// Variance of the cumulative gain-loss at horizon `k`:
///
/// ```text
/// V0^2 [ a^2 prod(w^2 s^2 + (1+w mu)^2) + (1-a)^2 prod(w^2 s^2 + (1-w mu)^2)
///      + 2a(1-a) prod(1 - w^2 (s^2 + mu^2)) - 2a(1-a) prod(1 - w^2 mu^2)
///      - a^2 prod (1+w mu)^2 - (1-a)^2 prod (1-w mu)^2 ]
/// ```
pub fn variance_gain_loss(
    config: &PolicyConfig,
    weights: &[f64],
    moments: &ReturnMoments,
    k: usize,
) -> Result<f64, AnalyticsError> {
    let head = horizon_weights(config, weights, moments.mu, k)?;
    let c = centered_parts(head, moments);
    let beta = 2.0 * config.alpha - 1.0;
    let v0 = config.v0;
    Ok(v0 * v0 * (c.var_a + 2.0 * beta * c.cov + beta * beta * c.var_o))
}

/// The same expression evaluated literally as three product differences;
/// kept as a cross-check for [`variance_gain_loss`].
pub fn variance_gain_loss_products(
    config: &PolicyConfig,
    weights: &[f64],
    moments: &ReturnMoments,
    k: usize,
) -> Result<f64, AnalyticsError> {
    let head = horizon_weights(config, weights, moments.mu, k)?;
    let p = variance_parts(head, moments);
    let a = config.alpha;
    let b = 1.0 - a;
    let v0 = config.v0;
    Ok(v0 * v0 * (a * a * p.long + b * b * p.short + 2.0 * a * b * p.cross))
}

/// Mean and covariance of the pathwise even excess `A = (R+ + R-)/2 - 1` and
/// odd part `O = (R+ - R-)/2`, propagated through `A' = A + wX O`,
/// `O' = O + wX (1 + A)`.
struct CenteredParts {
    var_a: f64,
    cov: f64,
    var_o: f64,
}

fn centered_parts(weights: &[f64], m: &ReturnMoments) -> CenteredParts {
    let (mut ma, mut mo) = (0.0_f64, 0.0_f64);
    let (mut va, mut cov, mut vo) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &w in weights {
        let c = w * m.mu;
        let s = w * w * m.sigma2;
        let e_oo = vo + mo * mo;
        let e_aa = va + (1.0 + ma) * (1.0 + ma);
        let e_ao = cov + mo * (1.0 + ma);
        let next_va = va + 2.0 * c * cov + c * c * vo + s * e_oo;
        let next_vo = vo + 2.0 * c * cov + c * c * va + s * e_aa;
        cov = cov * (1.0 + c * c) + c * (va + vo) + s * e_ao;
        va = next_va;
        vo = next_vo;
        let next_ma = ma + c * mo;
        mo += c * (1.0 + ma);
        ma = next_ma;
    }
    CenteredParts { var_a: va, cov, var_o: vo }
}

/// Second moment `E[G^2]`:
///
/// ```text
/// V0^2 [ a^2 prod(w^2 s^2 + (1+w mu)^2) + (1-a)^2 prod(w^2 s^2 + (1-w mu)^2) + 1
///      + 2a(1-a) prod(1 - w^2 (s^2 + mu^2)) - 2a R+ - 2(1-a) R- ]
/// ```
///
/// evaluated as `a^2 E[(R+ - 1)^2] + (1-a)^2 E[(R- - 1)^2] + 2a(1-a) E[(R+ - 1)(R- - 1)]`.
pub fn second_moment_gain_loss(
    config: &PolicyConfig,
    weights: &[f64],
    moments: &ReturnMoments,
    k: usize,
) -> Result<f64, AnalyticsError> {
    let head = horizon_weights(config, weights, moments.mu, k)?;
    let p = variance_parts(head, moments);
    let mu = moments.mu;
    let up: f64 = head.iter().map(|&w| (w * mu).ln_1p()).sum::<f64>().exp_m1();
    let down: f64 = head.iter().map(|&w| (-w * mu).ln_1p()).sum::<f64>().exp_m1();
    let a = config.alpha;
    let b = 1.0 - a;
    let v0 = config.v0;
    let m_long = p.long + up * up;
    let m_short = p.short + down * down;
    let m_cross = p.cross + up * down;
    Ok(v0 * v0 * (a * a * m_long + b * b * m_short + 2.0 * a * b * m_cross))
}

pub fn gain_loss_stats(
    config: &PolicyConfig,
    weights: &[f64],
    moments: &ReturnMoments,
    k: usize,
) -> Result<GainLossStats, AnalyticsError> {
    Ok(GainLossStats {
        mean: expected_gain_loss(config, weights, moments.mu, k)?,
        variance: variance_gain_loss(config, weights, moments, k)?,
        horizon: k,
    })
}

/// Largest horizon accepted by [`brute_force_moments`].
pub const MAX_ENUMERATION_HORIZON: usize = 25;

/// Exact mean and variance of the gain by enumerating all `2^k` return paths
/// of a two-point model. Does not use independence beyond the path
/// probabilities.
pub fn brute_force_moments(
    config: &PolicyConfig,
    weights: &[f64],
    model: &TwoPointModel,
    k: usize,
) -> Result<(f64, f64), AnalyticsError> {
    check_frictionless(config)?;
    if k > MAX_ENUMERATION_HORIZON {
        return Err(AnalyticsError::EnumerationTooLarge {
            k,
            max: MAX_ENUMERATION_HORIZON,
        });
    }
    if k > weights.len() {
        return Err(AnalyticsError::HorizonTooLong {
            k,
            len: weights.len(),
        });
    }
    let head = &weights[..k];
    config.check_admissible(head)?;

    let tilt = 2.0 * config.alpha - 1.0;
    let v0 = config.v0;
    let gain = |a: f64, o: f64| v0 * (a + tilt * o);

    let mut mean_sum = Neumaier::default();
    enumerate_paths(head, model, &mut |prob, a, o| mean_sum.add(prob * gain(a, o)));
    let mean = mean_sum.total();

    let mut var_sum = Neumaier::default();
    enumerate_paths(head, model, &mut |prob, a, o| {
        let dev = gain(a, o) - mean;
        var_sum.add(prob * dev * dev)
    });
    Ok((mean, var_sum.total()))
}

/// Depth-first walk over all paths; the visitor receives the path probability
/// and the pathwise even excess / odd part of the leg products.
fn enumerate_paths(weights: &[f64], model: &TwoPointModel, visit: &mut impl FnMut(f64, f64, f64)) {
    fn walk(
        weights: &[f64],
        model: &TwoPointModel,
        prob: f64,
        a: f64,
        o: f64,
        visit: &mut impl FnMut(f64, f64, f64),
    ) {
        let Some((&w, rest)) = weights.split_first() else {
            visit(prob, a, o);
            return;
        };
        for (x, p) in [(model.x_up, model.p_up), (model.x_down, 1.0 - model.p_up)] {
            if p == 0.0 {
                continue;
            }
            let c = w * x;
            walk(rest, model, prob * p, a + c * o, o + c * (1.0 + a), visit);
        }
    }
    walk(weights, model, 1.0, 0.0, 0.0, visit);
}

/// Compensated summation; order-dependent only through the input order.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// True when `(2 alpha - 1) mu > 0` and some weight among the first `k` is
/// strictly positive; in that case the expected gain is positive for every
/// horizon `>= 1`.
pub fn sign_condition_gain(config: &PolicyConfig, weights: &[f64], mu: f64, k: usize) -> bool {
    let head = &weights[..k.min(weights.len())];
    (2.0 * config.alpha - 1.0) * mu > 0.0 && count_positive(head) >= 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub mu: f64,
    pub k: usize,
    pub gain: f64,
    /// Whether this grid point falls under the positivity claim
    /// (`mu != 0`, `k >= 2`, two positive weights among the first `k`).
    pub certified_region: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ScanVerdict {
    /// Every point in the certified region has strictly positive gain.
    Certified,
    /// A point in the certified region has nonpositive gain.
    Violated { mu: f64, k: usize, gain: f64 },
    /// The hypotheses do not hold, so no claim is made.
    NotCertifiable { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpeScanReport {
    pub entries: Vec<ScanEntry>,
    /// Smallest gain over the certified region as `(gain, mu, k)`.
    pub min: Option<(f64, f64, usize)>,
    pub verdict: ScanVerdict,
}

impl RpeScanReport {
    pub fn is_certified(&self) -> bool {
        self.verdict == ScanVerdict::Certified
    }
}

/// Evaluates the expected gain on the `(mu, k)` grid for `k in 1..=k_max` and
/// certifies strict positivity over `mu != 0`, `k >= 2`.
///
/// Points with `mu = 0` are reported (their gain is exactly zero) but are
/// outside the certificate, as are horizons whose first `k` weights contain
/// fewer than two strictly positive entries.
pub fn rpe_scan(
    config: &PolicyConfig,
    weights: &[f64],
    mu_grid: &[f64],
    k_max: usize,
) -> Result<RpeScanReport, AnalyticsError> {
    check_frictionless(config)?;
    for &mu in mu_grid {
        check_mu(mu)?;
    }
    if k_max > weights.len() {
        return Err(AnalyticsError::HorizonTooLong {
            k: k_max,
            len: weights.len(),
        });
    }
    config.check_admissible(&weights[..k_max])?;

    // positives[k] = number of strictly positive weights among the first k
    let mut positives = vec![0usize; k_max + 1];
    for k in 1..=k_max {
        positives[k] = positives[k - 1] + usize::from(weights[k - 1] > 0.0);
    }

    let grid: Vec<(f64, usize)> = mu_grid
        .iter()
        .flat_map(|&mu| (1..=k_max).map(move |k| (mu, k)))
        .collect();
    let entries: Vec<ScanEntry> = grid
        .par_iter()
        .map(|&(mu, k)| {
            let gain = expected_gain_loss(config, weights, mu, k)?;
            Ok(ScanEntry {
                mu,
                k,
                gain,
                certified_region: mu != 0.0 && k >= 2 && positives[k] >= 2,
            })
        })
        .collect::<Result<_, AnalyticsError>>()?;

    let mut min: Option<(f64, f64, usize)> = None;
    for e in entries.iter().filter(|e| e.certified_region) {
        if min.is_none_or(|(g, _, _)| e.gain < g) {
            min = Some((e.gain, e.mu, e.k));
        }
    }

    let verdict = if config.alpha != 0.5 {
        ScanVerdict::NotCertifiable {
            reason: format!("alpha must equal 1/2 for certification, got {}", config.alpha),
        }
    } else if k_max < 2 || positives[k_max] < 2 {
        ScanVerdict::NotCertifiable {
            reason: "fewer than two strictly positive weights (e2 = 0)".into(),
        }
    } else if mu_grid.iter().all(|&mu| mu == 0.0) {
        ScanVerdict::NotCertifiable {
            reason: "mu grid contains no nonzero mean".into(),
        }
    } else {
        match min {
            Some((gain, mu, k)) if gain <= 0.0 => ScanVerdict::Violated { mu, k, gain },
            _ => ScanVerdict::Certified,
        }
    };
    Ok(RpeScanReport {
        entries,
        min,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::MarketBounds;

    fn cfg(alpha: f64) -> PolicyConfig {
        PolicyConfig::frictionless(alpha, 1.0, MarketBounds::new(-0.5, 1.0).unwrap()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn expected_gain_examples() {
        let g = expected_gain_loss(&cfg(0.5), &[0.5, 0.5], 0.1, 2).unwrap();
        assert!((g - 0.0025).abs() < 1e-16);
        assert_eq!(expected_gain_loss(&cfg(0.3), &[0.2, 0.9, 0.4], 0.0, 3).unwrap(), 0.0);
        let g = expected_gain_loss(&cfg(0.5), &[0.5, 0.0], 0.1, 2).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn expected_gain_errors() {
        let b = MarketBounds::new(-0.5, 1.0).unwrap();
        let with_rf = PolicyConfig::new(0.5, 1.0, 0.01, b).unwrap();
        assert_eq!(
            expected_gain_loss(&with_rf, &[0.5, 0.5], 0.1, 2),
            Err(AnalyticsError::NonzeroRiskless(0.01))
        );
        assert!(matches!(
            expected_gain_loss(&cfg(0.5), &[0.5, 0.5], 0.1, 3),
            Err(AnalyticsError::HorizonTooLong { k: 3, len: 2 })
        ));
        assert!(matches!(
            expected_gain_loss(&cfg(0.5), &[0.5, 1.2], 0.1, 2),
            Err(AnalyticsError::Policy(PolicyError::InadmissibleWeight { stage: 1, .. }))
        ));
        assert!(expected_gain_loss(&cfg(0.5), &[0.5, 0.5], 1.0, 2).is_err());
    }

    #[test]
    fn constant_examples() {
        let g = expected_gain_loss_constant(&cfg(0.5), 0.5, 0.1, 2).unwrap();
        assert!((g - 0.0025).abs() < 1e-15);
        assert_eq!(expected_gain_loss_constant(&cfg(0.5), 0.0, 0.4, 7).unwrap(), 0.0);
        let g = expected_gain_loss_constant(&cfg(0.5), 0.8, -0.3, 3).unwrap();
        assert!((g - 0.1728).abs() < 1e-14);
        let h = expected_gain_loss(&cfg(0.5), &[0.8; 3], -0.3, 3).unwrap();
        assert!(close(g, h, 1e-12));
    }

    #[test]
    fn variance_examples() {
        let m = ReturnMoments::new(0.1, 0.04).unwrap();
        assert_eq!(variance_gain_loss(&cfg(0.3), &[0.0; 4], &m, 4).unwrap(), 0.0);
        assert_eq!(second_moment_gain_loss(&cfg(0.3), &[0.0; 4], &m, 4).unwrap(), 0.0);
        for w in [0.1, 0.5, 0.9] {
            let v = variance_gain_loss(&cfg(0.5), &[w], &m, 1).unwrap();
            assert_eq!(v, 0.0, "w={w}");
            let p = variance_gain_loss_products(&cfg(0.5), &[w], &m, 1).unwrap();
            assert!(p.abs() < 1e-18, "w={w} p={p}");
            let s = second_moment_gain_loss(&cfg(0.5), &[w], &m, 1).unwrap();
            assert!(s.abs() < 1e-18);
        }
        let m = ReturnMoments::new(0.1, 0.04).unwrap();
        let v = variance_gain_loss(&cfg(0.7), &[0.5], &m, 1).unwrap();
        assert!((v - 0.0016).abs() < 1e-16);
    }

    #[test]
    fn variance_routes_agree() {
        let m = ReturnMoments::new(-0.07, 0.03).unwrap();
        let w: Vec<f64> = (0..40).map(|i| 0.2 + 0.6 * ((i * 7) % 11) as f64 / 10.0).collect();
        for a in [0.0, 0.3, 0.5, 0.8, 1.0] {
            for k in [1, 2, 5, 17, 40] {
                let x = variance_gain_loss(&cfg(a), &w, &m, k).unwrap();
                let y = variance_gain_loss_products(&cfg(a), &w, &m, k).unwrap();
                assert!(close(x, y, 1e-11), "a={a} k={k} {x} {y}");
            }
        }
    }

    #[test]
    fn second_moment_matches_brute_force_at_zero_mean() {
        let model = TwoPointModel::new(0.2, -0.2, 0.5).unwrap();
        let m = model.moments().unwrap();
        assert_eq!(m.mu, 0.0);
        assert!((m.sigma2 - 0.04).abs() < 1e-17);
        let c = cfg(0.5);
        let w = [0.5, 0.5];
        let s = second_moment_gain_loss(&c, &w, &m, 2).unwrap();
        let (mean, var) = brute_force_moments(&c, &w, &model, 2).unwrap();
        assert_eq!(mean, 0.0);
        // G = 0.25 x0 x1, so E[G^2] = 0.0625 * 0.04^2
        assert!(close(s, 1e-4, 1e-12));
        assert!(close(var, 1e-4, 1e-12));
    }

    #[test]
    fn brute_force_examples() {
        let c = cfg(0.5);
        let model = TwoPointModel::new(0.1, -0.1, 0.5).unwrap();
        assert_eq!(brute_force_moments(&c, &[0.7], &model, 1).unwrap(), (0.0, 0.0));
        let (mean, _) = brute_force_moments(&c, &[0.5, 0.5], &model, 2).unwrap();
        assert_eq!(mean, 0.0);
        let model = TwoPointModel::new(0.1, -0.1, 0.75).unwrap();
        let (mean, _) = brute_force_moments(&c, &[0.5, 0.5], &model, 2).unwrap();
        assert!((mean - 0.000625).abs() < 1e-17);
        assert!(matches!(
            brute_force_moments(&c, &[0.5; 30], &model, 26),
            Err(AnalyticsError::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn two_point_model_validation() {
        assert!(TwoPointModel::new(0.1, 0.1, 0.5).is_err());
        assert!(TwoPointModel::new(-0.1, -0.2, 0.5).is_err());
        assert!(TwoPointModel::new(0.1, -1.0, 0.5).is_err());
        assert!(TwoPointModel::new(0.1, -0.1, 1.2).is_err());
        assert!(TwoPointModel::new(0.1, -0.1, 1.0).unwrap().moments().is_err());
    }

    #[test]
    fn sign_condition_examples() {
        assert!(sign_condition_gain(&cfg(0.7), &[0.5], 0.1, 1));
        let g = expected_gain_loss(&cfg(0.7), &[0.5], 0.1, 1).unwrap();
        assert!((g - 0.02).abs() < 1e-16);
        assert!(!sign_condition_gain(&cfg(0.5), &[0.5], 0.1, 1));
        assert!(!sign_condition_gain(&cfg(0.5), &[0.5], -0.1, 1));
        assert!(sign_condition_gain(&cfg(0.3), &[0.5], -0.2, 1));
        assert!(!sign_condition_gain(&cfg(0.3), &[0.0, 0.0], -0.2, 2));
    }

    #[test]
    fn scan_certifies_constant_schedule() {
        let grid: Vec<f64> = (1..=9).flat_map(|i| [0.1 * i as f64, -0.1 * i as f64]).collect();
        let r = rpe_scan(&cfg(0.5), &[0.5; 20], &grid, 20).unwrap();
        assert!(r.is_certified());
        let (g, mu, k) = r.min.unwrap();
        assert!(g > 0.0);
        assert!((mu.abs() - 0.1).abs() < 1e-12);
        assert_eq!(k, 2);
        assert!(r.entries.iter().filter(|e| e.certified_region).all(|e| e.gain > 0.0));
    }

    #[test]
    fn scan_hypothesis_failures() {
        let grid = [0.1, -0.1];
        let r = rpe_scan(&cfg(0.5), &[0.5, 0.0, 0.0], &grid, 3).unwrap();
        assert!(matches!(r.verdict, ScanVerdict::NotCertifiable { .. }));
        let r = rpe_scan(&cfg(0.6), &[0.5; 4], &grid, 4).unwrap();
        assert!(matches!(r.verdict, ScanVerdict::NotCertifiable { .. }));
    }

    #[test]
    fn scan_excludes_zero_mean() {
        let r = rpe_scan(&cfg(0.5), &[0.5; 5], &[0.0, 0.2], 5).unwrap();
        assert!(r.is_certified());
        for e in r.entries.iter().filter(|e| e.mu == 0.0) {
            assert_eq!(e.gain, 0.0);
            assert!(!e.certified_region);
        }
    }

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut s = Neumaier::default();
        for x in [1.0, 1e-16, -1.0, 1e-16] {
            s.add(x);
        }
        assert_eq!(s.total(), 2e-16);
    }
}
