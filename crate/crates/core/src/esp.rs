//! Elementary symmetric polynomials of a weight sequence.
//!
//! `e_j(k)` is the sum over all `j`-subsets of `{w(0), ..., w(k-1)}` of the
//! product of the chosen weights. Expanding `prod (1 + w(j) mu)` in powers of
//! `mu` gives exactly these coefficients, which is what [`expected_growth_esp`]
//! evaluates. The expansion is a verification path only: for `k` in the
//! thousands with weights near one the coefficients overflow `f64`, while the
//! product form does not. It is reliable for `k <= 500` with weights `<= 1`.
//!
//! With negative `mu` the expansion alternates and loses roughly
//! `log10(prod (1 + w|mu|) / (1 - w|mu|))` digits, so the table and the sums
//! are carried in double-double.

use crate::analytics::Neumaier;
use thiserror::Error;
use twofloat::TwoFloat;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EspError {
    #[error("weight sequence is empty")]
    Empty,
    #[error("negative weight {w} at index {index}")]
    NegativeWeight { index: usize, w: f64 },
    #[error("subset size {j} out of range 1..={k}")]
    OrderOutOfRange { j: usize, k: usize },
    #[error("need at least two weights, got {0}")]
    TooShort(usize),
}

/// Direction of the leg: `Long` expands `prod (1 + w mu)`, `Short` expands
/// `prod (1 - w mu)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Long,
    Short,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Long => 1.0,
            Sign::Short => -1.0,
        }
    }
}

/// `e_1(k) ..= e_k(k)` for a fixed weight sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EspTable {
    values: Vec<f64>,
    wide: Vec<TwoFloat>,
}

impl EspTable {
    /// Number of weights `k`.
    pub fn k(&self) -> usize {
        self.values.len()
    }

    /// `e_j(k)` for `1 <= j <= k`; `e_0 = 1` by convention.
    pub fn get(&self, j: usize) -> Option<f64> {
        match j {
            0 => Some(1.0),
            j if j <= self.values.len() => Some(self.values[j - 1]),
            _ => None,
        }
    }

    /// `[e_1, ..., e_k]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_weights(weights: &[f64]) -> Result<(), EspError> {
    if weights.is_empty() {
        return Err(EspError::Empty);
    }
    for (index, &w) in weights.iter().enumerate() {
        if !(w >= 0.0) {
            return Err(EspError::NegativeWeight { index, w });
        }
    }
    Ok(())
}

/// All elementary symmetric polynomials in `O(k^2)`.
///
/// Each weight updates the coefficient array high-to-low, `e_j += w * e_{j-1}`,
/// which is multiplication of the running polynomial by `(1 + w t)`.
pub fn esp_all(weights: &[f64]) -> Result<EspTable, EspError> {
    check_weights(weights)?;
    let k = weights.len();
    // coeffs[j] = e_j, coeffs[0] = 1
    let mut coeffs = vec![TwoFloat::from(0.0); k + 1];
    coeffs[0] = TwoFloat::from(1.0);
    for (n, &w) in weights.iter().enumerate() {
        for j in (1..=n + 1).rev() {
            coeffs[j] = coeffs[j] + coeffs[j - 1] * w;
        }
    }
    coeffs.remove(0);
    Ok(EspTable {
        values: coeffs.iter().map(|&c| f64::from(c)).collect(),
        wide: coeffs,
    })
}

/// `e_j` by explicit enumeration of all `j`-subsets. Exponential; meant as an
/// oracle for `k <= 20`.
pub fn esp_naive(weights: &[f64], j: usize) -> Result<f64, EspError> {
    let k = weights.len();
    if j == 0 || j > k {
        return Err(EspError::OrderOutOfRange { j, k });
    }
    let mut total = Neumaier::default();
    for mask in 0u64..(1u64 << k) {
        if mask.count_ones() as usize != j {
            continue;
        }
        let mut product = 1.0;
        for (i, &w) in weights.iter().enumerate() {
            if mask & (1 << i) != 0 {
                product *= w;
            }
        }
        total.add(product);
    }
    Ok(total.total())
}

/// `prod (1 +- w(j) mu)` in stage order.
pub fn expected_growth_product(weights: &[f64], mu: f64, sign: Sign) -> f64 {
    let s = sign.factor();
    weights.iter().fold(1.0, |acc, &w| acc * (1.0 + s * w * mu))
}

/// Parity-split expansion of the expected growth of one leg:
///
/// `1 +- sum_{odd j} e_j mu^j + sum_{even j >= 2} e_j mu^j`
///
/// For `k = 2m + 1` the odd sum runs over `e_1, e_3, ..., e_{2m+1}` and the
/// even sum over `e_2, ..., e_{2m}`; for `k = 2m` the odd sum stops at
/// `e_{2m-1}` and the even sum reaches `e_{2m}`.
pub fn expected_growth_esp(esp: &EspTable, mu: f64, sign: Sign) -> f64 {
    let k = esp.k();
    let m = k / 2;
    let odd_terms = if k % 2 == 1 { m + 1 } else { m };
    let mu = TwoFloat::from(mu);
    let powers: Vec<TwoFloat> = std::iter::successors(Some(mu), |&p| Some(p * mu)).take(k).collect();
    let term = |order: usize| esp.wide[order - 1] * powers[order - 1];
    let mut odd = TwoFloat::from(0.0);
    for j in 0..odd_terms {
        odd += term(2 * j + 1);
    }
    let mut even = TwoFloat::from(0.0);
    for j in 1..=m {
        even += term(2 * j);
    }
    f64::from(odd * sign.factor() + even + 1.0)
}

/// True iff at least two weights are strictly positive, i.e. iff `e_2 > 0`.
pub fn e2_positive(weights: &[f64]) -> Result<bool, EspError> {
    if weights.len() < 2 {
        return Err(EspError::TooShort(weights.len()));
    }
    Ok(count_positive(weights) >= 2)
}

pub(crate) fn count_positive(weights: &[f64]) -> usize {
    weights.iter().filter(|&&w| w > 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn esp_all_examples() {
        let t = esp_all(&[0.7]).unwrap();
        assert_eq!(t.values(), &[0.7]);

        let t = esp_all(&[0.3, 0.5]).unwrap();
        assert!((t.get(1).unwrap() - 0.8).abs() < 1e-15);
        assert!((t.get(2).unwrap() - 0.15).abs() < 1e-15);

        let t = esp_all(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(t.values(), &[3.0, 3.0, 1.0]);
        assert_eq!(t.get(0), Some(1.0));
        assert_eq!(t.get(4), None);
    }

    #[test]
    fn esp_all_errors() {
        assert_eq!(esp_all(&[]), Err(EspError::Empty));
        assert!(matches!(
            esp_all(&[0.1, -0.2]),
            Err(EspError::NegativeWeight { index: 1, .. })
        ));
        assert!(esp_all(&[f64::NAN]).is_err());
    }

    #[test]
    fn esp_naive_examples() {
        assert!((esp_naive(&[0.3, 0.5], 2).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(esp_naive(&[0.42], 1).unwrap(), 0.42);
        assert_eq!(esp_naive(&[1.0; 4], 2).unwrap(), 6.0);
        assert!(esp_naive(&[0.1, 0.2], 0).is_err());
        assert!(esp_naive(&[0.1, 0.2], 3).is_err());
    }

    #[test]
    fn expected_growth_examples() {
        let w = [0.5, 0.5];
        assert!((expected_growth_product(&w, 0.1, Sign::Long) - 1.1025).abs() < 1e-15);
        assert!((expected_growth_product(&w, 0.1, Sign::Short) - 0.9025).abs() < 1e-15);
        assert_eq!(expected_growth_product(&w, 0.0, Sign::Long), 1.0);
        assert_eq!(expected_growth_product(&w, 0.0, Sign::Short), 1.0);

        let t = esp_all(&w).unwrap();
        assert!((expected_growth_esp(&t, 0.1, Sign::Long) - 1.1025).abs() < 1e-15);
        assert_eq!(expected_growth_esp(&t, 0.0, Sign::Long), 1.0);

        let t = esp_all(&[0.3, 0.5]).unwrap();
        assert!((expected_growth_esp(&t, -0.2, Sign::Short) - 1.166).abs() < 1e-15);
        assert!((expected_growth_product(&[0.3, 0.5], -0.2, Sign::Short) - 1.166).abs() < 1e-15);
    }

    #[test]
    fn esp_expansion_odd_and_even_lengths() {
        for k in 1..=9 {
            let w: Vec<f64> = (0..k).map(|i| 0.1 + 0.08 * i as f64).collect();
            let t = esp_all(&w).unwrap();
            for &mu in &[-0.7, -0.1, 0.3, 0.9] {
                for sign in [Sign::Long, Sign::Short] {
                    let a = expected_growth_esp(&t, mu, sign);
                    let b = expected_growth_product(&w, mu, sign);
                    assert!((a - b).abs() <= 1e-14 * b.abs(), "k={k} mu={mu}");
                }
            }
        }
    }

    #[test]
    fn alternating_expansion_keeps_precision() {
        let w = [0.7; 30];
        let t = esp_all(&w).unwrap();
        let a = expected_growth_esp(&t, -0.8, Sign::Long);
        let b = expected_growth_product(&w, -0.8, Sign::Long);
        assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
    }

    #[test]
    fn e2_positive_examples() {
        assert!(!e2_positive(&[0.5, 0.0]).unwrap());
        assert!(e2_positive(&[0.5, 0.1]).unwrap());
        assert!(e2_positive(&[0.0, 0.3, 0.0, 0.7]).unwrap());
        assert!((esp_all(&[0.0, 0.3, 0.0, 0.7]).unwrap().get(2).unwrap() - 0.21).abs() < 1e-15);
        assert_eq!(e2_positive(&[0.5]), Err(EspError::TooShort(1)));
    }
}
