//! Fit score and box-plot statistics.

use alloc::vec::Vec;

// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::signal::ImpulseResponse;

/// `1 − ‖g − ĝ‖ / ‖g‖`. Can be negative.
pub fn fit_score(g_true: &ImpulseResponse, g_hat: &ImpulseResponse) -> Result<f64> {
    if g_true.len() != g_hat.len() {
        return Err(Error::DimensionMismatch {
            context: "fit_score",
            expected: g_true.len(),
            found: g_hat.len(),
        });
    }
    let norm = g_true.norm();
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(1.0 - (&g_true.0 - &g_hat.0).norm() / norm)
}

/// Quantile of already sorted data by linear interpolation between order
/// statistics: position `p (n − 1)` in 0-based indexing.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumberSummary {
    /// `None` for empty input. NaNs are dropped.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q1: quantile_type7(&v, 0.25),
            median: quantile_type7(&v, 0.5),
            q3: quantile_type7(&v, 0.75),
            max: v[v.len() - 1],
        })
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.min, self.q1, self.median, self.q3, self.max]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_examples() {
        let g = ImpulseResponse::from_slice(&[1.0, -2.0, 0.5]);
        assert_eq!(fit_score(&g, &g).unwrap(), 1.0);
        assert_eq!(fit_score(&g, &ImpulseResponse::zeros(3)).unwrap(), 0.0);
        let twice = ImpulseResponse::new(&g.0 * 2.0);
        assert!(fit_score(&g, &twice).unwrap().abs() < 1e-15);
        assert_eq!(
            fit_score(&ImpulseResponse::zeros(3), &g),
            Err(Error::ZeroNorm)
        );
    }

    #[test]
    fn single_value_summary() {
        let s = FiveNumberSummary::from_values(&[0.42]).unwrap();
        assert_eq!(s.to_array(), [0.42; 5]);
        assert!(FiveNumberSummary::from_values(&[]).is_none());
    }

    #[test]
    fn type7_small_case() {
        let s = FiveNumberSummary::from_values(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.to_array(), [1.0, 1.75, 2.5, 3.25, 4.0]);
    }
}
