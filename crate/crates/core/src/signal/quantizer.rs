use alloc::vec::Vec;

use nalgebra::DVector;
// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Which end of each threshold interval is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// `(q_{k−1}, q_k]`, the general convention.
    UpperClosed,
    /// `[q_{k−1}, q_k)`, used by the binary quantizer so that `x = C` maps to
    /// the upper level.
    LowerClosed,
}

/// Set of latent values compatible with one observed output level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub boundary: Boundary,
}

impl Interval {
    /// Degenerate interval of an exactly observed value.
    pub fn point(x: f64) -> Self {
        Self {
            lower: x,
            upper: x,
            boundary: Boundary::UpperClosed,
        }
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        if self.is_point() {
            return x == self.lower;
        }
        match self.boundary {
            Boundary::UpperClosed => x > self.lower && x <= self.upper,
            Boundary::LowerClosed => x >= self.lower && x < self.upper,
        }
    }
}

/// Static output map `Q[x] = s_k` for `x` in the `k`-th threshold interval.
///
/// `Identity` passes values through; it models exactly observed outputs and
/// is what the un-quantized checks run against.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantizer {
    Identity,
    Thresholds {
        /// `q_0 < q_1 < ... < q_Q`; the ends may be infinite.
        thresholds: Vec<f64>,
        /// `s_1, ..., s_Q`.
        levels: Vec<f64>,
        boundary: Boundary,
    },
}

impl Quantizer {
    pub fn new(thresholds: Vec<f64>, levels: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if thresholds.len() < 2 {
            return Err(Error::InvalidQuantizer("need at least two thresholds"));
        }
        if levels.len() + 1 != thresholds.len() {
            return Err(Error::InvalidQuantizer(
                "number of levels must equal number of threshold intervals",
            ));
        }
        if thresholds.iter().any(|t| t.is_nan()) || levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidQuantizer("non-numeric threshold or level"));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidQuantizer(
                "thresholds must be strictly increasing",
            ));
        }
        for (i, a) in levels.iter().enumerate() {
            if levels[i + 1..].contains(a) {
                return Err(Error::InvalidQuantizer("levels must be distinct"));
            }
        }
        Ok(Self::Thresholds {
            thresholds,
            levels,
            boundary,
        })
    }

    /// `Q[x] = −1` for `x < C`, `+1` for `x ≥ C`.
    ///
    /// The closed lower end makes `x = C` map to `+1`, which is the single
    /// point where this differs from the `(q_{k−1}, q_k]` convention.
    pub fn binary(threshold: f64) -> Self {
        if threshold == 0.0 {
            log::warn!(
                "binary quantizer with threshold 0: the impulse response is identifiable only up to scale"
            );
        }
        Self::Thresholds {
            thresholds: alloc::vec![f64::NEG_INFINITY, threshold, f64::INFINITY],
            levels: alloc::vec![-1.0, 1.0],
            boundary: Boundary::LowerClosed,
        }
    }

    /// `Q[x] = ⌈x⌉` on `(range_min − 1, range_max + 1]`, with unbounded end
    /// intervals `(−∞, range_min] → range_min` and
    /// `(range_max, ∞) → range_max + 1`.
    pub fn ceil(range_min: i64, range_max: i64) -> Result<Self> {
        if range_max < range_min {
            return Err(Error::InvalidQuantizer("empty ceil range"));
        }
        let mut thresholds = alloc::vec![f64::NEG_INFINITY];
        thresholds.extend((range_min..=range_max).map(|k| k as f64));
        thresholds.push(f64::INFINITY);
        let levels = (range_min..=range_max + 1).map(|k| k as f64).collect();
        Ok(Self::Thresholds {
            thresholds,
            levels,
            boundary: Boundary::UpperClosed,
        })
    }

    /// Ceil quantizer whose bounded intervals cover every value in `z`, so no
    /// observation lands in an unbounded end interval.
    pub fn ceil_covering(z: &[f64]) -> Result<Self> {
        let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidQuantizer("ceil range needs finite data"));
        }
        Self::ceil(lo.ceil() as i64 - 1, hi.ceil() as i64)
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Thresholds {
                thresholds,
                levels,
                boundary,
            } => {
                // First interval whose closed/open upper end admits x.
                let k = match boundary {
                    Boundary::UpperClosed => thresholds[1..].partition_point(|&q| q < x),
                    Boundary::LowerClosed => thresholds[1..].partition_point(|&q| q <= x),
                };
                levels[k.min(levels.len() - 1)]
            }
        }
    }

    /// Interval of latent values that produce output `level`.
    pub fn interval_of(&self, level: f64) -> Result<Interval> {
        match self {
            Self::Identity => Ok(Interval::point(level)),
            Self::Thresholds {
                thresholds,
                levels,
                boundary,
            } => levels
                .iter()
                .position(|&s| s == level)
                .map(|k| Interval {
                    lower: thresholds[k],
                    upper: thresholds[k + 1],
                    boundary: *boundary,
                })
                .ok_or(Error::UnknownLevel(level)),
        }
    }

    pub fn levels(&self) -> Option<&[f64]> {
        match self {
            Self::Identity => None,
            Self::Thresholds { levels, .. } => Some(levels),
        }
    }
}

/// Elementwise `y_t = Q[z_t]`.
pub fn quantize(q: &Quantizer, z: &DVector<f64>) -> DVector<f64> {
    z.map(|x| q.apply(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_levels() {
        let q = Quantizer::binary(1.0);
        assert_eq!(q.apply(1.5), 1.0);
        assert_eq!(q.apply(0.3), -1.0);
        assert_eq!(q.apply(1.0), 1.0);
        assert_eq!(q.apply(0.99), -1.0);
        let lo = q.interval_of(-1.0).unwrap();
        assert!(lo.contains(0.999_999) && !lo.contains(1.0));
        let hi = q.interval_of(1.0).unwrap();
        assert!(hi.contains(1.0) && hi.contains(1e300));
    }

    #[test]
    fn ceil_levels() {
        let q = Quantizer::ceil(-5, 5).unwrap();
        assert_eq!(q.apply(0.2), 1.0);
        assert_eq!(q.apply(-1.5), -1.0);
        assert_eq!(q.apply(2.0), 2.0);
        assert_eq!(q.apply(3.0), 3.0);
        assert_eq!(q.apply(2.000_001), 3.0);
        assert_eq!(q.apply(-100.0), -5.0);
        assert_eq!(q.apply(100.0), 6.0);
        let iv = q.interval_of(2.0).unwrap();
        assert_eq!((iv.lower, iv.upper), (1.0, 2.0));
        assert!(iv.contains(2.0) && !iv.contains(1.0));
    }

    #[test]
    fn ceil_covering_keeps_data_in_bounded_intervals() {
        let z = [-2.3, 0.0, 4.7, 1.0];
        let q = Quantizer::ceil_covering(&z).unwrap();
        for &x in &z {
            let y = q.apply(x);
            assert_eq!(y, x.ceil());
            let iv = q.interval_of(y).unwrap();
            assert!(iv.lower.is_finite() && iv.upper.is_finite());
        }
    }

    #[test]
    fn validation() {
        use Boundary::UpperClosed;
        assert!(Quantizer::new(alloc::vec![0.0, 1.0], alloc::vec![1.0, 2.0], UpperClosed).is_err());
        assert!(Quantizer::new(alloc::vec![1.0, 0.0], alloc::vec![1.0], UpperClosed).is_err());
        assert!(Quantizer::new(
            alloc::vec![0.0, 1.0, 2.0],
            alloc::vec![1.0, 1.0],
            UpperClosed
        )
        .is_err());
        assert!(Quantizer::binary(0.0).interval_of(3.0).is_err());
    }
}
