//! Scalar truncated normal draws and moments.

// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::signal::Interval;
use crate::special::{std_normal_cdf, std_normal_inv_cdf, std_normal_sf, std_truncated_moments};

/// Standardized distance beyond which draws switch from inverse-CDF to
/// rejection sampling.
pub const TAIL_SWITCH: f64 = 5.0;

/// `N(μ, σ²)` restricted to `(lower, upper)` and renormalized. A degenerate
/// interval `lower == upper` is a point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedNormalSpec {
    pub mu: f64,
    pub sigma2: f64,
    pub lower: f64,
    pub upper: f64,
}

impl TruncatedNormalSpec {
    pub fn new(mu: f64, sigma2: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(lower <= upper) || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::InvalidInterval { lower, upper });
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain {
                name: "sigma2",
                value: sigma2,
                expected: "(0, inf)",
            });
        }
        if !mu.is_finite() {
            return Err(Error::Domain {
                name: "mu",
                value: mu,
                expected: "finite",
            });
        }
        Ok(Self {
            mu,
            sigma2,
            lower,
            upper,
        })
    }

    pub fn on_interval(mu: f64, sigma2: f64, interval: &Interval) -> Result<Self> {
        Self::new(mu, sigma2, interval.lower, interval.upper)
    }

    fn standardized(&self) -> (f64, f64, f64) {
        let sd = self.sigma2.sqrt();
        (sd, (self.lower - self.mu) / sd, (self.upper - self.mu) / sd)
    }

    /// One exact draw, strictly inside `(lower, upper)` unless the interval
    /// is a point.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lower == self.upper {
            return self.lower;
        }
        let (sd, a, b) = self.standardized();
        let t = if a >= TAIL_SWITCH {
            upper_tail(a, b, rng)
        } else if b <= -TAIL_SWITCH {
            -upper_tail(-b, -a, rng)
        } else {
            inverse_cdf(a, b, rng)
        };
        clamp_open(self.mu + sd * t, self.lower, self.upper)
    }

    /// `(E[x], Var[x])`.
    pub fn moments(&self) -> (f64, f64) {
        if self.lower == self.upper {
            return (self.lower, 0.0);
        }
        let (sd, a, b) = self.standardized();
        let (m, v) = std_truncated_moments(a, b);
        let mean = (self.mu + sd * m).clamp(self.lower, self.upper);
        (mean, self.sigma2 * v)
    }

    pub fn mean(&self) -> f64 {
        self.moments().0
    }

    pub fn variance(&self) -> f64 {
        self.moments().1
    }

    /// `E[x²]`.
    pub fn second_moment(&self) -> f64 {
        let (m, v) = self.moments();
        v + m * m
    }
}

/// Rounding can land on an end point; both boundary conventions accept the
/// open interval.
fn clamp_open(x: f64, lower: f64, upper: f64) -> f64 {
    let (lo, hi) = (lower.next_up(), upper.next_down());
    if lo <= hi {
        x.clamp(lo, hi)
    } else {
        0.5 * (lower + upper)
    }
}

/// Inverse-CDF draw on the standardized interval `(a, b)`, working with the
/// survival function when the interval sits on the right so that precision is
/// kept for `a` up to the tail switch.
fn inverse_cdf<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if a >= 0.0 {
        let (pa, pb) = (std_normal_sf(a), std_normal_sf(b));
        -std_normal_inv_cdf(pb + u * (pa - pb))
    } else {
        let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
        std_normal_inv_cdf(pa + u * (pb - pa))
    }
    .clamp(a, b)
}

/// Rejection draw from the standard normal on `(a, b)` with `a > 0`.
///
/// Wide intervals use the optimal translated-exponential proposal with rate
/// `(a + √(a² + 4)) / 2`; narrow ones use a uniform proposal on `(a, b)`.
fn upper_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    if b.is_finite() && rate * (b - a) < 1.0 {
        loop {
            let t = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (0.5 * (a - t) * (a + t)).exp() {
                return t;
            }
        }
    }
    loop {
        let e = -(1.0 - rng.random::<f64>()).ln() / rate;
        let t = a + e;
        if t > b {
            continue;
        }
        let d = t - rate;
        if rng.random::<f64>() <= (-0.5 * d * d).exp() {
            return t;
        }
    }
}
