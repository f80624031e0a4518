use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::Deref;

use nalgebra::DVector;
// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

/// Truncated impulse response `g_1, ..., g_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse(pub DVector<f64>);

impl ImpulseResponse {
    pub fn new(coeffs: DVector<f64>) -> Self {
        Self(coeffs)
    }

    pub fn from_slice(coeffs: &[f64]) -> Self {
        Self(DVector::from_column_slice(coeffs))
    }

    pub fn zeros(m: usize) -> Self {
        Self(DVector::zeros(m))
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

impl Deref for ImpulseResponse {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// A complex number `r e^{iθ}` together with its conjugate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugatePair {
    pub magnitude: f64,
    pub phase: f64,
}

impl ConjugatePair {
    /// Coefficients of `(1 − p q⁻¹)(1 − p̄ q⁻¹) = 1 − 2 r cos θ q⁻¹ + r² q⁻²`.
    fn quadratic(&self) -> [f64; 3] {
        let r = self.magnitude;
        [1.0, -2.0 * r * self.phase.cos(), r * r]
    }
}

/// Real-coefficient rational transfer function
/// `G(q) = gain · q⁻¹ · Π(zero factors) / Π(pole factors)`.
///
/// The `q⁻¹` makes the readout strictly causal so the first coefficient of
/// the impulse response is `g_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub zeros: Vec<ConjugatePair>,
    pub poles: Vec<ConjugatePair>,
    pub gain: f64,
}

impl LtiSystem {
    pub fn pure_gain(gain: f64) -> Self {
        Self {
            zeros: Vec::new(),
            poles: Vec::new(),
            gain,
        }
    }

    pub fn numerator(&self) -> Vec<f64> {
        expand(&self.zeros)
    }

    pub fn denominator(&self) -> Vec<f64> {
        expand(&self.poles)
    }

    pub fn is_stable(&self) -> bool {
        self.poles.iter().all(|p| p.magnitude < 1.0)
    }
}

fn expand(pairs: &[ConjugatePair]) -> Vec<f64> {
    pairs.iter().fold(alloc::vec![1.0], |acc, pair| {
        let quad = pair.quadratic();
        let mut out = alloc::vec![0.0; acc.len() + 2];
        for (i, a) in acc.iter().enumerate() {
            for (j, b) in quad.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    })
}

/// First `m` samples of the impulse response, by running a unit impulse
/// through the difference equation `A(q⁻¹) h = B(q⁻¹) δ`.
pub fn impulse_response(sys: &LtiSystem, m: usize) -> Result<ImpulseResponse> {
    if let Some(p) = sys.poles.iter().find(|p| !(p.magnitude < 1.0)) {
        return Err(Error::Unstable(p.magnitude));
    }
    let num = sys.numerator();
    let den = sys.denominator();
    let mut h = alloc::vec![0.0; m];
    for t in 0..m {
        let mut acc = num.get(t).copied().unwrap_or(0.0);
        for k in 1..den.len().min(t + 1) {
            acc -= den[k] * h[t - k];
        }
        h[t] = acc;
    }
    Ok(ImpulseResponse(DVector::from_vec(h) * sys.gain))
}

/// Parameters of the random test-system generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSystemParams {
    pub n_zero_pairs: usize,
    pub n_pole_pairs: usize,
    pub zero_mag_max: f64,
    pub pole_mag_max: f64,
    /// Range of the ℓ₂ norm of the first `m` impulse-response samples.
    pub l2_gain_range: (f64, f64),
}

impl Default for RandomSystemParams {
    fn default() -> Self {
        Self {
            n_zero_pairs: 10,
            n_pole_pairs: 10,
            zero_mag_max: 0.99,
            pole_mag_max: 0.92,
            l2_gain_range: (2.0, 4.0),
        }
    }
}

/// Draws conjugate zero and pole pairs with uniform magnitude and phase in
/// `[0, π)`, then sets the gain so that the first `m` impulse-response
/// samples have an ℓ₂ norm drawn uniformly from `l2_gain_range`.
pub fn sample_random_system<R: Rng + ?Sized>(
    rng: &mut R,
    params: &RandomSystemParams,
    m: usize,
) -> LtiSystem {
    let mut pair = |max: f64| ConjugatePair {
        magnitude: rng.random::<f64>() * max,
        phase: rng.random::<f64>() * PI,
    };
    let zeros = (0..params.n_zero_pairs)
        .map(|_| pair(params.zero_mag_max))
        .collect();
    let poles = (0..params.n_pole_pairs)
        .map(|_| pair(params.pole_mag_max))
        .collect();
    let (lo, hi) = params.l2_gain_range;
    let target = lo + (hi - lo) * rng.random::<f64>();
    let mut sys = LtiSystem {
        zeros,
        poles,
        gain: 1.0,
    };
    // h_0 = 1 for the monic expansion, so the norm is never zero.
    let norm = impulse_response(&sys, m.max(1))
        .expect("pole magnitudes are drawn below 1")
        .norm();
    sys.gain = target / norm;
    sys
}
