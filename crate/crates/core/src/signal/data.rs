use nalgebra::{DMatrix, DVector};
// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use super::quantizer::{quantize, Quantizer};
use super::system::ImpulseResponse;
use crate::error::{Error, Result};

/// `N × m` Toeplitz regressor with rows `φ_tᵀ = [u_{t−1} … u_{t−m}]`,
/// `t = 1..=N`, and `u_s = 0` for `s < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionMatrix(pub DMatrix<f64>);

impl RegressionMatrix {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn m(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Builds the regressor from inputs `u_0 … u_{N−1}`; needs `u.len() ≥ n`.
pub fn regression_matrix(u: &[f64], n: usize, m: usize) -> Result<RegressionMatrix> {
    if u.len() < n {
        return Err(Error::DimensionMismatch {
            context: "regression_matrix input length",
            expected: n,
            found: u.len(),
        });
    }
    // Row r (0-based) is time t = r + 1; column c (0-based) is tap i = c + 1.
    Ok(RegressionMatrix(DMatrix::from_fn(n, m, |r, c| {
        if c <= r {
            u[r - c]
        } else {
            0.0
        }
    })))
}

/// `z_t = Σ_{i=1}^{min(m, t)} g_i u_{t−i}`, `t = 1..=N` with `N = u.len()`.
pub fn noiseless_output(g: &ImpulseResponse, u: &[f64]) -> DVector<f64> {
    let m = g.len();
    DVector::from_fn(u.len(), |r, _| {
        (0..m.min(r + 1)).map(|c| g[c] * u[r - c]).sum()
    })
}

/// `z = U g + e` with `e ~ N(0, σ² I)`.
pub fn simulate<R: Rng + ?Sized>(
    g: &ImpulseResponse,
    u: &[f64],
    sigma2: f64,
    rng: &mut R,
) -> DVector<f64> {
    let sd = sigma2.max(0.0).sqrt();
    let mut z = noiseless_output(g, u);
    for v in z.iter_mut() {
        *v += sd * rng.sample::<f64, _>(StandardNormal);
    }
    z
}

/// Unit-variance white Gaussian input `u_0 … u_{n−1}`.
pub fn white_noise_input<R: Rng + ?Sized>(n: usize, rng: &mut R) -> alloc::vec::Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Population (1/N) variance.
pub fn population_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// `σ² = var(U g) / snr` using the empirical variance of the realized
/// noiseless output.
pub fn calibrate_noise(g: &ImpulseResponse, u: &[f64], snr: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::Domain {
            name: "snr",
            value: snr,
            expected: "(0, inf]",
        });
    }
    let clean = noiseless_output(g, u);
    let var = population_variance(clean.as_slice());
    if !(var > 0.0) {
        return Err(Error::DegenerateOutput);
    }
    Ok(var / snr)
}

/// One identification experiment: inputs, quantized outputs, and whatever
/// ground truth the generator kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `u_0 … u_{N−1}`.
    pub u: alloc::vec::Vec<f64>,
    /// `y_1 … y_N`.
    pub y: alloc::vec::Vec<f64>,
    /// Non-quantized outputs `z_1 … z_N`, kept for the oracle baseline.
    pub z_latent: Option<alloc::vec::Vec<f64>>,
    pub sigma2_true: f64,
    pub quantizer: Quantizer,
    pub g_true: Option<ImpulseResponse>,
    pub seed: u64,
    pub stream: u64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Checks lengths and that every output is `Q` of its latent value.
    pub fn validate(&self) -> Result<()> {
        if self.u.len() != self.y.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset u/y",
                expected: self.y.len(),
                found: self.u.len(),
            });
        }
        for &y in &self.y {
            self.quantizer.interval_of(y)?;
        }
        if let Some(z) = &self.z_latent {
            if z.len() != self.y.len() {
                return Err(Error::DimensionMismatch {
                    context: "dataset z/y",
                    expected: self.y.len(),
                    found: z.len(),
                });
            }
            let requant = quantize(&self.quantizer, &DVector::from_column_slice(z));
            if let Some(t) = (0..z.len()).find(|&t| requant[t] != self.y[t]) {
                return Err(Error::ConstraintViolation {
                    index: t,
                    value: z[t],
                });
            }
        }
        Ok(())
    }

    pub fn regression_matrix(&self, m: usize) -> Result<RegressionMatrix> {
        regression_matrix(&self.u, self.n(), m)
    }
}
