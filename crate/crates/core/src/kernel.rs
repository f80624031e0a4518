//! First-order stable spline (TC) kernel and the Gaussian prior it defines.
//!
//! The prior on the impulse response is `g ~ N(0, λ K_β)` with
//! `{K_β}_{ij} = β^{max(i,j)}` for 1-based `i, j`. Both endpoints of the
//! decay range are excluded: `β = 0` gives the zero matrix and `β = 1` the
//! rank-one all-ones matrix.

use nalgebra::{DMatrix, DVector};
// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, Chol};

/// Default search interval for the kernel decay.
pub const BETA_BOUNDS: (f64, f64) = (1e-4, 1.0 - 1e-4);

/// Kernel scale `λ`, kernel decay `β` and noise variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub lambda: f64,
    pub beta: f64,
    pub sigma2: f64,
}

impl Hyperparameters {
    pub fn new(lambda: f64, beta: f64, sigma2: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain {
                name: "lambda",
                value: lambda,
                expected: "(0, inf)",
            });
        }
        check_beta(beta)?;
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain {
                name: "sigma2",
                value: sigma2,
                expected: "(0, inf)",
            });
        }
        Ok(Self {
            lambda,
            beta,
            sigma2,
        })
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.lambda, self.beta, self.sigma2]
    }

    /// `‖self − prev‖² / ‖prev‖²` on the raw `(λ, β, σ²)` triple.
    pub fn relative_change_from(&self, prev: &Self) -> f64 {
        let (a, b) = (self.to_array(), prev.to_array());
        let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        num / den
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "beta",
            value: beta,
            expected: "(0, 1)",
        })
    }
}

/// Dense TC kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    beta: f64,
    entries: DMatrix<f64>,
}

/// Builds `{K_β}_{ij} = β^{max(i,j)}`, `i, j = 1..=m`.
pub fn build_tc_kernel(beta: f64, m: usize) -> Result<KernelMatrix> {
    check_beta(beta)?;
    if m == 0 {
        return Err(Error::Domain {
            name: "m",
            value: 0.0,
            expected: "m >= 1",
        });
    }
    let powers: alloc::vec::Vec<f64> = (1..=m as i32).map(|k| beta.powi(k)).collect();
    let entries = DMatrix::from_fn(m, m, |i, j| powers[i.max(j)]);
    Ok(KernelMatrix { beta, entries })
}

impl KernelMatrix {
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn factor(&self) -> Result<KernelFactor> {
        linalg::cholesky_with_jitter(self.entries.clone())
            .map(|chol| KernelFactor {
                beta: self.beta,
                chol,
            })
            .ok_or(Error::KernelFactorization {
                beta: self.beta,
                m: self.m(),
            })
    }
}

/// Cholesky factor of a kernel matrix.
#[derive(Debug, Clone)]
pub struct KernelFactor {
    beta: f64,
    chol: Chol,
}

impl KernelFactor {
    pub fn new(beta: f64, m: usize) -> Result<Self> {
        build_tc_kernel(beta, m)?.factor()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn m(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn logdet(&self) -> f64 {
        linalg::chol_logdet(&self.chol)
    }

    /// `gᵀ K⁻¹ g`.
    pub fn quadform_inv(&self, g: &DVector<f64>) -> Result<f64> {
        self.check_len(g.len())?;
        Ok(linalg::chol_quadform_inv(&self.chol, g))
    }

    /// `tr(K⁻¹ S)`.
    pub fn trace_inv_times(&self, s: &DMatrix<f64>) -> Result<f64> {
        self.check_len(s.nrows())?;
        Ok(linalg::chol_trace_inv_times(&self.chol, s))
    }

    /// Lower-triangular `L` with `L Lᵀ = K`.
    pub fn lower(&self) -> DMatrix<f64> {
        linalg::lower_factor(&self.chol)
    }

    /// One draw from the prior `N(0, λ K)`.
    pub fn sample_prior<R: Rng + ?Sized>(&self, lambda: f64, rng: &mut R) -> DVector<f64> {
        let w = DVector::from_fn(self.m(), |_, _| rng.sample::<f64, _>(StandardNormal));
        (self.chol.l() * w) * lambda.sqrt()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == self.m() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                context: "kernel",
                expected: self.m(),
                found: n,
            })
        }
    }
}

pub fn kernel_logdet(kernel: &KernelMatrix) -> Result<f64> {
    Ok(kernel.factor()?.logdet())
}

pub fn kernel_quadform_inv(kernel: &KernelMatrix, g: &DVector<f64>) -> Result<f64> {
    kernel.factor()?.quadform_inv(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_kernels() {
        let k = build_tc_kernel(0.5, 2).unwrap();
        assert_eq!(k.entries().as_slice(), &[0.5, 0.25, 0.25, 0.25]);
        let k = build_tc_kernel(0.5, 1).unwrap();
        assert_eq!(k.entries()[(0, 0)], 0.5);
        let k = build_tc_kernel(0.9, 3).unwrap();
        let e = k.entries();
        for (i, j) in [(0, 2), (2, 0), (2, 2)] {
            assert!((e[(i, j)] - 0.729).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_domain() {
        assert!(build_tc_kernel(0.0, 3).is_err());
        assert!(build_tc_kernel(1.0, 3).is_err());
        assert!(build_tc_kernel(-0.2, 3).is_err());
        assert!(build_tc_kernel(0.5, 0).is_err());
        assert!(Hyperparameters::new(0.0, 0.5, 1.0).is_err());
        assert!(Hyperparameters::new(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn logdet_and_quadform_closed_forms() {
        let k = build_tc_kernel(0.5, 2).unwrap();
        assert!((kernel_logdet(&k).unwrap() - 0.0625f64.ln()).abs() < 1e-14);
        for beta in [0.1, 0.5, 0.93] {
            let k = build_tc_kernel(beta, 1).unwrap();
            assert!((kernel_logdet(&k).unwrap() - beta.ln()).abs() < 1e-15);
        }
        let k = build_tc_kernel(0.5, 1).unwrap();
        let g = DVector::from_element(1, 1.0);
        assert!((kernel_quadform_inv(&k, &g).unwrap() - 2.0).abs() < 1e-15);
        let k = build_tc_kernel(0.7, 4).unwrap();
        assert_eq!(kernel_quadform_inv(&k, &DVector::zeros(4)).unwrap(), 0.0);
        assert!(kernel_quadform_inv(&k, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn relative_change() {
        let a = Hyperparameters::new(1.0, 0.5, 1.0).unwrap();
        let b = Hyperparameters::new(1.0, 0.5, 2.0).unwrap();
        assert!((b.relative_change_from(&a) - 1.0 / 2.25).abs() < 1e-15);
    }
}
