use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::{Hyperparameters, KernelFactor};
use crate::linalg;
use crate::signal::{Dataset, Interval, Quantizer, RegressionMatrix};

/// Regressor, observed levels and their latent intervals, with `UᵀU`
/// precomputed.
#[derive(Debug, Clone)]
pub struct QuantizedProblem {
    regressors: DMatrix<f64>,
    gram: DMatrix<f64>,
    y: DVector<f64>,
    intervals: Vec<Interval>,
}

impl QuantizedProblem {
    pub fn new(regression: RegressionMatrix, quantizer: &Quantizer, y: &[f64]) -> Result<Self> {
        let u = regression.0;
        if u.nrows() != y.len() {
            return Err(Error::DimensionMismatch {
                context: "problem rows vs outputs",
                expected: u.nrows(),
                found: y.len(),
            });
        }
        if u.iter().all(|&v| v == 0.0) {
            return Err(Error::ZeroInput);
        }
        let intervals = y
            .iter()
            .map(|&level| quantizer.interval_of(level))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gram: u.tr_mul(&u),
            regressors: u,
            y: DVector::from_column_slice(y),
            intervals,
        })
    }

    /// Problem on the quantized outputs of `dataset` with `m` taps.
    pub fn from_dataset(dataset: &Dataset, m: usize) -> Result<Self> {
        Self::new(
            dataset.regression_matrix(m)?,
            &dataset.quantizer,
            &dataset.y,
        )
    }

    pub fn n(&self) -> usize {
        self.regressors.nrows()
    }

    pub fn m(&self) -> usize {
        self.regressors.ncols()
    }

    /// `U`.
    pub fn regressors(&self) -> &DMatrix<f64> {
        &self.regressors
    }

    /// `UᵀU`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Observed levels as numbers.
    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    /// Fails if any `z_i` lies outside the interval of `y_i`.
    pub fn check_constraints(&self, z: &DVector<f64>) -> Result<()> {
        match z
            .iter()
            .zip(&self.intervals)
            .position(|(&v, iv)| !iv.contains(v))
        {
            Some(index) => Err(Error::ConstraintViolation {
                index,
                value: z[index],
            }),
            None => Ok(()),
        }
    }
}

/// `g | z ~ N(H z, P_g)` with `P_g = (UᵀU/σ² + (λK_β)⁻¹)⁻¹` and
/// `H = P_g Uᵀ / σ²`.
///
/// Built from `K = L Lᵀ` as `P_g = L W⁻¹ Lᵀ`, `W = LᵀUᵀUL/σ² + I/λ`, so
/// neither `K` nor `UᵀU` is ever inverted. With `W = R Rᵀ` the square root
/// `F = L R⁻ᵀ` satisfies `F Fᵀ = P_g` and is what draws use.
#[derive(Debug, Clone)]
pub struct PosteriorGaussian {
    eta: Hyperparameters,
    cov: DMatrix<f64>,
    gain: DMatrix<f64>,
    sqrt_cov: DMatrix<f64>,
}

impl PosteriorGaussian {
    pub fn new(u: &DMatrix<f64>, gram: &DMatrix<f64>, eta: &Hyperparameters) -> Result<Self> {
        let m = u.ncols();
        let kernel = KernelFactor::new(eta.beta, m)?;
        Self::with_kernel(u, gram, eta, &kernel)
    }

    pub fn with_kernel(
        u: &DMatrix<f64>,
        gram: &DMatrix<f64>,
        eta: &Hyperparameters,
        kernel: &KernelFactor,
    ) -> Result<Self> {
        let l = kernel.lower();
        let mut w = l.tr_mul(&(gram * &l)) / eta.sigma2;
        linalg::symmetrize(&mut w);
        for i in 0..w.nrows() {
            w[(i, i)] += 1.0 / eta.lambda;
        }
        let fail = || Error::PosteriorFactorization { eta: *eta };
        let r = linalg::cholesky_with_jitter(w).ok_or_else(fail)?;
        // Fᵀ = R⁻¹ Lᵀ
        let f_t = r
            .l_dirty()
            .solve_lower_triangular(&l.transpose())
            .ok_or_else(fail)?;
        let sqrt_cov = f_t.transpose();
        let mut cov = &sqrt_cov * &f_t;
        linalg::symmetrize(&mut cov);
        let gain = (&cov * u.transpose()) / eta.sigma2;
        Ok(Self {
            eta: *eta,
            cov,
            gain,
            sqrt_cov,
        })
    }

    pub fn for_problem(problem: &QuantizedProblem, eta: &Hyperparameters) -> Result<Self> {
        Self::new(problem.regressors(), problem.gram(), eta)
    }

    pub fn eta(&self) -> &Hyperparameters {
        &self.eta
    }

    /// `P_g`.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `H`.
    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    /// `m_g = H z`.
    pub fn mean(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.gain * z
    }

    /// One draw of `g` given `z`.
    pub fn sample<R: Rng + ?Sized>(&self, z: &DVector<f64>, rng: &mut R) -> DVector<f64> {
        let w = DVector::from_fn(self.sqrt_cov.ncols(), |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        });
        self.mean(z) + &self.sqrt_cov * w
    }
}

/// `(P_g, H)` for the regressor `U` at `η`.
pub fn posterior_g_given_z(
    u: &RegressionMatrix,
    eta: &Hyperparameters,
) -> Result<PosteriorGaussian> {
    let gram = u.0.tr_mul(&u.0);
    PosteriorGaussian::new(&u.0, &gram, eta)
}
