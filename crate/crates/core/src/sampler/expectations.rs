//! Posterior expectations of `g` and of quadratic forms in `(g, z)`.
//!
//! For `f(g, z) = gᵀAg + 2 zᵀBg + zᵀCz`, integrating `g | z` out in closed
//! form gives
//! `E[f | y] = tr(A P_g) + E[zᵀ(HᵀAH + 2BH + C)z | y]`,
//! which only needs `E[z zᵀ | y]`. The joint chain can instead average `f`
//! directly from its `(g, z)` moments.

use nalgebra::{DMatrix, DVector};

use super::gibbs::{ChainStats, Method};
use super::posterior::PosteriorGaussian;
use crate::error::{Error, Result};
use crate::linalg::trace_of_product;

/// Blocks of `f(g, z) = [gᵀ zᵀ] [[A, Bᵀ], [B, C]] [g; z]`: `A` is `m × m`,
/// `B` is `N × m`, `C` is `N × N`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl QuadraticForm {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            a: DMatrix::zeros(m, m),
            b: DMatrix::zeros(n, m),
            c: DMatrix::zeros(n, n),
        }
    }

    /// `‖z − U g‖²`: `A = UᵀU`, `B = −U`, `C = I`.
    pub fn residual(u: &DMatrix<f64>) -> Self {
        Self {
            a: u.tr_mul(u),
            b: -u,
            c: DMatrix::identity(u.nrows(), u.nrows()),
        }
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.c.nrows()
    }

    pub fn evaluate(&self, g: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let ag = &self.a * g;
        let bg = &self.b * g;
        let cz = &self.c * z;
        g.dot(&ag) + 2.0 * z.dot(&bg) + z.dot(&cz)
    }

    fn check(&self, m: usize, n: usize) -> Result<()> {
        let shapes = [
            (self.a.shape(), (m, m)),
            (self.b.shape(), (n, m)),
            (self.c.shape(), (n, n)),
        ];
        for (found, expected) in shapes {
            if found != expected {
                return Err(Error::DimensionMismatch {
                    context: "quadratic form block",
                    expected: expected.0 * expected.1,
                    found: found.0 * found.1,
                });
            }
        }
        Ok(())
    }
}

/// `E[f(g, z) | y]`: direct sample average for joint-chain statistics, the
/// marginalized formula otherwise.
pub fn expected_quadratic(
    stats: &ChainStats,
    qf: &QuadraticForm,
    post: &PosteriorGaussian,
) -> Result<f64> {
    match stats.method {
        Method::Joint => expected_quadratic_joint(stats, qf),
        Method::Marginal => expected_quadratic_marginal(&stats.ezz, qf, post),
    }
}

/// `tr(A E[ggᵀ]) + 2 tr(B E[gzᵀ]) + tr(C E[zzᵀ])`.
pub fn expected_quadratic_joint(stats: &ChainStats, qf: &QuadraticForm) -> Result<f64> {
    let (Some(egg), Some(egz)) = (&stats.egg, &stats.egz) else {
        return Err(Error::DimensionMismatch {
            context: "joint moments missing from chain statistics",
            expected: 1,
            found: 0,
        });
    };
    qf.check(egg.nrows(), stats.ez.len())?;
    Ok(trace_of_product(&qf.a, egg)
        + 2.0 * trace_of_product(&qf.b, egz)
        + trace_of_product(&qf.c, &stats.ezz))
}

/// `tr(A P_g) + tr((HᵀAH + 2BH + C) E[zzᵀ])`, evaluated as
/// `tr(A (P_g + H E[zzᵀ] Hᵀ)) + 2 tr(B H E[zzᵀ]) + tr(C E[zzᵀ])`.
pub fn expected_quadratic_marginal(
    ezz: &DMatrix<f64>,
    qf: &QuadraticForm,
    post: &PosteriorGaussian,
) -> Result<f64> {
    let h = post.gain();
    qf.check(h.nrows(), h.ncols())?;
    if ezz.shape() != (h.ncols(), h.ncols()) {
        return Err(Error::DimensionMismatch {
            context: "E[zz^T] vs posterior gain",
            expected: h.ncols(),
            found: ezz.nrows(),
        });
    }
    let h_ezz = h * ezz;
    let second_moment = post.cov() + &h_ezz * h.transpose();
    Ok(trace_of_product(&qf.a, &second_moment)
        + 2.0 * trace_of_product(&qf.b, &h_ezz)
        + trace_of_product(&qf.c, ezz))
}

/// `E[g gᵀ | y]`: the joint average, or `P_g + H E[zzᵀ] Hᵀ`.
pub fn expected_ggt(stats: &ChainStats, post: &PosteriorGaussian) -> DMatrix<f64> {
    match (&stats.method, &stats.egg) {
        (Method::Joint, Some(egg)) => egg.clone(),
        _ => {
            let h = post.gain();
            post.cov() + h * &stats.ezz * h.transpose()
        }
    }
}

/// `E[g | y]`: the joint average, or `H E[z | y]`.
pub fn expected_g(stats: &ChainStats, post: &PosteriorGaussian) -> Result<DVector<f64>> {
    match (&stats.method, &stats.eg) {
        (Method::Joint, Some(eg)) => Ok(eg.clone()),
        _ => {
            if post.gain().ncols() != stats.ez.len() {
                return Err(Error::DimensionMismatch {
                    context: "E[z] vs posterior gain",
                    expected: post.gain().ncols(),
                    found: stats.ez.len(),
                });
            }
            Ok(post.mean(&stats.ez))
        }
    }
}
