//! Dense symmetric positive-definite helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;

pub type Chol = Cholesky<f64, Dyn>;

/// Relative diagonal jitter applied on a failed first factorization.
pub const JITTER: f64 = 1e-10;

/// Cholesky factorization; on failure retries once with
/// `JITTER · trace / n` added to the diagonal.
pub fn cholesky_with_jitter(mat: DMatrix<f64>) -> Option<Chol> {
    let n = mat.nrows();
    let jitter = JITTER * mat.trace() / n.max(1) as f64;
    let retry = mat.clone();
    Cholesky::new(mat).or_else(|| {
        if !(jitter > 0.0) || !jitter.is_finite() {
            return None;
        }
        log::debug!("cholesky failed (n = {n}); retrying with jitter {jitter:e}");
        let mut retry = retry;
        for i in 0..n {
            retry[(i, i)] += jitter;
        }
        Cholesky::new(retry)
    })
}

/// `log det` from a Cholesky factor.
pub fn chol_logdet(chol: &Chol) -> f64 {
    2.0 * chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|d| d.ln())
        .sum::<f64>()
}

/// `xᵀ A⁻¹ x` through the factor of `A`, never forming the inverse.
pub fn chol_quadform_inv(chol: &Chol, x: &DVector<f64>) -> f64 {
    let w = chol
        .l_dirty()
        .solve_lower_triangular(x)
        .expect("cholesky factor has a positive diagonal");
    w.norm_squared()
}

/// `tr(A⁻¹ S)` through the factor of `A`.
pub fn chol_trace_inv_times(chol: &Chol, s: &DMatrix<f64>) -> f64 {
    chol.solve(s).trace()
}

/// `tr(X Y)` without forming the product.
pub fn trace_of_product(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(x.ncols(), y.nrows());
    debug_assert_eq!(x.nrows(), y.ncols());
    x.dot(&y.transpose())
}

/// Lower-triangular factor `L` with `L Lᵀ = A`, zeroing the strict upper part.
pub fn lower_factor(chol: &Chol) -> DMatrix<f64> {
    chol.l()
}

/// Symmetrizes in place as `(A + Aᵀ) / 2`.
pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        // rank one: plain Cholesky fails on the zero pivot
        let v = DVector::from_vec(alloc::vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        assert!(Cholesky::new(a.clone()).is_none());
        assert!(cholesky_with_jitter(a).is_some());
    }

    #[test]
    fn logdet_and_quadform() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let c = cholesky_with_jitter(a.clone()).unwrap();
        assert!((chol_logdet(&c) - 8.0f64.ln()).abs() < 1e-14);
        let x = DVector::from_vec(alloc::vec![1.0, 1.0]);
        // A⁻¹ = [3 -2; -2 4] / 8
        assert!((chol_quadform_inv(&c, &x) - 3.0 / 8.0).abs() < 1e-14);
        assert!((chol_trace_inv_times(&c, &a) - 2.0).abs() < 1e-14);
    }
}
