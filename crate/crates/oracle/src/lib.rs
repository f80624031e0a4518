//! Reference computations for tests.
//!
//! Everything here is written against plain `Vec<Vec<f64>>` and closures so
//! that it shares no code path with the library under test: dense LU
//! determinants, Gauss-Jordan inverses, adaptive Gauss-Legendre quadrature
//! and batch-means standard errors.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;

pub type Dense = Vec<Vec<f64>>;

/// Determinant by LU decomposition with partial pivoting.
pub fn lu_determinant(a: &Dense) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    det
}

/// Log of the absolute determinant, accumulated pivot by pivot so that
/// tiny determinants do not underflow.
pub fn lu_log_abs_determinant(a: &Dense) -> f64 {
    let n = a.len();
    let mut m = a.clone();
    let mut acc = 0.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(pivot, col);
        acc += m[col][col].abs().ln();
        for row in col + 1..n {
            let factor = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    acc
}

/// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(pivot, col);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let factor = m[row][col];
                if factor != 0.0 {
                    for k in 0..2 * n {
                        m[row][k] -= factor * m[col][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, p) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for l in 0..k {
            for j in 0..p {
                out[i][j] += a[i][l] * b[l][j];
            }
        }
    }
    out
}

pub fn transpose(a: &Dense) -> Dense {
    let (n, p) = (a.len(), a[0].len());
    (0..p).map(|j| (0..n).map(|i| a[i][j]).collect()).collect()
}

pub fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum())
        .collect()
}

/// Symmetric eigenvalues by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(a: &Dense) -> Vec<f64> {
    let n = a.len();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

struct Rule {
    coarse: (Vec<f64>, Vec<f64>),
    fine: (Vec<f64>, Vec<f64>),
}

impl Rule {
    fn new() -> Self {
        Self {
            coarse: gauss_legendre(10),
            fine: gauss_legendre(21),
        }
    }

    fn apply<const K: usize>(
        (nodes, weights): &(Vec<f64>, Vec<f64>),
        f: &mut dyn FnMut(f64) -> [f64; K],
        a: f64,
        b: f64,
    ) -> [f64; K] {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = [0.0; K];
        for (x, w) in nodes.iter().zip(weights) {
            let v = f(mid + half * x);
            for k in 0..K {
                acc[k] += w * half * v[k];
            }
        }
        acc
    }
}

/// Adaptive Gauss-Legendre quadrature of a vector-valued integrand on a
/// finite interval. Panels are bisected until the 10-point and 21-point
/// rules agree to `tol` (absolute, max over components).
pub fn integrate<const K: usize>(
    f: &mut dyn FnMut(f64) -> [f64; K],
    a: f64,
    b: f64,
    tol: f64,
) -> [f64; K] {
    let rule = Rule::new();
    let mut out = [0.0; K];
    let mut stack = vec![(a, b, tol, 0usize)];
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let c = Rule::apply(&rule.coarse, f, lo, hi);
        let fi = Rule::apply(&rule.fine, f, lo, hi);
        let err = (0..K).map(|k| (c[k] - fi[k]).abs()).fold(0.0, f64::max);
        let size = (0..K).map(|k| fi[k].abs()).fold(0.0, f64::max);
        // Halving the tolerance eventually asks for less than rounding can
        // deliver; accept panels whose disagreement is already at that level.
        if err <= t || err <= 1e3 * f64::EPSILON * size || depth >= 30 {
            for k in 0..K {
                out[k] += fi[k];
            }
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * t, depth + 1));
            stack.push((mid, hi, 0.5 * t, depth + 1));
        }
    }
    out
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Mean, variance and normalizing mass of N(mu, sigma2) restricted to
/// (lower, upper), by direct quadrature of the density. Infinite limits are
/// cut 40 standard deviations beyond the finite end (or the mean).
pub fn truncated_normal_moments_quadrature(
    mu: f64,
    sigma2: f64,
    lower: f64,
    upper: f64,
) -> (f64, f64, f64) {
    let sd = sigma2.sqrt();
    let lo = if lower.is_finite() {
        lower
    } else {
        upper.min(mu) - 40.0 * sd
    };
    let hi = if upper.is_finite() {
        upper
    } else {
        lower.max(mu) + 40.0 * sd
    };
    let anchor = mu.clamp(lo, hi);
    // Work with the density relative to its value at the closest point of
    // the interval so deep tails do not underflow.
    let log_ref = -0.5 * ((anchor - mu) / sd).powi(2);
    let mut dens = |x: f64| {
        let d = (-0.5 * ((x - mu) / sd).powi(2) - log_ref).exp();
        [d, d * (x - anchor), d * (x - anchor) * (x - anchor)]
    };
    let [z, m1, m2] = integrate(&mut dens, lo, hi, 1e-13);
    let mean_shift = m1 / z;
    let var = m2 / z - mean_shift * mean_shift;
    let mass = z * log_ref.exp() / (sd * (2.0 * PI).sqrt());
    (anchor + mean_shift, var, mass)
}

/// Standard error of a Markov chain average by non-overlapping batch means.
pub fn batch_means_se(samples: &[f64], n_batches: usize) -> f64 {
    let b = samples.len() / n_batches;
    assert!(b >= 2, "too few samples per batch");
    let means: Vec<f64> = (0..n_batches)
        .map(|i| samples[i * b..(i + 1) * b].iter().sum::<f64>() / b as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / n_batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (var / n_batches as f64).sqrt()
}

/// Mass and first moments of the unnormalized density `exp(−½ zᵀ Σ⁻¹ z)`
/// restricted to the box `Π (lower_i, upper_i)`, by nested adaptive
/// quadrature in up to three dimensions. Returns `(mass, E[z])` with the
/// mean normalized. Infinite ends are cut at 12 marginal standard
/// deviations.
pub fn gaussian_box_mean(sigma: &Dense, lower: &[f64], upper: &[f64], tol: f64) -> (f64, Vec<f64>) {
    let d = sigma.len();
    assert!(
        (1..=3).contains(&d),
        "box quadrature supports 1 to 3 dimensions"
    );
    let prec = gauss_jordan_inverse(sigma);
    let limits: Vec<(f64, f64)> = (0..d)
        .map(|i| {
            let cut = 12.0 * sigma[i][i].sqrt();
            (lower[i].max(-cut), upper[i].min(cut))
        })
        .collect();

    fn level(k: usize, z: [f64; 3], prec: &Dense, limits: &[(f64, f64)], tol: f64) -> [f64; 4] {
        let d = limits.len();
        let (a, b) = limits[k];
        if !(a < b) {
            return [0.0; 4];
        }
        let mut f = |x: f64| {
            let mut z = z;
            z[k] = x;
            if k + 1 < d {
                level(k + 1, z, prec, limits, tol)
            } else {
                let mut q = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        q += z[i] * prec[i][j] * z[j];
                    }
                }
                let w = (-0.5 * q).exp();
                [w, w * z[0], w * z[1], w * z[2]]
            }
        };
        integrate(&mut f, a, b, tol)
    }

    let r = level(0, [0.0; 3], &prec, &limits, tol);
    let mean = (0..d).map(|i| r[i + 1] / r[0]).collect();
    (r[0], mean)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
