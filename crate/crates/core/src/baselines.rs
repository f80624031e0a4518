//! Comparison estimators: the standard kernel method (on the levels or on
//! the latent outputs), and EM for the maximum-likelihood and
//! maximum-a-posteriori impulse response with `z` as the only latent.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::inference::{golden_section, EmConfig, VARIANCE_FLOOR};
use crate::kernel::{Hyperparameters, KernelFactor};
use crate::linalg::{self, chol_logdet};
use crate::sampler::{PosteriorGaussian, QuantizedProblem, TruncatedNormalSpec};
use crate::signal::ImpulseResponse;

/// Grid size in each of `λ` and `β` for the standard kernel method.
pub const KB_GRID: usize = 30;
/// `λ` search range for the standard kernel method.
pub const KB_LAMBDA_RANGE: (f64, f64) = (1e-4, 1e4);

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult {
    pub g_hat: ImpulseResponse,
    pub eta_hat: Option<Hyperparameters>,
    pub iterations: usize,
    pub converged: bool,
}

/// How the ML and MAP baselines get `E[z | y]` and `E[z² | y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentSource {
    /// Closed-form truncated-normal moments.
    #[default]
    Analytic,
    /// Averages of independent truncated-normal draws.
    Sampled,
}

/// Least-squares fit `(UᵀU)⁻¹Uᵀy`, with a small ridge if `UᵀU` is singular.
pub fn least_squares(u: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let gram = u.tr_mul(u);
    let rhs = u.tr_mul(y);
    solve_gram(&gram, &rhs)
}

fn solve_gram(gram: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = linalg::cholesky_with_jitter(gram.clone()) {
        return Ok(chol.solve(rhs));
    }
    let m = gram.nrows();
    let ridge = 1e-8 * gram.trace().max(f64::MIN_POSITIVE) / m as f64;
    log::warn!("U^T U is singular; solving with ridge {ridge:e}");
    let mut g = gram.clone();
    for i in 0..m {
        g[(i, i)] += ridge;
    }
    Ok(linalg::cholesky_with_jitter(g)
        .ok_or(Error::NotPositiveDefinite("U^T U"))?
        .solve(rhs))
}

/// Noise variance from least-squares residuals, `RSS / (N − m)` (or
/// `RSS / N` when `N ≤ m`), floored relative to the output energy.
pub fn residual_variance(u: &DMatrix<f64>, y: &DVector<f64>) -> Result<f64> {
    let (n, m) = u.shape();
    let g = least_squares(u, y)?;
    let rss = (y - u * g).norm_squared();
    let dof = if n > m { n - m } else { n };
    let floor = (1e-10 * y.norm_squared() / n as f64).max(VARIANCE_FLOOR);
    Ok((rss / dof as f64).max(floor))
}

/// `U`-dependent pieces of the Gaussian marginal likelihood at one `β`:
/// with `K = L Lᵀ`, `A = LᵀUᵀUL` and `b = LᵀUᵀy`.
struct BetaSlice {
    l: DMatrix<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

struct MarginalLikelihood<'a> {
    u: &'a DMatrix<f64>,
    ut_y: DVector<f64>,
    yty: f64,
    sigma2: f64,
}

impl<'a> MarginalLikelihood<'a> {
    fn new(u: &'a DMatrix<f64>, y: &DVector<f64>, sigma2: f64) -> Self {
        Self {
            u,
            ut_y: u.tr_mul(y),
            yty: y.norm_squared(),
            sigma2,
        }
    }

    fn slice(&self, beta: f64) -> Result<BetaSlice> {
        let l = KernelFactor::new(beta, self.u.ncols())?.lower();
        let ul = self.u * &l;
        let mut a = ul.tr_mul(&ul);
        linalg::symmetrize(&mut a);
        let b = l.tr_mul(&self.ut_y);
        Ok(BetaSlice { l, a, b })
    }

    /// `(σ²/λ) I + A`, factored.
    fn factor(&self, s: &BetaSlice, lambda: f64) -> Option<linalg::Chol> {
        let mut mat = s.a.clone();
        let r = self.sigma2 / lambda;
        for i in 0..mat.nrows() {
            mat[(i, i)] += r;
        }
        linalg::cholesky_with_jitter(mat)
    }

    /// `ln p(y)` for `y ~ N(0, λ U K Uᵀ + σ² I)` through the `m × m`
    /// Woodbury form.
    fn eval(&self, s: &BetaSlice, lambda: f64) -> Option<f64> {
        let chol = self.factor(s, lambda)?;
        let n = self.u.nrows() as f64;
        let m = self.u.ncols() as f64;
        let quad = (self.yty - linalg::chol_quadform_inv(&chol, &s.b)) / self.sigma2;
        let logdet = n * self.sigma2.ln() + m * (lambda / self.sigma2).ln() + chol_logdet(&chol);
        let ll = -0.5 * (quad + logdet + n * (2.0 * core::f64::consts::PI).ln());
        ll.is_finite().then_some(ll)
    }

    fn eval_at(&self, beta: f64, lambda: f64) -> Option<f64> {
        self.slice(beta).ok().and_then(|s| self.eval(&s, lambda))
    }
}

/// `ln p(y; η)` under `y = U g + e`, `g ~ N(0, λK_β)`, `e ~ N(0, σ²I)`.
pub fn log_marginal_likelihood(
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    eta: &Hyperparameters,
) -> Result<f64> {
    let ml = MarginalLikelihood::new(u, y, eta.sigma2);
    let s = ml.slice(eta.beta)?;
    ml.eval(&s, eta.lambda)
        .ok_or(Error::PosteriorFactorization { eta: *eta })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || lo == hi {
        return alloc::vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k + 1 == n { hi } else { lo + step * k as f64 })
        .collect()
}

/// Standard kernel-based estimate treating `y` as Gaussian observations.
///
/// `σ²` comes from least-squares residuals. `(λ, β)` maximize the marginal
/// likelihood over a 30 × 30 grid (log-spaced `λ`), refined by
/// golden-section search first in `β`, then in `ln λ`. The estimate is the
/// posterior mean `H y`.
pub fn kb_standard(
    u: &DMatrix<f64>,
    y: &DVector<f64>,
    beta_bounds: (f64, f64),
) -> Result<EstimatorResult> {
    if u.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "kb_standard rows vs outputs",
            expected: u.nrows(),
            found: y.len(),
        });
    }
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroInput);
    }
    let sigma2 = residual_variance(u, y)?;
    let ml = MarginalLikelihood::new(u, y, sigma2);

    let (llo, lhi) = (KB_LAMBDA_RANGE.0.ln(), KB_LAMBDA_RANGE.1.ln());
    let log_lambdas = linspace(llo, lhi, KB_GRID);
    let betas = linspace(beta_bounds.0, beta_bounds.1, KB_GRID);

    // (ll, β index, ln λ index)
    let mut best: Option<(f64, usize, usize)> = None;
    for (bi, &beta) in betas.iter().enumerate() {
        let slice = match ml.slice(beta) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("kb_standard: skipping beta = {beta}: {e}");
                continue;
            }
        };
        for (li, &ll_lambda) in log_lambdas.iter().enumerate() {
            if let Some(v) = ml.eval(&slice, ll_lambda.exp()) {
                if best.is_none_or(|(b, _, _)| v > b) {
                    best = Some((v, bi, li));
                }
            }
        }
    }
    let Some((mut best_ll, bi, li)) = best else {
        log::error!(
            "kb_standard: every grid point failed (sigma2 = {sigma2:e}, beta in {beta_bounds:?})"
        );
        return Err(Error::InfeasibleGrid);
    };
    let (mut beta, mut log_lambda) = (betas[bi], log_lambdas[li]);

    if betas.len() > 1 {
        let a = betas[bi.saturating_sub(1)];
        let b = betas[(bi + 1).min(betas.len() - 1)];
        let lambda = log_lambda.exp();
        let (x, neg) = golden_section(a, b, 1e-8, &mut |bt| {
            ml.eval_at(bt, lambda).map_or(f64::INFINITY, |v| -v)
        });
        if -neg > best_ll {
            best_ll = -neg;
            beta = x;
        }
    }
    if log_lambdas.len() > 1 {
        let a = log_lambdas[li.saturating_sub(1)];
        let b = log_lambdas[(li + 1).min(log_lambdas.len() - 1)];
        let slice = ml.slice(beta)?;
        let (x, neg) = golden_section(a, b, 1e-8, &mut |t| {
            ml.eval(&slice, t.exp()).map_or(f64::INFINITY, |v| -v)
        });
        if -neg > best_ll {
            log_lambda = x;
        }
    }

    let lambda = log_lambda.exp();
    let eta = Hyperparameters::new(lambda, beta, sigma2)?;
    // H y = L ((σ²/λ) I + A)⁻¹ b
    let slice = ml.slice(beta)?;
    let chol = ml
        .factor(&slice, lambda)
        .ok_or(Error::PosteriorFactorization { eta })?;
    let g_hat = &slice.l * chol.solve(&slice.b);
    Ok(EstimatorResult {
        g_hat: ImpulseResponse::new(g_hat),
        eta_hat: Some(eta),
        iterations: 1,
        converged: true,
    })
}

/// `(E[z | y], Σ_t E[z_t² | y])` for independent `z_t ~ N(μ_t, σ²)`
/// truncated to the interval of `y_t`.
fn latent_moments<R: Rng + ?Sized>(
    problem: &QuantizedProblem,
    mu: &DVector<f64>,
    sigma2: f64,
    source: MomentSource,
    n_draws: usize,
    rng: &mut R,
) -> Result<(DVector<f64>, f64)> {
    let mut ez = DVector::zeros(problem.n());
    let mut sum_ez2 = 0.0;
    for (t, iv) in problem.intervals().iter().enumerate() {
        let spec = TruncatedNormalSpec::on_interval(mu[t], sigma2, iv)?;
        let (mean, second) = match source {
            MomentSource::Analytic => (spec.mean(), spec.second_moment()),
            MomentSource::Sampled => {
                let (mut s1, mut s2) = (0.0, 0.0);
                for _ in 0..n_draws.max(1) {
                    let x = spec.sample(rng);
                    s1 += x;
                    s2 += x * x;
                }
                let k = n_draws.max(1) as f64;
                (s1 / k, s2 / k)
            }
        };
        ez[t] = mean;
        sum_ez2 += second;
    }
    Ok((ez, sum_ez2))
}

fn relative_change(new: &[f64], old: &[f64]) -> f64 {
    let num: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = old.iter().map(|b| b * b).sum();
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Maximum-likelihood `(g, σ²)` by EM with `z` latent.
///
/// E-step: truncated-normal moments of `z_t ~ N(φ_tᵀg, σ²)` on each
/// observed interval. M-step: `g = (UᵀU)⁻¹UᵀE[z]` and
/// `σ² = (Σ E[z_t²] − 2 E[z]ᵀUg + ‖Ug‖²) / N`. Starts from least squares on
/// the levels; stops on the relative change of `(g, σ²)`.
pub fn ml_gs<R: Rng + ?Sized>(
    problem: &QuantizedProblem,
    cfg: &EmConfig,
    source: MomentSource,
    rng: &mut R,
) -> Result<EstimatorResult> {
    let u = problem.regressors();
    let n = problem.n() as f64;
    let mut g = solve_gram(problem.gram(), &u.tr_mul(problem.y()))?;
    let mut sigma2 = residual_variance(u, problem.y())?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mu = u * &g;
        let (ez, sum_ez2) =
            latent_moments(problem, &mu, sigma2, source, cfg.gibbs_em.n_samples, rng)?;
        let g_next = solve_gram(problem.gram(), &u.tr_mul(&ez))?;
        let ug = u * &g_next;
        let s2_next = ((sum_ez2 - 2.0 * ez.dot(&ug) + ug.norm_squared()) / n).max(VARIANCE_FLOOR);

        let old: Vec<f64> = g.iter().copied().chain([sigma2]).collect();
        let new: Vec<f64> = g_next.iter().copied().chain([s2_next]).collect();
        let change = relative_change(&new, &old);
        g = g_next;
        sigma2 = s2_next;
        if !change.is_finite() || !sigma2.is_finite() {
            break;
        }
        if change <= cfg.rel_tol {
            converged = true;
            break;
        }
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Unstable(f64::INFINITY));
    }
    Ok(EstimatorResult {
        g_hat: ImpulseResponse::new(g),
        eta_hat: None,
        iterations,
        converged,
    })
}

/// Maximum-a-posteriori `g` under the prior `N(0, λK_β)` with `η` fixed
/// to `eta_plugin`, by EM with `z` latent.
///
/// M-step: `g = H E[z]`. Starts from `H y`; stops on the relative change
/// of `g`.
pub fn map_gs<R: Rng + ?Sized>(
    problem: &QuantizedProblem,
    eta_plugin: &Hyperparameters,
    cfg: &EmConfig,
    source: MomentSource,
    rng: &mut R,
) -> Result<EstimatorResult> {
    let post = PosteriorGaussian::for_problem(problem, eta_plugin)?;
    let u = problem.regressors();
    let mut g = post.mean(problem.y());
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let mu = u * &g;
        let (ez, _) = latent_moments(
            problem,
            &mu,
            eta_plugin.sigma2,
            source,
            cfg.gibbs_em.n_samples,
            rng,
        )?;
        let g_next = post.mean(&ez);
        let change = relative_change(g_next.as_slice(), g.as_slice());
        g = g_next;
        if change <= cfg.rel_tol {
            converged = true;
            break;
        }
    }
    Ok(EstimatorResult {
        g_hat: ImpulseResponse::new(g),
        eta_hat: Some(*eta_plugin),
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_change_edge_cases() {
        assert_eq!(relative_change(&[0.0], &[0.0]), 0.0);
        assert_eq!(relative_change(&[1.0], &[0.0]), f64::INFINITY);
        assert_eq!(relative_change(&[2.0, 0.0], &[1.0, 0.0]), 1.0);
    }

    #[test]
    fn linspace_ends() {
        let v = linspace(0.1, 0.9, 5);
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 0.1);
        assert_eq!(v[4], 0.9);
        assert_eq!(linspace(0.3, 0.3, 30), alloc::vec![0.3]);
    }
}
