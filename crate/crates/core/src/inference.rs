//! Empirical-Bayes EM for `η = (λ, β, σ²)` with a Monte Carlo E-step.
//!
//! Each iteration runs one Gibbs chain at the current `η` and condenses it
//! into two numbers' worth of sufficient statistics: `f̂₁ = E‖z − Ug‖²` and
//! `S = E[ggᵀ]`. Given those, the M-step is closed form in `λ` and `σ²`
//! and a one-dimensional search in `β`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::baselines::kb_standard;
use crate::error::{Error, Result};
use crate::kernel::{Hyperparameters, KernelFactor, BETA_BOUNDS};
use crate::linalg::{symmetrize, trace_of_product};
use crate::sampler::{
    run_chain, ChainObserver, ChainState, ChainStats, GibbsConfig, Method, NoTrace,
    PosteriorGaussian, QuantizedProblem,
};
use crate::signal::{population_variance, Dataset, ImpulseResponse};

/// Floor on the `λ` and `σ²` updates.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Relative slack allowed when checking that the M-step did not increase
/// `−2Q`.
const MSTEP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    /// Stop once `‖Δη‖² / ‖η‖² ≤ rel_tol`.
    pub rel_tol: f64,
    pub max_iters: usize,
    pub gibbs_em: GibbsConfig,
    pub gibbs_final: GibbsConfig,
    /// Number of points in the coarse `β` scan.
    pub beta_grid: usize,
    pub beta_bounds: (f64, f64),
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            max_iters: 200,
            gibbs_em: GibbsConfig::EM,
            gibbs_final: GibbsConfig::FINAL,
            beta_grid: 200,
            beta_bounds: BETA_BOUNDS,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.beta_bounds;
        if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
            return Err(Error::Domain {
                name: "beta_bounds",
                value: if lo > 0.0 { hi } else { lo },
                expected: "0 < lo <= hi < 1",
            });
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::Domain {
                name: "rel_tol",
                value: self.rel_tol,
                expected: "(0, inf)",
            });
        }
        if self.max_iters == 0 || self.gibbs_em.n_samples == 0 || self.gibbs_final.n_samples == 0 {
            return Err(Error::Domain {
                name: "iteration counts",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(())
    }
}

/// E-step output: `f̂₁ = E[‖z − Ug‖² | y]` and `S = E[ggᵀ | y]`, from which
/// `f̂₂(β) = tr(K_β⁻¹ S)` for every `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepStats {
    pub f1_hat: f64,
    pub second_moment: DMatrix<f64>,
}

impl EStepStats {
    /// Condenses chain output into `(f̂₁, S)`.
    ///
    /// Joint chains average over the `(g, z)` draws directly. Marginal chains
    /// integrate `g | z` in closed form:
    /// `S = P_g + H E[zzᵀ] Hᵀ` and
    /// `f̂₁ = tr(UᵀU S) − 2 tr(U H E[zzᵀ]) + tr(E[zzᵀ])`.
    pub fn from_chain(
        stats: &ChainStats,
        problem: &QuantizedProblem,
        post: &PosteriorGaussian,
    ) -> Result<Self> {
        let u = problem.regressors();
        let (second_moment, cross) = match (stats.method, &stats.egg, &stats.egz) {
            (Method::Joint, Some(egg), Some(egz)) => (egg.clone(), trace_of_product(u, egz)),
            (Method::Joint, _, _) => {
                return Err(Error::DimensionMismatch {
                    context: "joint moments missing from chain statistics",
                    expected: 1,
                    found: 0,
                })
            }
            (Method::Marginal, _, _) => {
                let h = post.gain();
                let h_ezz = h * &stats.ezz;
                let mut s = post.cov() + &h_ezz * h.transpose();
                symmetrize(&mut s);
                (s, trace_of_product(u, &h_ezz))
            }
        };
        let f1 = trace_of_product(problem.gram(), &second_moment) - 2.0 * cross + stats.ezz.trace();
        Ok(Self {
            // Rounding can push an exact zero slightly negative.
            f1_hat: f1.max(0.0),
            second_moment,
        })
    }
}

/// One E-step: a chain at `eta`, warm-started from `init`.
#[allow(clippy::too_many_arguments)]
pub fn e_step<R: Rng + ?Sized>(
    problem: &QuantizedProblem,
    eta: &Hyperparameters,
    method: Method,
    cfg: &GibbsConfig,
    init: Option<&ChainState>,
    rng: &mut R,
    observer: &mut dyn ChainObserver,
) -> Result<(EStepStats, ChainStats)> {
    let post = PosteriorGaussian::for_problem(problem, eta)?;
    let chain = run_chain(method, problem, &post, cfg, init, rng, observer)?;
    Ok((EStepStats::from_chain(&chain, problem, &post)?, chain))
}

/// `f̂₂(β) = tr(K_β⁻¹ S)`.
pub fn f2_hat(s: &DMatrix<f64>, beta: f64) -> Result<f64> {
    KernelFactor::new(beta, s.nrows())?.trace_inv_times(s)
}

/// `h(β) = m ln f̂₂(β) + ln det K_β`; `−∞` when `f̂₂(β) = 0`.
pub fn h_beta(s: &DMatrix<f64>, beta: f64) -> Result<f64> {
    let kernel = KernelFactor::new(beta, s.nrows())?;
    let f2 = kernel.trace_inv_times(s)?;
    Ok(s.nrows() as f64 * f2.max(0.0).ln() + kernel.logdet())
}

/// `−2Q(η)` up to a constant:
/// `f̂₁/σ² + f̂₂(β)/λ + N ln σ² + m ln λ + ln det K_β`.
pub fn neg2_q(stats: &EStepStats, n: usize, eta: &Hyperparameters) -> Result<f64> {
    let m = stats.second_moment.nrows();
    let kernel = KernelFactor::new(eta.beta, m)?;
    let f2 = kernel.trace_inv_times(&stats.second_moment)?;
    Ok(stats.f1_hat / eta.sigma2
        + f2 / eta.lambda
        + n as f64 * eta.sigma2.ln()
        + m as f64 * eta.lambda.ln()
        + kernel.logdet())
}

/// Minimizes `h(β)` over `bounds`: an evenly spaced scan of `grid` points,
/// then golden-section search on the bracket around the best one.
///
/// Points where the kernel cannot be factored are skipped. `incumbent`, if
/// given, is also a candidate, so the result is never worse than it.
pub fn minimize_h_beta(
    s: &DMatrix<f64>,
    bounds: (f64, f64),
    grid: usize,
    incumbent: Option<f64>,
) -> Result<f64> {
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
        return Err(Error::Domain {
            name: "beta_bounds",
            value: lo,
            expected: "0 < lo <= hi < 1",
        });
    }
    if lo == hi {
        return Ok(lo);
    }
    let eval = |beta: f64| match h_beta(s, beta) {
        Ok(h) if !h.is_nan() => Some(h),
        Ok(_) => None,
        Err(e) => {
            log::warn!("skipping beta = {beta}: {e}");
            None
        }
    };

    let points = grid.max(3);
    let step = (hi - lo) / (points - 1) as f64;
    let xs: Vec<f64> = (0..points)
        .map(|k| {
            if k + 1 == points {
                hi
            } else {
                lo + step * k as f64
            }
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, &x) in xs.iter().enumerate() {
        if let Some(h) = eval(x) {
            if best.is_none_or(|(_, hb)| h < hb) {
                best = Some((k, h));
            }
        }
    }
    let Some((k, h_grid)) = best else {
        return Err(Error::InfeasibleGrid);
    };
    let mut winner = (xs[k], h_grid);
    if h_grid == f64::NEG_INFINITY {
        // All-zero S: h is −∞ everywhere and carries no information.
        return Ok(incumbent
            .filter(|b| (lo..=hi).contains(b))
            .unwrap_or(0.5 * (lo + hi)));
    }

    let a = xs[k.saturating_sub(1)];
    let b = xs[(k + 1).min(points - 1)];
    let (x, h) = golden_section(a, b, 1e-10, &mut |x| eval(x).unwrap_or(f64::INFINITY));
    if h < winner.1 {
        winner = (x, h);
    }
    if let Some(beta) = incumbent.filter(|b| (lo..=hi).contains(b)) {
        if let Some(h) = eval(beta) {
            if h < winner.1 {
                winner = (beta, h);
            }
        }
    }
    Ok(winner.0)
}

/// Golden-section minimization on `[a, b]`; returns the best point seen.
pub(crate) fn golden_section(
    mut a: f64,
    mut b: f64,
    tol: f64,
    f: &mut dyn FnMut(f64) -> f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol * (1.0 + c.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// M-step: `β` minimizing `h`, then `λ = f̂₂(β)/m` and `σ² = f̂₁/N`, both
/// floored at [`VARIANCE_FLOOR`].
pub fn m_step(
    stats: &EStepStats,
    n: usize,
    cfg: &EmConfig,
    incumbent: Option<&Hyperparameters>,
) -> Result<Hyperparameters> {
    let m = stats.second_moment.nrows();
    let beta = minimize_h_beta(
        &stats.second_moment,
        cfg.beta_bounds,
        cfg.beta_grid,
        incumbent.map(|e| e.beta),
    )?;
    let f2 = f2_hat(&stats.second_moment, beta)?;
    let lambda = (f2 / m as f64).max(VARIANCE_FLOOR);
    let sigma2 = (stats.f1_hat / n as f64).max(VARIANCE_FLOOR);
    Hyperparameters::new(lambda, beta, sigma2)
}

/// One EM iteration as recorded in the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EmRecord {
    pub iteration: usize,
    /// `η⁽ⁿ⁾`, the value the E-step ran at.
    pub eta: Hyperparameters,
    /// `η⁽ⁿ⁺¹⁾`.
    pub eta_next: Hyperparameters,
    pub f1_hat: f64,
    /// `f̂₂(β⁽ⁿ⁺¹⁾)`.
    pub f2_hat: f64,
    /// `h(β⁽ⁿ⁺¹⁾)`.
    pub h_beta: f64,
    /// `−2Q(η⁽ⁿ⁾, η⁽ⁿ⁾)`.
    pub neg2q_before: f64,
    /// `−2Q(η⁽ⁿ⁺¹⁾, η⁽ⁿ⁾)`.
    pub neg2q_after: f64,
    pub relative_change: f64,
}

pub type EmTrace = Vec<EmRecord>;

/// Result of [`em_identify`].
#[derive(Debug, Clone)]
pub struct EmOutcome {
    /// `E[g | y; η̂]` from the final chain.
    pub g_hat: ImpulseResponse,
    pub eta_hat: Hyperparameters,
    pub trace: EmTrace,
    pub converged: bool,
    pub iterations: usize,
}

/// Starting point for EM: the standard kernel fit on the levels taken as
/// numbers, or `(1, 0.8, var(y)/10)` if that fails.
pub fn initial_hyperparameters(problem: &QuantizedProblem, bounds: (f64, f64)) -> Hyperparameters {
    match kb_standard(problem.regressors(), problem.y(), bounds) {
        Ok(r) => {
            if let Some(eta) = r.eta_hat {
                return eta;
            }
        }
        Err(e) => log::warn!("standard kernel fit failed, using the fallback start: {e}"),
    }
    let var = population_variance(problem.y().as_slice());
    let beta = 0.8f64.clamp(bounds.0, bounds.1);
    Hyperparameters::new(1.0, beta, (var / 10.0).max(VARIANCE_FLOOR)).unwrap_or(Hyperparameters {
        lambda: 1.0,
        beta,
        sigma2: 1.0,
    })
}

/// Identifies `m` taps of the impulse response from `dataset`.
pub fn em_identify<R: Rng + ?Sized>(
    dataset: &Dataset,
    m: usize,
    method: Method,
    cfg: &EmConfig,
    rng: &mut R,
) -> Result<EmOutcome> {
    cfg.validate()?;
    let problem = QuantizedProblem::from_dataset(dataset, m)?;
    let eta0 = initial_hyperparameters(&problem, cfg.beta_bounds);
    em_identify_with(&problem, eta0, method, cfg, rng, &mut NoTrace)
}

/// EM from a given start. `final_observer` sees the retained sweeps of the
/// final chain.
pub fn em_identify_with<R: Rng + ?Sized>(
    problem: &QuantizedProblem,
    eta0: Hyperparameters,
    method: Method,
    cfg: &EmConfig,
    rng: &mut R,
    final_observer: &mut dyn ChainObserver,
) -> Result<EmOutcome> {
    cfg.validate()?;
    let n = problem.n();
    let mut eta = eta0;
    let mut state: Option<ChainState> = None;
    let mut trace = EmTrace::new();
    let mut converged = false;

    for iteration in 0..cfg.max_iters {
        let (stats, chain) = e_step(
            problem,
            &eta,
            method,
            &cfg.gibbs_em,
            state.as_ref(),
            rng,
            &mut NoTrace,
        )?;
        state = Some(chain.last);
        let next = m_step(&stats, n, cfg, Some(&eta))?;

        let before = neg2_q(&stats, n, &eta)?;
        let after = neg2_q(&stats, n, &next)?;
        if after > before + MSTEP_SLACK * before.abs().max(1.0) {
            return Err(Error::MStepNotOptimal { before, after });
        }
        let change = next.relative_change_from(&eta);
        trace.push(EmRecord {
            iteration,
            eta,
            eta_next: next,
            f1_hat: stats.f1_hat,
            f2_hat: f2_hat(&stats.second_moment, next.beta)?,
            h_beta: h_beta(&stats.second_moment, next.beta)?,
            neg2q_before: before,
            neg2q_after: after,
            relative_change: change,
        });
        log::debug!("EM iteration {iteration}: {next}, change {change:.3e}");
        eta = next;
        if change <= cfg.rel_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!(
            "EM stopped at {} iterations without converging",
            cfg.max_iters
        );
    }

    let post = PosteriorGaussian::for_problem(problem, &eta)?;
    let chain = run_chain(
        method,
        problem,
        &post,
        &cfg.gibbs_final,
        state.as_ref(),
        rng,
        final_observer,
    )?;
    let g_hat: DVector<f64> = crate::sampler::expected_g(&chain, &post)?;
    Ok(EmOutcome {
        g_hat: ImpulseResponse::new(g_hat),
        eta_hat: eta,
        iterations: trace.len(),
        trace,
        converged,
    })
}
