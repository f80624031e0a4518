//! The two Gibbs chains.
//!
//! * Joint: alternate `z_i | g, y_i` (independent scalar truncated normals)
//!   for `i = 1..N` and `g | z ~ N(H z, P_g)`.
//! * Marginal: sweep `z_i | z_{−i}, y_i` under the marginal
//!   `z ~ N(0, Σ_z)`, `Σ_z = λ U K Uᵀ + σ² I`, reading each conditional off
//!   one precomputed `Σ_z⁻¹`. `g` is never sampled; its moments follow from
//!   those of `z` through `H` and `P_g`.
//!
//! Both discard `burn_in` sweeps and average exactly `n_samples` retained
//! sweeps.

use nalgebra::{DMatrix, DVector};
// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use super::posterior::{PosteriorGaussian, QuantizedProblem};
use super::truncnorm::TruncatedNormalSpec;
use crate::error::{Error, Result};
use crate::kernel::{Hyperparameters, KernelFactor};
use crate::linalg;
use crate::signal::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Sample `(g, z)` jointly.
    Joint,
    /// Sample `z` from its marginal posterior only.
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    /// Retained sweeps `M`.
    pub n_samples: usize,
    /// Discarded sweeps `M₀`.
    pub burn_in: usize,
}

impl GibbsConfig {
    /// Per-iteration chain inside EM.
    pub const EM: Self = Self {
        n_samples: 100,
        burn_in: 100,
    };
    /// Chain for the final impulse-response estimate.
    pub const FINAL: Self = Self {
        n_samples: 500,
        burn_in: 100,
    };
}

/// Last state of a chain, used to warm-start the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub z: DVector<f64>,
    pub g: Option<DVector<f64>>,
}

/// Monte Carlo averages over the retained sweeps.
#[derive(Debug, Clone)]
pub struct ChainStats {
    pub method: Method,
    /// `E[z | y]`.
    pub ez: DVector<f64>,
    /// `E[z zᵀ | y]`.
    pub ezz: DMatrix<f64>,
    /// `E[g | y]`, joint chain only.
    pub eg: Option<DVector<f64>>,
    /// `E[g gᵀ | y]`, joint chain only.
    pub egg: Option<DMatrix<f64>>,
    /// `E[g zᵀ | y]`, joint chain only.
    pub egz: Option<DMatrix<f64>>,
    pub n_effective: usize,
    pub last: ChainState,
}

/// Receives every retained sweep.
pub trait ChainObserver {
    fn retained(&mut self, sweep: usize, z: &DVector<f64>, g: Option<&DVector<f64>>);
}

/// Observer that ignores everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoTrace;

impl ChainObserver for NoTrace {
    fn retained(&mut self, _: usize, _: &DVector<f64>, _: Option<&DVector<f64>>) {}
}

impl<F> ChainObserver for F
where
    F: FnMut(usize, &DVector<f64>, Option<&DVector<f64>>),
{
    fn retained(&mut self, sweep: usize, z: &DVector<f64>, g: Option<&DVector<f64>>) {
        self(sweep, z, g)
    }
}

/// `z_t | g, y_t ~ N(φ_tᵀ g, σ²)` truncated to the interval of `y_t`.
pub fn conditional_z_given_g(
    g: &DVector<f64>,
    phi_t: &[f64],
    interval: &Interval,
    sigma2: f64,
) -> Result<TruncatedNormalSpec> {
    if phi_t.len() != g.len() {
        return Err(Error::DimensionMismatch {
            context: "regressor row",
            expected: g.len(),
            found: phi_t.len(),
        });
    }
    let mu = phi_t.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
    TruncatedNormalSpec::on_interval(mu, sigma2, interval)
}

/// `Σ_z = λ U K_β Uᵀ + σ² I`.
pub fn marginal_covariance(u: &DMatrix<f64>, eta: &Hyperparameters) -> Result<DMatrix<f64>> {
    let l = KernelFactor::new(eta.beta, u.ncols())?.lower();
    let ul = u * l;
    let mut sigma = (&ul * ul.transpose()) * eta.lambda;
    linalg::symmetrize(&mut sigma);
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += eta.sigma2;
    }
    Ok(sigma)
}

/// Full conditionals of a zero-mean Gaussian read off its precision matrix:
/// with `s_i = (Σ⁻¹)_{ii}` and `s_{ji}` the rest of column `i`,
/// `z_i | z_{−i} ~ N(−s_{ji}ᵀ z_{−i} / s_i, 1 / s_i)`.
#[derive(Debug, Clone)]
pub struct MarginalConditionals {
    precision: DMatrix<f64>,
}

impl MarginalConditionals {
    /// Factors and inverts `Σ` once.
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let chol =
            linalg::cholesky_with_jitter(sigma).ok_or(Error::NotPositiveDefinite("Sigma_z"))?;
        let mut precision = chol.inverse();
        linalg::symmetrize(&mut precision);
        Ok(Self { precision })
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }

    /// `(mean, variance)` of `z_i` given the other entries of `z`.
    pub fn conditional(&self, i: usize, z: &DVector<f64>) -> (f64, f64) {
        let col = self.precision.column(i);
        let s_ii = col[i];
        let cross = col.dot(z) - s_ii * z[i];
        (-cross / s_ii, 1.0 / s_ii)
    }
}

struct Accumulator {
    count: usize,
    z: DVector<f64>,
    zz: DMatrix<f64>,
    joint: Option<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)>,
}

impl Accumulator {
    fn new(n: usize, m: Option<usize>) -> Self {
        Self {
            count: 0,
            z: DVector::zeros(n),
            zz: DMatrix::zeros(n, n),
            joint: m.map(|m| {
                (
                    DVector::zeros(m),
                    DMatrix::zeros(m, m),
                    DMatrix::zeros(m, n),
                )
            }),
        }
    }

    fn push(&mut self, z: &DVector<f64>, g: Option<&DVector<f64>>) {
        self.count += 1;
        self.z += z;
        self.zz.ger(1.0, z, z, 1.0);
        if let (Some((sg, sgg, sgz)), Some(g)) = (self.joint.as_mut(), g) {
            *sg += g;
            sgg.ger(1.0, g, g, 1.0);
            sgz.ger(1.0, g, z, 1.0);
        }
    }

    fn finish(self, method: Method, last: ChainState) -> ChainStats {
        let k = 1.0 / self.count.max(1) as f64;
        let (eg, egg, egz) = match self.joint {
            Some((g, gg, gz)) => (Some(g * k), Some(gg * k), Some(gz * k)),
            None => (None, None, None),
        };
        ChainStats {
            method,
            ez: self.z * k,
            ezz: self.zz * k,
            eg,
            egg,
            egz,
            n_effective: self.count,
            last,
        }
    }
}

fn draw_constrained<R: Rng + ?Sized>(
    index: usize,
    mu: f64,
    var: f64,
    interval: &Interval,
    rng: &mut R,
) -> Result<f64> {
    let value = TruncatedNormalSpec::on_interval(mu, var, interval)?.sample(rng);
    if interval.contains(value) {
        Ok(value)
    } else {
        Err(Error::ConstraintViolation { index, value })
    }
}

/// Joint `(g, z)` chain.
///
/// Starts from `init.g` when given, otherwise from the regularized fit
/// `H y` that treats the observed levels as numbers.
pub fn gibbs_joint<R: Rng + ?Sized>(
    problem: &QuantizedProblem,
    post: &PosteriorGaussian,
    cfg: &GibbsConfig,
    init: Option<&ChainState>,
    rng: &mut R,
    observer: &mut dyn ChainObserver,
) -> Result<ChainStats> {
    let (n, m) = (problem.n(), problem.m());
    check_dims(post, n, m)?;
    let u = problem.regressors();
    let sigma2 = post.eta().sigma2;
    let mut g = match init.and_then(|s| s.g.as_ref()) {
        Some(g) if g.len() == m => g.clone(),
        _ => post.mean(problem.y()),
    };
    let mut z = DVector::zeros(n);
    let mut mu = DVector::zeros(n);
    let mut acc = Accumulator::new(n, Some(m));
    for sweep in 0..cfg.burn_in + cfg.n_samples {
        u.mul_to(&g, &mut mu);
        for (i, iv) in problem.intervals().iter().enumerate() {
            z[i] = draw_constrained(i, mu[i], sigma2, iv, rng)?;
        }
        g = post.sample(&z, rng);
        if sweep >= cfg.burn_in {
            acc.push(&z, Some(&g));
            observer.retained(sweep - cfg.burn_in, &z, Some(&g));
        }
    }
    Ok(acc.finish(Method::Joint, ChainState { z, g: Some(g) }))
}

/// Marginal `z` chain.
///
/// Starts from `init.z` when given. Otherwise each `z_i` starts at the
/// midpoint of its interval, with an unbounded end replaced by
/// `±3 √(Σ_z)_{ii}`; when that leaves nothing of the interval, the start is
/// half a standard deviation inside the finite end.
pub fn gibbs_marginal<R: Rng + ?Sized>(
    problem: &QuantizedProblem,
    post: &PosteriorGaussian,
    cfg: &GibbsConfig,
    init: Option<&ChainState>,
    rng: &mut R,
    observer: &mut dyn ChainObserver,
) -> Result<ChainStats> {
    let (n, m) = (problem.n(), problem.m());
    check_dims(post, n, m)?;
    let sigma = marginal_covariance(problem.regressors(), post.eta())?;
    let prior_sd = sigma.diagonal().map(|v| v.sqrt());
    let conditionals = MarginalConditionals::new(sigma)?;
    let mut z = match init {
        Some(s) if s.z.len() == n && problem.check_constraints(&s.z).is_ok() => s.z.clone(),
        _ => DVector::from_iterator(
            n,
            problem
                .intervals()
                .iter()
                .zip(prior_sd.iter())
                .map(|(iv, &sd)| starting_point(iv, sd)),
        ),
    };
    let mut acc = Accumulator::new(n, None);
    for sweep in 0..cfg.burn_in + cfg.n_samples {
        for (i, iv) in problem.intervals().iter().enumerate() {
            let (mean, var) = conditionals.conditional(i, &z);
            z[i] = draw_constrained(i, mean, var, iv, rng)?;
        }
        if sweep >= cfg.burn_in {
            acc.push(&z, None);
            observer.retained(sweep - cfg.burn_in, &z, None);
        }
    }
    Ok(acc.finish(Method::Marginal, ChainState { z, g: None }))
}

/// Runs whichever chain `method` names.
pub fn run_chain<R: Rng + ?Sized>(
    method: Method,
    problem: &QuantizedProblem,
    post: &PosteriorGaussian,
    cfg: &GibbsConfig,
    init: Option<&ChainState>,
    rng: &mut R,
    observer: &mut dyn ChainObserver,
) -> Result<ChainStats> {
    match method {
        Method::Joint => gibbs_joint(problem, post, cfg, init, rng, observer),
        Method::Marginal => gibbs_marginal(problem, post, cfg, init, rng, observer),
    }
}

fn starting_point(iv: &Interval, sd: f64) -> f64 {
    if iv.is_point() {
        return iv.lower;
    }
    let lo = if iv.lower.is_finite() {
        iv.lower
    } else {
        -3.0 * sd
    };
    let hi = if iv.upper.is_finite() {
        iv.upper
    } else {
        3.0 * sd
    };
    let x = if lo < hi {
        0.5 * (lo + hi)
    } else if iv.lower.is_finite() {
        iv.lower + 0.5 * sd
    } else {
        iv.upper - 0.5 * sd
    };
    if iv.contains(x) {
        x
    } else {
        // Only reachable for bounded intervals narrower than rounding.
        0.5 * (iv.lower + iv.upper)
    }
}

fn check_dims(post: &PosteriorGaussian, n: usize, m: usize) -> Result<()> {
    let h = post.gain();
    if h.nrows() != m || h.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "posterior gain vs problem",
            expected: m * n,
            found: h.nrows() * h.ncols(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Boundary;

    #[test]
    fn starting_points_lie_inside() {
        let lower_open = Interval {
            lower: f64::NEG_INFINITY,
            upper: 1.0,
            boundary: Boundary::LowerClosed,
        };
        let upper_open = Interval {
            lower: 1.0,
            upper: f64::INFINITY,
            boundary: Boundary::LowerClosed,
        };
        for sd in [0.1, 0.3, 1.0, 5.0] {
            assert!(lower_open.contains(starting_point(&lower_open, sd)));
            assert!(upper_open.contains(starting_point(&upper_open, sd)));
        }
        let bounded = Interval {
            lower: 2.0,
            upper: 3.0,
            boundary: Boundary::UpperClosed,
        };
        assert_eq!(starting_point(&bounded, 1.0), 2.5);
    }

    #[test]
    fn partition_matches_two_dimensional_conditioning() {
        // Σ = [[a, c], [c, b]] → z₁ | z₂ ~ N(c/b · z₂, a − c²/b)
        let (a, b, c) = (2.0, 1.5, 0.7);
        let sigma = DMatrix::from_row_slice(2, 2, &[a, c, c, b]);
        let cond = MarginalConditionals::new(sigma).unwrap();
        let z = DVector::from_vec(alloc::vec![0.0, -1.3]);
        let (mean, var) = cond.conditional(0, &z);
        assert!((mean - c / b * -1.3).abs() < 1e-12);
        assert!((var - (a - c * c / b)).abs() < 1e-12);
    }
}
