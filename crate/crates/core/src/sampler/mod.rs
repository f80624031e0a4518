//! Truncated-normal draws, the Gaussian conditional of `g` given `z`, and the
//! two Gibbs chains over the posterior of `(g, z)` given quantized outputs.

mod expectations;
mod gibbs;
mod posterior;
mod truncnorm;

pub use expectations::{
    expected_g, expected_ggt, expected_quadratic, expected_quadratic_joint,
    expected_quadratic_marginal, QuadraticForm,
};
pub use gibbs::{
    conditional_z_given_g, gibbs_joint, gibbs_marginal, marginal_covariance, run_chain,
    ChainObserver, ChainState, ChainStats, GibbsConfig, MarginalConditionals, Method, NoTrace,
};
pub use posterior::{posterior_g_given_z, PosteriorGaussian, QuantizedProblem};
pub use truncnorm::{TruncatedNormalSpec, TAIL_SWITCH};
