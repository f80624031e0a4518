use core::fmt;

use crate::kernel::Hyperparameters;

/// Errors raised by the identification pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("kernel matrix is not numerically positive definite (beta = {beta}, m = {m})")]
    KernelFactorization { beta: f64, m: usize },

    #[error("posterior factorization failed at {eta}")]
    PosteriorFactorization { eta: Hyperparameters },

    #[error("matrix `{0}` is not numerically positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{0} is not an output level of the quantizer")]
    UnknownLevel(f64),

    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(&'static str),

    #[error("invalid truncation interval ({lower}, {upper})")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("sample {value} for index {index} left its quantization interval")]
    ConstraintViolation { index: usize, value: f64 },

    #[error("input signal is identically zero")]
    ZeroInput,

    #[error("noiseless output has zero variance")]
    DegenerateOutput,

    #[error("reference impulse response has zero norm")]
    ZeroNorm,

    #[error("unstable system: pole magnitude {0} is not below 1")]
    Unstable(f64),

    #[error("no feasible point on the hyperparameter grid")]
    InfeasibleGrid,

    #[error("M-step increased -2Q from {before} to {after}")]
    MStepNotOptimal { before: f64, after: f64 },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

impl fmt::Display for Hyperparameters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lambda = {}, beta = {}, sigma2 = {}",
            self.lambda, self.beta, self.sigma2
        )
    }
}
