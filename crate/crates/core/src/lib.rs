//! Impulse-response identification of linear time-invariant systems from
//! quantized output measurements.
//!
//! The impulse response gets a zero-mean Gaussian prior with a first-order
//! stable spline (TC) covariance. Posterior moments given the quantized
//! outputs come from one of two Gibbs samplers; kernel hyperparameters and
//! the noise variance are fitted by Monte Carlo EM on the marginal
//! likelihood, and the final estimate is the posterior mean.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! the parallel benchmark harness live in the `quantid` crate.

#![no_std]
// `!(x > 0.0)` is how NaN gets rejected along with the rest.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
extern crate std;

extern crate alloc;

pub mod baselines;
mod error;
pub mod inference;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod sampler;
pub mod signal;
pub mod special;

pub use error::{Error, Result};
pub use kernel::Hyperparameters;
pub use sampler::Method;
pub use signal::{Dataset, ImpulseResponse, Quantizer};
