//! Test-system generation, LTI simulation and output quantization.

mod data;
mod quantizer;
mod system;

pub use data::{
    calibrate_noise, noiseless_output, population_variance, regression_matrix, simulate,
    white_noise_input, Dataset, RegressionMatrix,
};
pub use quantizer::{quantize, Boundary, Interval, Quantizer};
pub use system::{
    impulse_response, sample_random_system, ConjugatePair, ImpulseResponse, LtiSystem,
    RandomSystemParams,
};
