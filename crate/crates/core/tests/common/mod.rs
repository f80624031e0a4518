#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use quantid_oracle::Dense;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn dense(a: &DMatrix<f64>) -> Dense {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

pub fn from_dense(a: &Dense) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), a[0].len(), |i, j| a[i][j])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub fn vec_max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).abs().max()
}

/// Entry-wise TC kernel straight from the definition, 1-based powers.
pub fn tc_oracle(beta: f64, m: usize) -> Dense {
    (1..=m)
        .map(|i| (1..=m).map(|j| beta.powi(i.max(j) as i32)).collect())
        .collect()
}

/// Regressor built by convolution of unit impulses: column `c` is the
/// input delayed by `c + 1` steps, i.e. the response to `g = e_c`.
pub fn regressor_by_convolution(u: &[f64], m: usize) -> DMatrix<f64> {
    let n = u.len();
    let mut out = DMatrix::zeros(n, m);
    for c in 0..m {
        for t in 1..=n {
            // z_t = Σ_i g_i u_{t−i}; with g = e_{c+1} this is u_{t−c−1}.
            if t > c {
                out[(t - 1, c)] = u[t - c - 1];
            }
        }
    }
    out
}

use quantid_core::signal::{
    impulse_response, quantize, sample_random_system, simulate, white_noise_input, Dataset,
    ImpulseResponse, Quantizer, RandomSystemParams,
};

/// Random test system, white-noise input and quantized output.
pub fn dataset(n: usize, m: usize, quantizer: Quantizer, sigma2: f64, seed: u64) -> Dataset {
    let mut rng = rng(seed);
    let sys = sample_random_system(&mut rng, &RandomSystemParams::default(), m);
    let g = impulse_response(&sys, m).unwrap();
    let u = white_noise_input(n, &mut rng);
    let z = simulate(&g, &u, sigma2, &mut rng);
    dataset_from(g, u, z, quantizer, sigma2, seed)
}

pub fn dataset_from(
    g: ImpulseResponse,
    u: Vec<f64>,
    z: DVector<f64>,
    quantizer: Quantizer,
    sigma2: f64,
    seed: u64,
) -> Dataset {
    let y = quantize(&quantizer, &z);
    Dataset {
        u,
        y: y.as_slice().to_vec(),
        z_latent: Some(z.as_slice().to_vec()),
        sigma2_true: sigma2,
        quantizer,
        g_true: Some(g),
        seed,
        stream: 0,
    }
}
