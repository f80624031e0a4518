mod common;

use common::{dataset, dataset_from, rng};
use nalgebra::{DMatrix, DVector};
use quantid_core::baselines::least_squares;
use quantid_core::inference::{
    e_step, em_identify, em_identify_with, h_beta, initial_hyperparameters, m_step,
    minimize_h_beta, EStepStats, EmConfig,
};
use quantid_core::kernel::{build_tc_kernel, Hyperparameters};
use quantid_core::sampler::{GibbsConfig, Method, NoTrace, PosteriorGaussian, QuantizedProblem};
use quantid_core::signal::{noiseless_output, ImpulseResponse, Quantizer};
use quantid_oracle::batch_means_se;

fn identity_problem(n: usize, m: usize, seed: u64) -> QuantizedProblem {
    let ds = dataset(n, m, Quantizer::Identity, 0.3, seed);
    QuantizedProblem::from_dataset(&ds, m).unwrap()
}

#[test]
fn e_step_without_quantization_matches_closed_form() {
    let problem = identity_problem(30, 4, 1);
    let eta = Hyperparameters::new(1.5, 0.7, 0.3).unwrap();
    let post = PosteriorGaussian::for_problem(&problem, &eta).unwrap();
    let u = problem.regressors();
    let mg = post.mean(problem.y());
    let closed_f1 = (problem.y() - u * &mg).norm_squared() + (problem.gram() * post.cov()).trace();
    let closed_s = post.cov() + &mg * mg.transpose();

    let mut r = rng(2);
    let (marg, _) = e_step(
        &problem,
        &eta,
        Method::Marginal,
        &GibbsConfig::EM,
        None,
        &mut r,
        &mut NoTrace,
    )
    .unwrap();
    assert!((marg.f1_hat - closed_f1).abs() < 1e-9 * closed_f1);
    assert!((&marg.second_moment - &closed_s).abs().max() < 1e-9);

    let mut per_draw = Vec::new();
    let mut obs = |_: usize, z: &DVector<f64>, g: Option<&DVector<f64>>| {
        per_draw.push((z - u * g.unwrap()).norm_squared());
    };
    let cfg = GibbsConfig {
        n_samples: 20_000,
        burn_in: 100,
    };
    let (joint, _) = e_step(&problem, &eta, Method::Joint, &cfg, None, &mut r, &mut obs).unwrap();
    let se = batch_means_se(&per_draw, 20);
    assert!(
        (joint.f1_hat - closed_f1).abs() < 3.0 * se,
        "{} vs {closed_f1} (se {se})",
        joint.f1_hat
    );
}

#[test]
fn collapsed_prior_gives_zero_second_moment() {
    let ds = dataset(40, 5, Quantizer::binary(1.0), 0.5, 3);
    let problem = QuantizedProblem::from_dataset(&ds, 5).unwrap();
    let eta = Hyperparameters::new(1e-12, 0.6, 0.5).unwrap();
    let mut r = rng(4);
    let (stats, chain) = e_step(
        &problem,
        &eta,
        Method::Marginal,
        &GibbsConfig::EM,
        None,
        &mut r,
        &mut NoTrace,
    )
    .unwrap();
    assert!(stats.second_moment.abs().max() < 1e-10);
    assert!((stats.f1_hat - chain.ezz.trace()).abs() < 1e-8 * stats.f1_hat);
}

#[test]
fn joint_and_marginal_e_steps_agree() {
    let ds = dataset(10, 3, Quantizer::binary(1.0), 0.4, 5);
    let problem = QuantizedProblem::from_dataset(&ds, 3).unwrap();
    let eta = Hyperparameters::new(2.0, 0.6, 0.4).unwrap();
    let post = PosteriorGaussian::for_problem(&problem, &eta).unwrap();
    let u = problem.regressors().clone();
    let cfg = GibbsConfig {
        n_samples: 30_000,
        burn_in: 500,
    };
    let mut r = rng(6);

    let mut joint_draws = Vec::new();
    let mut obs = |_: usize, z: &DVector<f64>, g: Option<&DVector<f64>>| {
        joint_draws.push((z - &u * g.unwrap()).norm_squared());
    };
    let (joint, _) = e_step(&problem, &eta, Method::Joint, &cfg, None, &mut r, &mut obs).unwrap();

    // Per-draw E[‖z − Ug‖² | z] = ‖(I − UH) z‖² + tr(UᵀU P_g).
    let resid = DMatrix::identity(10, 10) - &u * post.gain();
    let tr = (problem.gram() * post.cov()).trace();
    let mut marg_draws = Vec::new();
    let mut obs = |_: usize, z: &DVector<f64>, _: Option<&DVector<f64>>| {
        marg_draws.push((&resid * z).norm_squared() + tr);
    };
    let (marg, _) = e_step(
        &problem,
        &eta,
        Method::Marginal,
        &cfg,
        None,
        &mut r,
        &mut obs,
    )
    .unwrap();

    let se = batch_means_se(&joint_draws, 20).hypot(batch_means_se(&marg_draws, 20));
    assert!(
        (joint.f1_hat - marg.f1_hat).abs() < 3.0 * se,
        "{} vs {} (se {se})",
        joint.f1_hat,
        marg.f1_hat
    );
    assert!((&joint.second_moment - &marg.second_moment).abs().max() < 0.1);
}

#[test]
fn m_step_beta_is_scale_invariant() {
    let k = build_tc_kernel(0.45, 20).unwrap();
    let cfg = EmConfig::default();
    let betas: Vec<f64> = [0.1, 1.0, 10.0]
        .iter()
        .map(|&c| {
            let stats = EStepStats {
                f1_hat: 3.0,
                second_moment: k.entries() * c,
            };
            m_step(&stats, 100, &cfg, None).unwrap().beta
        })
        .collect();
    // Locating a smooth minimum resolves β only to about √ε.
    assert!(
        (betas[0] - betas[1]).abs() < 1e-7 && (betas[1] - betas[2]).abs() < 1e-7,
        "{betas:?}"
    );
    assert!((betas[1] - 0.45).abs() < 1e-3);
}

#[test]
fn h_minimizer_matches_fine_grid() {
    let m = 30;
    let s = build_tc_kernel(0.6, m).unwrap().entries().clone();
    let bounds = (1e-4, 1.0 - 1e-4);
    let beta = minimize_h_beta(&s, bounds, 200, None).unwrap();
    let h_ret = h_beta(&s, beta).unwrap();

    let mut fine = (f64::INFINITY, 0.0);
    let mut b = bounds.0;
    while b <= bounds.1 {
        let h = h_beta(&s, b).unwrap();
        if h < fine.0 {
            fine = (h, b);
        }
        b += 1e-4;
    }
    assert!((beta - fine.1).abs() < 0.01, "{beta} vs {}", fine.1);

    let step = (bounds.1 - bounds.0) / 199.0;
    for k in 0..200 {
        let x = if k == 199 {
            bounds.1
        } else {
            bounds.0 + step * k as f64
        };
        assert!(h_ret <= h_beta(&s, x).unwrap(), "grid point {x}");
    }
}

#[test]
fn noiseless_identity_data_gives_least_squares() {
    let (n, m) = (50, 5);
    let mut r = rng(7);
    let g = ImpulseResponse::from_slice(&[1.2, -0.6, 0.4, 0.2, -0.1]);
    let u = quantid_core::signal::white_noise_input(n, &mut r);
    let z = noiseless_output(&g, &u);
    let ds = dataset_from(g.clone(), u, z, Quantizer::Identity, 0.0, 7);
    let problem = QuantizedProblem::from_dataset(&ds, m).unwrap();
    let ls = least_squares(problem.regressors(), problem.y()).unwrap();
    for method in [Method::Joint, Method::Marginal] {
        let out = em_identify(&ds, m, method, &EmConfig::default(), &mut r).unwrap();
        let err = (&out.g_hat.0 - &ls).abs().max();
        assert!(err < 1e-2, "{method:?}: {err}");
    }
}

#[test]
fn every_iteration_decreases_neg2q() {
    let ds = dataset(150, 15, Quantizer::binary(1.0), 0.5, 8);
    let problem = QuantizedProblem::from_dataset(&ds, 15).unwrap();
    let cfg = EmConfig {
        max_iters: 15,
        ..EmConfig::default()
    };
    let eta0 = initial_hyperparameters(&problem, cfg.beta_bounds);
    for method in [Method::Joint, Method::Marginal] {
        let out =
            em_identify_with(&problem, eta0, method, &cfg, &mut rng(9), &mut NoTrace).unwrap();
        assert!(!out.trace.is_empty());
        assert_eq!(out.iterations, out.trace.len());
        for rec in &out.trace {
            assert!(rec.neg2q_after <= rec.neg2q_before + 1e-9 * rec.neg2q_before.abs());
            let e = rec.eta_next;
            assert!(e.lambda > 0.0 && e.sigma2 > 0.0);
            assert!(e.beta >= cfg.beta_bounds.0 && e.beta <= cfg.beta_bounds.1);
        }
        assert!(out.g_hat.iter().all(|v| v.is_finite()));
        assert!(out.g_hat.norm() > 0.0);
    }
}

#[test]
fn non_convergence_is_flagged() {
    let ds = dataset(80, 8, Quantizer::binary(1.0), 0.5, 10);
    let cfg = EmConfig {
        max_iters: 1,
        rel_tol: 1e-300,
        ..EmConfig::default()
    };
    let out = em_identify(&ds, 8, Method::Joint, &cfg, &mut rng(11)).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 1);
}
