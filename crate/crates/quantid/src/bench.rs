//! Monte Carlo harness.
//!
//! Run `r` draws its data from ChaCha8 stream `16 r` of `master_seed`, and
//! estimator `k` from stream `16 r + k.stream_offset()`. Runs execute in
//! parallel and results are collected in run order, so the report only
//! depends on the configuration.

use nalgebra::DVector;
use quantid_core::baselines::{kb_standard, map_gs, ml_gs, EstimatorResult};
use quantid_core::inference::{em_identify_with, initial_hyperparameters, EmConfig, EmTrace};
use quantid_core::metrics::{fit_score, FiveNumberSummary};
use quantid_core::sampler::{ChainObserver, NoTrace, QuantizedProblem};
use quantid_core::signal::{
    calibrate_noise, impulse_response, quantize, sample_random_system, simulate, white_noise_input,
    RandomSystemParams,
};
use quantid_core::{Dataset, Hyperparameters, Quantizer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EstimatorKind, ExperimentConfig, QuantizerSpec};

/// Streams reserved per run.
pub const STREAMS_PER_RUN: u64 = 16;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("run {run}: no acceptable system after {attempts} draws")]
    DiscardLimit { run: usize, attempts: usize },
    #[error("run {run}: {source}")]
    Data {
        run: usize,
        source: quantid_core::Error,
    },
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates the dataset of run slot `run`, redrawing systems that trip the
/// discard rule. Returns the dataset and the number of discarded draws.
pub fn generate_dataset(
    cfg: &ExperimentConfig,
    run: usize,
) -> Result<(Dataset, usize), BenchError> {
    let stream = run as u64 * STREAMS_PER_RUN;
    let mut rng = stream_rng(cfg.master_seed, stream);
    let params = RandomSystemParams::default();
    let data_err = |source| BenchError::Data { run, source };
    let mut discards = 0;
    loop {
        let sys = sample_random_system(&mut rng, &params, cfg.m);
        let g = impulse_response(&sys, cfg.m).map_err(data_err)?;
        let u = white_noise_input(cfg.n, &mut rng);
        let sigma2 = calibrate_noise(&g, &u, cfg.snr).map_err(data_err)?;
        if cfg.sigma2_discard.is_some_and(|t| sigma2 > t) {
            discards += 1;
            log::debug!("run {run}: discarding system with sigma2 = {sigma2}");
            if discards > cfg.max_redraws {
                return Err(BenchError::DiscardLimit {
                    run,
                    attempts: discards,
                });
            }
            continue;
        }
        let z = simulate(&g, &u, sigma2, &mut rng);
        let quantizer = match cfg.quantizer {
            QuantizerSpec::Binary { threshold } => Quantizer::binary(threshold),
            QuantizerSpec::Ceil => Quantizer::ceil_covering(z.as_slice()).map_err(data_err)?,
        };
        let y = quantize(&quantizer, &z);
        let dataset = Dataset {
            u,
            y: y.as_slice().to_vec(),
            z_latent: Some(z.as_slice().to_vec()),
            sigma2_true: sigma2,
            quantizer,
            g_true: Some(g),
            seed: cfg.master_seed,
            stream,
        };
        return Ok((dataset, discards));
    }
}

/// `kb_standard` on the latent outputs.
pub fn kb_oracle(
    problem: &QuantizedProblem,
    dataset: &Dataset,
    em: &EmConfig,
) -> Result<EstimatorResult, String> {
    let z = dataset
        .z_latent
        .as_ref()
        .ok_or("KB-Or needs the latent outputs, which this dataset does not carry")?;
    kb_standard(
        problem.regressors(),
        &DVector::from_column_slice(z),
        em.beta_bounds,
    )
    .map_err(|e| e.to_string())
}

/// Everything one estimator call produced.
#[derive(Debug, Clone)]
pub struct EstimatorRun {
    pub result: EstimatorResult,
    /// Filled for the EM estimators.
    pub trace: Option<EmTrace>,
}

/// Runs `kind` on one dataset.
///
/// `oracle_eta` is the KB-Or hyperparameter estimate; MAP-GS requires it.
/// `final_observer` sees the final chain of the EM estimators.
#[allow(clippy::too_many_arguments)]
pub fn run_estimator(
    kind: EstimatorKind,
    dataset: &Dataset,
    problem: &QuantizedProblem,
    cfg: &ExperimentConfig,
    oracle_eta: Option<&Hyperparameters>,
    rng: &mut ChaCha8Rng,
    final_observer: &mut dyn ChainObserver,
) -> Result<EstimatorRun, String> {
    let em = cfg.em.to_em_config();
    let source = cfg.baseline_moments.into();
    let plain = |r: quantid_core::Result<EstimatorResult>| {
        r.map(|result| EstimatorRun {
            result,
            trace: None,
        })
        .map_err(|e| e.to_string())
    };
    match kind {
        EstimatorKind::KbGsJoint | EstimatorKind::KbGsMarginal => {
            let method = kind.gibbs_method().expect("EM estimator");
            let eta0 = initial_hyperparameters(problem, em.beta_bounds);
            let out = em_identify_with(problem, eta0, method, &em, rng, final_observer)
                .map_err(|e| e.to_string())?;
            Ok(EstimatorRun {
                result: EstimatorResult {
                    g_hat: out.g_hat,
                    eta_hat: Some(out.eta_hat),
                    iterations: out.iterations,
                    converged: out.converged,
                },
                trace: Some(out.trace),
            })
        }
        EstimatorKind::KbStandard => plain(kb_standard(
            problem.regressors(),
            problem.y(),
            em.beta_bounds,
        )),
        EstimatorKind::KbOracle => kb_oracle(problem, dataset, &em).map(|result| EstimatorRun {
            result,
            trace: None,
        }),
        EstimatorKind::MlGs => plain(ml_gs(problem, &em, source, rng)),
        EstimatorKind::MapGs => {
            let eta = oracle_eta.ok_or("MAP-GS needs the KB-Or hyperparameters")?;
            plain(map_gs(problem, eta, &em, source, rng))
        }
    }
}

/// One CSV row: one estimator on one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub run_index: usize,
    pub estimator: String,
    /// Empty when the estimator failed.
    pub fit: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub sigma2_true: f64,
    /// Systems redrawn before this run's data was accepted.
    pub discards: usize,
}

/// Per-run, per-estimator FIT values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitReport {
    pub rows: Vec<FitRow>,
    /// Error messages of failed estimator calls, `(run, estimator, message)`.
    /// Not part of the CSV.
    pub failures: Vec<(usize, String, String)>,
    /// EM traces by `(run, estimator)`, only when requested.
    pub traces: Vec<(usize, EstimatorKind, EmTrace)>,
}

impl FitReport {
    /// Estimator names in order of first appearance.
    pub fn estimators(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.estimator) {
                names.push(r.estimator.clone());
            }
        }
        names
    }

    pub fn fits(&self, estimator: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.estimator == estimator)
            .filter_map(|r| r.fit)
            .collect()
    }

    /// Five-number summary of the successful FITs of each estimator.
    pub fn summaries(&self) -> Vec<(String, Option<FiveNumberSummary>)> {
        self.estimators()
            .into_iter()
            .map(|e| {
                let s = FiveNumberSummary::from_values(&self.fits(&e));
                (e, s)
            })
            .collect()
    }

    pub fn median(&self, estimator: &str) -> Option<f64> {
        FiveNumberSummary::from_values(&self.fits(estimator)).map(|s| s.median)
    }

    /// Total discarded systems, counted once per run.
    pub fn total_discards(&self) -> usize {
        let mut seen = std::collections::BTreeMap::new();
        for r in &self.rows {
            seen.insert(r.run_index, r.discards);
        }
        seen.values().sum()
    }

    pub fn n_runs(&self) -> usize {
        let mut runs: Vec<usize> = self.rows.iter().map(|r| r.run_index).collect();
        runs.sort_unstable();
        runs.dedup();
        runs.len()
    }
}

struct RunResult {
    rows: Vec<FitRow>,
    failures: Vec<(usize, String, String)>,
    traces: Vec<(usize, EstimatorKind, EmTrace)>,
}

fn run_one(cfg: &ExperimentConfig, run: usize, keep_traces: bool) -> Result<RunResult, BenchError> {
    let (dataset, discards) = generate_dataset(cfg, run)?;
    let problem = QuantizedProblem::from_dataset(&dataset, cfg.m)
        .map_err(|source| BenchError::Data { run, source })?;
    let g_true = dataset.g_true.as_ref().expect("generated data carries g");
    let em = cfg.em.to_em_config();

    // MAP-GS plugs in the oracle hyperparameters; compute them once.
    let oracle = if cfg.estimators.contains(&EstimatorKind::MapGs) {
        Some(kb_oracle(&problem, &dataset, &em))
    } else {
        None
    };
    let oracle_eta = oracle
        .as_ref()
        .and_then(|r| r.as_ref().ok())
        .and_then(|r| r.eta_hat);

    let outcomes: Vec<(EstimatorKind, Result<EstimatorRun, String>)> = cfg
        .estimators
        .par_iter()
        .map(|&kind| {
            let mut rng = stream_rng(cfg.master_seed, dataset.stream + kind.stream_offset());
            let out = match (&oracle, kind) {
                (Some(r), EstimatorKind::KbOracle) => r.clone().map(|result| EstimatorRun {
                    result,
                    trace: None,
                }),
                _ => run_estimator(
                    kind,
                    &dataset,
                    &problem,
                    cfg,
                    oracle_eta.as_ref(),
                    &mut rng,
                    &mut NoTrace,
                ),
            };
            (kind, out)
        })
        .collect();

    let mut res = RunResult {
        rows: Vec::new(),
        failures: Vec::new(),
        traces: Vec::new(),
    };
    for (kind, out) in outcomes {
        let scored = out.and_then(|r| {
            let fit = fit_score(g_true, &r.result.g_hat).map_err(|e| e.to_string())?;
            Ok((fit, r))
        });
        let mut row = FitRow {
            run_index: run,
            estimator: kind.name().to_string(),
            fit: None,
            iterations: 0,
            converged: false,
            sigma2_true: dataset.sigma2_true,
            discards,
        };
        match scored {
            Ok((fit, r)) => {
                row.fit = Some(fit);
                row.iterations = r.result.iterations;
                row.converged = r.result.converged;
                if let (true, Some(t)) = (keep_traces, r.trace) {
                    res.traces.push((run, kind, t));
                }
            }
            Err(msg) => {
                log::warn!("run {run}: {kind} failed: {msg}");
                res.failures.push((run, kind.name().to_string(), msg));
            }
        }
        res.rows.push(row);
    }
    log::info!("run {run} done");
    Ok(res)
}

/// Runs every configured run slot and estimator. Fails only when a run's
/// data cannot be generated; estimator failures are recorded in the report.
pub fn run_experiment(cfg: &ExperimentConfig, keep_traces: bool) -> Result<FitReport, BenchError> {
    let runs: Vec<RunResult> = (0..cfg.n_runs)
        .into_par_iter()
        .map(|run| run_one(cfg, run, keep_traces))
        .collect::<Result<_, _>>()?;
    let mut report = FitReport::default();
    for r in runs {
        report.rows.extend(r.rows);
        report.failures.extend(r.failures);
        report.traces.extend(r.traces);
    }
    Ok(report)
}
