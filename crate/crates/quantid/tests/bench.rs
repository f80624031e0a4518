use quantid::bench::{generate_dataset, run_estimator, stream_rng, BenchError};
use quantid::config::{EstimatorKind, ExperimentConfig, QuantizerSpec};
use quantid::run_experiment;
use quantid_core::metrics::quantile_type7;
use quantid_core::sampler::{NoTrace, QuantizedProblem};
use quantid_core::signal::{calibrate_noise, quantize};

fn small(quantizer: QuantizerSpec) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::binary_desk();
    cfg.quantizer = quantizer;
    cfg.n_runs = 3;
    cfg.n = 80;
    cfg.m = 8;
    cfg.em.max_iters = 8;
    cfg.em.em_samples = 30;
    cfg.em.final_samples = 60;
    cfg
}

#[test]
fn generated_data_is_consistent_and_reproducible() {
    for spec in [
        QuantizerSpec::Binary { threshold: 1.0 },
        QuantizerSpec::Ceil,
    ] {
        let cfg = small(spec);
        let (d, _) = generate_dataset(&cfg, 2).unwrap();
        assert_eq!(d.n(), cfg.n);
        assert_eq!(d.stream, 32);
        d.validate().unwrap();
        let g = d.g_true.as_ref().unwrap();
        assert_eq!(g.len(), cfg.m);
        let sigma2 = calibrate_noise(g, &d.u, cfg.snr).unwrap();
        assert_eq!(sigma2, d.sigma2_true);
        let z = nalgebra::DVector::from_vec(d.z_latent.clone().unwrap());
        assert_eq!(quantize(&d.quantizer, &z).as_slice(), &d.y[..]);
        if spec == QuantizerSpec::Ceil {
            // No latent value falls in an unbounded end interval.
            for &y in &d.y {
                let iv = d.quantizer.interval_of(y).unwrap();
                assert!(iv.lower.is_finite() && iv.upper.is_finite());
            }
        }
        assert_eq!(generate_dataset(&cfg, 2).unwrap().0, d);
        assert_ne!(generate_dataset(&cfg, 1).unwrap().0.u, d.u);
    }
}

#[test]
fn discard_rule_redraws_and_caps() {
    let mut cfg = small(QuantizerSpec::Binary { threshold: 1.0 });
    // Gains of 2 to 4 at snr 10 give σ² of roughly 0.4 to 1.6.
    cfg.sigma2_discard = Some(0.8);
    let mut total = 0;
    for run in 0..10 {
        let (d, discards) = generate_dataset(&cfg, run).unwrap();
        assert!(d.sigma2_true <= 0.8);
        total += discards;
    }
    assert!(total > 0, "threshold never triggered");

    cfg.sigma2_discard = Some(1e-9);
    cfg.max_redraws = 5;
    match generate_dataset(&cfg, 0) {
        Err(BenchError::DiscardLimit {
            run: 0,
            attempts: 6,
        }) => {}
        other => panic!("{other:?}"),
    }
    assert!(run_experiment(&cfg, false).is_err());
}

#[test]
fn experiment_is_deterministic_and_complete() {
    let mut cfg = small(QuantizerSpec::Binary { threshold: 1.0 });
    cfg.sigma2_discard = Some(1.0);
    let a = run_experiment(&cfg, true).unwrap();
    let b = run_experiment(&cfg, true).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), cfg.n_runs * cfg.estimators.len());
    assert_eq!(a.n_runs(), cfg.n_runs);
    for (r, chunk) in a.rows.chunks(cfg.estimators.len()).enumerate() {
        let names: Vec<_> = chunk.iter().map(|row| row.estimator.as_str()).collect();
        let want: Vec<_> = cfg.estimators.iter().map(|k| k.name()).collect();
        assert_eq!(names, want);
        assert!(chunk.iter().all(|row| row.run_index == r));
        let (d, discards) = generate_dataset(&cfg, r).unwrap();
        assert!(chunk
            .iter()
            .all(|row| row.sigma2_true == d.sigma2_true && row.discards == discards));
    }
    // Two EM estimators per run keep their traces.
    assert_eq!(a.traces.len(), 2 * cfg.n_runs);

    // Summary quartiles against a sort of the same values.
    for (name, s) in a.summaries() {
        let mut v = a.fits(&name);
        v.sort_by(f64::total_cmp);
        let s = s.unwrap();
        assert_eq!(s.median, quantile_type7(&v, 0.5));
        assert_eq!((s.min, s.max), (v[0], v[v.len() - 1]));
    }

    let mut other = cfg.clone();
    other.master_seed += 1;
    assert_ne!(run_experiment(&other, false).unwrap().rows, a.rows);
}

#[test]
fn estimator_streams_do_not_depend_on_the_estimator_list() {
    let cfg = small(QuantizerSpec::Binary { threshold: 1.0 });
    let full = run_experiment(&cfg, false).unwrap();
    let mut only = cfg.clone();
    only.estimators = vec![EstimatorKind::MlGs, EstimatorKind::KbGsMarginal];
    let part = run_experiment(&only, false).unwrap();
    for row in &part.rows {
        let same = full
            .rows
            .iter()
            .find(|r| r.run_index == row.run_index && r.estimator == row.estimator)
            .unwrap();
        assert_eq!(same, row);
    }
}

#[test]
fn estimator_failure_is_isolated() {
    let cfg = small(QuantizerSpec::Binary { threshold: 1.0 });
    let (mut d, _) = generate_dataset(&cfg, 0).unwrap();
    d.z_latent = None;
    let before = d.clone();
    let problem = QuantizedProblem::from_dataset(&d, cfg.m).unwrap();
    let mut results = Vec::new();
    for kind in EstimatorKind::ALL {
        let mut rng = stream_rng(cfg.master_seed, kind.stream_offset());
        results.push((
            kind,
            run_estimator(kind, &d, &problem, &cfg, None, &mut rng, &mut NoTrace),
        ));
    }
    assert_eq!(d, before);
    for (kind, r) in results {
        match kind {
            EstimatorKind::KbOracle | EstimatorKind::MapGs => assert!(r.is_err(), "{kind}"),
            _ => assert!(
                r.unwrap().result.g_hat.iter().all(|v| v.is_finite()),
                "{kind}"
            ),
        }
    }
}
