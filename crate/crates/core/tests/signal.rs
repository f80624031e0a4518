mod common;

use std::f64::consts::PI;

use common::{regressor_by_convolution, rng};
use nalgebra::DVector;
use proptest::prelude::*;
use quantid_core::signal::{
    calibrate_noise, impulse_response, noiseless_output, quantize, regression_matrix,
    sample_random_system, simulate, white_noise_input, ConjugatePair, ImpulseResponse, LtiSystem,
    Quantizer, RandomSystemParams,
};

#[derive(Clone, Copy, Debug)]
struct C(f64, f64);

impl C {
    fn polar(r: f64, th: f64) -> Self {
        C(r * th.cos(), r * th.sin())
    }
    fn mul(self, o: C) -> C {
        C(self.0 * o.0 - self.1 * o.1, self.0 * o.1 + self.1 * o.0)
    }
    fn add(self, o: C) -> C {
        C(self.0 + o.0, self.1 + o.1)
    }
}

/// Power series of `gain · q⁻¹ Π(1 − z q⁻¹) / Π(1 − p q⁻¹)` over every root
/// and its conjugate, multiplied out in complex arithmetic; 1/(1 − p q⁻¹)
/// is the geometric series `Σ pᵏ q⁻ᵏ`.
fn series_oracle(sys: &LtiSystem, m: usize) -> Vec<f64> {
    let conv = |a: &[C], b: &[C]| -> Vec<C> {
        let mut out = vec![C(0.0, 0.0); m];
        for (i, x) in a.iter().enumerate().take(m) {
            for (j, y) in b.iter().enumerate().take(m - i) {
                out[i + j] = out[i + j].add(x.mul(*y));
            }
        }
        out
    };
    let mut s = vec![C(0.0, 0.0); m];
    s[0] = C(1.0, 0.0);
    for pair in &sys.zeros {
        for sign in [1.0, -1.0] {
            let z = C::polar(pair.magnitude, sign * pair.phase);
            s = conv(&s, &[C(1.0, 0.0), C(-z.0, -z.1)]);
        }
    }
    for pair in &sys.poles {
        for sign in [1.0, -1.0] {
            let p = C::polar(pair.magnitude, sign * pair.phase);
            let mut geo = vec![C(1.0, 0.0); m];
            for k in 1..m {
                geo[k] = geo[k - 1].mul(p);
            }
            s = conv(&s, &geo);
        }
    }
    s.iter()
        .map(|c| {
            assert!(c.1.abs() < 1e-9, "imaginary residue {}", c.1);
            sys.gain * c.0
        })
        .collect()
}

#[test]
fn impulse_response_matches_power_series() {
    let sys = LtiSystem {
        zeros: vec![
            ConjugatePair {
                magnitude: 0.9,
                phase: 0.4,
            },
            ConjugatePair {
                magnitude: 0.3,
                phase: 2.5,
            },
        ],
        poles: vec![
            ConjugatePair {
                magnitude: 0.85,
                phase: 0.2,
            },
            ConjugatePair {
                magnitude: 0.6,
                phase: 1.9,
            },
            ConjugatePair {
                magnitude: 0.5,
                phase: PI - 0.1,
            },
        ],
        gain: 1.7,
    };
    let g = impulse_response(&sys, 40).unwrap();
    let oracle = series_oracle(&sys, 40);
    for (i, (a, b)) in g.iter().zip(&oracle).enumerate() {
        assert!((a - b).abs() < 1e-10, "tap {}: {a} vs {b}", i + 1);
    }
}

#[test]
fn random_systems_match_series_and_norm_target() {
    let params = RandomSystemParams::default();
    let mut rng = rng(5);
    for _ in 0..10 {
        let sys = sample_random_system(&mut rng, &params, 50);
        assert!(sys.is_stable());
        assert_eq!(sys.zeros.len(), 10);
        assert_eq!(sys.poles.len(), 10);
        assert!(sys.zeros.iter().all(|z| z.magnitude <= 0.99));
        assert!(sys.poles.iter().all(|p| p.magnitude <= 0.92));
        let g = impulse_response(&sys, 50).unwrap();
        let norm = g.norm();
        assert!((2.0..=4.0).contains(&norm), "norm {norm}");
        let oracle = series_oracle(&sys, 50);
        let err = g
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8 * norm.max(1.0), "max error {err}");
    }
}

#[test]
fn unstable_system_rejected() {
    let sys = LtiSystem {
        zeros: vec![],
        poles: vec![ConjugatePair {
            magnitude: 1.0,
            phase: 0.3,
        }],
        gain: 1.0,
    };
    assert!(impulse_response(&sys, 5).is_err());
}

#[test]
fn noise_calibration_hits_snr() {
    let mut rng = rng(9);
    let sys = sample_random_system(&mut rng, &RandomSystemParams::default(), 50);
    let g = impulse_response(&sys, 50).unwrap();
    let u = white_noise_input(500, &mut rng);
    let s2 = calibrate_noise(&g, &u, 10.0).unwrap();
    let clean = noiseless_output(&g, &u);
    let mean = clean.mean();
    let var = clean.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 500.0;
    assert!((var / s2 - 10.0).abs() < 1e-9);

    // Realized noise has about the requested variance.
    let z = simulate(&g, &u, s2, &mut rng);
    let e = &z - &clean;
    let ev = e.norm_squared() / 500.0;
    assert!((ev / s2 - 1.0).abs() < 0.2, "{ev} vs {s2}");
}

#[test]
fn binary_threshold_belongs_to_upper_level() {
    let q = Quantizer::binary(1.0);
    assert_eq!(q.apply(1.0), 1.0);
    assert_eq!(q.apply(1.0 - 1e-12), -1.0);
    assert_eq!(q.apply(-40.0), -1.0);
    let iv = q.interval_of(1.0).unwrap();
    assert!(iv.contains(1.0) && iv.upper == f64::INFINITY);
    assert!(q.interval_of(0.0).is_err());
}

#[test]
fn ceil_covering_uses_bounded_cells() {
    let z = [-2.3, 0.0, 0.4, 3.99, 4.0, -1.0];
    let q = Quantizer::ceil_covering(&z).unwrap();
    for &x in &z {
        let level = q.apply(x);
        assert_eq!(level, x.ceil());
        let iv = q.interval_of(level).unwrap();
        assert!(iv.lower.is_finite() && iv.upper.is_finite());
        assert!(iv.contains(x));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn regressor_matches_convolution(
        u in prop::collection::vec(-3.0f64..3.0, 1..40),
        m in 1usize..12,
    ) {
        let n = u.len();
        let r = regression_matrix(&u, n, m).unwrap();
        prop_assert_eq!(&r.0, &regressor_by_convolution(&u, m));
    }

    #[test]
    fn regressor_times_g_is_noiseless_output(
        u in prop::collection::vec(-3.0f64..3.0, 1..40),
        g in prop::collection::vec(-2.0f64..2.0, 1..12),
    ) {
        let r = regression_matrix(&u, u.len(), g.len()).unwrap();
        let gv = ImpulseResponse::from_slice(&g);
        let direct = noiseless_output(&gv, &u);
        let via = &r.0 * &gv.0;
        prop_assert!((direct - via).abs().max() < 1e-12);
    }

    #[test]
    fn every_value_lies_in_its_level_interval(x in -50.0f64..50.0, c in -3.0f64..3.0) {
        for q in [Quantizer::binary(c), Quantizer::ceil(-60, 60).unwrap(), Quantizer::Identity] {
            let level = q.apply(x);
            prop_assert!(q.interval_of(level).unwrap().contains(x));
        }
    }

    #[test]
    fn ceil_matches_std_ceil(x in -9.5f64..9.5) {
        let q = Quantizer::ceil(-10, 10).unwrap();
        prop_assert_eq!(q.apply(x), x.ceil());
        let y = quantize(&q, &DVector::from_vec(vec![x]));
        prop_assert_eq!(y[0], x.ceil());
    }
}
