//! Standard normal distribution functions.

// Coefficients are kept exactly as published.
#![allow(clippy::excessive_precision)]

use core::f64::consts::FRAC_1_SQRT_2;

// Only needed when nothing in the build links std.
#[allow(unused_imports)]
use num_traits::Float;

const SQRT_2PI: f64 = 2.506_628_274_631_000_2;

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Φ(x), accurate in relative terms for large negative `x`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x), accurate in relative terms for large positive `x`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Mills ratio (1 − Φ(x)) / φ(x) for `x ≥ 0`; `x = +∞` maps to 0.
pub fn mills_ratio(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x < 35.0 {
        0.5 * SQRT_2PI * libm::erfc(x * FRAC_1_SQRT_2) * (0.5 * x * x).exp()
    } else {
        let r = 1.0 / (x * x);
        (1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)))) / x
    }
}

/// Φ⁻¹(p) by Wichura's AS 241 rational approximations, polished with one
/// Halley step against `erfc`.
pub fn std_normal_inv_cdf(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    let mut x = if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        q * poly(
            r,
            &[
                3.387_132_872_796_366_608,
                1.331_416_678_917_843_774_5e2,
                1.971_590_950_306_551_442_7e3,
                1.373_169_376_550_946_112_5e4,
                4.592_195_393_154_987_145_7e4,
                6.726_577_092_700_870_085_3e4,
                3.343_057_558_358_812_810_5e4,
                2.509_080_928_730_122_672_7e3,
            ],
        ) / poly(
            r,
            &[
                1.0,
                4.231_333_070_160_091_125_2e1,
                6.871_870_074_920_579_083e2,
                5.394_196_021_424_751_107_7e3,
                2.121_379_430_158_659_586_7e4,
                3.930_789_580_009_271_061e4,
                2.872_908_573_572_194_267_4e4,
                5.226_495_278_852_854_561e3,
            ],
        )
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let mut r = (-tail.ln()).sqrt();
        let v = if r <= 5.0 {
            r -= 1.6;
            poly(
                r,
                &[
                    1.423_437_110_749_683_577_34,
                    4.630_337_846_156_545_295_9,
                    5.769_497_221_460_691_405_5,
                    3.647_848_324_763_204_605_04,
                    1.270_458_252_452_368_382_58,
                    2.417_807_251_774_506_117_7e-1,
                    2.272_384_498_926_918_458_33e-2,
                    7.745_450_142_783_414_076_4e-4,
                ],
            ) / poly(
                r,
                &[
                    1.0,
                    2.053_191_626_637_758_821_87,
                    1.676_384_830_183_803_849_4,
                    6.897_673_349_851_000_045_5e-1,
                    1.481_039_764_274_800_745_9e-1,
                    1.519_866_656_361_645_719_66e-2,
                    5.475_938_084_995_344_946e-4,
                    1.050_750_071_644_416_843_24e-9,
                ],
            )
        } else {
            r -= 5.0;
            poly(
                r,
                &[
                    6.657_904_643_501_103_777_2,
                    5.463_784_911_164_114_369_9,
                    1.784_826_539_917_291_335_8,
                    2.965_605_718_285_048_912_3e-1,
                    2.653_218_952_657_612_309_3e-2,
                    1.242_660_947_388_078_438_6e-3,
                    2.711_555_568_743_487_578_15e-5,
                    2.010_334_399_292_288_132_65e-7,
                ],
            ) / poly(
                r,
                &[
                    1.0,
                    5.998_322_065_558_879_376_9e-1,
                    1.369_298_809_227_358_053_1e-1,
                    1.487_536_129_085_061_485_25e-2,
                    7.868_691_311_456_132_591e-4,
                    1.846_318_317_510_054_681_8e-5,
                    1.421_511_758_316_445_888_7e-7,
                    2.044_263_103_389_939_785_64e-15,
                ],
            )
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };
    // Halley refinement on whichever tail keeps the residual well scaled.
    let err = if x < 0.0 {
        std_normal_cdf(x) - p
    } else {
        (1.0 - p) - std_normal_sf(x)
    };
    let u = err * SQRT_2PI * (0.5 * x * x).exp();
    if u.is_finite() {
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

fn poly(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Mean and variance of a standard normal restricted to `(a, b)`.
///
/// Uses Mills-ratio forms whenever the interval sits entirely in one tail,
/// where the textbook `(φ(a) − φ(b)) / (Φ(b) − Φ(a))` loses all precision.
pub fn std_truncated_moments(a: f64, b: f64) -> (f64, f64) {
    debug_assert!(a < b);
    if a >= 0.0 {
        upper_side_moments(a, b)
    } else if b <= 0.0 {
        let (m, v) = upper_side_moments(-b, -a);
        (-m, v)
    } else {
        let z = std_normal_cdf(b) - std_normal_cdf(a);
        let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));
        let apa = if a.is_finite() { a * pa } else { 0.0 };
        let bpb = if b.is_finite() { b * pb } else { 0.0 };
        let mean = (pa - pb) / z;
        (mean, 1.0 + (apa - bpb) / z - mean * mean)
    }
}

fn upper_side_moments(a: f64, b: f64) -> (f64, f64) {
    // ratio φ(b)/φ(a)
    let decay = if b.is_finite() {
        (0.5 * (a - b) * (a + b)).exp()
    } else {
        0.0
    };
    let mass_over_pdf_a = mills_ratio(a) - mills_ratio(b) * decay;
    if !(mass_over_pdf_a > 0.0) || !mass_over_pdf_a.is_finite() {
        // Interval too narrow to resolve; it is effectively uniform.
        let w = b - a;
        return (0.5 * (a + b), w * w / 12.0);
    }
    let ra = 1.0 / mass_over_pdf_a;
    let rb = ra * decay;
    let brb = if b.is_finite() { b * rb } else { 0.0 };
    let mean = ra - rb;
    let var = 1.0 + a * ra - brb - mean * mean;
    (mean, var.max(0.0))
}

#[cfg(test)]
mod tests {
    use core::f64::consts::PI;

    use super::*;

    #[test]
    fn inverse_cdf_round_trips() {
        for &p in &[
            1e-300, 1e-100, 1e-20, 1e-8, 0.001, 0.02, 0.3, 0.5, 0.7, 0.975, 0.999_999,
        ] {
            let x = std_normal_inv_cdf(p);
            let back = std_normal_cdf(x);
            // Φ amplifies the rounding of x by |x|, so scale the bound.
            let tol = 1e-14 * x.abs().max(10.0);
            assert!(
                ((back - p) / p).abs() < tol,
                "p = {p}: x = {x}, back = {back}"
            );
        }
        assert_eq!(std_normal_inv_cdf(0.5), 0.0);
        assert!((std_normal_inv_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
    }

    #[test]
    fn mills_ratio_branches_agree() {
        // Series and erfc forms overlap around the switch point.
        let x = 34.999;
        let direct = 0.5 * SQRT_2PI * libm::erfc(x * FRAC_1_SQRT_2) * (0.5 * x * x).exp();
        let r = 1.0 / (x * x);
        let series = (1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)))) / x;
        assert!(((direct - series) / direct).abs() < 1e-12);
        assert!((mills_ratio(0.0) - (PI / 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn half_normal_moments() {
        let (m, v) = std_truncated_moments(0.0, f64::INFINITY);
        assert!((m - (2.0 / PI).sqrt()).abs() < 1e-14);
        assert!((v - (1.0 - 2.0 / PI)).abs() < 1e-14);
        let (m, v) = std_truncated_moments(f64::NEG_INFINITY, 0.0);
        assert!((m + (2.0 / PI).sqrt()).abs() < 1e-14);
        assert!((v - (1.0 - 2.0 / PI)).abs() < 1e-14);
    }
}
