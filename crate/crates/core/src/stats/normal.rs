//! Standard normal distribution and quantile functions.
//!
//! The CDF follows Cody's rational Chebyshev approximations (the same scheme
//! used by R's `pnorm`), which keep full relative precision far into both
//! tails, including on the log scale. The quantile is Wichura's AS 241.

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const A: [f64; 5] = [
    2.235_252_035_460_683_9,
    161.028_231_068_558_8,
    1_067.689_485_460_371,
    18_154.981_253_343_56,
    0.065_682_337_918_207_45,
];
const B: [f64; 4] = [
    47.202_581_904_688_24,
    976.098_551_737_776_7,
    10_260.932_208_618_978,
    45_507.789_335_026_73,
];
const C: [f64; 9] = [
    0.398_941_512_088_134_66,
    8.883_149_794_388_376,
    93.506_656_132_177_86,
    597.270_276_394_800_3,
    2_494.537_585_290_372_7,
    6_848.190_450_536_283,
    11_602.651_437_647_35,
    9_842.714_838_383_978,
    1.076_557_677_372_019_2e-8,
];
const D: [f64; 8] = [
    22.266_688_044_328_117,
    235.387_901_782_625,
    1_519.377_599_407_554_8,
    6_485.558_298_266_761,
    18_615.571_640_885_1,
    34_900.952_721_145_98,
    38_912.003_286_093_27,
    19_685.429_676_859_99,
];
const P: [f64; 6] = [
    0.215_898_534_057_957,
    0.127_401_161_160_247_36,
    0.022_235_277_870_649_807,
    0.001_421_619_193_227_893_5,
    2.911_287_495_116_879e-5,
    0.023_073_441_764_940_174,
];
const Q: [f64; 5] = [
    1.284_260_096_144_911_2,
    0.468_238_212_480_865_1,
    0.065_988_137_868_928_55,
    0.003_782_396_332_027_582_4,
    7.297_515_550_839_662e-5,
];

/// Upper-tail probability of `y >= 0.6745` as `(ln tail, tail)`.
fn tail_parts(y: f64) -> (f64, f64) {
    debug_assert!(y >= 0.674_489_75);
    let temp = if y <= 32f64.sqrt() {
        let mut xnum = C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        (xnum + C[7]) / (xden + D[7])
    } else {
        let xsq = 1.0 / (y * y);
        let mut xnum = P[5] * xsq;
        let mut xden = xsq;
        for i in 0..4 {
            xnum = (xnum + P[i]) * xsq;
            xden = (xden + Q[i]) * xsq;
        }
        let t = xsq * (xnum + P[4]) / (xden + Q[4]);
        (FRAC_1_SQRT_2PI - t) / y
    };
    // Split y^2 into a 1/16-grid part and a remainder to avoid cancellation in exp.
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    let log_tail = -ysq * ysq * 0.5 - del * 0.5 + temp.ln();
    let tail = (-ysq * ysq * 0.5).exp() * (-del * 0.5).exp() * temp;
    (log_tail, tail)
}

fn central(x: f64) -> f64 {
    // returns Phi(x) - 1/2 for |x| <= 0.674...
    let y = x.abs();
    let (xnum, xden) = if y > f64::EPSILON * 0.5 {
        let xsq = x * x;
        let mut xnum = A[4] * xsq;
        let mut xden = xsq;
        for i in 0..3 {
            xnum = (xnum + A[i]) * xsq;
            xden = (xden + B[i]) * xsq;
        }
        (xnum, xden)
    } else {
        (0.0, 0.0)
    };
    x * (xnum + A[3]) / (xden + B[3])
}

const CENTRAL_CUTOFF: f64 = 0.674_489_75;

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.abs() <= CENTRAL_CUTOFF {
        return 0.5 + central(x);
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    let (_, tail) = tail_parts(x.abs());
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Standard normal survival function, `1 - cdf(x)`, accurate in the upper tail.
pub fn sf(x: f64) -> f64 {
    cdf(-x)
}

/// `ln(cdf(x))`, finite for every finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.abs() <= CENTRAL_CUTOFF {
        return (0.5 + central(x)).ln();
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x < 0.0 {
        if -x > 1e150 {
            return -0.5 * x * x - (-x).ln() - LN_SQRT_2PI;
        }
        tail_parts(-x).0
    } else {
        let (_, tail) = tail_parts(x);
        (-tail).ln_1p()
    }
}

/// `ln(sf(x))`.
pub fn log_sf(x: f64) -> f64 {
    log_cdf(-x)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn log_pdf(x: f64) -> f64 {
    -LN_SQRT_2PI - 0.5 * x * x
}

/// Standard normal quantile (Wichura, AS 241). Returns ±inf at 0 and 1.
pub fn quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q
            * (((((((2_509.080_928_730_122_7 * r + 33_430.575_583_588_13) * r
                + 67_265.770_927_008_7)
                * r
                + 45_921.953_931_549_87)
                * r
                + 13_731.693_765_509_461)
                * r
                + 1_971.590_950_306_551_3)
                * r
                + 133.141_667_891_784_38)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5_226.495_278_852_545 * r + 28_729.085_735_721_943) * r
                + 39_307.895_800_092_71)
                * r
                + 21_213.794_301_586_597)
                * r
                + 5_394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let val = tail_quantile(tail);
    if q < 0.0 {
        -val
    } else {
        val
    }
}

/// The `x` with `sf(x) = t`. Callers holding an upper-tail probability use
/// this instead of forming `1 - t`.
pub fn upper_tail_quantile(t: f64) -> f64 {
    -quantile(t)
}

fn tail_quantile(tail: f64) -> f64 {
    let r = (-tail.ln()).sqrt();
    if r <= 5.0 {
        let r = r - 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r
            + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
                + 0.015_198_666_563_616_457)
                * r
                + 0.148_103_976_427_480_08)
                * r
                + 0.689_767_334_985_1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        let r = r - 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 0.001_242_660_947_388_078_4)
            * r
            + 0.026_532_189_526_576_124)
            * r
            + 0.296_560_571_828_504_9)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_888)
                * r
                + 1.0)
    }
}

/// `ln(cdf(b) - cdf(a))` for `a < b`, computed without cancellation in either tail.
pub fn log_interval_mass(a: f64, b: f64) -> f64 {
    debug_assert!(a < b);
    if a >= 0.0 {
        // both in the upper half: use survival functions
        let la = log_sf(a);
        let lb = log_sf(b);
        la + log1mexp(lb - la)
    } else if b <= 0.0 {
        let lb = log_cdf(b);
        let la = log_cdf(a);
        lb + log1mexp(la - lb)
    } else {
        // straddles zero: mass is at least the smaller of the half-masses, no cancellation
        (1.0 - sf(b) - cdf(a)).ln()
    }
}

/// `ln(1 - exp(x))` for `x <= 0`.
pub(crate) fn log1mexp(x: f64) -> f64 {
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent high-precision evaluation (mpmath, 30 digits).
    const CDF_REFS: &[(f64, f64)] = &[
        (-38.0, 2.885_428_360_068_784e-316),
        (-10.0, 7.619853024160526e-24),
        (-5.0, 2.866515718791939e-7),
        (-1.0, 0.15865525393145707),
        (0.0, 0.5),
        (0.5, 0.6914624612740131),
        (1.96, 0.9750021048517795),
        (3.0, 0.9986501019683699),
    ];

    #[test]
    fn cdf_matches_reference_values() {
        for &(x, want) in CDF_REFS {
            let got = cdf(x);
            let rel = ((got - want) / want).abs();
            assert!(
                rel < 1e-9 || (want < 1e-300 && got < 1e-300),
                "x={x}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn log_cdf_deep_tail_is_finite() {
        // ln Phi(-40) = -804.6084420137538 (mpmath)
        let got = log_cdf(-40.0);
        assert!((got + 804.608_442_013_753_8).abs() < 1e-9, "{got}");
        assert!(log_cdf(-1e10).is_finite());
        assert!(log_sf(1e10).is_finite());
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &x in &[-8.0, -3.3, -1.0, -0.2, 0.0, 0.3, 1.5, 3.0] {
            let p = cdf(x);
            let back = quantile(p);
            assert!(
                (back - x).abs() < 1e-9 * (1.0 + x.abs()),
                "{x} -> {p} -> {back}"
            );
        }
        // tail through the survival route
        for &x in &[1.0, 5.0, 12.0, 30.0] {
            let t = sf(x);
            let back = upper_tail_quantile(t);
            assert!((back - x).abs() < 1e-8 * x, "{x} -> {t} -> {back}");
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert!((quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-15);
        assert!((quantile(0.025) + 1.959_963_984_540_054).abs() < 1e-15);
        assert!((quantile(1e-10) + 6.361_340_902_404_056).abs() < 1e-12);
    }

    #[test]
    fn interval_mass_in_both_tails() {
        let m = log_interval_mass(10.0, 11.0).exp();
        let want = sf(10.0) - sf(11.0);
        assert!(((m - want) / want).abs() < 1e-12);
        let m = log_interval_mass(-11.0, -10.0).exp();
        assert!(((m - want) / want).abs() < 1e-12);
        assert!((log_interval_mass(f64::NEG_INFINITY, f64::INFINITY)).abs() < 1e-15);
        assert!((log_interval_mass(0.0, f64::INFINITY) - 0.5f64.ln()).abs() < 1e-15);
    }
}
