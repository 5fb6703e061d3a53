//! Standard normal distribution function and its inverse.

use crate::error::{domain, Result};

/// `Φ(x)`, computed through `erfc` so the lower tail keeps full relative
/// precision.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Upper tail `1 − Φ(x)`.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// `Φ⁻¹(p)` for `0 < p < 1`.
///
/// Acklam's rational approximation (relative error about 1e-9) refined by
/// one Halley step against the `erfc`-based distribution function.
pub fn quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain!("normal quantile needs 0 < p < 1, got {}", p));
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = libm::sqrt(-2.0 * libm::log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = libm::sqrt(-2.0 * libm::log1p(-p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    // Halley refinement; work in the tail that is computed accurately.
    let e = if x <= 0.0 { cdf(x) - p } else { (1.0 - p) - sf(x) };
    let u = e / pdf(x);
    Ok(x - u / (1.0 + 0.5 * x * u))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_zero() {
        assert!(quantile(0.5).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rejects_outside_unit_interval() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(quantile(p).is_err());
        }
    }

    #[test]
    fn round_trips_through_cdf() {
        for &p in &[1e-12, 1e-6, 0.01, 0.024, 0.2, 0.5, 0.7, 0.976, 0.999, 1.0 - 1e-9] {
            let x = quantile(p).unwrap();
            let back = cdf(x);
            assert!((back - p).abs() <= 1e-14 + 1e-12 * p, "p={p} x={x} back={back}");
        }
    }

    #[test]
    fn symmetric() {
        for &p in &[0.001, 0.1, 0.3] {
            let a = quantile(p).unwrap();
            let b = quantile(1.0 - p).unwrap();
            assert!((a + b).abs() < 1e-9);
        }
    }
}
