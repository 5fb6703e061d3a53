use csis_core::metrics::{conditional_eigen_ratio, fp_fn, minimum_model_size};
use csis_core::rng::Philox;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Largest eigenvalue of Σ_DD − Σ_DC Σ_CC⁻¹ Σ_CD for the equicorrelated
/// covariance on q + d variables.
fn numeric_lam_cond(r: f64, q: usize, d: usize) -> f64 {
    let sigma = |a: usize, b: usize| if a == b { 1.0 } else { r };
    let s_dd = DMatrix::from_fn(d, d, sigma);
    let cond = if q == 0 {
        s_dd
    } else {
        let s_cc = DMatrix::from_fn(q, q, sigma);
        let s_dc = DMatrix::from_fn(d, q, |_, _| r);
        let inv = s_cc.cholesky().unwrap().inverse();
        s_dd - &s_dc * inv * s_dc.transpose()
    };
    cond.symmetric_eigen().eigenvalues.max()
}

#[test]
fn eigen_formula_matches_decomposition() {
    let mut rng = Philox::new(2);
    for _ in 0..20 {
        let r = 0.95 * rng.uniform();
        let q = rng.below(30) as usize;
        let d = 1 + rng.below(200) as usize;
        let analytic = conditional_eigen_ratio(r, q, d).unwrap();
        let numeric = numeric_lam_cond(r, q, d);
        let rel = (analytic.lam_cond - numeric).abs() / numeric;
        assert!(rel <= 1e-10, "r {r} q {q} d {d}: {} vs {numeric}", analytic.lam_cond);
        let unc = numeric_lam_cond(r, 0, d);
        assert!((analytic.lam_unc - unc).abs() / unc <= 1e-10);
    }
}

#[test]
fn worked_example() {
    let e = conditional_eigen_ratio(0.5, 5, 1000).unwrap();
    assert!((e.lam_cond - 83.833_333_333_333_33).abs() < 1e-10);
    assert_eq!(e.lam_unc, 500.5);
    assert!((numeric_lam_cond(0.5, 5, 1000) - e.lam_cond).abs() / e.lam_cond < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ratio_is_monotone(r in 0.0f64..0.99, dr in 0.0f64..0.2, q in 0usize..50, dq in 0usize..50, d in 1usize..5000) {
        let base = conditional_eigen_ratio(r, q, d).unwrap().ratio;
        let more_q = conditional_eigen_ratio(r, q + dq, d).unwrap().ratio;
        prop_assert!(more_q >= base * (1.0 - 1e-12));
        let r2 = (r + dr).min(0.999);
        let more_r = conditional_eigen_ratio(r2, q, d).unwrap().ratio;
        prop_assert!(more_r >= base * (1.0 - 1e-12));
    }

    #[test]
    fn mms_prefix_consistency(seed in 0u64..10_000, d in 2usize..60, s in 1usize..6) {
        let mut rng = Philox::new(seed);
        let ranking = rng.permutation(d);
        let s = s.min(d);
        let active = rng.sample_without_replacement(&ranking, s);
        let mms = minimum_model_size(&ranking, &active).unwrap();
        prop_assert!(mms >= s);
        let (fp, fneg) = fp_fn(&ranking[..mms], &active);
        prop_assert_eq!(fneg, 0);
        prop_assert_eq!(fp, mms - s);
        let (_, fneg) = fp_fn(&ranking[..mms - 1], &active);
        prop_assert!(fneg >= 1);
    }
}
