use csis_core::rng::Philox;
use csis_core::screening::FeatureStat;
use csis_core::thresholding::{
    decouple, decoupled_statistics, decoupling_threshold, decoupling_threshold_from, fdr_delta, fdr_select,
    normal_quantile, step_quantile, DecouplingOptions, PermutationMode, Pooling,
};
use csis_core::{
    screen_conditional, ConditioningSet, Dataset, Family, Matrix, RankBy, ScreenOptions, ScreenStatistics,
};
use proptest::prelude::*;

/// Φ by Simpson integration of the density from 0: independent of erfc.
fn phi_by_quadrature(x: f64) -> f64 {
    let steps = 20_000;
    let h = x / steps as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(0.0) + f(x);
    for k in 1..steps {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
    }
    0.5 + s * h / 3.0
}

fn quantile_by_bisection(p: f64) -> f64 {
    let (mut lo, mut hi) = (-9.0, 9.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_by_quadrature(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn quantile_known_values() {
    assert_eq!(normal_quantile(0.5).unwrap(), 0.0);
    // 40-digit reference inversions
    let frozen = [
        (0.975, 1.959_963_984_540_054),
        (0.9975, 2.807_033_768_343_804),
        (0.995, 2.575_829_303_548_901),
        (0.0001, -3.719_016_485_455_681),
        (0.999_999_9, 5.199_337_582_192_817),
    ];
    for (p, z) in frozen {
        let got = normal_quantile(p).unwrap();
        assert!((got - z).abs() <= 1e-9, "p {p}: {got} vs {z}");
    }
    assert!((normal_quantile(0.975).unwrap() - 1.959964).abs() < 5e-7);
    assert!((fdr_delta(2000, 10.0).unwrap() - 2.807034).abs() < 5e-7);
}

#[test]
fn quantile_matches_bisection_oracle() {
    for &p in &[0.01, 0.05, 0.2, 0.35, 0.5, 0.65, 0.9, 0.99, 0.999] {
        let z = normal_quantile(p).unwrap();
        let oracle = quantile_by_bisection(p);
        assert!((z - oracle).abs() <= 1e-9, "p {p}: {z} vs {oracle}");
    }
}

fn stats_with(coefs: &[f64], walds: &[f64]) -> ScreenStatistics {
    ScreenStatistics {
        features: coefs
            .iter()
            .zip(walds)
            .enumerate()
            .map(|(index, (&coef, &wald))| FeatureStat {
                index,
                coef,
                nll: -coef.abs(),
                wald,
                converged: true,
                at_boundary: false,
            })
            .collect(),
        baseline_nll: 0.0,
        n: 10,
        family: Family::Gaussian,
    }
}

#[test]
fn fdr_selection_examples() {
    let zero = stats_with(&[0.0; 20], &[0.0; 20]);
    for f in [0.5, 1.0, 10.0, 39.0] {
        assert!(fdr_select(&zero, 20, f).unwrap().selected.is_empty());
    }
    assert!(fdr_select(&zero, 20, 40.0).is_err());
    let s = stats_with(&[1.0, 1.0, 1.0], &[3.0, 2.80, 2.81]);
    let sel = fdr_select(&s, 2000, 10.0).unwrap();
    assert_eq!(sel.selected, vec![0, 2]);
}

#[test]
fn pooled_tenths_at_tau_one() {
    let mut v: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    assert_eq!(step_quantile(&mut v, 1.0), Some(1.0));
}

fn null_data(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = Philox::new(seed);
    let cols: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.standard_normal()).collect()).collect();
    let y = (0..n).map(|i| cols[0][i] - cols[1][i] + rng.standard_normal()).collect();
    Dataset::new(Matrix::from_columns(n, &cols).unwrap(), y).unwrap()
}

#[test]
fn max_threshold_screens_out_its_own_permutation() {
    let data = null_data(4, 60, 40);
    let cond = ConditioningSet::new(vec![0, 1], 40).unwrap();
    let opts = DecouplingOptions { repetitions: 1, tau: 1.0, seed: 99, ..Default::default() };
    let screen = ScreenOptions::default();
    let decoupled = decoupled_statistics(&data, &cond, Family::Gaussian, &opts, &screen).unwrap();
    let gamma = decoupling_threshold(&data, &cond, Family::Gaussian, &opts, &screen).unwrap();
    let max = decoupled[0].features.iter().map(|f| f.coef.abs()).fold(0.0, f64::max);
    assert_eq!(gamma.threshold, max);
    assert_eq!(gamma.pool_size, 38);
    assert!(decoupled[0].select_by_magnitude(gamma.threshold).is_empty());
}

#[test]
fn decoupled_sweep_equals_sweep_on_permuted_copy() {
    let data = null_data(8, 50, 20);
    let cond = ConditioningSet::new(vec![0, 1], 20).unwrap();
    for mode in [PermutationMode::Joint, PermutationMode::PerColumn] {
        let opts = DecouplingOptions { repetitions: 3, seed: 5, mode, ..Default::default() };
        let via_rows = decoupled_statistics(&data, &cond, Family::Gaussian, &opts, &ScreenOptions::default()).unwrap();
        for (k, stats) in via_rows.iter().enumerate() {
            let copy = decouple(&data, &cond, mode, 5, k).unwrap();
            let direct = screen_conditional(&copy, &cond, Family::Gaussian, &ScreenOptions::default()).unwrap();
            assert_eq!(stats, &direct);
        }
    }
}

#[test]
fn decoupled_columns_are_row_permutations() {
    let data = null_data(12, 30, 10);
    let cond = ConditioningSet::new(vec![0, 4], 10).unwrap();
    for mode in [PermutationMode::Joint, PermutationMode::PerColumn] {
        for k in 0..4 {
            let copy = decouple(&data, &cond, mode, 17, k).unwrap();
            assert_eq!(copy.y(), data.y());
            for j in 0..10 {
                let orig = data.x().col(j);
                let new = copy.x().col(j);
                if cond.contains(j) {
                    assert_eq!(orig, new);
                } else {
                    let mut a = orig.to_vec();
                    let mut b = new.to_vec();
                    a.sort_by(f64::total_cmp);
                    b.sort_by(f64::total_cmp);
                    assert_eq!(a, b);
                }
            }
        }
        // a joint permutation moves every candidate column the same way
        if mode == PermutationMode::Joint {
            let copy = decouple(&data, &cond, mode, 17, 0).unwrap();
            let perm: Vec<usize> = (0..30)
                .map(|i| data.x().col(1).iter().position(|&v| v == copy.x().get(i, 1)).unwrap())
                .collect();
            for j in [2, 3, 5, 9] {
                for i in 0..30 {
                    assert_eq!(copy.x().get(i, j), data.x().get(perm[i], j));
                }
            }
        }
    }
}

#[test]
fn likelihood_pool_uses_reductions() {
    let data = null_data(21, 40, 12);
    let cond = ConditioningSet::new(vec![0], 12).unwrap();
    let opts = DecouplingOptions { repetitions: 2, tau: 1.0, seed: 3, ..Default::default() };
    let dec = decoupled_statistics(&data, &cond, Family::Gaussian, &opts, &ScreenOptions::default()).unwrap();
    let out = decoupling_threshold_from(&dec, 1.0, Pooling::Pooled, RankBy::Likelihood).unwrap();
    let max = dec
        .iter()
        .flat_map(|s| s.features.iter().map(move |f| s.baseline_nll - f.nll))
        .fold(0.0, f64::max);
    assert!((out.threshold - max).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_is_monotone(values in prop::collection::vec(-100.0f64..100.0, 1..60), t1 in 0.001f64..1.0, t2 in 0.001f64..1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = step_quantile(&mut values.clone(), lo).unwrap();
        let b = step_quantile(&mut values.clone(), hi).unwrap();
        prop_assert!(a <= b);
    }

    #[test]
    fn delta_decreases_in_f_and_increases_in_d(d in 1usize..5000, f1 in 0.01f64..1.0, f2 in 0.01f64..1.0) {
        let (fa, fb) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        prop_assume!(fa < fb);
        // keep f below 2d
        let fa = fa * d as f64;
        let fb = fb * d as f64;
        prop_assert!(fdr_delta(d, fa).unwrap() > fdr_delta(d, fb).unwrap());
        prop_assert!(fdr_delta(d + 1, fa).unwrap() > fdr_delta(d, fa).unwrap());
    }

    #[test]
    fn nested_selection(coefs in prop::collection::vec(-5.0f64..5.0, 1..40), g1 in 0.0f64..5.0, g2 in 0.0f64..5.0) {
        let s = stats_with(&coefs, &vec![0.0; coefs.len()]);
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        let big = s.select_by_magnitude(lo);
        for j in s.select_by_magnitude(hi) {
            prop_assert!(big.contains(&j));
        }
        let big = s.select_by_likelihood(-lo);
        for j in s.select_by_likelihood(-hi) {
            prop_assert!(big.contains(&j));
        }
    }
}
