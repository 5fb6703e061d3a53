use csis_core::datagen::{
    example_spec, gen_equicorrelated, gen_factor_mixture, gen_response, generate_replication, rho_to_loading,
    CondSetId, ExampleId, SparseCoefficients,
};
use csis_core::rng::Philox;
use csis_core::{Family, Matrix};
use nalgebra::DMatrix;

const N: usize = 100_000;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    cov(a, b) / (cov(a, a) * cov(b, b)).sqrt()
}

fn check_columns(x: &Matrix) {
    for j in 0..x.cols() {
        let c = x.col(j);
        assert!(mean(c).abs() <= 0.02, "column {j} mean {}", mean(c));
        assert!((cov(c, c) - 1.0).abs() <= 0.03, "column {j} var {}", cov(c, c));
    }
}

#[test]
fn equicorrelated_moments() {
    for rho in [0.0, 0.5, 0.9] {
        let x = gen_equicorrelated(N, 3, rho, &mut Philox::new(10)).unwrap();
        check_columns(&x);
        let pairs = [(0, 1), (0, 2), (1, 2)];
        let avg = pairs.iter().map(|&(a, b)| corr(x.col(a), x.col(b))).sum::<f64>() / 3.0;
        assert!((avg - rho).abs() <= 0.01, "rho {rho}: {avg}");
    }
    assert!(gen_equicorrelated(10, 2, 1.0, &mut Philox::new(1)).is_err());
}

#[test]
fn equicorrelated_spectrum() {
    let (rho, p) = (0.5, 8);
    let x = gen_equicorrelated(N, p, rho, &mut Philox::new(4)).unwrap();
    let s = DMatrix::from_fn(p, p, |a, b| cov(x.col(a), x.col(b)));
    let top = s.symmetric_eigen().eigenvalues.max();
    let expected = (1.0 - rho) + rho * p as f64;
    assert!((top - expected).abs() / expected < 0.02, "{top} vs {expected}");
}

#[test]
fn factor_mixture_moments() {
    // p = 6: two columns per innovation law
    let a = [0.0, 2.0, 0.0, 2.0, 0.0, 2.0];
    let x = gen_factor_mixture(N, 6, &a, &mut Philox::new(21)).unwrap();
    check_columns(&x);
    let target = 4.0 / 5.0;
    for (i, j) in [(1, 3), (1, 5), (3, 5)] {
        let c = corr(x.col(i), x.col(j));
        assert!((c - target).abs() <= 0.01, "({i},{j}) {c}");
    }
    for (i, j) in [(0, 2), (0, 4), (2, 4), (0, 1)] {
        assert!(corr(x.col(i), x.col(j)).abs() <= 0.01);
    }
}

#[test]
fn mixture_innovation_raw_variance() {
    let x = gen_factor_mixture(N, 3, &[0.0; 3], &mut Philox::new(8)).unwrap();
    let raw: Vec<f64> = x.col(2).iter().map(|v| v * 1.75f64.sqrt()).collect();
    assert!((cov(&raw, &raw) - 1.75).abs() < 0.03);
}

#[test]
fn loading_hits_correlation() {
    let a = rho_to_loading(0.8).unwrap();
    let x = gen_factor_mixture(N, 3, &[a, a, a], &mut Philox::new(3)).unwrap();
    assert!((corr(x.col(0), x.col(1)) - 0.8).abs() <= 0.01);
    assert!((corr(x.col(1), x.col(2)) - 0.8).abs() <= 0.01);
}

#[test]
fn hidden_variable_is_marginally_uncorrelated() {
    // population value: β₆ + 0.5 Σ_{k≠6} βₖ = −7.5 + 7.5 = 0
    let beta = [3.0, 3.0, 3.0, 3.0, 3.0, -7.5];
    let analytic: f64 = beta[5] + 0.5 * beta[..5].iter().sum::<f64>();
    assert_eq!(analytic, 0.0);
    // Sample covariance over 10⁷ rows in ten batches; at 10⁶ rows the
    // standard error (about 0.011) exceeds the tolerance.
    let b = SparseCoefficients::new(6, beta.iter().copied().enumerate().collect()).unwrap();
    let (mut sx, mut sy, mut sxy, mut s1y, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for batch in 0..10u64 {
        let x = gen_equicorrelated(1_000_000, 6, 0.5, &mut Philox::with_stream(6, batch)).unwrap();
        let y = gen_response(&x, &b, Family::Gaussian, &mut Philox::with_stream(7, batch)).unwrap();
        for (i, &yi) in y.iter().enumerate() {
            let x6 = x.get(i, 5);
            sx += x6;
            sy += yi;
            sxy += x6 * yi;
            s1y += x.get(i, 0) * yi;
        }
        total += y.len() as f64;
    }
    let c = sxy / total - (sx / total) * (sy / total);
    assert!(c.abs() <= 0.01, "{c}");
    assert!(s1y / total > 5.0);
}

#[test]
fn null_gaussian_response_is_standard() {
    let x = Matrix::zeros(N, 1);
    let b = SparseCoefficients::new(1, vec![]).unwrap();
    let y = gen_response(&x, &b, Family::Gaussian, &mut Philox::new(1)).unwrap();
    assert!(mean(&y).abs() < 0.01 && (cov(&y, &y) - 1.0).abs() < 0.02);
}

#[test]
fn replication_is_seeded() {
    let mut spec = example_spec(ExampleId::Ex1, Family::BinomialLogit).unwrap();
    spec.seed = 42;
    let a = generate_replication(&spec, 0).unwrap();
    let b = generate_replication(&spec, 0).unwrap();
    assert_eq!(a.data.x().as_slice(), b.data.x().as_slice());
    assert_eq!(a.data.y(), b.data.y());
    assert!(a.data.y().iter().all(|&v| v == 0.0 || v == 1.0));
    assert_eq!(a.active_in_d, vec![5]);

    let mut ex2 = example_spec(ExampleId::Ex2, Family::Gaussian).unwrap();
    ex2.n = 4000;
    let r = generate_replication(&ex2, 1).unwrap();
    let x = r.data.x();
    assert!((corr(x.col(3), x.col(700)) - 0.9).abs() < 0.02);
    assert!(corr(x.col(3), x.col(1999)).abs() < 0.05);
    assert_eq!(r.active_in_d, vec![1999]);

    let ex5 = example_spec(ExampleId::Ex5 { rho: 0.0, cset: CondSetId::C2 }, Family::Gaussian).unwrap();
    let r = generate_replication(&ex5, 0).unwrap();
    assert_eq!(r.cond.indices(), &[0, 1, 4, 2000]);
    assert_eq!(r.active_in_d, vec![2, 3, 9998, 9999]);
}
