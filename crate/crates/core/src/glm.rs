//! Low-dimensional canonical-link GLM fits by damped Newton iteration.
//!
//! Objective: the mean negative log-likelihood `ℙₙ l(xᵀβ, y)` over the box
//! `|βₖ| ≤ B`. Each iteration solves the Newton system with the scaled
//! observed information, then halves the step until the objective does not
//! increase. Coefficients are clamped to the box; when a clamped iterate stops
//! making progress the fit is reported as converged on the boundary, which is
//! how separation in logistic fits shows up.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Matrix;
use crate::error::{contract, Error, Result};
use crate::family::{mean_nll, Family};
use crate::linalg::{self, cross_product, lu_solve, DEPENDENCE_TOL};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_COEF_BOUND: f64 = 1e4;
const MAX_HALVINGS: usize = 50;

/// Design (as column slices, first column the intercept), response and family.
#[derive(Debug, Clone)]
pub struct FitProblem<'a> {
    columns: Vec<&'a [f64]>,
    response: &'a [f64],
    family: Family,
    coef_bound: f64,
}

impl<'a> FitProblem<'a> {
    pub fn new(columns: Vec<&'a [f64]>, response: &'a [f64], family: Family) -> Result<Self> {
        let n = response.len();
        let m = columns.len();
        if m == 0 {
            return Err(contract!("design has no columns"));
        }
        if n < m {
            return Err(contract!("need n >= m, got n={} m={}", n, m));
        }
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(contract!("column {} has length {}, expected {}", j, c.len(), n));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(alloc::format!("design column {}", j)));
            }
        }
        if columns[0].iter().any(|&v| v != 1.0) {
            return Err(contract!("first design column must be the all-ones intercept"));
        }
        if response.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response".into()));
        }
        Ok(Self::new_unchecked(columns, response, family))
    }

    /// Skips validation; screening builds its problems from a validated dataset.
    pub(crate) fn new_unchecked(
        columns: Vec<&'a [f64]>,
        response: &'a [f64],
        family: Family,
    ) -> Self {
        Self {
            columns,
            response,
            family,
            coef_bound: DEFAULT_COEF_BOUND,
        }
    }

    pub fn with_coef_bound(mut self, bound: f64) -> Result<Self> {
        if !(bound > 0.0) {
            return Err(contract!("coefficient bound must be positive, got {}", bound));
        }
        self.coef_bound = bound;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn columns(&self) -> &[&'a [f64]] {
        &self.columns
    }

    pub fn response(&self) -> &'a [f64] {
        self.response
    }

    pub fn coef_bound(&self) -> f64 {
        self.coef_bound
    }

    fn linear_predictor(&self, beta: &[f64], eta: &mut [f64]) {
        eta.iter_mut().for_each(|e| *e = 0.0);
        for (c, &b) in self.columns.iter().zip(beta) {
            if b != 0.0 {
                for (e, &x) in eta.iter_mut().zip(c.iter()) {
                    *e += b * x;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Tolerance on the sup-norm of the mean score.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the objective value after every accepted step.
    pub record_trace: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    /// Mean negative log-likelihood at `coefficients`.
    pub nll: f64,
    /// Scaled observed information `(1/n) Σ b″(xᵢᵀβ) xᵢxᵢᵀ` at `coefficients`.
    pub information: Matrix,
    pub converged: bool,
    /// Some coefficient sits on the box bound (separation or divergence).
    pub at_boundary: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective at the start and after each accepted step (when recorded).
    pub objective_trace: Vec<f64>,
}

/// Mean score `(1/n) Σ [b′(xᵢᵀβ) − yᵢ] xᵢ`.
pub fn score(family: Family, columns: &[&[f64]], y: &[f64], beta: &[f64]) -> Result<Vec<f64>> {
    check_dims(columns, y.len(), beta)?;
    let n = y.len() as f64;
    let eta = linear_predictor(columns, beta, y.len());
    let resid: Vec<f64> = eta.iter().zip(y).map(|(&e, &v)| family.mean(e) - v).collect();
    Ok(columns.iter().map(|c| linalg::dot(c, &resid) / n).collect())
}

/// Scaled observed information `(1/n) Σ b″(xᵢᵀβ) xᵢxᵢᵀ`.
pub fn observed_information(family: Family, columns: &[&[f64]], beta: &[f64]) -> Result<Matrix> {
    let n = columns.first().map_or(0, |c| c.len());
    if n == 0 {
        return Err(contract!("empty design"));
    }
    check_dims(columns, n, beta)?;
    let eta = linear_predictor(columns, beta, n);
    let w: Vec<f64> = eta
        .iter()
        .map(|&e| family.cumulant_unchecked(e).b2 / n as f64)
        .collect();
    Ok(cross_product(columns, Some(&w)))
}

fn check_dims(columns: &[&[f64]], n: usize, beta: &[f64]) -> Result<()> {
    if columns.len() != beta.len() {
        return Err(contract!("{} columns but {} coefficients", columns.len(), beta.len()));
    }
    if let Some(j) = columns.iter().position(|c| c.len() != n) {
        return Err(contract!("column {} has length {}, expected {}", j, columns[j].len(), n));
    }
    Ok(())
}

fn linear_predictor(columns: &[&[f64]], beta: &[f64], n: usize) -> Vec<f64> {
    let mut eta = vec![0.0; n];
    for (c, &b) in columns.iter().zip(beta) {
        for (e, &x) in eta.iter_mut().zip(c.iter()) {
            *e += b * x;
        }
    }
    eta
}

/// Fits from the default start: intercept at the link of the mean response,
/// all other coefficients zero.
pub fn fit_glm(problem: &FitProblem<'_>, opts: &FitOptions) -> Result<FitResult> {
    let n = problem.n() as f64;
    let ybar = problem.response.iter().sum::<f64>() / n;
    let mut start = vec![0.0; problem.m()];
    start[0] = problem.family.link_clamped(ybar);
    fit_glm_from(problem, opts, &start)
}

/// Fits from the given starting coefficients.
pub fn fit_glm_from(
    problem: &FitProblem<'_>,
    opts: &FitOptions,
    start: &[f64],
) -> Result<FitResult> {
    let m = problem.m();
    let nobs = problem.n();
    let n = nobs as f64;
    if start.len() != m {
        return Err(contract!("start has {} entries, design has {} columns", start.len(), m));
    }
    let gram = cross_product(&problem.columns, None);
    linalg::cholesky(&gram, DEPENDENCE_TOL).map_err(|column| Error::RankDeficient { column })?;

    let family = problem.family;
    let y = problem.response;
    let bound = problem.coef_bound;
    let clamp = |v: f64| v.clamp(-bound, bound);

    let mut beta: Vec<f64> = start.iter().map(|&v| clamp(v)).collect();
    let mut eta = vec![0.0; nobs];
    let mut trial = vec![0.0; nobs];
    let mut cand = vec![0.0; m];
    let mut resid = vec![0.0; nobs];
    let mut weights = vec![0.0; nobs];

    problem.linear_predictor(&beta, &mut eta);
    let mut f = mean_nll(family, &eta, y);
    let mut trace = Vec::new();
    if opts.record_trace {
        trace.push(f);
    }

    let mut iterations = 0;
    let mut boundary_stop = false;
    let mut gnorm;
    loop {
        for i in 0..nobs {
            let c = family.cumulant_unchecked(eta[i]);
            resid[i] = c.b1 - y[i];
            weights[i] = c.b2 / n;
        }
        let grad: Vec<f64> = problem
            .columns
            .iter()
            .map(|c| linalg::dot(c, &resid) / n)
            .collect();
        gnorm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gnorm <= opts.tol || iterations >= opts.max_iter {
            break;
        }
        let hess = cross_product(&problem.columns, Some(&weights));
        let dir = newton_direction(&hess, &gram, n, &grad);

        let mut accepted = false;
        let mut t = 1.0;
        for _ in 0..=MAX_HALVINGS {
            for k in 0..m {
                cand[k] = clamp(beta[k] - t * dir[k]);
            }
            problem.linear_predictor(&cand, &mut trial);
            let fc = mean_nll(family, &trial, y);
            if fc.is_finite() && fc <= f {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        let moved = cand.iter().zip(&beta).any(|(a, b)| a != b);
        let f_new = mean_nll(family, &trial, y);
        let on_box = cand.iter().any(|v| v.abs() >= bound);
        let stalled = f - f_new <= 1e-14 * f.abs().max(1.0);
        core::mem::swap(&mut beta, &mut cand);
        core::mem::swap(&mut eta, &mut trial);
        f = f_new;
        if opts.record_trace {
            trace.push(f);
        }
        if on_box && stalled {
            boundary_stop = true;
        }
        if !moved || boundary_stop {
            // final gradient evaluated below
            for i in 0..nobs {
                resid[i] = family.mean(eta[i]) - y[i];
            }
            gnorm = problem
                .columns
                .iter()
                .fold(0.0f64, |a, c| a.max((linalg::dot(c, &resid) / n).abs()));
            break;
        }
    }

    let at_boundary = beta.iter().any(|v| v.abs() >= bound);
    let information = observed_information(family, &problem.columns, &beta)?;
    Ok(FitResult {
        coefficients: beta,
        nll: f,
        information,
        converged: gnorm <= opts.tol || (boundary_stop && at_boundary),
        at_boundary,
        iterations,
        gradient_norm: gnorm,
        objective_trace: trace,
    })
}

/// Solves `H d = g`: Cholesky first, then pivoted elimination, then
/// Levenberg damping along the design's own scale.
fn newton_direction(hess: &Matrix, gram: &Matrix, n: f64, grad: &[f64]) -> Vec<f64> {
    if let Ok(ch) = linalg::cholesky(hess, 1e-14) {
        return ch.solve(grad);
    }
    if let Some(d) = lu_solve(hess, grad) {
        if d.iter().all(|v| v.is_finite()) {
            return d;
        }
    }
    let m = hess.rows();
    let mut mu = 1e-8;
    loop {
        let mut damped = hess.clone();
        for k in 0..m {
            damped.set(k, k, hess.get(k, k) + mu * gram.get(k, k) / n);
        }
        if let Ok(ch) = linalg::cholesky(&damped, 1e-14) {
            return ch.solve(grad);
        }
        mu *= 10.0;
        if mu > 1e8 {
            // gradient step scaled by the design
            return (0..m).map(|k| grad[k] * n / gram.get(k, k)).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let ones = [1.0; 3];
        let x = [-1.0, 0.0, 1.0];
        let y = [-2.0, 0.0, 2.0];
        let p = FitProblem::new(vec![&ones, &x], &y, Family::Gaussian).unwrap();
        let r = fit_glm(&p, &FitOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.coefficients[0].abs() < 1e-14);
        assert!((r.coefficients[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let ones = [1.0; 4];
        let x = [0.0, 1.0, 2.0, 3.0];
        let z = [1.0, 3.0, 5.0, 7.0]; // 1 + 2x
        let y = [0.0, 1.0, 0.0, 1.0];
        let p = FitProblem::new(vec![&ones, &x, &z], &y, Family::BinomialLogit).unwrap();
        assert_eq!(
            fit_glm(&p, &FitOptions::default()).unwrap_err(),
            Error::RankDeficient { column: 2 }
        );
    }

    #[test]
    fn problem_contract() {
        let ones = [1.0; 2];
        let x = [0.0, 1.0];
        let y = [0.0, 1.0];
        assert!(FitProblem::new(vec![&ones, &x, &x], &y, Family::Gaussian).is_err());
        assert!(FitProblem::new(vec![&x], &y, Family::Gaussian).is_err());
        assert!(FitProblem::new(vec![&ones], &y, Family::Gaussian)
            .unwrap()
            .with_coef_bound(0.0)
            .is_err());
    }

    #[test]
    fn separation_hits_the_box() {
        let ones = [1.0; 6];
        let x = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let p = FitProblem::new(vec![&ones, &x], &y, Family::BinomialLogit)
            .unwrap()
            .with_coef_bound(5.0)
            .unwrap();
        let r = fit_glm(&p, &FitOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!(r.at_boundary, "{r:?}");
        assert_eq!(r.coefficients[1], 5.0);
    }

    #[test]
    fn information_examples() {
        let ones = [1.0; 4];
        let info = observed_information(Family::BinomialLogit, &[&ones], &[0.0]).unwrap();
        assert_eq!(info.get(0, 0), 0.25);
        let ones = [1.0; 2];
        let info = observed_information(Family::Poisson, &[&ones], &[0.0]).unwrap();
        assert_eq!(info.get(0, 0), 1.0);
    }

    #[test]
    fn poisson_recovers_log_mean() {
        let ones = [1.0; 4];
        let y = [1.0, 2.0, 3.0, 6.0];
        let p = FitProblem::new(vec![&ones], &y, Family::Poisson).unwrap();
        let r = fit_glm_from(&p, &FitOptions::default(), &[0.0]).unwrap();
        assert!(r.converged);
        assert!((r.coefficients[0] - libm::log(3.0)).abs() < 1e-9);
    }

    #[test]
    fn non_converged_when_out_of_iterations() {
        let ones = [1.0; 4];
        let x = [0.3, -1.0, 2.0, 0.5];
        let y = [1.0, 0.0, 1.0, 0.0];
        let p = FitProblem::new(vec![&ones, &x], &y, Family::BinomialLogit).unwrap();
        let opts = FitOptions {
            max_iter: 0,
            ..FitOptions::default()
        };
        let r = fit_glm(&p, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 0);
    }
}
