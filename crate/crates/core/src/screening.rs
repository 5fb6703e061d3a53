//! Conditional marginal screening sweeps.
//!
//! For every candidate column `j` outside the conditioning set `𝒞` the GLM
//! is fitted on `[1 | X_𝒞 | X_j]`. The last coefficient is the conditional
//! marginal coefficient, the minimized mean negative log-likelihood is the
//! likelihood statistic, and `|β̂ⱼ| / se(β̂ⱼ)` is the Wald statistic. With an
//! empty conditioning set this is plain marginal (SIS / MLR) screening.
//!
//! Gaussian sweeps factor the conditioning block `[1 | X_𝒞]ᵀ[1 | X_𝒞]` once
//! and border it with each candidate: the candidate coefficient is the
//! partial cross-product over the Schur complement, which is the exact
//! least-squares solution. Other families refit per candidate, warm-started
//! from the conditioning-only fit.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{ConditioningSet, Dataset};
use crate::error::{Error, Result};
use crate::family::Family;
use crate::glm::{fit_glm, fit_glm_from, FitOptions, FitProblem, DEFAULT_COEF_BOUND};
use crate::linalg::{self, cross_product, dot, Cholesky, DEPENDENCE_TOL};

/// Which information entry scales the Wald statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WaldMode {
    /// `se² = [I⁻¹]_jj / n`: the usual Wald statistic, accounting for the
    /// conditioning covariates.
    #[default]
    InverseInformation,
    /// `z = (n I_jj)^{1/2} |β̂ⱼ|`: the raw diagonal entry of the information.
    RawDiagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    /// Descending `|β̂ⱼ|` (CSIS / SIS).
    Magnitude,
    /// Ascending minimized negative log-likelihood (CMLR / MLR).
    Likelihood,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenOptions {
    pub fit: FitOptions,
    pub wald: WaldMode,
    /// Use the bordered closed form for gaussian sweeps.
    pub gaussian_fast_path: bool,
    /// Box bound for the per-feature fits.
    pub coef_bound: f64,
    /// Run the sweep on the rayon pool (needs the `parallel` feature;
    /// ignored otherwise). Output is identical either way.
    pub parallel: bool,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            wald: WaldMode::default(),
            gaussian_fast_path: true,
            coef_bound: DEFAULT_COEF_BOUND,
            parallel: true,
        }
    }
}

/// Statistics of one candidate feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureStat {
    /// Column index in the dataset.
    pub index: usize,
    /// Conditional marginal coefficient β̂ⱼ.
    pub coef: f64,
    /// Minimized mean negative log-likelihood with the feature added.
    pub nll: f64,
    /// Wald statistic `|β̂ⱼ| / se(β̂ⱼ)`.
    pub wald: f64,
    pub converged: bool,
    pub at_boundary: bool,
}

impl FeatureStat {
    fn failed(index: usize, baseline_nll: f64) -> Self {
        Self {
            index,
            coef: 0.0,
            nll: baseline_nll,
            wald: 0.0,
            converged: false,
            at_boundary: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenStatistics {
    /// One entry per candidate, in ascending column order.
    pub features: Vec<FeatureStat>,
    /// Minimized mean negative log-likelihood of the conditioning-only fit.
    pub baseline_nll: f64,
    /// Sample size the statistics were computed from.
    pub n: usize,
    pub family: Family,
}

impl ScreenStatistics {
    /// d, the number of candidates.
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn candidates(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.index).collect()
    }

    /// Statistics of column `index`, if it is a candidate.
    pub fn get(&self, index: usize) -> Option<&FeatureStat> {
        self.features
            .binary_search_by_key(&index, |f| f.index)
            .ok()
            .map(|k| &self.features[k])
    }

    pub fn converged_count(&self) -> usize {
        self.features.iter().filter(|f| f.converged).count()
    }

    pub fn select_by_magnitude(&self, gamma: f64) -> Vec<usize> {
        select_by_magnitude(self, gamma)
    }

    pub fn select_by_likelihood(&self, gamma_tilde: f64) -> Vec<usize> {
        select_by_likelihood(self, gamma_tilde)
    }

    pub fn rank(&self, by: RankBy) -> Vec<usize> {
        rank_features(self, by)
    }
}

/// Row order applied to the candidate columns (the conditioning columns and
/// the response are never permuted).
#[derive(Debug, Clone, Copy)]
pub(crate) enum RowMap<'a> {
    Identity,
    /// One permutation shared by every candidate column.
    Joint(&'a [usize]),
    /// One permutation per candidate, indexed by candidate position.
    PerColumn(&'a [Vec<usize>]),
}

/// Runs the conditional marginal fit for every candidate column.
pub fn screen_conditional(
    data: &Dataset,
    cond: &ConditioningSet,
    family: Family,
    opts: &ScreenOptions,
) -> Result<ScreenStatistics> {
    screen_with_rows(data, cond, family, opts, RowMap::Identity)
}

pub(crate) fn screen_with_rows(
    data: &Dataset,
    cond: &ConditioningSet,
    family: Family,
    opts: &ScreenOptions,
    rows: RowMap<'_>,
) -> Result<ScreenStatistics> {
    if let Some(&j) = cond.indices().iter().find(|&&j| j >= data.p()) {
        return Err(crate::error::contract!(
            "conditioning index {} out of range for p={}",
            j,
            data.p()
        ));
    }
    family.validate_response(data.y())?;
    let candidates = cond.candidates(data.p());
    let sweep = Sweep::prepare(data, cond, family, opts, rows)?;

    #[cfg(feature = "parallel")]
    let features: Vec<FeatureStat> = if opts.parallel {
        use rayon::prelude::*;
        candidates
            .par_iter()
            .enumerate()
            .map(|(k, &j)| sweep.feature(k, j))
            .collect()
    } else {
        candidates
            .iter()
            .enumerate()
            .map(|(k, &j)| sweep.feature(k, j))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let features: Vec<FeatureStat> = candidates
        .iter()
        .enumerate()
        .map(|(k, &j)| sweep.feature(k, j))
        .collect();

    Ok(ScreenStatistics {
        features,
        baseline_nll: sweep.baseline_nll,
        n: data.n(),
        family,
    })
}

struct GaussianBlock {
    chol: Cholesky,
    /// `L⁻¹ X_𝒞ᵀ y`
    proj_y: Vec<f64>,
}

struct Sweep<'a> {
    data: &'a Dataset,
    family: Family,
    opts: ScreenOptions,
    rows: RowMap<'a>,
    ones: Vec<f64>,
    cond_indices: Vec<usize>,
    cond_cols: Vec<&'a [f64]>,
    baseline_nll: f64,
    baseline_beta: Vec<f64>,
    gaussian: Option<GaussianBlock>,
}

impl<'a> Sweep<'a> {
    fn prepare(
        data: &'a Dataset,
        cond: &ConditioningSet,
        family: Family,
        opts: &ScreenOptions,
        rows: RowMap<'a>,
    ) -> Result<Self> {
        let n = data.n();
        let ones = vec![1.0; n];
        let cond_cols: Vec<&[f64]> = cond.indices().iter().map(|&j| data.x().col(j)).collect();
        let mut sweep = Sweep {
            data,
            family,
            opts: *opts,
            rows,
            ones,
            cond_indices: cond.indices().to_vec(),
            cond_cols,
            baseline_nll: 0.0,
            baseline_beta: Vec::new(),
            gaussian: None,
        };
        if family == Family::Gaussian && opts.gaussian_fast_path {
            let cols = sweep.base_columns();
            let gram = cross_product(&cols, None);
            let chol = linalg::cholesky(&gram, DEPENDENCE_TOL)
                .map_err(|k| Error::RankDeficient { column: sweep.design_column(k) })?;
            let xty: Vec<f64> = cols.iter().map(|c| dot(c, data.y())).collect();
            let proj_y = chol.forward(&xty);
            // min (1/n) Σ (η²/2 − ηy) = −‖ŷ‖²/(2n)
            sweep.baseline_nll = -dot(&proj_y, &proj_y) / (2.0 * n as f64);
            sweep.baseline_beta = chol.backward(&proj_y);
            sweep.gaussian = Some(GaussianBlock { chol, proj_y });
        } else {
            let cols = sweep.base_columns();
            let problem = FitProblem::new_unchecked(cols, data.y(), family)
                .with_coef_bound(opts.coef_bound)?;
            let fit = fit_glm(&problem, &opts.fit).map_err(|e| match e {
                Error::RankDeficient { column } => Error::RankDeficient {
                    column: sweep.design_column(column),
                },
                other => other,
            })?;
            sweep.baseline_nll = fit.nll;
            sweep.baseline_beta = fit.coefficients;
        }
        Ok(sweep)
    }

    /// Maps a position in `[1 | X_𝒞]` back to a dataset column (the
    /// intercept reports as `usize::MAX`).
    fn design_column(&self, k: usize) -> usize {
        k.checked_sub(1)
            .map_or(usize::MAX, |c| self.cond_indices[c])
    }

    fn base_columns(&self) -> Vec<&[f64]> {
        let mut cols = Vec::with_capacity(self.cond_cols.len() + 2);
        cols.push(self.ones.as_slice());
        cols.extend_from_slice(&self.cond_cols);
        cols
    }

    fn feature(&self, pos: usize, j: usize) -> FeatureStat {
        let raw = self.data.x().col(j);
        let gathered: Vec<f64>;
        let x: &[f64] = match self.rows {
            RowMap::Identity => raw,
            RowMap::Joint(perm) => {
                gathered = perm.iter().map(|&i| raw[i]).collect();
                &gathered
            }
            RowMap::PerColumn(perms) => {
                gathered = perms[pos].iter().map(|&i| raw[i]).collect();
                &gathered
            }
        };
        match &self.gaussian {
            Some(block) => self.gaussian_feature(block, j, x),
            None => self.general_feature(j, x),
        }
    }

    fn gaussian_feature(&self, block: &GaussianBlock, j: usize, x: &[f64]) -> FeatureStat {
        let n = self.data.n() as f64;
        let cross: Vec<f64> = self.base_columns().iter().map(|c| dot(c, x)).collect();
        let v = block.chol.forward(&cross);
        let xx = dot(x, x);
        let schur = xx - dot(&v, &v);
        if !(schur > DEPENDENCE_TOL * xx) {
            return FeatureStat::failed(j, self.baseline_nll);
        }
        let partial = dot(x, self.data.y()) - dot(&v, &block.proj_y);
        let coef = partial / schur;
        let nll = self.baseline_nll - partial * partial / (2.0 * n * schur);
        let wald = match self.opts.wald {
            WaldMode::InverseInformation => coef.abs() * libm::sqrt(schur),
            WaldMode::RawDiagonal => coef.abs() * libm::sqrt(xx),
        };
        FeatureStat {
            index: j,
            coef,
            nll,
            wald,
            converged: true,
            at_boundary: false,
        }
    }

    fn general_feature(&self, j: usize, x: &[f64]) -> FeatureStat {
        let mut cols = self.base_columns();
        cols.push(x);
        let m = cols.len();
        let problem = match FitProblem::new_unchecked(cols, self.data.y(), self.family)
            .with_coef_bound(self.opts.coef_bound)
        {
            Ok(p) => p,
            Err(_) => return FeatureStat::failed(j, self.baseline_nll),
        };
        let mut start = self.baseline_beta.clone();
        start.push(0.0);
        let fit = match fit_glm_from(&problem, &self.opts.fit, &start) {
            Ok(fit) => fit,
            Err(_) => return FeatureStat::failed(j, self.baseline_nll),
        };
        let coef = fit.coefficients[m - 1];
        let n = self.data.n() as f64;
        let wald = match self.opts.wald {
            WaldMode::InverseInformation => linalg::cholesky(&fit.information, 1e-14)
                .ok()
                .map(|ch| ch.inverse().get(m - 1, m - 1))
                .filter(|v| *v > 0.0 && v.is_finite())
                .map_or(0.0, |inv| coef.abs() * libm::sqrt(n / inv)),
            WaldMode::RawDiagonal => coef.abs() * libm::sqrt(n * fit.information.get(m - 1, m - 1)),
        };
        FeatureStat {
            index: j,
            coef,
            nll: fit.nll,
            wald,
            converged: fit.converged,
            at_boundary: fit.at_boundary,
        }
    }
}

/// `{ j : |β̂ⱼ| > γ }` over converged candidates, ascending.
pub fn select_by_magnitude(stats: &ScreenStatistics, gamma: f64) -> Vec<usize> {
    stats
        .features
        .iter()
        .filter(|f| f.converged && f.coef.abs() > gamma)
        .map(|f| f.index)
        .collect()
}

/// `{ j : R̂ⱼ < γ̃ }` over converged candidates, ascending.
pub fn select_by_likelihood(stats: &ScreenStatistics, gamma_tilde: f64) -> Vec<usize> {
    stats
        .features
        .iter()
        .filter(|f| f.converged && f.nll < gamma_tilde)
        .map(|f| f.index)
        .collect()
}

/// Candidates from most to least important. Non-converged candidates come
/// last; ties go to the smaller column index.
pub fn rank_features(stats: &ScreenStatistics, by: RankBy) -> Vec<usize> {
    let mut order: Vec<&FeatureStat> = stats.features.iter().collect();
    order.sort_by(|a, b| {
        b.converged
            .cmp(&a.converged)
            .then_with(|| match by {
                RankBy::Magnitude => b.coef.abs().total_cmp(&a.coef.abs()),
                RankBy::Likelihood => a.nll.total_cmp(&b.nll),
            })
            .then_with(|| a.index.cmp(&b.index))
    });
    order.into_iter().map(|f| f.index).collect()
}
