//! Data-driven screening thresholds.
//!
//! Two rules:
//!
//! * **FDR**: keep candidates whose Wald statistic reaches
//!   `δ = Φ⁻¹(1 − f/(2d))`, so that about `f` of `d` null candidates pass.
//! * **Random decoupling**: permute the rows of the candidate columns
//!   (conditioning columns and response untouched) `K` times, rerun the
//!   sweep on each decoupled copy, pool the null magnitudes and use their
//!   `τ`-quantile as the threshold.

use alloc::vec::Vec;

use crate::data::{ConditioningSet, Dataset, Matrix};
use crate::error::{contract, domain, Result};
use crate::family::Family;
use crate::normal;
use crate::rng::{derive_seed, Philox};
use crate::screening::{
    screen_with_rows, select_by_likelihood, select_by_magnitude, RankBy, RowMap, ScreenOptions,
    ScreenStatistics,
};

/// Stream tag for decoupling permutations; repetition `k` of a run with
/// master seed `s` draws from `derive_seed(s, DECOUPLING_STREAM, k)`.
pub const DECOUPLING_STREAM: u64 = 0x6465_636f_7570_6c65;

pub const DEFAULT_REPETITIONS: usize = 5;
pub const DEFAULT_TAU: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdKind {
    /// A fixed magnitude threshold γ.
    FixedGamma(f64),
    /// Wald-statistic threshold tolerating about `f` false positives.
    Fdr { f: f64 },
    /// Random decoupling with `repetitions` permutations and quantile `tau`.
    Decoupling { repetitions: usize, tau: f64, seed: u64 },
}

/// A selection rule together with the threshold it produced, once evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    pub kind: ThresholdKind,
    pub realized_threshold: Option<f64>,
}

impl ThresholdRule {
    pub fn new(kind: ThresholdKind) -> Result<Self> {
        match kind {
            ThresholdKind::FixedGamma(g) if !(g >= 0.0) => {
                return Err(domain!("fixed threshold must be >= 0, got {}", g))
            }
            ThresholdKind::Fdr { f } if !(f > 0.0) => {
                return Err(domain!("tolerated false positives must be > 0, got {}", f))
            }
            ThresholdKind::Decoupling { repetitions, tau, .. } => {
                if repetitions == 0 {
                    return Err(domain!("decoupling needs at least one repetition"));
                }
                if !(tau > 0.0 && tau <= 1.0) {
                    return Err(domain!("tau must lie in (0, 1], got {}", tau));
                }
            }
            _ => {}
        }
        Ok(Self {
            kind,
            realized_threshold: None,
        })
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            ThresholdKind::FixedGamma(_) => "gamma",
            ThresholdKind::Fdr { .. } => "fdr",
            ThresholdKind::Decoupling { .. } => "pi",
        }
    }
}

/// `Φ⁻¹(p)`, absolute error well below 1e-9.
pub fn normal_quantile(p: f64) -> Result<f64> {
    normal::quantile(p)
}

/// The customary tolerance `f = n / ln n`.
pub fn default_fdr_tolerance(n: usize) -> f64 {
    let n = n as f64;
    n / libm::log(n)
}

/// `δ = Φ⁻¹(1 − f/(2d))`.
pub fn fdr_delta(d: usize, f: f64) -> Result<f64> {
    if d == 0 {
        return Err(contract!("no candidate features"));
    }
    if !(f > 0.0) {
        return Err(contract!("tolerated false positives must be > 0, got {}", f));
    }
    if f >= 2.0 * d as f64 {
        return Err(contract!("f = {} must be below 2d = {}", f, 2 * d));
    }
    // 1 − f/(2d) without cancellation: quantile(1 − q) = −quantile(q)
    let q = f / (2.0 * d as f64);
    Ok(-normal::quantile(q)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrSelection {
    pub delta: f64,
    pub selected: Vec<usize>,
}

/// Selects converged candidates with Wald statistic `≥ δ`. A zero statistic
/// is never selected, which only matters when `f ≥ d` pushes `δ` to zero or
/// below.
pub fn fdr_select(stats: &ScreenStatistics, d: usize, f: f64) -> Result<FdrSelection> {
    let delta = fdr_delta(d, f)?;
    let selected = stats
        .features
        .iter()
        .filter(|s| s.converged && s.wald >= delta && s.wald > 0.0)
        .map(|s| s.index)
        .collect();
    Ok(FdrSelection { delta, selected })
}

/// How rows of the candidate columns are shuffled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PermutationMode {
    /// One row permutation shared by all candidate columns.
    #[default]
    Joint,
    /// An independent permutation per candidate column.
    PerColumn,
}

/// Which values the quantile is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// All `K·d` decoupled statistics.
    #[default]
    Pooled,
    /// The `K` per-repetition maxima.
    RepetitionMax,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecouplingOptions {
    pub repetitions: usize,
    pub tau: f64,
    pub seed: u64,
    pub mode: PermutationMode,
    pub pooling: Pooling,
}

impl Default for DecouplingOptions {
    fn default() -> Self {
        Self {
            repetitions: DEFAULT_REPETITIONS,
            tau: DEFAULT_TAU,
            seed: 0,
            mode: PermutationMode::Joint,
            pooling: Pooling::Pooled,
        }
    }
}

impl DecouplingOptions {
    fn validate(&self) -> Result<()> {
        ThresholdRule::new(ThresholdKind::Decoupling {
            repetitions: self.repetitions,
            tau: self.tau,
            seed: self.seed,
        })
        .map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecouplingOutcome {
    /// γ*_τ.
    pub threshold: f64,
    /// Number of values the quantile was taken over.
    pub pool_size: usize,
    /// Decoupled fits left out of the pool because they did not converge.
    pub excluded_fits: usize,
}

enum Permutations {
    Joint(Vec<usize>),
    PerColumn(Vec<Vec<usize>>),
}

fn draw_permutations(n: usize, d: usize, mode: PermutationMode, seed: u64, k: usize) -> Permutations {
    let mut rng = Philox::new(derive_seed(seed, DECOUPLING_STREAM, k as u64));
    match mode {
        PermutationMode::Joint => Permutations::Joint(rng.permutation(n)),
        PermutationMode::PerColumn => {
            Permutations::PerColumn((0..d).map(|_| rng.permutation(n)).collect())
        }
    }
}

/// Decoupled copy of `data` for repetition `k`: candidate columns have their
/// rows permuted; conditioning columns and the response are copied as is.
pub fn decouple(
    data: &Dataset,
    cond: &ConditioningSet,
    mode: PermutationMode,
    seed: u64,
    k: usize,
) -> Result<Dataset> {
    let candidates = cond.candidates(data.p());
    let perms = draw_permutations(data.n(), candidates.len(), mode, seed, k);
    let mut x: Matrix = data.x().clone();
    for (pos, &j) in candidates.iter().enumerate() {
        let perm = match &perms {
            Permutations::Joint(p) => p,
            Permutations::PerColumn(ps) => &ps[pos],
        };
        let src = data.x().col(j);
        let dst = x.col_mut(j);
        for (d, &i) in dst.iter_mut().zip(perm) {
            *d = src[i];
        }
    }
    let out = Dataset::new(x, data.y().to_vec())?;
    match data.column_names() {
        Some(names) => out.with_column_names(names.to_vec()),
        None => Ok(out),
    }
}

/// Runs the sweep on each of the `K` decoupled copies. The caller's data is
/// never modified; permutations are applied through row indirection.
pub fn decoupled_statistics(
    data: &Dataset,
    cond: &ConditioningSet,
    family: Family,
    opts: &DecouplingOptions,
    screen: &ScreenOptions,
) -> Result<Vec<ScreenStatistics>> {
    opts.validate()?;
    let d = cond.candidates(data.p()).len();
    (0..opts.repetitions)
        .map(|k| {
            let perms = draw_permutations(data.n(), d, opts.mode, opts.seed, k);
            let rows = match &perms {
                Permutations::Joint(p) => RowMap::Joint(p),
                Permutations::PerColumn(ps) => RowMap::PerColumn(ps),
            };
            screen_with_rows(data, cond, family, screen, rows)
        })
        .collect()
}

/// Lower step quantile: the `⌈τ·m⌉`-th smallest of `m` values (1-based).
/// Sorts `values` in place. `None` for an empty slice.
pub fn step_quantile(values: &mut [f64], tau: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let m = values.len();
    // the small offset keeps products like 0.99 * 2500 on the intended integer
    let pos = libm::ceil(tau * m as f64 - 1e-9) as usize;
    Some(values[pos.clamp(1, m) - 1])
}

/// Null statistic of one decoupled feature: `|β̂|` for magnitude screening,
/// the likelihood reduction over the baseline for likelihood screening.
fn null_value(stats: &ScreenStatistics, coef: f64, nll: f64, by: RankBy) -> f64 {
    match by {
        RankBy::Magnitude => coef.abs(),
        RankBy::Likelihood => (stats.baseline_nll - nll).max(0.0),
    }
}

/// γ*_τ from already computed decoupled sweeps.
pub fn decoupling_threshold_from(
    decoupled: &[ScreenStatistics],
    tau: f64,
    pooling: Pooling,
    by: RankBy,
) -> Result<DecouplingOutcome> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(domain!("tau must lie in (0, 1], got {}", tau));
    }
    let mut excluded = 0;
    let mut pool = Vec::new();
    for stats in decoupled {
        let mut rep_max: Option<f64> = None;
        for f in &stats.features {
            if !f.converged {
                excluded += 1;
                continue;
            }
            let v = null_value(stats, f.coef, f.nll, by);
            match pooling {
                Pooling::Pooled => pool.push(v),
                Pooling::RepetitionMax => rep_max = Some(rep_max.map_or(v, |m: f64| m.max(v))),
            }
        }
        if let Some(m) = rep_max {
            pool.push(m);
        }
    }
    let pool_size = pool.len();
    let threshold = step_quantile(&mut pool, tau)
        .ok_or_else(|| contract!("no converged decoupled fits to take a quantile over"))?;
    Ok(DecouplingOutcome {
        threshold,
        pool_size,
        excluded_fits: excluded,
    })
}

/// γ*_τ for magnitude (CSIS) screening.
pub fn decoupling_threshold(
    data: &Dataset,
    cond: &ConditioningSet,
    family: Family,
    opts: &DecouplingOptions,
    screen: &ScreenOptions,
) -> Result<DecouplingOutcome> {
    let decoupled = decoupled_statistics(data, cond, family, opts, screen)?;
    decoupling_threshold_from(&decoupled, opts.tau, opts.pooling, RankBy::Magnitude)
}

/// Applies a decoupling threshold to the original statistics: magnitudes
/// above γ*, or likelihood reductions above γ* for likelihood screening.
pub fn select_by_decoupling(stats: &ScreenStatistics, threshold: f64, by: RankBy) -> Vec<usize> {
    match by {
        RankBy::Magnitude => select_by_magnitude(stats, threshold),
        RankBy::Likelihood => select_by_likelihood(stats, stats.baseline_nll - threshold),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn quantile_of_tenths() {
        let mut v: Vec<f64> = (1..=10).rev().map(|k| k as f64 / 10.0).collect();
        assert_eq!(step_quantile(&mut v, 1.0), Some(1.0));
        assert_eq!(step_quantile(&mut v, 0.5), Some(0.5));
        assert_eq!(step_quantile(&mut v, 0.01), Some(0.1));
        assert_eq!(step_quantile(&mut v, 0.95), Some(1.0));
        assert_eq!(step_quantile(&mut [], 0.5), None);
    }

    #[test]
    fn quantile_index_is_exact_for_decimal_tau() {
        let mut v: Vec<f64> = (1..=2500).map(|k| k as f64).collect();
        assert_eq!(step_quantile(&mut v, 0.99), Some(2475.0));
    }

    #[test]
    fn rule_validation() {
        assert!(ThresholdRule::new(ThresholdKind::Fdr { f: 0.0 }).is_err());
        assert!(ThresholdRule::new(ThresholdKind::Decoupling { repetitions: 0, tau: 0.9, seed: 1 }).is_err());
        assert!(ThresholdRule::new(ThresholdKind::Decoupling { repetitions: 1, tau: 0.0, seed: 1 }).is_err());
        assert!(ThresholdRule::new(ThresholdKind::Decoupling { repetitions: 1, tau: 1.0, seed: 1 }).is_ok());
        assert!(ThresholdRule::new(ThresholdKind::FixedGamma(-1.0)).is_err());
    }

    #[test]
    fn delta_contract() {
        assert!(fdr_delta(10, 20.0).is_err());
        assert!(fdr_delta(10, 0.0).is_err());
        assert!(fdr_delta(0, 1.0).is_err());
        assert!(fdr_delta(10, 9.9).unwrap() > 0.0);
        assert!(fdr_delta(10, 19.9).unwrap() < 0.0);
    }

    #[test]
    fn default_tolerance() {
        assert!((default_fdr_tolerance(100) - 100.0 / libm::log(100.0)).abs() < 1e-12);
    }

    #[test]
    fn repetition_max_pooling() {
        use crate::screening::FeatureStat;
        let mk = |coefs: &[f64]| ScreenStatistics {
            features: coefs
                .iter()
                .enumerate()
                .map(|(index, &coef)| FeatureStat {
                    index,
                    coef,
                    nll: 0.0,
                    wald: 0.0,
                    converged: true,
                    at_boundary: false,
                })
                .collect(),
            baseline_nll: 0.0,
            n: 5,
            family: Family::Gaussian,
        };
        let reps = vec![mk(&[0.1, -0.7, 0.2]), mk(&[0.3, 0.4, -0.2])];
        let pooled = decoupling_threshold_from(&reps, 1.0, Pooling::Pooled, RankBy::Magnitude).unwrap();
        assert_eq!(pooled.threshold, 0.7);
        assert_eq!(pooled.pool_size, 6);
        let maxima =
            decoupling_threshold_from(&reps, 0.5, Pooling::RepetitionMax, RankBy::Magnitude).unwrap();
        assert_eq!(maxima.pool_size, 2);
        assert_eq!(maxima.threshold, 0.4);
    }
}
