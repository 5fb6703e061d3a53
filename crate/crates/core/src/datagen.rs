//! Seeded simulation designs and response models.
//!
//! All draws come from [`Philox`] streams keyed by child seeds, so a
//! replication is a pure function of `(spec, seed, replication index)`.
//! Within a replication the covariates use stream 0, the response stream 1
//! and random conditioning sets stream 2.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::data::{ConditioningSet, Dataset, Matrix};
use crate::error::{contract, domain, Result};
use crate::family::Family;
use crate::rng::{derive_seed, Philox};

/// Stream tag for per-replication data seeds.
pub const DATA_STREAM: u64 = 0x6461_7461;

const COVARIATE_STREAM: u64 = 0;
const RESPONSE_STREAM: u64 = 1;
const CONDITIONING_STREAM: u64 = 2;

/// Linear predictors are clamped to this magnitude before the inverse link.
pub const ETA_CLAMP: f64 = 30.0;

/// Factor loadings for the factor-mixture design.
#[derive(Debug, Clone, PartialEq)]
pub enum Loadings {
    /// The same loading on columns `0..count`, zero elsewhere.
    Constant { value: f64, count: usize },
    /// `max(0, N(mean, 1))` loadings on columns `0..count`, drawn per
    /// replication.
    TruncatedNormal { mean: f64, count: usize },
    /// One loading per column.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovariateModel {
    /// Columns in `correlated` share pairwise correlation `rho`; the rest
    /// are independent standard normal.
    Equicorrelated { rho: f64, correlated: Range<usize> },
    FactorMixture { loadings: Loadings },
}

/// A sparse coefficient vector of length `p`, entries sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoefficients {
    p: usize,
    entries: Vec<(usize, f64)>,
}

impl SparseCoefficients {
    pub fn new(p: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, b)| b != 0.0);
        entries.sort_by_key(|&(j, _)| j);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(contract!("coefficient {} given twice", w[0].0));
            }
        }
        if let Some(&(j, _)) = entries.last() {
            if j >= p {
                return Err(contract!("coefficient index {} out of range for p = {}", j, p));
            }
        }
        if entries.iter().any(|&(_, b)| !b.is_finite()) {
            return Err(domain!("coefficients must be finite"));
        }
        Ok(Self { p, entries })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Support, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|&(j, _)| j).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.p];
        for &(j, v) in &self.entries {
            b[j] = v;
        }
        b
    }

    /// `Xβ` for an `n × p` matrix.
    pub fn linear_predictor(&self, x: &Matrix) -> Vec<f64> {
        let mut eta = vec![0.0; x.rows()];
        for &(j, b) in &self.entries {
            for (e, v) in eta.iter_mut().zip(x.col(j)) {
                *e += b * v;
            }
        }
        eta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConditioningSpec {
    Fixed(Vec<usize>),
    /// `from_head` inactive columns drawn from `0..head` and `from_tail`
    /// inactive columns from `head..p`, redrawn every replication.
    RandomInactive {
        head: usize,
        from_head: usize,
        from_tail: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: String,
    pub n: usize,
    pub p: usize,
    pub covariates: CovariateModel,
    pub beta_star: SparseCoefficients,
    pub conditioning: ConditioningSpec,
    pub family: Family,
    pub replications: usize,
    pub seed: u64,
    /// Correlation parameter reported alongside results.
    pub rho: f64,
}

pub const DEFAULT_REPLICATIONS: usize = 200;

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p < 1 {
            return Err(contract!("need n >= 2 and p >= 1, got n = {}, p = {}", self.n, self.p));
        }
        if self.beta_star.p() != self.p {
            return Err(contract!("coefficient length {} differs from p = {}", self.beta_star.p(), self.p));
        }
        match &self.covariates {
            CovariateModel::Equicorrelated { rho, correlated } => {
                check_rho(*rho)?;
                if correlated.end > self.p {
                    return Err(contract!("correlated block {:?} exceeds p = {}", correlated, self.p));
                }
            }
            CovariateModel::FactorMixture { loadings } => match loadings {
                Loadings::Constant { value, count } => {
                    if !(*value >= 0.0) || *count > self.p {
                        return Err(domain!("invalid constant loadings"));
                    }
                }
                Loadings::TruncatedNormal { mean, count } => {
                    if !mean.is_finite() || *count > self.p {
                        return Err(domain!("invalid random loadings"));
                    }
                }
                Loadings::Explicit(a) => {
                    if a.len() != self.p || a.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                        return Err(domain!("explicit loadings must be p finite values >= 0"));
                    }
                }
            },
        }
        match &self.conditioning {
            ConditioningSpec::Fixed(c) => {
                ConditioningSet::new(c.clone(), self.p)?;
            }
            ConditioningSpec::RandomInactive { head, from_head, from_tail } => {
                let active = self.beta_star.support();
                let head_pool = (0..*head).filter(|j| !active.contains(j)).count();
                let tail_pool = (*head..self.p).filter(|j| !active.contains(j)).count();
                if *head > self.p || *from_head > head_pool || *from_tail > tail_pool {
                    return Err(contract!("not enough inactive columns for the random conditioning set"));
                }
            }
        }
        Ok(())
    }

    /// Active coefficients outside `cond`, ascending.
    pub fn active_in(&self, cond: &ConditioningSet) -> Vec<usize> {
        self.beta_star
            .support()
            .into_iter()
            .filter(|j| !cond.contains(*j))
            .collect()
    }
}

/// One simulated data set with its conditioning set.
#[derive(Debug, Clone)]
pub struct Replication {
    pub data: Dataset,
    pub cond: ConditioningSet,
    /// Active candidate features.
    pub active_in_d: Vec<usize>,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(domain!("correlation must lie in [0, 1), got {}", rho));
    }
    Ok(())
}

/// `Xⱼ = √ρ·W + √(1−ρ)·Zⱼ` on every column. Row by row, `W` is drawn
/// first, then `Z₀ … Z_{p−1}`.
pub fn gen_equicorrelated(n: usize, p: usize, rho: f64, rng: &mut Philox) -> Result<Matrix> {
    gen_equicorrelated_block(n, p, rho, 0..p, rng)
}

/// Equicorrelated design where only the columns in `correlated` load on the
/// shared factor; the others are plain `Zⱼ`.
pub fn gen_equicorrelated_block(
    n: usize,
    p: usize,
    rho: f64,
    correlated: Range<usize>,
    rng: &mut Philox,
) -> Result<Matrix> {
    check_rho(rho)?;
    if correlated.end > p {
        return Err(contract!("correlated block {:?} exceeds p = {}", correlated, p));
    }
    let (sw, sz) = (libm::sqrt(rho), libm::sqrt(1.0 - rho));
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        let w = rng.standard_normal();
        for j in 0..p {
            let z = rng.standard_normal();
            let v = if correlated.contains(&j) { sw * w + sz * z } else { z };
            x.set(i, j, v);
        }
    }
    Ok(x)
}

/// Innovation law of column `j` among `p`: blocks of `⌊p/3⌋` columns, the
/// remainder joining the last block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Innovation {
    Normal,
    Laplace,
    Mixture,
}

pub fn innovation_of(j: usize, p: usize) -> Innovation {
    let t = p / 3;
    if j < t {
        Innovation::Normal
    } else if j < 2 * t {
        Innovation::Laplace
    } else {
        Innovation::Mixture
    }
}

/// Unit-variance innovation draw.
fn innovation(kind: Innovation, rng: &mut Philox) -> f64 {
    const SQRT_HALF: f64 = core::f64::consts::FRAC_1_SQRT_2;
    match kind {
        Innovation::Normal => rng.standard_normal(),
        Innovation::Laplace => rng.laplace() * SQRT_HALF,
        Innovation::Mixture => {
            // 0.5·N(−1, 1) + 0.5·N(1, 0.5): mean 0, variance 1.75
            let v = if rng.uniform() < 0.5 {
                rng.normal(-1.0, 1.0)
            } else {
                rng.normal(1.0, SQRT_HALF)
            };
            v / libm::sqrt(1.75)
        }
    }
}

/// `Xⱼ = (εⱼ + aⱼε)/√(1+aⱼ²)`. Row by row, `ε` is drawn first, then
/// `ε₀ … ε_{p−1}`.
pub fn gen_factor_mixture(n: usize, p: usize, a: &[f64], rng: &mut Philox) -> Result<Matrix> {
    if a.len() != p {
        return Err(contract!("{} loadings for p = {}", a.len(), p));
    }
    if a.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(domain!("loadings must be finite and >= 0"));
    }
    let scale: Vec<f64> = a.iter().map(|v| 1.0 / libm::sqrt(1.0 + v * v)).collect();
    let kinds: Vec<Innovation> = (0..p).map(|j| innovation_of(j, p)).collect();
    let mut x = Matrix::zeros(n, p);
    for i in 0..n {
        let common = rng.standard_normal();
        for j in 0..p {
            let e = innovation(kinds[j], rng);
            x.set(i, j, (e + a[j] * common) * scale[j]);
        }
    }
    Ok(x)
}

/// Loading giving pairwise correlation `rho`: `a = √(ρ/(1−ρ))`.
pub fn rho_to_loading(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(libm::sqrt(rho / (1.0 - rho)))
}

/// `E g(max(0, a + Z))` with `g(x) = x/√(1+x²)`, by composite Simpson on
/// `z ∈ [−a, a + 12]` where the integrand is nonzero.
fn expected_root_correlation(a: f64) -> f64 {
    let lo = -a;
    let hi = if a + 12.0 > lo { a.max(0.0) + 12.0 } else { lo + 12.0 };
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| {
        let l = a + z;
        let g = if l > 0.0 { l / libm::sqrt(1.0 + l * l) } else { 0.0 };
        g * crate::normal::pdf(z)
    };
    let mut s = f(lo) + f(hi);
    for k in 1..steps {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + k as f64 * h);
    }
    s * h / 3.0
}

/// Mean `a` of the truncated-normal loadings such that the expected pairwise
/// correlation among loaded columns is `rho`.
///
/// With independent loadings the expected correlation is `(E g(a₁))²`,
/// so this solves `E g = √ρ` by bisection.
pub fn random_loading_mean(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if rho == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let target = libm::sqrt(rho);
    let (mut lo, mut hi) = (-10.0, 1.0);
    while expected_root_correlation(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(domain!("correlation {} is out of reach", rho));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_root_correlation(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Expected pairwise correlation among columns with loadings drawn as
/// `max(0, N(mean, 1))`.
pub fn expected_random_correlation(mean: f64) -> f64 {
    if mean == f64::NEG_INFINITY {
        return 0.0;
    }
    let e = expected_root_correlation(mean);
    e * e
}

/// Draws the response for linear predictor `Xβ*`.
pub fn gen_response(
    x: &Matrix,
    beta_star: &SparseCoefficients,
    family: Family,
    rng: &mut Philox,
) -> Result<Vec<f64>> {
    if beta_star.p() != x.cols() {
        return Err(contract!("coefficient length {} differs from {} columns", beta_star.p(), x.cols()));
    }
    let eta = beta_star.linear_predictor(x);
    let y = eta
        .into_iter()
        .map(|e| {
            let e = e.clamp(-ETA_CLAMP, ETA_CLAMP);
            match family {
                Family::Gaussian => e + rng.standard_normal(),
                Family::BinomialLogit => {
                    let prob = family.mean(e);
                    if rng.uniform() < prob { 1.0 } else { 0.0 }
                }
                Family::Poisson => rng.poisson(libm::exp(e)) as f64,
            }
        })
        .collect();
    Ok(y)
}

/// Canned simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExampleId {
    Ex1,
    Ex2,
    Ex3 { rho: f64 },
    Ex4 { rho: f64 },
    Ex5 { rho: f64, cset: CondSetId },
}

/// Conditioning sets of the robustness design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondSetId {
    /// Two active columns.
    C1,
    /// Two active and two inactive columns.
    C2,
    /// Four random inactive columns.
    C3,
}

fn alternating(s: usize) -> Vec<(usize, f64)> {
    (0..s).map(|j| (j, if j % 2 == 0 { 1.0 } else { 1.3 })).collect()
}

/// The canned experiment `id`. Indices are 0-based.
pub fn example_spec(id: ExampleId, family: Family) -> Result<ExperimentSpec> {
    let base = |name: &str, n, p, rho, covariates, beta: Vec<(usize, f64)>, conditioning| -> Result<ExperimentSpec> {
        let spec = ExperimentSpec {
            name: String::from(name),
            n,
            p,
            covariates,
            beta_star: SparseCoefficients::new(p, beta)?,
            conditioning,
            family,
            replications: DEFAULT_REPLICATIONS,
            seed: 0,
            rho,
        };
        spec.validate()?;
        Ok(spec)
    };
    match id {
        ExampleId::Ex1 => base(
            "ex1",
            100,
            2000,
            0.5,
            CovariateModel::Equicorrelated { rho: 0.5, correlated: 0..2000 },
            vec![(0, 3.0), (1, 3.0), (2, 3.0), (3, 3.0), (4, 3.0), (5, -7.5)],
            ConditioningSpec::Fixed((0..5).collect()),
        ),
        ExampleId::Ex2 => base(
            "ex2",
            100,
            2000,
            0.9,
            CovariateModel::Equicorrelated { rho: 0.9, correlated: 0..1999 },
            vec![(0, 10.0), (1999, 1.0)],
            ConditioningSpec::Fixed(vec![0]),
        ),
        ExampleId::Ex3 { rho } => base(
            "ex3",
            if rho == 0.0 { 300 } else { 100 },
            5000,
            rho,
            CovariateModel::FactorMixture {
                loadings: Loadings::Constant { value: rho_to_loading(rho)?, count: 100 },
            },
            alternating(12),
            ConditioningSpec::Fixed((0..4).collect()),
        ),
        ExampleId::Ex4 { rho } => {
            let loadings = if rho == 0.0 {
                Loadings::Constant { value: 0.0, count: 50 }
            } else {
                Loadings::TruncatedNormal { mean: random_loading_mean(rho)?, count: 50 }
            };
            base(
                "ex4",
                200,
                40_000,
                rho,
                CovariateModel::FactorMixture { loadings },
                alternating(6),
                ConditioningSpec::Fixed(vec![0, 1]),
            )
        }
        ExampleId::Ex5 { rho, cset } => {
            let p = 10_000;
            let conditioning = match cset {
                CondSetId::C1 => ConditioningSpec::Fixed(vec![0, 1]),
                CondSetId::C2 => ConditioningSpec::Fixed(vec![0, 1, 4, 2000]),
                CondSetId::C3 => ConditioningSpec::RandomInactive { head: 2000, from_head: 3, from_tail: 1 },
            };
            base(
                "ex5",
                200,
                p,
                rho,
                CovariateModel::FactorMixture {
                    loadings: Loadings::Constant { value: rho_to_loading(rho)?, count: 2000 },
                },
                vec![(0, 1.0), (1, 2.0), (2, 1.0), (3, 2.0), (p - 2, 1.0), (p - 1, 2.0)],
                conditioning,
            )
        }
    }
}

fn draw_loadings(loadings: &Loadings, p: usize, rng: &mut Philox) -> Vec<f64> {
    match loadings {
        Loadings::Constant { value, count } => {
            let mut a = vec![0.0; p];
            a[..*count].fill(*value);
            a
        }
        Loadings::TruncatedNormal { mean, count } => {
            let mut a = vec![0.0; p];
            for v in &mut a[..*count] {
                *v = rng.normal(*mean, 1.0).max(0.0);
            }
            a
        }
        Loadings::Explicit(a) => a.clone(),
    }
}

/// Covariates for an already seeded stream.
pub fn gen_covariates(spec: &ExperimentSpec, rng: &mut Philox) -> Result<Matrix> {
    match &spec.covariates {
        CovariateModel::Equicorrelated { rho, correlated } => {
            gen_equicorrelated_block(spec.n, spec.p, *rho, correlated.clone(), rng)
        }
        CovariateModel::FactorMixture { loadings } => {
            let a = draw_loadings(loadings, spec.p, rng);
            gen_factor_mixture(spec.n, spec.p, &a, rng)
        }
    }
}

/// Data seed of replication `r`.
pub fn replication_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, DATA_STREAM, r as u64)
}

/// Replication `r` of `spec`, seeded from `spec.seed`.
pub fn generate_replication(spec: &ExperimentSpec, r: usize) -> Result<Replication> {
    spec.validate()?;
    let seed = replication_seed(spec.seed, r);
    let x = gen_covariates(spec, &mut Philox::with_stream(seed, COVARIATE_STREAM))?;
    let y = gen_response(&x, &spec.beta_star, spec.family, &mut Philox::with_stream(seed, RESPONSE_STREAM))?;
    let cond = match &spec.conditioning {
        ConditioningSpec::Fixed(c) => ConditioningSet::new(c.clone(), spec.p)?,
        ConditioningSpec::RandomInactive { head, from_head, from_tail } => {
            let mut rng = Philox::with_stream(seed, CONDITIONING_STREAM);
            let active = spec.beta_star.support();
            let head_pool: Vec<usize> = (0..*head).filter(|j| active.binary_search(j).is_err()).collect();
            let tail_pool: Vec<usize> = (*head..spec.p).filter(|j| active.binary_search(j).is_err()).collect();
            let mut c = rng.sample_without_replacement(&head_pool, *from_head);
            c.extend(rng.sample_without_replacement(&tail_pool, *from_tail));
            c.sort_unstable();
            ConditioningSet::new(c, spec.p)?
        }
    };
    let active_in_d = spec.active_in(&cond);
    Ok(Replication {
        data: Dataset::new(x, y)?,
        cond,
        active_in_d,
    })
}
