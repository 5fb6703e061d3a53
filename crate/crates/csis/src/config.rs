//! Run configuration. JSON files follow `config.schema.json`; every field
//! has a default, and CLI flags override file values.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use csis_core::datagen::{
    example_spec, CondSetId, ConditioningSpec, CovariateModel, ExampleId, ExperimentSpec, Loadings, SparseCoefficients,
};
use csis_core::screening::WaldMode;
use csis_core::thresholding::{PermutationMode, Pooling, DEFAULT_REPETITIONS, DEFAULT_TAU};
use csis_core::{Family, RankBy};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sis,
    Mlr,
    Csis,
    Cmlr,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sis, Method::Mlr, Method::Csis, Method::Cmlr];

    /// Uses the experiment's conditioning set (otherwise intercept only).
    pub fn conditional(self) -> bool {
        matches!(self, Method::Csis | Method::Cmlr)
    }

    pub fn rank_by(self) -> RankBy {
        match self {
            Method::Sis | Method::Csis => RankBy::Magnitude,
            Method::Mlr | Method::Cmlr => RankBy::Likelihood,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Sis => "SIS",
            Method::Mlr => "MLR",
            Method::Csis => "CSIS",
            Method::Cmlr => "CMLR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Gaussian,
    Binomial,
    Poisson,
}

impl From<FamilyName> for Family {
    fn from(f: FamilyName) -> Self {
        match f {
            FamilyName::Gaussian => Family::Gaussian,
            FamilyName::Binomial => Family::BinomialLogit,
            FamilyName::Poisson => Family::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Tsv,
    Pretty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ExampleName {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CondSetName {
    #[default]
    C1,
    C2,
    C3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PermutationName {
    #[default]
    Joint,
    PerColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PoolingName {
    #[default]
    Pooled,
    RepetitionMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum WaldName {
    #[default]
    InverseInformation,
    RawDiagonal,
}

impl From<PermutationName> for PermutationMode {
    fn from(p: PermutationName) -> Self {
        match p {
            PermutationName::Joint => PermutationMode::Joint,
            PermutationName::PerColumn => PermutationMode::PerColumn,
        }
    }
}

impl From<PoolingName> for Pooling {
    fn from(p: PoolingName) -> Self {
        match p {
            PoolingName::Pooled => Pooling::Pooled,
            PoolingName::RepetitionMax => Pooling::RepetitionMax,
        }
    }
}

impl From<WaldName> for WaldMode {
    fn from(w: WaldName) -> Self {
        match w {
            WaldName::InverseInformation => WaldMode::InverseInformation,
            WaldName::RawDiagonal => WaldMode::RawDiagonal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleSource {
    pub id: ExampleName,
    /// Required for ex3–ex5; ex1 and ex2 have fixed correlations.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub cset: CondSetName,
    /// Overrides of the canned sample size and dimension.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub p: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub response: String,
    #[serde(default)]
    pub conditioning: Vec<String>,
    /// Columns known to be active; needed for MMS, FP and FN.
    #[serde(default)]
    pub active: Vec<String>,
    #[serde(default)]
    pub center_conditioning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Source {
    Example(ExampleSource),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdrConfig {
    pub enabled: bool,
    /// Tolerated false positives; `n / ln n` when absent.
    pub f: Option<f64>,
}

impl Default for FdrConfig {
    fn default() -> Self {
        Self { enabled: true, f: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecouplingConfig {
    pub enabled: bool,
    pub repetitions: usize,
    pub tau: f64,
    pub permutation: PermutationName,
    pub pooling: PoolingName,
}

impl Default for DecouplingConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            repetitions: DEFAULT_REPETITIONS,
            tau: DEFAULT_TAU,
            permutation: PermutationName::Joint,
            pooling: PoolingName::Pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Format,
    /// Append the `wall_seconds` column.
    pub timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: None,
            format: Format::Csv,
            timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub source: Source,
    pub family: FamilyName,
    pub methods: Vec<Method>,
    pub fdr: FdrConfig,
    pub decoupling: DecouplingConfig,
    pub wald: WaldName,
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; 0 picks one per core.
    pub workers: usize,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: Source::Example(ExampleSource {
                id: ExampleName::Ex1,
                rho: None,
                cset: CondSetName::C1,
                n: None,
                p: None,
            }),
            family: FamilyName::Gaussian,
            methods: vec![Method::Sis, Method::Csis],
            fdr: FdrConfig::default(),
            decoupling: DecouplingConfig::default(),
            wald: WaldName::default(),
            replications: csis_core::datagen::DEFAULT_REPLICATIONS,
            seed: 0,
            workers: 0,
            output: OutputConfig::default(),
        }
    }
}

/// The JSON schema for [`RunConfig`] files.
pub const SCHEMA: &str = include_str!("../config.schema.json");

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if let Source::Csv(_) = self.source {
            if self.replications != 1 {
                return Err(Error::Config("a csv source runs exactly one replication".into()));
            }
        }
        if let Some(f) = self.fdr.f {
            if !(f > 0.0) {
                return Err(Error::Config(format!("fdr.f must be > 0, got {f}")));
            }
        }
        let d = &self.decoupling;
        if d.repetitions == 0 {
            return Err(Error::Config("decoupling.repetitions must be at least 1".into()));
        }
        if !(d.tau > 0.0 && d.tau <= 1.0) {
            return Err(Error::Config(format!("decoupling.tau must lie in (0, 1], got {}", d.tau)));
        }
        if let Source::Example(_) = self.source {
            self.experiment_spec()?;
        }
        Ok(())
    }

    /// The simulation design for an example source.
    pub fn experiment_spec(&self) -> Result<ExperimentSpec> {
        let Source::Example(ex) = &self.source else {
            return Err(Error::Config("not a simulation source".into()));
        };
        let need_rho = || ex.rho.ok_or_else(|| Error::Config(format!("{:?} needs rho", ex.id).to_lowercase()));
        let id = match ex.id {
            ExampleName::Ex1 | ExampleName::Ex2 => {
                let fixed = if ex.id == ExampleName::Ex1 { 0.5 } else { 0.9 };
                if let Some(r) = ex.rho {
                    if r != fixed {
                        return Err(Error::Config(format!("this example has fixed rho = {fixed}")));
                    }
                }
                if ex.id == ExampleName::Ex1 {
                    ExampleId::Ex1
                } else {
                    ExampleId::Ex2
                }
            }
            ExampleName::Ex3 => ExampleId::Ex3 { rho: need_rho()? },
            ExampleName::Ex4 => ExampleId::Ex4 { rho: need_rho()? },
            ExampleName::Ex5 => ExampleId::Ex5 {
                rho: need_rho()?,
                cset: match ex.cset {
                    CondSetName::C1 => CondSetId::C1,
                    CondSetName::C2 => CondSetId::C2,
                    CondSetName::C3 => CondSetId::C3,
                },
            },
        };
        let mut spec = example_spec(id, self.family.into()).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(n) = ex.n {
            spec.n = n;
        }
        if let Some(p) = ex.p {
            if p != spec.p {
                resize(&mut spec, p)?;
            }
        }
        spec.replications = self.replications;
        spec.seed = self.seed;
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

/// Changes the dimension of an example. Indices in the upper half of the
/// original range are kept at the same distance from the end, so "last
/// column" roles survive; the rest keep their position.
fn resize(spec: &mut ExperimentSpec, p: usize) -> Result<()> {
    let old = spec.p;
    let too_small = |what: &str| Error::Config(format!("p = {p} is too small for this example ({what})"));
    let map = |j: usize| -> Result<usize> {
        let k = if 2 * j >= old { (j + p).checked_sub(old) } else { Some(j) };
        k.filter(|&k| k < p).ok_or_else(|| too_small("coefficient or conditioning index"))
    };
    spec.covariates = match &spec.covariates {
        CovariateModel::Equicorrelated { rho, correlated } => {
            let end = (correlated.end + p).checked_sub(old).ok_or_else(|| too_small("correlated block"))?;
            CovariateModel::Equicorrelated {
                rho: *rho,
                correlated: correlated.start.min(end)..end,
            }
        }
        CovariateModel::FactorMixture { loadings } => CovariateModel::FactorMixture {
            loadings: match loadings {
                Loadings::Constant { value, count } => Loadings::Constant { value: *value, count: (*count).min(p) },
                Loadings::TruncatedNormal { mean, count } => {
                    Loadings::TruncatedNormal { mean: *mean, count: (*count).min(p) }
                }
                Loadings::Explicit(_) => return Err(Error::Config("explicit loadings cannot be resized".into())),
            },
        },
    };
    let entries = spec
        .beta_star
        .entries()
        .iter()
        .map(|&(j, b)| Ok((map(j)?, b)))
        .collect::<Result<Vec<_>>>()?;
    spec.beta_star = SparseCoefficients::new(p, entries).map_err(|e| Error::Config(e.to_string()))?;
    spec.conditioning = match &spec.conditioning {
        ConditioningSpec::Fixed(idx) => ConditioningSpec::Fixed(idx.iter().map(|&j| map(j)).collect::<Result<_>>()?),
        ConditioningSpec::RandomInactive { head, from_head, from_tail } => ConditioningSpec::RandomInactive {
            head: (*head).min(p / 2),
            from_head: *from_head,
            from_tail: *from_tail,
        },
    };
    spec.p = p;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_file() {
        let c = RunConfig::from_json(
            r#"{"source": {"kind": "example", "id": "ex3", "rho": 0.4, "p": 1000},
                "methods": ["sis", "csis"], "replications": 20, "seed": 9,
                "decoupling": {"enabled": false}}"#,
        )
        .unwrap();
        assert_eq!(c.replications, 20);
        assert!(!c.decoupling.enabled);
        assert_eq!(c.decoupling.repetitions, 5);
        let spec = c.experiment_spec().unwrap();
        assert_eq!((spec.n, spec.p, spec.seed), (100, 1000, 9));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let mut c = RunConfig::default();
        c.methods.clear();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.decoupling.tau = 1.5;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.source = Source::Example(ExampleSource { id: ExampleName::Ex3, rho: None, cset: CondSetName::C1, n: None, p: None });
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn schema_is_json() {
        let v: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        assert_eq!(v["title"], "RunConfig");
    }

    #[test]
    fn resized_examples_keep_roles() {
        let mut c = RunConfig::default();
        c.source = Source::Example(ExampleSource { id: ExampleName::Ex2, rho: None, cset: CondSetName::C1, n: None, p: Some(300) });
        let spec = c.experiment_spec().unwrap();
        assert_eq!(spec.beta_star.support(), vec![0, 299]);
        assert!(matches!(spec.covariates, CovariateModel::Equicorrelated { ref correlated, .. } if *correlated == (0..299)));
        c.source = Source::Example(ExampleSource { id: ExampleName::Ex5, rho: Some(0.5), cset: CondSetName::C1, n: None, p: Some(1000) });
        let spec = c.experiment_spec().unwrap();
        assert_eq!(spec.beta_star.support(), vec![0, 1, 2, 3, 998, 999]);
        c.source = Source::Example(ExampleSource { id: ExampleName::Ex1, rho: None, cset: CondSetName::C1, n: None, p: Some(4) });
        assert!(c.experiment_spec().is_err());
    }

}
