//! Replicated screening experiments.
//!
//! Replication `r` draws its data from `derive_seed(seed, DATA_STREAM, r)`
//! and its decoupling permutations from `derive_seed(seed, tag, r)` with one
//! tag per conditioning set, so results do not depend on the worker count
//! or on which replications ran before.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use csis_core::datagen::generate_replication;
use csis_core::metrics::{fp_fn, minimum_model_size_from, summarize_mms, ReplicationOutcome};
use csis_core::rng::derive_seed;
use csis_core::screening::screen_conditional;
use csis_core::thresholding::{
    decoupled_statistics, decoupling_threshold_from, default_fdr_tolerance, fdr_select, select_by_decoupling,
    DecouplingOptions,
};
use csis_core::{ConditioningSet, Dataset, Family, RankBy, ScreenOptions, ScreenStatistics};
use rayon::prelude::*;

use crate::config::{Method, RunConfig, Source};
use crate::csv_io::{load_csv, LoadOptions};
use crate::error::{Error, Result};

const DECOUPLE_UNCONDITIONAL: u64 = 0x7065_726d_0000;
const DECOUPLE_CONDITIONAL: u64 = 0x7065_726d_0001;

/// One line of the report: a method aggregated over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub example: String,
    pub method: Method,
    pub rho: Option<f64>,
    pub n: usize,
    pub p: usize,
    pub family: Family,
    pub mmms: Option<f64>,
    pub rsd: Option<f64>,
    pub fp_pi: Option<f64>,
    pub fn_pi: Option<f64>,
    pub fp_fdr: Option<f64>,
    pub fn_fdr: Option<f64>,
    /// Replications that finished.
    pub replications: usize,
    pub failed: usize,
    /// Replications where an active feature failed to converge (MMS set to |𝒟|).
    pub flagged: usize,
    pub wall_seconds: f64,
}

/// Everything a replication needs besides the data.
#[derive(Debug, Clone)]
pub struct Plan {
    pub family: Family,
    pub methods: Vec<Method>,
    pub screen: ScreenOptions,
    pub fdr_f: Option<Option<f64>>,
    pub decoupling: Option<DecouplingOptions>,
    pub seed: u64,
}

impl Plan {
    pub fn from_config(config: &RunConfig) -> Self {
        let mut methods = config.methods.clone();
        methods.sort();
        methods.dedup();
        Plan {
            family: config.family.into(),
            methods,
            screen: ScreenOptions {
                wald: config.wald.into(),
                ..ScreenOptions::default()
            },
            fdr_f: config.fdr.enabled.then_some(config.fdr.f),
            decoupling: config.decoupling.enabled.then(|| DecouplingOptions {
                repetitions: config.decoupling.repetitions,
                tau: config.decoupling.tau,
                seed: 0,
                mode: config.decoupling.permutation.into(),
                pooling: config.decoupling.pooling.into(),
            }),
            seed: config.seed,
        }
    }
}

struct Sweep {
    stats: ScreenStatistics,
    decoupled: Option<Vec<ScreenStatistics>>,
}

fn sweep(plan: &Plan, data: &Dataset, cond: &ConditioningSet, tag: u64, r: usize) -> Result<Sweep> {
    let stats = screen_conditional(data, cond, plan.family, &plan.screen)?;
    let decoupled = match &plan.decoupling {
        Some(opts) => {
            let opts = DecouplingOptions {
                seed: derive_seed(plan.seed, tag, r as u64),
                ..*opts
            };
            Some(decoupled_statistics(data, cond, plan.family, &opts, &plan.screen)?)
        }
        None => None,
    };
    Ok(Sweep { stats, decoupled })
}

/// Screens one data set with every method of `plan`; `support` lists the
/// truly active columns. Outcomes follow `plan.methods`.
pub fn evaluate_replication(
    plan: &Plan,
    data: &Dataset,
    cond: &ConditioningSet,
    support: &[usize],
    r: usize,
) -> Result<Vec<ReplicationOutcome>> {
    let empty = ConditioningSet::empty();
    let mut sweeps: [Option<Sweep>; 2] = [None, None];
    let mut out = Vec::with_capacity(plan.methods.len());
    for &method in &plan.methods {
        let (c, slot, tag) = if method.conditional() {
            (cond, 1, DECOUPLE_CONDITIONAL)
        } else {
            (&empty, 0, DECOUPLE_UNCONDITIONAL)
        };
        if sweeps[slot].is_none() {
            sweeps[slot] = Some(sweep(plan, data, c, tag, r)?);
        }
        let s = sweeps[slot].as_ref().expect("filled above");
        let by = method.rank_by();
        let active_in_d: Vec<usize> = support.iter().copied().filter(|j| !c.contains(*j)).collect();
        let (mms, mms_flagged) = minimum_model_size_from(&s.stats, by, &active_in_d)?;

        let selected_pi = match (&s.decoupled, &plan.decoupling) {
            (Some(dec), Some(opts)) => {
                let gamma = decoupling_threshold_from(dec, opts.tau, opts.pooling, by)?;
                if gamma.excluded_fits > 0 {
                    log::warn!("replication {r}: {} decoupled fits did not converge", gamma.excluded_fits);
                }
                Some(select_by_decoupling(&s.stats, gamma.threshold, by))
            }
            _ => None,
        };
        let selected_fdr = match plan.fdr_f {
            Some(f) if by == RankBy::Magnitude => {
                let f = f.unwrap_or_else(|| default_fdr_tolerance(data.n()));
                Some(fdr_select(&s.stats, s.stats.len(), f)?.selected)
            }
            _ => None,
        };
        out.push(ReplicationOutcome {
            mms,
            mms_flagged,
            selected_pi,
            selected_fdr,
            active_in_d,
        });
    }
    Ok(out)
}

fn mean(v: &[usize]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<usize>() as f64 / v.len() as f64)
}

/// Aggregates per-replication outcomes of one method.
pub fn aggregate(outcomes: &[&ReplicationOutcome]) -> (Option<(f64, f64)>, [Option<f64>; 4]) {
    let mms: Vec<usize> = outcomes.iter().map(|o| o.mms).collect();
    let summary = summarize_mms(&mms).ok();
    let mut cols: [Vec<usize>; 4] = Default::default();
    for o in outcomes {
        if let Some(sel) = &o.selected_pi {
            let (fp, fneg) = fp_fn(sel, &o.active_in_d);
            cols[0].push(fp);
            cols[1].push(fneg);
        }
        if let Some(sel) = &o.selected_fdr {
            let (fp, fneg) = fp_fn(sel, &o.active_in_d);
            cols[2].push(fp);
            cols[3].push(fneg);
        }
    }
    (summary, [mean(&cols[0]), mean(&cols[1]), mean(&cols[2]), mean(&cols[3])])
}

fn run_guarded<F>(r: usize, f: F) -> Option<Vec<ReplicationOutcome>>
where
    F: FnOnce() -> Result<Vec<ReplicationOutcome>>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(v)) => Some(v),
        Ok(Err(e)) => {
            log::warn!("replication {r} failed: {e}");
            None
        }
        Err(_) => {
            log::warn!("replication {r} panicked");
            None
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {workers} workers: {e}")))
}

/// Runs the configured experiment and returns one row per method.
pub fn run_experiment(config: &RunConfig) -> Result<Vec<ReportRow>> {
    config.validate()?;
    let start = Instant::now();
    let plan = Plan::from_config(config);

    let (results, example, rho, n, p) = match &config.source {
        Source::Example(_) => {
            let spec = config.experiment_spec()?;
            let results: Vec<Option<Vec<ReplicationOutcome>>> = pool(config.workers)?.install(|| {
                (0..spec.replications)
                    .into_par_iter()
                    .map(|r| {
                        run_guarded(r, || {
                            let rep = generate_replication(&spec, r)?;
                            evaluate_replication(&plan, &rep.data, &rep.cond, &spec.beta_star.support(), r)
                        })
                    })
                    .collect()
            });
            (results, spec.name.clone(), Some(spec.rho), spec.n, spec.p)
        }
        Source::Csv(src) => {
            let opts = LoadOptions {
                standardize: true,
                center_conditioning: src.center_conditioning,
            };
            let loaded = load_csv(&src.path, &src.response, &src.conditioning, opts)?;
            if src.active.is_empty() {
                return Err(Error::Config(
                    "a csv experiment needs the names of the active columns; use `screen` for a plain ranking".into(),
                ));
            }
            let mut support = Vec::new();
            for name in &src.active {
                support.push(loaded.column(name).ok_or_else(|| Error::MissingColumn(name.clone()))?);
            }
            support.sort_unstable();
            let results = vec![pool(config.workers)?.install(|| {
                run_guarded(0, || evaluate_replication(&plan, &loaded.data, &loaded.cond, &support, 0))
            })];
            let name = src.path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned());
            (results, name, None, loaded.data.n(), loaded.data.p())
        }
    };

    let failed = results.iter().filter(|r| r.is_none()).count();
    let wall_seconds = start.elapsed().as_secs_f64();
    let rows = plan
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let outcomes: Vec<&ReplicationOutcome> = results.iter().flatten().map(|v| &v[k]).collect();
            let (summary, [fp_pi, fn_pi, fp_fdr, fn_fdr]) = aggregate(&outcomes);
            ReportRow {
                example: example.clone(),
                method,
                rho,
                n,
                p,
                family: plan.family,
                mmms: summary.map(|s| s.0),
                rsd: summary.map(|s| s.1),
                fp_pi,
                fn_pi,
                fp_fdr,
                fn_fdr,
                replications: outcomes.len(),
                failed,
                flagged: outcomes.iter().filter(|o| o.mms_flagged).count(),
                wall_seconds,
            }
        })
        .collect();
    Ok(rows)
}

/// Threshold rule for a single screening run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    None,
    Gamma(f64),
    Fdr(Option<f64>),
    Decoupling(DecouplingOptions),
}

#[derive(Debug, Clone)]
pub struct ScreenRun {
    pub stats: ScreenStatistics,
    pub ranking: Vec<usize>,
    pub threshold: Option<f64>,
    pub selected: Option<Vec<usize>>,
}

/// Screens a loaded data set once and applies `rule`.
pub fn screen_once(
    data: &Dataset,
    cond: &ConditioningSet,
    family: Family,
    by: RankBy,
    screen: &ScreenOptions,
    rule: Rule,
) -> Result<ScreenRun> {
    let stats = screen_conditional(data, cond, family, screen)?;
    let ranking = stats.rank(by);
    let (threshold, selected) = match rule {
        Rule::None => (None, None),
        Rule::Gamma(g) => {
            let sel = match by {
                RankBy::Magnitude => stats.select_by_magnitude(g),
                RankBy::Likelihood => stats.select_by_likelihood(g),
            };
            (Some(g), Some(sel))
        }
        Rule::Fdr(f) => {
            if by != RankBy::Magnitude {
                return Err(Error::Usage("the FDR rule applies to magnitude screening (sis/csis)".into()));
            }
            let f = f.unwrap_or_else(|| default_fdr_tolerance(data.n()));
            let sel = fdr_select(&stats, stats.len(), f)?;
            (Some(sel.delta), Some(sel.selected))
        }
        Rule::Decoupling(opts) => {
            let dec = decoupled_statistics(data, cond, family, &opts, screen)?;
            let gamma = decoupling_threshold_from(&dec, opts.tau, opts.pooling, by)?;
            (Some(gamma.threshold), Some(select_by_decoupling(&stats, gamma.threshold, by)))
        }
    };
    Ok(ScreenRun {
        stats,
        ranking,
        threshold,
        selected,
    })
}
