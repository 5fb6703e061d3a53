//! Command-line interface. Exit codes: 0 success, 1 usage, 2 data error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use csis_core::datagen::generate_replication;
use csis_core::metrics::conditional_eigen_ratio;
use csis_core::thresholding::DecouplingOptions;
use csis_core::{Family, RankBy, ScreenOptions};

use crate::config::{
    CondSetName, ExampleName, ExampleSource, FamilyName, Format, Method, PermutationName, PoolingName, RunConfig,
    Source, WaldName,
};
use crate::csv_io::{load_csv, save_csv, write_csv, LoadOptions};
use crate::error::{Error, Result};
use crate::harness::{run_experiment, screen_once, Rule};
use crate::report::{opt, report_table, Table};

#[derive(Debug, Parser)]
#[command(name = "csis", version, about = "Conditional marginal screening for generalized linear models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a replicated simulation and print the summary table.
    Simulate(SimulateArgs),
    /// Rank the features of a CSV data set and apply a threshold rule.
    Screen(ScreenArgs),
    /// Compute a data-driven threshold for a CSV data set.
    Threshold(ThresholdArgs),
    /// Tabulate the largest eigenvalue of an equicorrelated block with and
    /// without conditioning.
    EigenRatio(EigenArgs),
    /// Write one simulated replication as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct DecouplingArgs {
    /// Decoupling repetitions K.
    #[arg(long)]
    pub decouple_k: Option<usize>,
    /// Decoupling quantile τ.
    #[arg(long)]
    pub decouple_tau: Option<f64>,
    #[arg(long, value_enum)]
    pub permutation: Option<PermutationName>,
    #[arg(long, value_enum)]
    pub pooling: Option<PoolingName>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub example: Option<ExampleName>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub cset: Option<CondSetName>,
    /// Override the sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Override the number of covariates.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyName>,
    /// Methods to run (comma separated).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Vec<Method>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tolerated false positives f (default n / ln n).
    #[arg(long)]
    pub fdr_f: Option<f64>,
    #[arg(long)]
    pub no_fdr: bool,
    #[arg(long)]
    pub no_decoupling: bool,
    #[command(flatten)]
    pub decoupling: DecouplingArgs,
    #[arg(long, value_enum)]
    pub wald: Option<WaldName>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Leave out the wall_seconds column.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Conditioning columns (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub cond: Vec<String>,
    #[arg(long)]
    pub center_cond: bool,
    /// Keep candidate columns on their original scale.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyName,
    /// sis/csis rank by |coefficient|, mlr/cmlr by likelihood. Defaults to
    /// csis with conditioning columns and sis without.
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub wald: Option<WaldName>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleName {
    None,
    Gamma,
    Fdr,
    Decoupling,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "decoupling")]
    pub rule: RuleName,
    /// Threshold for `--rule gamma`.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub fdr_f: Option<f64>,
    #[command(flatten)]
    pub decoupling: DecouplingArgs,
    /// Print only the first N ranked features.
    #[arg(long)]
    pub top: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdRuleName {
    Fdr,
    Decoupling,
}

#[derive(Debug, Args)]
pub struct ThresholdArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value = "decoupling")]
    pub rule: ThresholdRuleName,
    #[arg(long)]
    pub fdr_f: Option<f64>,
    #[command(flatten)]
    pub decoupling: DecouplingArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct EigenArgs {
    /// Correlations (comma separated).
    #[arg(long, value_delimiter = ',', required = true)]
    pub r: Vec<f64>,
    /// Conditioning set sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub q: Vec<usize>,
    /// Candidate block sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub example: ExampleName,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, value_enum, default_value = "c1")]
    pub cset: CondSetName,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub family: FamilyName,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Replication index.
    #[arg(long, default_value_t = 0)]
    pub replication: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Screen(a) => screen(a),
        Command::Threshold(a) => threshold(a),
        Command::EigenRatio(a) => eigen_ratio(a),
        Command::Generate(a) => generate(a),
    }
}

fn emit(out: &OutputArgs, text: &str) -> Result<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn check_params(fdr_f: Option<f64>, dec: &DecouplingArgs) -> Result<()> {
    if let Some(f) = fdr_f {
        if !(f > 0.0) {
            return Err(Error::Usage(format!("--fdr-f must be > 0, got {f}")));
        }
    }
    if dec.decouple_k == Some(0) {
        return Err(Error::Usage("--decouple-k must be at least 1".into()));
    }
    if let Some(t) = dec.decouple_tau {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::Usage(format!("--decouple-tau must lie in (0, 1], got {t}")));
        }
    }
    Ok(())
}

/// Applies command-line overrides to a configuration.
pub fn merge_simulate(a: &SimulateArgs, mut c: RunConfig) -> Result<RunConfig> {
    if let Some(id) = a.example {
        c.source = Source::Example(ExampleSource {
            id,
            rho: None,
            cset: CondSetName::C1,
            n: None,
            p: None,
        });
    }
    match &mut c.source {
        Source::Example(ex) => {
            if a.rho.is_some() {
                ex.rho = a.rho;
            }
            if let Some(cs) = a.cset {
                ex.cset = cs;
            }
            if a.n.is_some() {
                ex.n = a.n;
            }
            if a.p.is_some() {
                ex.p = a.p;
            }
        }
        Source::Csv(_) => {
            if a.rho.is_some() || a.cset.is_some() || a.n.is_some() || a.p.is_some() {
                return Err(Error::Usage("--rho, --cset, --n and --p apply to simulated examples only".into()));
            }
        }
    }
    if let Some(f) = a.family {
        c.family = f;
    }
    if !a.method.is_empty() {
        c.methods = a.method.clone();
    }
    if let Some(r) = a.reps {
        c.replications = r;
    }
    if let Some(s) = a.seed {
        c.seed = s;
    }
    if a.fdr_f.is_some() {
        c.fdr.f = a.fdr_f;
    }
    if a.no_fdr {
        c.fdr.enabled = false;
    }
    if a.no_decoupling {
        c.decoupling.enabled = false;
    }
    let d = &a.decoupling;
    if let Some(k) = d.decouple_k {
        c.decoupling.repetitions = k;
    }
    if let Some(t) = d.decouple_tau {
        c.decoupling.tau = t;
    }
    if let Some(p) = d.permutation {
        c.decoupling.permutation = p;
    }
    if let Some(p) = d.pooling {
        c.decoupling.pooling = p;
    }
    if let Some(w) = a.wald {
        c.wald = w;
    }
    if let Some(w) = a.workers {
        c.workers = w;
    }
    if a.no_timing {
        c.output.timing = false;
    }
    if a.out.output.is_some() {
        c.output.path = a.out.output.clone();
    }
    if let Some(f) = a.out.format {
        c.output.format = f;
    }
    Ok(c)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    check_params(a.fdr_f, &a.decoupling)?;
    let base = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let config = merge_simulate(&a, base)?;
    let rows = run_experiment(&config)?;
    let text = report_table(&rows, config.output.timing).render(config.output.format);
    emit(
        &OutputArgs {
            output: config.output.path.clone(),
            format: None,
        },
        &text,
    )
}

struct Prepared {
    loaded: crate::csv_io::Loaded,
    cond: csis_core::ConditioningSet,
    family: Family,
    by: RankBy,
    screen: ScreenOptions,
    method: Method,
}

fn prepare(d: &DataArgs) -> Result<Prepared> {
    let method = d
        .method
        .unwrap_or(if d.cond.is_empty() { Method::Sis } else { Method::Csis });
    if method.conditional() && d.cond.is_empty() {
        log::info!("{} without --cond conditions on the intercept only", method.label());
    }
    let opts = LoadOptions {
        standardize: !d.no_standardize,
        center_conditioning: d.center_cond,
    };
    let loaded = load_csv(&d.input, &d.response, &d.cond, opts)?;
    if !loaded.excluded.is_empty() {
        eprintln!("warning: {} constant column(s) excluded: {}", loaded.excluded.len(), loaded.excluded.join(", "));
    }
    let cond = if method.conditional() {
        loaded.cond.clone()
    } else {
        csis_core::ConditioningSet::empty()
    };
    Ok(Prepared {
        cond,
        family: d.family.into(),
        by: method.rank_by(),
        screen: ScreenOptions {
            wald: d.wald.unwrap_or_default().into(),
            ..ScreenOptions::default()
        },
        method,
        loaded,
    })
}

fn decoupling_options(d: &DecouplingArgs, seed: u64) -> DecouplingOptions {
    let base = DecouplingOptions::default();
    DecouplingOptions {
        repetitions: d.decouple_k.unwrap_or(base.repetitions),
        tau: d.decouple_tau.unwrap_or(base.tau),
        seed,
        mode: d.permutation.unwrap_or_default().into(),
        pooling: d.pooling.unwrap_or_default().into(),
    }
}

fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {workers} workers: {e}")))?
        .install(f)
}

fn screen(a: ScreenArgs) -> Result<()> {
    check_params(a.fdr_f, &a.decoupling)?;
    let rule = match a.rule {
        RuleName::None => Rule::None,
        RuleName::Gamma => Rule::Gamma(
            a.gamma
                .ok_or_else(|| Error::Usage("--rule gamma needs --gamma".into()))?,
        ),
        RuleName::Fdr => Rule::Fdr(a.fdr_f),
        RuleName::Decoupling => Rule::Decoupling(decoupling_options(&a.decoupling, a.data.seed)),
    };
    if matches!(rule, Rule::Fdr(_)) && a.data.method.is_some_and(|m| m.rank_by() != RankBy::Magnitude) {
        return Err(Error::Usage("the FDR rule applies to sis/csis only".into()));
    }
    let prep = prepare(&a.data)?;
    let run = with_workers(a.data.workers, || {
        screen_once(&prep.loaded.data, &prep.cond, prep.family, prep.by, &prep.screen, rule)
    })?;

    let mut t = Table::new(["rank", "feature", "coef", "nll", "wald", "converged", "selected"]);
    let limit = a.top.unwrap_or(usize::MAX);
    for (k, &j) in run.ranking.iter().take(limit).enumerate() {
        let f = run.stats.get(j).expect("ranked features are candidates");
        let selected = match &run.selected {
            Some(s) => if s.contains(&j) { "yes" } else { "no" }.to_owned(),
            None => "-".to_owned(),
        };
        t.push(vec![
            (k + 1).to_string(),
            prep.loaded.data.column_label(j),
            format!("{:.6}", f.coef),
            format!("{:.6}", f.nll),
            format!("{:.4}", f.wald),
            if f.converged { "yes" } else { "no" }.to_owned(),
            selected,
        ]);
    }
    if let (Some(th), Some(sel)) = (run.threshold, &run.selected) {
        eprintln!(
            "{}: threshold {:.6}, {} of {} candidates selected",
            prep.method.label(),
            th,
            sel.len(),
            run.stats.len()
        );
    }
    emit(&a.out, &t.render(a.out.format.unwrap_or(Format::Pretty)))
}

fn threshold(a: ThresholdArgs) -> Result<()> {
    check_params(a.fdr_f, &a.decoupling)?;
    let rule = match a.rule {
        ThresholdRuleName::Fdr => Rule::Fdr(a.fdr_f),
        ThresholdRuleName::Decoupling => Rule::Decoupling(decoupling_options(&a.decoupling, a.data.seed)),
    };
    let prep = prepare(&a.data)?;
    if matches!(rule, Rule::Fdr(_)) && prep.by != RankBy::Magnitude {
        return Err(Error::Usage("the FDR rule applies to sis/csis only".into()));
    }
    let run = with_workers(a.data.workers, || {
        screen_once(&prep.loaded.data, &prep.cond, prep.family, prep.by, &prep.screen, rule)
    })?;
    let mut t = Table::new(["method", "rule", "threshold", "n", "d", "selected"]);
    t.push(vec![
        prep.method.label().to_owned(),
        match a.rule {
            ThresholdRuleName::Fdr => "fdr",
            ThresholdRuleName::Decoupling => "decoupling",
        }
        .to_owned(),
        opt(run.threshold, 6),
        prep.loaded.data.n().to_string(),
        run.stats.len().to_string(),
        run.selected.map_or(0, |s| s.len()).to_string(),
    ]);
    emit(&a.out, &t.render(a.out.format.unwrap_or(Format::Pretty)))
}

fn eigen_ratio(a: EigenArgs) -> Result<()> {
    let mut t = Table::new(["r", "q", "d", "lam_unc", "lam_cond", "ratio"]);
    for &r in &a.r {
        for &q in &a.q {
            for &d in &a.d {
                let e = conditional_eigen_ratio(r, q, d).map_err(|e| Error::Usage(e.to_string()))?;
                t.push(vec![
                    format!("{r}"),
                    q.to_string(),
                    d.to_string(),
                    format!("{:.6}", e.lam_unc),
                    format!("{:.6}", e.lam_cond),
                    format!("{:.6}", e.ratio),
                ]);
            }
        }
    }
    emit(&a.out, &t.render(a.out.format.unwrap_or(Format::Pretty)))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let config = RunConfig {
        source: Source::Example(ExampleSource {
            id: a.example,
            rho: a.rho,
            cset: a.cset,
            n: a.n,
            p: a.p,
        }),
        family: a.family,
        replications: a.replication + 1,
        seed: a.seed,
        ..RunConfig::default()
    };
    let spec = config.experiment_spec()?;
    let rep = generate_replication(&spec, a.replication)?;
    let labels = |idx: &[usize]| idx.iter().map(|&j| rep.data.column_label(j)).collect::<Vec<_>>().join(",");
    eprintln!("conditioning: {}", labels(rep.cond.indices()));
    eprintln!("active: {}", labels(&spec.beta_star.support()));
    match &a.output {
        Some(path) => save_csv(path, &rep.data),
        None => write_csv(std::io::stdout().lock(), &rep.data),
    }
}

/// Convenience for tests and scripts: run a simulation config file.
pub fn simulate_file(path: &Path) -> Result<String> {
    let config = RunConfig::load(path)?;
    let rows = run_experiment(&config)?;
    Ok(report_table(&rows, config.output.timing).render(config.output.format))
}
