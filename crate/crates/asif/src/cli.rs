//! The `asif` command line.

use std::path::PathBuf;

use asif_core::balance::Statistic;
use asif_core::inference::{self, Estimator, Grid, InferenceResult};
use asif_core::matching::{cardinality_match, MatchOptions, NearExact, DEFAULT_MAX_ITERATIONS, DEFAULT_MIN_PAIRS};
use asif_core::randtest::{self, DesignTest, DiagnosticTable, TestWarning};
use asif_core::sim::{SimConfig, SimReport, METHOD_NEYMAN_COMPLETE, METHOD_NEYMAN_PAIRED};
use asif_core::{Design, DesignKind, DesignSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{json_argument, parse_caps, parse_design, parse_designs, parse_grid};
use crate::error::{CliError, Result};
use crate::io::{load_csv, LoadOptions, LoadedCsv};
use crate::manifest::RunWriter;
use crate::parallel;
use crate::svg::{self, SvgMeta};

#[derive(Debug, Parser)]
#[command(name = "asif", version, about = "Design-stage balance tests and randomization inference for matched data")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw of the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Leave timestamps out of every output.
    #[arg(long, global = true)]
    pub reproducible: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Largest pair-matched subset meeting per-covariate |SMD| caps.
    Match(MatchArgs),
    /// Randomization test of the observed assignment under a design.
    TestDesign(TestDesignArgs),
    /// Balance distributions of several designs, as tables and SVG figures.
    Diagnose(DiagnoseArgs),
    /// Confidence interval for an additive treatment effect.
    Infer(InferArgs),
    /// Simulation study on synthetic data with a known effect.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// CSV with a `w` column, optional `y` and `pair`/`block` columns, and covariates.
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    /// Use covariates as given instead of standardizing them.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MatchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Caps as JSON (number, array, or object with `"*"` default) or a file.
    #[arg(long)]
    pub caps: String,
    /// Only pair units agreeing on this covariate.
    #[arg(long)]
    pub near_exact: Option<String>,
    /// Largest within-pair difference (raw units) on the near-exact covariate.
    #[arg(long, default_value_t = asif_core::matching::DEFAULT_NEAR_EXACT_TOLERANCE)]
    pub near_exact_tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_PAIRS)]
    pub min_pairs: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    pub max_iterations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct TestDesignArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Design as JSON, a file, or a bare kind such as `paired`.
    #[arg(long)]
    pub design: String,
    /// `mahalanobis`, `max_abs_smd`, or `smd:<covariate>`.
    #[arg(long, default_value = "mahalanobis")]
    pub statistic: String,
    #[arg(long, default_value_t = randtest::DEFAULT_M)]
    pub m: usize,
    #[arg(long, default_value_t = randtest::DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Give up on a constrained draw after this many proposals.
    #[arg(long, default_value_t = asif_core::designs::DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// One design or a JSON array of designs (inline or a file).
    #[arg(long)]
    pub designs: String,
    #[arg(long, default_value_t = randtest::DEFAULT_M)]
    pub m: usize,
    #[arg(long, default_value_t = asif_core::designs::DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InferMethod {
    /// Invert sharp-null randomization tests over the grid.
    Randomization,
    /// Normal-theory interval for the complete or paired design.
    Neyman,
}

#[derive(Debug, Args, Serialize)]
pub struct InferArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Design as JSON, a file, or a bare kind such as `paired`.
    #[arg(long)]
    pub design: String,
    #[arg(long, value_enum, default_value_t = InferMethod::Randomization)]
    pub method: InferMethod,
    /// `mean_diff` or `ols`.
    #[arg(long, default_value = "mean_diff")]
    pub estimator: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Candidate effects as `lo:hi:step`.
    #[arg(long, default_value = "-12:12:0.01", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value_t = randtest::DEFAULT_M)]
    pub m: usize,
    #[arg(long, default_value_t = asif_core::designs::DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON settings (inline or a file) layered over the chosen scale.
    #[arg(long)]
    pub config: Option<String>,
    /// 1000 replicates with m = 1000 at the full sample size.
    #[arg(long)]
    pub full_scale: bool,
    /// Number of simulated datasets.
    #[arg(long)]
    pub replications: Option<usize>,
    /// Multiplier on the 250 treated / 500 control sample sizes.
    #[arg(long)]
    pub scale: Option<f64>,
    /// Draws per randomization test.
    #[arg(long)]
    pub m: Option<usize>,
}

pub fn run(cli: &Cli) -> Result<()> {
    parallel::configure_threads();
    match &cli.command {
        Command::Match(a) => cmd_match(&cli.global, a),
        Command::TestDesign(a) => cmd_test_design(&cli.global, a),
        Command::Diagnose(a) => cmd_diagnose(&cli.global, a),
        Command::Infer(a) => cmd_infer(&cli.global, a),
        Command::Simulate(a) => cmd_simulate(&cli.global, a),
    }
}

fn settings<T: Serialize>(args: &T) -> Result<serde_json::Value> {
    serde_json::to_value(args).map_err(|e| CliError::Config(e.to_string()))
}

fn load(data: &DataArgs, read_outcome: bool) -> Result<LoadedCsv> {
    load_csv(&data.data, LoadOptions { standardize: !data.no_standardize, read_outcome })
}

fn writer(command: &str, g: &GlobalArgs, args: &impl Serialize, data: Option<&LoadedCsv>) -> Result<RunWriter> {
    RunWriter::new(command, &g.out_dir, &settings(args)?, data.map(|d| d.sha256.clone()), g.seed, g.reproducible)
}

pub fn cmd_match(g: &GlobalArgs, a: &MatchArgs) -> Result<()> {
    let csv = load(&a.data, false)?;
    let ds = csv.dataset()?;
    let caps = parse_caps(&json_argument(&a.caps)?)?;
    let options = MatchOptions {
        near_exact: a.near_exact.as_ref().map(|c| NearExact { covariate: c.clone(), tolerance: a.near_exact_tolerance }),
        min_pairs: a.min_pairs,
        seed: g.seed,
        max_iterations: a.max_iterations,
    };
    let mut out = writer("match", g, a, Some(&csv))?;
    let result = cardinality_match(&ds, &caps, &options)?;
    out.write_bytes("matched.csv", &csv.matched_csv(&result)?)?;
    out.write_json("match_result.json", &result)?;
    out.finish()?;
    eprintln!("kept {} pairs ({})", result.n_pairs(), result.pairing);
    Ok(())
}

fn report_warnings(test: &DesignTest) {
    for w in &test.warnings {
        match w {
            TestWarning::NotInSupport => {
                eprintln!("warning: NotInSupport: the observed assignment is outside the support of {}", test.run.design_label)
            }
            TestWarning::RankDeficientCovariance { rank } => {
                eprintln!("warning: covariate covariance is rank deficient (rank {rank}); using a pseudo-inverse")
            }
        }
    }
}

pub fn cmd_test_design(g: &GlobalArgs, a: &TestDesignArgs) -> Result<()> {
    let csv = load(&a.data, false)?;
    let ds = csv.dataset()?.outcome_free();
    let spec = parse_design(&json_argument(&a.design)?)?;
    let statistic = Statistic::parse(&a.statistic, ds.covariate_names())?;
    let mut out = writer("test-design", g, a, Some(&csv))?;
    let design = Design::new(&spec, &ds)?.with_max_attempts(a.max_attempts);
    let draws = parallel::draw_set(&design, a.m, g.seed)?;
    let test = randtest::test_on_draws(&design, &draws, &statistic, a.alpha)?;
    report_warnings(&test);
    out.write_json("test_design.json", &test)?;
    out.finish()?;
    eprintln!("{} under {}: observed {:.6}, p = {:.4}", test.run.statistic, test.run.design_label, test.run.observed, test.run.p_value);
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct DesignSummary {
    pub label: String,
    pub design: DesignSpec,
    pub observed_mahalanobis: f64,
    pub p_value: f64,
    pub acceptance_rate: f64,
    pub observed_in_support: bool,
    pub mean_mahalanobis: f64,
    pub abs_smd_q05: Vec<f64>,
    pub abs_smd_q95: Vec<f64>,
}

/// The diagnostic table without the per-draw values.
#[derive(Debug, Serialize)]
pub struct DiagnosticSummary {
    pub covariate_names: Vec<String>,
    pub observed_abs_smd: Vec<f64>,
    pub m: usize,
    pub seed: u64,
    pub quantile_type: u8,
    pub generator: String,
    pub draws_file: String,
    pub designs: Vec<DesignSummary>,
}

impl DiagnosticSummary {
    pub fn new(t: &DiagnosticTable, draws_file: &str) -> Self {
        DiagnosticSummary {
            covariate_names: t.covariate_names.clone(),
            observed_abs_smd: t.observed_abs_smd.clone(),
            m: t.m,
            seed: t.seed,
            quantile_type: t.quantile_type,
            generator: t.generator.clone(),
            draws_file: draws_file.into(),
            designs: t
                .designs
                .iter()
                .map(|d| DesignSummary {
                    label: d.label.clone(),
                    design: d.design.clone(),
                    observed_mahalanobis: d.observed_mahalanobis,
                    p_value: d.p_value,
                    acceptance_rate: d.acceptance_rate,
                    observed_in_support: d.observed_in_support,
                    mean_mahalanobis: d.mahalanobis.iter().sum::<f64>() / d.mahalanobis.len().max(1) as f64,
                    abs_smd_q05: d.abs_smd_q05.clone(),
                    abs_smd_q95: d.abs_smd_q95.clone(),
                })
                .collect(),
        }
    }
}

/// Long format: `design,draw_index,mahalanobis`.
pub fn diagnostic_csv(t: &DiagnosticTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(["design", "draw_index", "mahalanobis"]).map_err(err)?;
    for d in &t.designs {
        for (i, v) in d.mahalanobis.iter().enumerate() {
            w.write_record([d.label.as_str(), &i.to_string(), &v.to_string()]).map_err(err)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_diagnose(g: &GlobalArgs, a: &DiagnoseArgs) -> Result<()> {
    let csv = load(&a.data, false)?;
    let ds = csv.dataset()?.outcome_free();
    let specs = parse_designs(&json_argument(&a.designs)?)?;
    let mut out = writer("diagnose", g, a, Some(&csv))?;
    let mut sets = Vec::with_capacity(specs.len());
    for spec in &specs {
        let design = Design::new(spec, &ds)?.with_max_attempts(a.max_attempts);
        sets.push(parallel::draw_set(&design, a.m, g.seed)?);
    }
    let table = randtest::diagnostic_from_draws(&ds, &specs, &sets, a.m, g.seed)?;
    for d in table.designs.iter().filter(|d| !d.observed_in_support) {
        eprintln!("warning: NotInSupport: the observed assignment is outside the support of {}", d.label);
    }
    out.write_bytes("diagnostic.csv", &diagnostic_csv(&table)?)?;
    out.write_json("diagnostic.json", &DiagnosticSummary::new(&table, "diagnostic.csv"))?;
    let meta = SvgMeta { manifest: out.manifest_name(), timestamp: out.timestamp() };
    out.write_bytes("love_plot.svg", svg::love_plot(&table, &meta).as_bytes())?;
    out.write_bytes("density.svg", svg::density_overlay(&table, &meta).as_bytes())?;
    out.finish()?;
    Ok(())
}

pub fn cmd_infer(g: &GlobalArgs, a: &InferArgs) -> Result<()> {
    let csv = load(&a.data, true)?;
    let ds = csv.dataset()?;
    if ds.outcome().is_none() {
        return Err(asif_core::Error::MissingOutcome.into());
    }
    let spec = parse_design(&json_argument(&a.design)?)?;
    let estimator = Estimator::parse(&a.estimator)?;
    let grid: Grid = parse_grid(&a.grid)?;
    let mut out = writer("infer", g, a, Some(&csv))?;
    let result: InferenceResult = match a.method {
        InferMethod::Randomization => {
            let design = Design::new(&spec, &ds)?.with_max_attempts(a.max_attempts);
            let draws = parallel::draw_set(&design, a.m, g.seed)?;
            inference::invert_ci_on_draws(&ds, &spec, &draws, estimator, a.alpha, grid)?
        }
        InferMethod::Neyman => {
            if estimator != Estimator::MeanDiff {
                return Err(CliError::Config("Neyman intervals use the mean_diff estimator".into()));
            }
            match spec.kind {
                DesignKind::Complete => inference::neyman_ci_complete(&ds, a.alpha)?,
                DesignKind::Paired => inference::neyman_ci_paired(&ds, a.alpha)?,
                k => return Err(CliError::Config(format!("no Neyman interval for design `{}`", k.name()))),
            }
        }
    };
    out.write_json("infer.json", &result)?;
    out.finish()?;
    if !result.diagnostics.nonempty_acceptance_region {
        return Err(CliError::EmptyAcceptanceRegion);
    }
    if result.diagnostics.grid_too_narrow {
        eprintln!("warning: the interval reaches the edge of the grid; widen --grid");
    }
    eprintln!("{}: estimate {:.4}, interval [{:.4}, {:.4}]", result.method, result.estimate, result.ci_low, result.ci_high);
    Ok(())
}

/// Settings for `simulate`: the chosen scale, then `--config`, then flags.
pub fn simulation_config(g: &GlobalArgs, a: &SimulateArgs) -> Result<SimConfig> {
    let base = if a.full_scale { SimConfig::full_scale() } else { SimConfig::desk_scale() };
    let mut value = serde_json::to_value(&base).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(arg) = &a.config {
        let text = json_argument(arg)?;
        let overlay: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("simulation config: {e}")))?;
        let serde_json::Value::Object(fields) = overlay else {
            return Err(CliError::Config("simulation config must be a JSON object".into()));
        };
        for (k, v) in fields {
            if value.get(&k).is_none() {
                return Err(CliError::Config(format!("simulation config: unknown field `{k}`")));
            }
            value[k] = v;
        }
    }
    let mut config: SimConfig =
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("simulation config: {e}")))?;
    config.seed = g.seed;
    if let Some(r) = a.replications {
        config.replications = r;
    }
    if let Some(s) = a.scale {
        config.scale = s;
    }
    if let Some(m) = a.m {
        config.m = m;
    }
    config.validate()?;
    Ok(config)
}

/// Bias, variance, RMSE and Neyman coverage per cap and outcome.
pub fn table1_csv(report: &SimReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(["cap", "outcome", "replicates", "bias", "variance", "rmse", "cr_coverage", "pr_coverage"]).map_err(err)?;
    for e in &report.estimators {
        let cov = |m: &str| report.interval(e.cap, e.outcome, m).map_or(String::new(), |i| i.coverage.to_string());
        w.write_record([
            e.cap.to_string(),
            e.outcome.to_string(),
            e.replicates.to_string(),
            e.bias.to_string(),
            e.variance.to_string(),
            e.rmse.to_string(),
            cov(METHOD_NEYMAN_COMPLETE),
            cov(METHOD_NEYMAN_PAIRED),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(e.to_string()))
}

/// Mean width and coverage per cap, outcome and interval method.
pub fn table2_csv(report: &SimReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(["cap", "outcome", "method", "replicates", "mean_width", "coverage", "empty_regions"]).map_err(err)?;
    for i in &report.intervals {
        w.write_record([
            i.cap.to_string(),
            i.outcome.to_string(),
            i.method.clone(),
            i.replicates.to_string(),
            i.mean_width.to_string(),
            i.coverage.to_string(),
            i.empty_regions.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_simulate(g: &GlobalArgs, a: &SimulateArgs) -> Result<()> {
    let config = simulation_config(g, a)?;
    let mut out = writer("simulate", g, &config, None)?;
    let report = parallel::run_simulation(&config)?;
    out.write_json("sim_report.json", &report)?;
    out.write_bytes("table1.csv", &table1_csv(&report)?)?;
    out.write_bytes("table2.csv", &table2_csv(&report)?)?;
    out.finish()?;
    for s in &report.sizes {
        if s.failures > 0 {
            eprintln!("warning: cap {}: {} replicates failed to match and were excluded", s.cap, s.failures);
        }
    }
    Ok(())
}
