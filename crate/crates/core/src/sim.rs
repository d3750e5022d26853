//! Simulation harness: a synthetic observational study with eight
//! covariates and three outcomes of increasing nonlinearity, matched at
//! several caps and analysed with Neyman and randomization intervals.
//!
//! Covariates for unit `i` with treatment `W_i`:
//!
//! * `x1..x4 ~ N(mu W_i, 1)` independently, `mu = (0.2, 0.2, 0.5, 0.5)`;
//! * `x5, x6 ~ Bern(0.1 + 0.068 W_i)`;
//! * `x7, x8 ~ Bern(0.4 + 0.242 W_i)`.
//!
//! Outcomes are `y_t = f_t(x) + W + eps`, `eps ~ N(0, 4)`, with
//!
//! * `f1 = 3.5 x1 + 4.5 x3 + 1.5 x5 + 2.5 x7`
//! * `f2 = f1 + 2.5 sign(x1) sqrt|x1| + 5.5 x3^2`
//! * `f3 = f2 + 2.5 x3 x7 - 4.5 |x1 x3^3|`
//!
//! so the additive effect is 1 for every outcome. With these constants the
//! pooled-variance standardized differences of the binary covariates are
//! roughly 0.2 and 0.5, matching the normal ones.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Assignment, Caps, Covariates, DesignSpec, MatchedDataset};
use crate::designs::Design;
use crate::error::{Error, Result};
use crate::inference::{self, Estimator, Grid, InferenceResult};
use crate::matching::{cardinality_match, MatchOptions, DEFAULT_MIN_PAIRS};
use crate::rng;

pub const TRUE_EFFECT: f64 = 1.0;
pub const N_COVARIATES: usize = 8;
pub const N_OUTCOMES: usize = 3;
const NORMAL_SHIFT: [f64; 4] = [0.2, 0.2, 0.5, 0.5];

pub const METHOD_NEYMAN_COMPLETE: &str = "neyman-complete";
pub const METHOD_NEYMAN_PAIRED: &str = "neyman-paired";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_treated: usize,
    pub n_control: usize,
    pub replications: usize,
    /// Matching caps, each applied to every covariate.
    pub caps: Vec<f64>,
    /// Caps whose matched datasets also get randomization intervals.
    pub randomization_caps: Vec<f64>,
    /// Cap of the constrained design assumed in the analysis.
    pub constrained_cap: f64,
    pub m: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Multiplies both arm sizes.
    pub scale: f64,
    pub noise_variance: f64,
    pub grid: Grid,
    pub max_attempts: u64,
    pub min_pairs: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_treated: 250,
            n_control: 500,
            replications: 100,
            caps: alloc::vec![0.1, 0.01],
            randomization_caps: alloc::vec![0.01],
            constrained_cap: 0.05,
            m: 500,
            alpha: 0.05,
            seed: 0,
            scale: 1.0,
            noise_variance: 4.0,
            grid: Grid { lo: -12.0, hi: 12.0, step: 0.02 },
            max_attempts: 5_000_000,
            min_pairs: DEFAULT_MIN_PAIRS,
        }
    }
}

impl SimConfig {
    /// 100 replicates at 0.4 of the full sample size.
    pub fn desk_scale() -> Self {
        SimConfig { scale: 0.4, ..SimConfig::default() }
    }

    /// 1000 replicates, `m = 1000`, grid step 0.01.
    pub fn full_scale() -> Self {
        SimConfig { replications: 1000, m: 1000, grid: Grid::default(), ..SimConfig::default() }
    }

    fn scaled(n: usize, scale: f64) -> usize {
        libm::round(n as f64 * scale) as usize
    }

    pub fn effective_n_treated(&self) -> usize {
        Self::scaled(self.n_treated, self.scale)
    }

    pub fn effective_n_control(&self) -> usize {
        Self::scaled(self.n_control, self.scale)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(alloc::format!("simulation config: {what}")));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if !(self.scale > 0.0) || self.effective_n_treated() < 2 || self.effective_n_control() < 2 {
            return bad("each arm needs at least two units after scaling");
        }
        if self.caps.is_empty() || self.caps.iter().any(|c| !(*c > 0.0)) {
            return bad("caps must be positive");
        }
        if !(self.constrained_cap > 0.0) {
            return bad("constrained cap must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.m == 0 {
            return bad("m must be at least 1");
        }
        if !(self.noise_variance >= 0.0) {
            return bad("noise variance must be non-negative");
        }
        Ok(())
    }
}

/// One synthetic observational dataset before matching. Treated units come
/// first.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDataset {
    pub raw: Covariates,
    pub treatment: Assignment,
    pub outcomes: [Vec<f64>; N_OUTCOMES],
}

impl SimDataset {
    /// Covariates standardized on the full sample; no outcome attached.
    pub fn dataset(&self) -> Result<MatchedDataset> {
        MatchedDataset::from_raw(&self.raw, MatchedDataset::default_names(N_COVARIATES), self.treatment.clone())
    }
}

pub fn mean_functions(x: &[f64]) -> [f64; N_OUTCOMES] {
    let (x1, x3, x5, x7) = (x[0], x[2], x[4], x[6]);
    let f1 = 3.5 * x1 + 4.5 * x3 + 1.5 * x5 + 2.5 * x7;
    let f2 = f1 + 2.5 * x1.signum() * libm::sqrt(x1.abs()) + 5.5 * x3 * x3;
    let f3 = f2 + 2.5 * x3 * x7 - 4.5 * (x1 * x3 * x3 * x3).abs();
    [f1, f2, f3]
}

pub fn generate_dataset(n_treated: usize, n_control: usize, noise_variance: f64, seed: u64) -> SimDataset {
    let mut r = rng::substream(seed, 0);
    let n = n_treated + n_control;
    let sd = libm::sqrt(noise_variance);
    let mut columns = alloc::vec![Vec::with_capacity(n); N_COVARIATES];
    let mut outcomes: [Vec<f64>; N_OUTCOMES] = Default::default();
    for i in 0..n {
        let w = if i < n_treated { 1.0 } else { 0.0 };
        let mut x = [0.0; N_COVARIATES];
        for (k, shift) in NORMAL_SHIFT.iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut r);
            x[k] = z + shift * w;
        }
        for k in 4..6 {
            x[k] = f64::from(u8::from(r.random::<f64>() < 0.1 + 0.068 * w));
        }
        for k in 6..8 {
            x[k] = f64::from(u8::from(r.random::<f64>() < 0.4 + 0.242 * w));
        }
        for (col, v) in columns.iter_mut().zip(x) {
            col.push(v);
        }
        for (y, f) in outcomes.iter_mut().zip(mean_functions(&x)) {
            let e: f64 = StandardNormal.sample(&mut r);
            y.push(f + w + sd * e);
        }
    }
    SimDataset {
        raw: Covariates::from_columns(columns).expect("columns have equal length"),
        treatment: Assignment::new((0..n).map(|i| i < n_treated).collect()),
        outcomes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    /// 1-based outcome number.
    pub outcome: usize,
    pub method: String,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub covers: bool,
    pub acceptance_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapRecord {
    pub cap: f64,
    /// Set when matching or an analysis failed; the other fields are then
    /// partial or empty.
    pub failure: Option<String>,
    pub n_pairs: usize,
    pub treated_retention: f64,
    pub max_abs_smd: Option<f64>,
    /// Mean-difference estimate per outcome.
    pub estimates: Vec<f64>,
    pub intervals: Vec<IntervalRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub caps: Vec<CapRecord>,
}

fn replicate_seed(seed: u64, index: usize) -> u64 {
    rng::derive_seed(seed, index as u64)
}

fn interval_record(outcome: usize, method: &str, r: &InferenceResult) -> IntervalRecord {
    IntervalRecord {
        outcome,
        method: String::from(method),
        estimate: r.estimate,
        ci_low: r.ci_low,
        ci_high: r.ci_high,
        covers: r.covers(TRUE_EFFECT),
        acceptance_rate: r.diagnostics.acceptance_rate,
    }
}

/// Randomization method label for a design, e.g. `randomization-paired`.
pub fn randomization_method(spec: &DesignSpec) -> String {
    alloc::format!("randomization-{}", spec.label())
}

fn analyse_cap(config: &SimConfig, sim: &SimDataset, full: &MatchedDataset, cap: f64, rseed: u64, ci: usize) -> CapRecord {
    let mut rec = CapRecord {
        cap,
        failure: None,
        n_pairs: 0,
        treated_retention: 0.0,
        max_abs_smd: None,
        estimates: Vec::new(),
        intervals: Vec::new(),
    };
    let opts = MatchOptions { min_pairs: config.min_pairs, seed: rng::derive_seed(rseed, 100 + ci as u64), ..MatchOptions::default() };
    let result = match cardinality_match(full, &Caps::Uniform(cap), &opts) {
        Ok(r) => r,
        Err(e) => {
            rec.failure = Some(alloc::format!("{e}"));
            return rec;
        }
    };
    rec.n_pairs = result.n_pairs();
    rec.treated_retention = result.n_pairs() as f64 / full.n_treated() as f64;
    rec.max_abs_smd = Some(result.achieved_smds.iter().fold(0.0, |m, d| m.max(d.abs())));
    let matched = result.matched_dataset(full);
    let mut units: Vec<usize> = result.kept_treated.iter().chain(&result.kept_control).copied().collect();
    units.sort_unstable();

    let designs = [DesignSpec::complete(), DesignSpec::paired(), DesignSpec::constrained(Caps::Uniform(config.constrained_cap))];
    let with_randomization = config.randomization_caps.iter().any(|c| c == &cap);
    let mut draw_sets = Vec::new();
    if with_randomization {
        for (d, spec) in designs.iter().enumerate() {
            let drawn = Design::new(spec, &matched).and_then(|des| {
                des.with_max_attempts(config.max_attempts).draw_set(config.m, rng::derive_seed(rseed, 200 + 10 * ci as u64 + d as u64))
            });
            match drawn {
                Ok(ds) => draw_sets.push((spec, ds)),
                Err(e) => rec.failure = Some(alloc::format!("{}: {e}", spec.label())),
            }
        }
    }

    for (o, y_full) in sim.outcomes.iter().enumerate() {
        let y: Vec<f64> = units.iter().map(|&i| y_full[i]).collect();
        let ds = match matched.clone().with_outcome(y) {
            Ok(ds) => ds,
            Err(e) => {
                rec.failure = Some(alloc::format!("{e}"));
                return rec;
            }
        };
        let outcome = o + 1;
        match inference::mean_difference(&ds, ds.treatment()) {
            Ok(est) => rec.estimates.push(est),
            Err(e) => {
                rec.failure = Some(alloc::format!("{e}"));
                return rec;
            }
        }
        let neyman = [
            (METHOD_NEYMAN_COMPLETE, inference::neyman_ci_complete(&ds, config.alpha)),
            (METHOD_NEYMAN_PAIRED, inference::neyman_ci_paired(&ds, config.alpha)),
        ];
        for (name, r) in neyman {
            match r {
                Ok(r) => rec.intervals.push(interval_record(outcome, name, &r)),
                Err(e) => rec.failure = Some(alloc::format!("{name}: {e}")),
            }
        }
        for (spec, draws) in &draw_sets {
            match inference::invert_ci_on_draws(&ds, spec, draws, Estimator::MeanDiff, config.alpha, config.grid) {
                Ok(r) => rec.intervals.push(interval_record(outcome, &randomization_method(spec), &r)),
                Err(e) => rec.failure = Some(alloc::format!("{}: {e}", spec.label())),
            }
        }
    }
    rec
}

/// Replicate `index`: depends only on `(config, index)`.
pub fn run_replicate(config: &SimConfig, index: usize) -> Result<ReplicateRecord> {
    let rseed = replicate_seed(config.seed, index);
    let sim = generate_dataset(
        config.effective_n_treated(),
        config.effective_n_control(),
        config.noise_variance,
        rng::derive_seed(rseed, 1),
    );
    let full = sim.dataset()?;
    let caps = config.caps.iter().enumerate().map(|(ci, &cap)| analyse_cap(config, &sim, &full, cap, rseed, ci)).collect();
    Ok(ReplicateRecord { index, caps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub cap: f64,
    pub outcome: usize,
    pub replicates: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub variance: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub cap: f64,
    pub outcome: usize,
    pub method: String,
    pub replicates: usize,
    pub coverage: f64,
    /// Over intervals with a nonempty acceptance region.
    pub mean_width: f64,
    pub empty_regions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub cap: f64,
    pub matched: usize,
    pub failures: usize,
    pub mean_pairs: f64,
    pub min_pairs: usize,
    pub max_pairs: usize,
    pub min_treated_retention: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub generator: String,
    pub sizes: Vec<SizeSummary>,
    pub estimators: Vec<EstimatorSummary>,
    pub intervals: Vec<IntervalSummary>,
    pub replicates: Vec<ReplicateRecord>,
}

impl SimReport {
    pub fn estimator(&self, cap: f64, outcome: usize) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.cap == cap && e.outcome == outcome)
    }

    pub fn interval(&self, cap: f64, outcome: usize, method: &str) -> Option<&IntervalSummary> {
        self.intervals.iter().find(|e| e.cap == cap && e.outcome == outcome && e.method == method)
    }
}

/// Summaries over replicate records, which are sorted by index first so the
/// result does not depend on the order they were computed in.
pub fn aggregate(config: &SimConfig, mut replicates: Vec<ReplicateRecord>) -> SimReport {
    replicates.sort_by_key(|r| r.index);
    let mut sizes = Vec::new();
    let mut estimators = Vec::new();
    let mut intervals = Vec::new();
    for (ci, &cap) in config.caps.iter().enumerate() {
        let recs: Vec<&CapRecord> = replicates.iter().filter_map(|r| r.caps.get(ci)).collect();
        let ok: Vec<&CapRecord> = recs.iter().copied().filter(|r| r.failure.is_none()).collect();
        let pairs: Vec<usize> = ok.iter().map(|r| r.n_pairs).collect();
        sizes.push(SizeSummary {
            cap,
            matched: ok.len(),
            failures: recs.len() - ok.len(),
            mean_pairs: pairs.iter().sum::<usize>() as f64 / pairs.len().max(1) as f64,
            min_pairs: pairs.iter().copied().min().unwrap_or(0),
            max_pairs: pairs.iter().copied().max().unwrap_or(0),
            min_treated_retention: ok.iter().map(|r| r.treated_retention).fold(f64::INFINITY, f64::min),
        });
        for outcome in 1..=N_OUTCOMES {
            let est: Vec<f64> = ok.iter().map(|r| r.estimates[outcome - 1]).collect();
            let n = est.len();
            let mean = est.iter().sum::<f64>() / n as f64;
            let variance = if n > 1 { crate::stats::sample_variance(&est) } else { f64::NAN };
            let mse = est.iter().map(|e| (e - TRUE_EFFECT) * (e - TRUE_EFFECT)).sum::<f64>() / n as f64;
            estimators.push(EstimatorSummary {
                cap,
                outcome,
                replicates: n,
                mean_estimate: mean,
                bias: mean - TRUE_EFFECT,
                variance,
                rmse: libm::sqrt(mse),
            });
            let mut methods: Vec<&str> = Vec::new();
            for r in &ok {
                for iv in r.intervals.iter().filter(|iv| iv.outcome == outcome) {
                    if !methods.contains(&iv.method.as_str()) {
                        methods.push(&iv.method);
                    }
                }
            }
            for method in methods {
                let ivs: Vec<&IntervalRecord> =
                    ok.iter().flat_map(|r| r.intervals.iter()).filter(|iv| iv.outcome == outcome && iv.method == method).collect();
                let nonempty: Vec<&&IntervalRecord> = ivs.iter().filter(|iv| !iv.ci_low.is_nan()).collect();
                intervals.push(IntervalSummary {
                    cap,
                    outcome,
                    method: String::from(method),
                    replicates: ivs.len(),
                    coverage: ivs.iter().filter(|iv| iv.covers).count() as f64 / ivs.len() as f64,
                    mean_width: nonempty.iter().map(|iv| iv.ci_high - iv.ci_low).sum::<f64>() / nonempty.len().max(1) as f64,
                    empty_regions: ivs.len() - nonempty.len(),
                });
            }
        }
    }
    SimReport { config: config.clone(), generator: String::from(rng::GENERATOR), sizes, estimators, intervals, replicates }
}

/// Runs every replicate in order on the calling thread.
pub fn run_simulation(config: &SimConfig) -> Result<SimReport> {
    config.validate()?;
    let reps = (0..config.replications).map(|i| run_replicate(config, i)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, reps))
}
