//! Randomization test of `H0: W ~ P*(W | X)`, per-covariate batteries,
//! and the multi-design balance diagnostic.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::balance::{smd_masked, BalanceEvaluator, MahalanobisMetric, Statistic};
use crate::data::{DesignSpec, MatchedDataset};
use crate::designs::{Design, DrawSet};
use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_M: usize = 1000;
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Larger levels suggested for balance tests to limit Type II errors.
pub const ALPHA_PRESETS: [f64; 3] = [0.05, 0.15, 0.2];

/// Relative slack when comparing `|t|` values, so that statistics equal in
/// exact arithmetic (e.g. mirror-image assignments) count as ties.
pub const TIE_RTOL: f64 = 1e-10;

#[inline]
pub fn at_least_as_extreme(value: f64, observed: f64) -> bool {
    let o = observed.abs();
    value.abs() >= o - TIE_RTOL * o
}

/// Two-sided randomization p-value `(1 + #{|t_m| >= |t_obs|}) / (M + 1)`.
pub fn randomization_p_value(observed: f64, null_values: &[f64]) -> f64 {
    let hits = null_values.iter().filter(|&&v| at_least_as_extreme(v, observed)).count();
    (1 + hits) as f64 / (null_values.len() + 1) as f64
}

/// Everything needed to reproduce one randomization test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizationRun {
    pub design: DesignSpec,
    pub design_label: String,
    pub statistic: String,
    pub m: usize,
    pub observed: f64,
    pub null_values: Vec<f64>,
    pub p_value: f64,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum TestWarning {
    /// The observed assignment is outside the design's support, which by
    /// itself is strong evidence against the design.
    NotInSupport,
    /// `cov(X)` was rank deficient and a pseudo-inverse was used.
    RankDeficientCovariance { rank: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTest {
    pub run: RandomizationRun,
    pub alpha: f64,
    pub reject: bool,
    pub warnings: Vec<TestWarning>,
}

/// Runs the test on a draw set that was already generated for `design`.
pub fn test_on_draws(design: &Design<'_>, draws: &DrawSet, statistic: &Statistic, alpha: f64) -> Result<DesignTest> {
    let dataset = design.dataset();
    let eval = BalanceEvaluator::new(dataset, statistic.clone())?;
    let observed = eval.evaluate(dataset.treatment())?;
    let null_values = draws.assignments().map(|w| eval.evaluate(w)).collect::<Result<Vec<_>>>()?;
    let p_value = randomization_p_value(observed, &null_values);
    let mut warnings = Vec::new();
    if !design.in_support(dataset.treatment()) {
        warnings.push(TestWarning::NotInSupport);
    }
    if let Some(metric) = eval.metric().filter(|m| m.is_rank_deficient()) {
        warnings.push(TestWarning::RankDeficientCovariance { rank: metric.rank() });
    }
    Ok(DesignTest {
        run: RandomizationRun {
            design: design.spec().clone(),
            design_label: design.spec().label(),
            statistic: statistic.name(dataset.covariate_names()),
            m: draws.len(),
            observed,
            null_values,
            p_value,
            seed: draws.seed,
            acceptance_rate: draws.acceptance_rate(),
            generator: draws.generator.into(),
        },
        alpha,
        reject: p_value <= alpha,
        warnings,
    })
}

/// α-level randomization test of the observed assignment against `design`.
pub fn test_design(
    dataset: &MatchedDataset,
    design: &DesignSpec,
    statistic: &Statistic,
    m: usize,
    alpha: f64,
    seed: u64,
) -> Result<DesignTest> {
    let design = Design::new(design, dataset)?;
    let draws = design.draw_set(m, seed)?;
    test_on_draws(&design, &draws, statistic, alpha)
}

/// `K x D` table of single-covariate SMD p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerCovariateTable {
    pub covariate_names: Vec<String>,
    pub design_labels: Vec<String>,
    /// Observed treated-minus-control SMD per covariate.
    pub observed_smd: Vec<f64>,
    /// `p_values[k][d]`.
    pub p_values: Vec<Vec<f64>>,
    pub m: usize,
    pub seed: u64,
}

/// One draw set per design, reused across all covariates.
pub fn test_per_covariate(
    dataset: &MatchedDataset,
    designs: &[DesignSpec],
    m: usize,
    seed: u64,
) -> Result<PerCovariateTable> {
    let k = dataset.n_covariates();
    let w_obs = dataset.treatment();
    let n = dataset.n_units();
    let nt = w_obs.n_treated();
    let observed_smd = smd_masked(dataset.covariates(), &w_obs.to_f64(), nt, n - nt);
    let mut p_values = alloc::vec![Vec::with_capacity(designs.len()); k];
    for spec in designs {
        let design = Design::new(spec, dataset)?;
        let draws = design.draw_set(m, seed)?;
        let null: Vec<Vec<f64>> = draws
            .assignments()
            .map(|w| {
                let t = w.n_treated();
                smd_masked(dataset.covariates(), &w.to_f64(), t, n - t)
            })
            .collect();
        for (j, row) in p_values.iter_mut().enumerate() {
            let col: Vec<f64> = null.iter().map(|d| d[j]).collect();
            row.push(randomization_p_value(observed_smd[j], &col));
        }
    }
    Ok(PerCovariateTable {
        covariate_names: dataset.covariate_names().to_vec(),
        design_labels: designs.iter().map(DesignSpec::label).collect(),
        observed_smd,
        p_values,
        m,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDiagnostic {
    pub label: String,
    pub design: DesignSpec,
    pub mahalanobis: Vec<f64>,
    pub observed_mahalanobis: f64,
    /// 5% quantile of each covariate's |SMD| across draws.
    pub abs_smd_q05: Vec<f64>,
    /// 95% quantile of each covariate's |SMD| across draws.
    pub abs_smd_q95: Vec<f64>,
    pub p_value: f64,
    pub acceptance_rate: f64,
    pub observed_in_support: bool,
}

/// Balance distributions of several designs next to the observed balance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticTable {
    pub covariate_names: Vec<String>,
    pub observed_abs_smd: Vec<f64>,
    pub designs: Vec<DesignDiagnostic>,
    pub m: usize,
    pub seed: u64,
    pub quantile_type: u8,
    pub generator: String,
}

pub fn diagnostic_export(
    dataset: &MatchedDataset,
    designs: &[DesignSpec],
    m: usize,
    seed: u64,
) -> Result<DiagnosticTable> {
    let mut sets = Vec::with_capacity(designs.len());
    for spec in designs {
        sets.push(Design::new(spec, dataset)?.draw_set(m, seed)?);
    }
    diagnostic_from_draws(dataset, designs, &sets, m, seed)
}

/// As [`diagnostic_export`], with `draws[d]` already generated for `designs[d]`.
pub fn diagnostic_from_draws(
    dataset: &MatchedDataset,
    designs: &[DesignSpec],
    draws: &[DrawSet],
    m: usize,
    seed: u64,
) -> Result<DiagnosticTable> {
    if draws.len() != designs.len() {
        return Err(Error::InvalidArgument("one draw set per design is required".into()));
    }
    let n = dataset.n_units();
    let x = dataset.covariates();
    let metric = MahalanobisMetric::for_dataset(dataset)?;
    let w_obs = dataset.treatment();
    let nt_obs = w_obs.n_treated();
    let obs_smd = smd_masked(x, &w_obs.to_f64(), nt_obs, n - nt_obs);
    let observed_mahalanobis = metric.distance(&obs_smd, nt_obs, n - nt_obs);
    let mut out = Vec::with_capacity(designs.len());
    let mut generator = String::new();
    for (spec, draws) in designs.iter().zip(draws) {
        let design = Design::new(spec, dataset)?;
        generator = draws.generator.into();
        let mut mahalanobis = Vec::with_capacity(m);
        let mut abs_smd: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(m); dataset.n_covariates()];
        for w in draws.assignments() {
            let t = w.n_treated();
            let d = smd_masked(x, &w.to_f64(), t, n - t);
            mahalanobis.push(metric.distance(&d, t, n - t));
            for (col, v) in abs_smd.iter_mut().zip(&d) {
                col.push(v.abs());
            }
        }
        let (abs_smd_q05, abs_smd_q95) = abs_smd
            .iter_mut()
            .map(|col| {
                col.sort_by(f64::total_cmp);
                (stats::quantile_sorted(col, 0.05), stats::quantile_sorted(col, 0.95))
            })
            .unzip();
        out.push(DesignDiagnostic {
            label: spec.label(),
            design: spec.clone(),
            p_value: randomization_p_value(observed_mahalanobis, &mahalanobis),
            mahalanobis,
            observed_mahalanobis,
            abs_smd_q05,
            abs_smd_q95,
            acceptance_rate: draws.acceptance_rate(),
            observed_in_support: design.in_support(w_obs),
        });
    }
    Ok(DiagnosticTable {
        covariate_names: dataset.covariate_names().to_vec(),
        observed_abs_smd: obs_smd.iter().map(|d| d.abs()).collect(),
        designs: out,
        m,
        seed,
        quantile_type: 7,
        generator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Assignment, Caps, Covariates};
    use alloc::vec;

    fn ds(cols: Vec<Vec<f64>>, w: &[u8]) -> MatchedDataset {
        let k = cols.len();
        let x = Covariates::from_columns(cols).unwrap();
        MatchedDataset::new(x, MatchedDataset::default_names(k), Assignment::from_indicator(w).unwrap()).unwrap()
    }

    #[test]
    fn p_value_boundaries() {
        assert_eq!(randomization_p_value(5.0, &[1.0, -2.0, 4.9]), 0.25);
        assert_eq!(randomization_p_value(2.0, &[2.0, -2.0, 2.0]), 1.0);
        assert_eq!(randomization_p_value(-3.0, &[3.0, 0.0, 0.0]), 0.5);
        // ties within floating noise count
        assert_eq!(randomization_p_value(0.1 + 0.2, &[0.3]), 1.0);
    }

    #[test]
    fn p_value_monotone_in_added_extreme_draws() {
        let mut null = vec![0.1, 0.5, 2.0];
        let mut p = randomization_p_value(1.0, &null);
        for extra in [1.0, -3.0, 7.0] {
            null.push(extra);
            let q = randomization_p_value(1.0, &null);
            assert!(q >= p);
            p = q;
        }
    }

    #[test]
    fn monte_carlo_matches_enumeration_complete() {
        let d = ds(vec![vec![0.3, -1.0, 2.0, 0.5]], &[1, 1, 0, 0]);
        let spec = DesignSpec::complete();
        let design = Design::new(&spec, &d).unwrap();
        let eval = BalanceEvaluator::new(&d, Statistic::Mahalanobis).unwrap();
        let obs = eval.evaluate(d.treatment()).unwrap();
        let support = design.enumerate_support(100).unwrap();
        let exact = support.iter().filter(|w| at_least_as_extreme(eval.evaluate(w).unwrap(), obs)).count() as f64
            / support.len() as f64;
        let t = test_design(&d, &spec, &Statistic::Mahalanobis, 50_000, 0.05, 9).unwrap();
        assert!((t.run.p_value - exact).abs() < 0.01, "{} vs {exact}", t.run.p_value);
        assert_eq!(t.run.p_value, randomization_p_value(t.run.observed, &t.run.null_values));
    }

    #[test]
    fn not_in_support_warning() {
        let z = crate::math::sqrt(3.0) / 2.0;
        let d = ds(vec![vec![-z, -z, z, z]], &[1, 1, 0, 0]);
        let spec = DesignSpec::constrained(Caps::Uniform(0.1));
        let t = test_design(&d, &spec, &Statistic::Mahalanobis, 200, 0.05, 1).unwrap();
        assert!(t.warnings.contains(&TestWarning::NotInSupport));
        // every constrained draw is perfectly balanced
        assert!(t.run.null_values.iter().all(|v| *v < 1e-20));
        assert_eq!(t.run.p_value, 1.0 / 201.0);
        assert!(t.reject);
    }

    #[test]
    fn per_covariate_extremes() {
        // covariate 0 is the treatment indicator, covariate 1 is balanced
        // (10 treated of 30, so the complement is not a competing extreme)
        let w: Vec<u8> = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let x0: Vec<f64> = w.iter().map(|&b| f64::from(b)).collect();
        // treated units see 0..9 once, control units see 0..9 twice
        let x1: Vec<f64> = (0..30).map(|i| f64::from(i / 3)).collect();
        let d = ds(vec![x0, x1], &w);
        let table = test_per_covariate(&d, &[DesignSpec::complete()], 500, 3).unwrap();
        assert_eq!(table.p_values[0][0], 1.0 / 501.0);
        assert!(table.p_values[1][0] > 0.9);
        assert_eq!(table.observed_smd[1], 0.0);
    }

    #[test]
    fn diagnostic_shapes() {
        let x: Vec<f64> = (0..40).map(|i| f64::from(i).cos()).collect();
        let w: Vec<u8> = (0..40).map(|i| u8::from(i % 2 == 0)).collect();
        let d = ds(vec![x], &w);
        let t = diagnostic_export(&d, &[DesignSpec::complete()], 1000, 4).unwrap();
        assert_eq!(t.designs.len(), 1);
        assert_eq!(t.designs[0].mahalanobis.len(), 1000);
        assert!(t.designs[0].mahalanobis.iter().all(|v| *v >= 0.0));
        assert!(t.designs[0].observed_mahalanobis.is_finite());
        assert!(t.designs[0].abs_smd_q05[0] <= t.designs[0].abs_smd_q95[0]);
    }
}
