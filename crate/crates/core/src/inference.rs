//! Analysis-stage inference: estimators, sharp-null randomization tests,
//! confidence intervals by test inversion, and Neymanian intervals.
//!
//! Under the sharp null `H0(tau): Y_i(1) = Y_i(0) + tau` every potential
//! outcome is known, so the estimator can be recomputed for any drawn
//! assignment. The test statistic is centered, `|est(w) - tau|`.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Assignment, Covariates, DesignSpec, MatchedDataset};
use crate::designs::{Design, DrawSet};
use crate::error::{Error, Result};
use crate::linalg::QrLeastSquares;
use crate::randtest::{at_least_as_extreme, randomization_p_value};
use crate::{math, stats};

/// Relative rank tolerance of the regression QR.
pub const OLS_RANK_RTOL: f64 = 1e-10;

/// A treatment-effect estimator used as the randomization test statistic.
/// Both estimators are linear in the outcome vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Treated mean minus control mean.
    #[default]
    MeanDiff,
    /// Coefficient on `w` in the regression of `y` on `[1, w, X]`.
    Ols,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::MeanDiff => "mean_diff",
            Estimator::Ols => "ols",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mean_diff" => Ok(Estimator::MeanDiff),
            "ols" => Ok(Estimator::Ols),
            _ => Err(Error::InvalidArgument(alloc::format!("unknown estimator '{s}'"))),
        }
    }

    pub fn estimate(self, x: &Covariates, y: &[f64], w: &Assignment) -> Result<f64> {
        match self {
            Estimator::MeanDiff => mean_diff_raw(y, w),
            Estimator::Ols => Ok(OlsFit::new(x, w)?.coefficient(y)),
        }
    }

    /// `(est(y_obs, w), est(w_obs, w), est(w, w))`. By linearity the
    /// centered sharp-null statistic at `tau` is `a + tau (c - b - 1)`.
    fn linear_parts(self, x: &Covariates, y_obs: &[f64], w_obs: &[f64], w: &Assignment) -> Result<(f64, f64, f64)> {
        match self {
            Estimator::MeanDiff => {
                let wf = w.to_f64();
                Ok((mean_diff_raw(y_obs, w)?, mean_diff_raw(w_obs, w)?, mean_diff_raw(&wf, w)?))
            }
            Estimator::Ols => {
                let fit = OlsFit::new(x, w)?;
                Ok((fit.coefficient(y_obs), fit.coefficient(w_obs), fit.coefficient(&w.to_f64())))
            }
        }
    }
}

fn mean_diff_raw(y: &[f64], w: &Assignment) -> Result<f64> {
    let (mut st, mut sc, mut nt) = (0.0, 0.0, 0usize);
    for (v, t) in y.iter().zip(w.iter()) {
        if t {
            st += v;
            nt += 1;
        } else {
            sc += v;
        }
    }
    let nc = y.len() - nt;
    if nt == 0 || nc == 0 {
        return Err(Error::DegenerateArm);
    }
    Ok(st / nt as f64 - sc / nc as f64)
}

fn outcome(dataset: &MatchedDataset) -> Result<&[f64]> {
    dataset.outcome().ok_or(Error::MissingOutcome)
}

/// `mean(Y | w = 1) - mean(Y | w = 0)`.
pub fn mean_difference(dataset: &MatchedDataset, w: &Assignment) -> Result<f64> {
    mean_diff_raw(outcome(dataset)?, w)
}

struct OlsFit {
    qr: QrLeastSquares,
}

impl OlsFit {
    fn new(x: &Covariates, w: &Assignment) -> Result<Self> {
        let n = x.n_rows();
        let p = x.n_cols() + 2;
        if n <= p {
            return Err(Error::RankDeficientDesign);
        }
        let design = DMatrix::from_fn(n, p, |i, j| match j {
            0 => 1.0,
            1 => {
                if w.is_treated(i) {
                    1.0
                } else {
                    0.0
                }
            }
            _ => x.get(i, j - 2),
        });
        Ok(OlsFit { qr: QrLeastSquares::new(design, OLS_RANK_RTOL)? })
    }

    fn coefficient(&self, y: &[f64]) -> f64 {
        self.qr.coefficient(1, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsEffect {
    pub coefficient: f64,
    /// Classical homoskedastic standard error.
    pub standard_error: f64,
}

/// Least-squares coefficient on the treatment indicator, adjusting for
/// every covariate.
pub fn ols_effect(dataset: &MatchedDataset, w: &Assignment) -> Result<OlsEffect> {
    let y = outcome(dataset)?;
    let fit = OlsFit::new(dataset.covariates(), w)?;
    Ok(OlsEffect { coefficient: fit.coefficient(y), standard_error: fit.qr.standard_error(1, y) })
}

/// Evenly spaced hypothesised effects `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { lo: -12.0, hi: 12.0, step: 0.01 }
    }
}

impl Grid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("invalid grid {lo}:{hi}:{step}")));
        }
        Ok(Grid { lo, hi, step })
    }

    pub fn len(&self) -> usize {
        math::floor((self.hi - self.lo) / self.step + 1e-9) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InferenceDiagnostics {
    pub acceptance_rate: Option<f64>,
    pub nonempty_acceptance_region: bool,
    /// False when the accepted grid points have gaps.
    pub contiguous: bool,
    /// An endpoint of the grid was accepted; the interval may be truncated.
    pub grid_too_narrow: bool,
    pub standard_error: Option<f64>,
    /// The estimator evaluated at the observed assignment.
    pub observed_estimate: f64,
    pub max_p_value: Option<f64>,
}

/// Point estimate and interval from one inference method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub method: String,
    pub estimator: String,
    pub design: String,
    pub estimate: f64,
    /// NaN when the acceptance region is empty.
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    pub grid: Option<Grid>,
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub diagnostics: InferenceDiagnostics,
}

impl InferenceResult {
    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, tau: f64) -> bool {
        self.ci_low <= tau && tau <= self.ci_high
    }
}

/// Sharp-null p-value computed by explicit imputation of the potential
/// outcomes for every drawn assignment.
pub fn sharp_null_pvalue_on_draws(dataset: &MatchedDataset, draws: &DrawSet, tau: f64, estimator: Estimator) -> Result<f64> {
    let y = outcome(dataset)?;
    let x = dataset.covariates();
    let w_obs = dataset.treatment();
    let y0: Vec<f64> = y.iter().zip(w_obs.iter()).map(|(v, t)| if t { v - tau } else { *v }).collect();
    let observed = estimator.estimate(x, y, w_obs)? - tau;
    let mut null = Vec::with_capacity(draws.len());
    let mut yw = alloc::vec![0.0; y.len()];
    for w in draws.assignments() {
        for ((dst, v), t) in yw.iter_mut().zip(&y0).zip(w.iter()) {
            *dst = if t { v + tau } else { *v };
        }
        null.push(estimator.estimate(x, &yw, w)? - tau);
    }
    Ok(randomization_p_value(observed, &null))
}

/// Randomization p-value of `H0(tau)` under `design`.
pub fn sharp_null_pvalue(
    dataset: &MatchedDataset,
    design: &DesignSpec,
    tau: f64,
    estimator: Estimator,
    m: usize,
    seed: u64,
) -> Result<f64> {
    let draws = Design::new(design, dataset)?.draw_set(m, seed)?;
    sharp_null_pvalue_on_draws(dataset, &draws, tau, estimator)
}

/// Sharp-null p-values for many `tau` sharing one draw set.
#[derive(Debug, Clone)]
pub struct PValueCurve {
    intercepts: Vec<f64>,
    slopes: Vec<f64>,
    observed: f64,
}

impl PValueCurve {
    pub fn new(dataset: &MatchedDataset, draws: &DrawSet, estimator: Estimator) -> Result<Self> {
        let y = outcome(dataset)?;
        let x = dataset.covariates();
        let w_obs = dataset.treatment();
        let w_obs_f = w_obs.to_f64();
        let observed = estimator.estimate(x, y, w_obs)?;
        let mut intercepts = Vec::with_capacity(draws.len());
        let mut slopes = Vec::with_capacity(draws.len());
        for w in draws.assignments() {
            let (a, b, c) = estimator.linear_parts(x, y, &w_obs_f, w)?;
            intercepts.push(a);
            slopes.push(c - b - 1.0);
        }
        Ok(PValueCurve { intercepts, slopes, observed })
    }

    pub fn observed_estimate(&self) -> f64 {
        self.observed
    }

    pub fn p_value(&self, tau: f64) -> f64 {
        let obs = self.observed - tau;
        let hits = self
            .intercepts
            .iter()
            .zip(&self.slopes)
            .filter(|(a, g)| at_least_as_extreme(*a + tau * *g, obs))
            .count();
        (1 + hits) as f64 / (self.intercepts.len() + 1) as f64
    }
}

/// Confidence interval from a draw set already generated for `design`.
pub fn invert_ci_on_draws(
    dataset: &MatchedDataset,
    design: &DesignSpec,
    draws: &DrawSet,
    estimator: Estimator,
    alpha: f64,
    grid: Grid,
) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let curve = PValueCurve::new(dataset, draws, estimator)?;
    let n = grid.len();
    let p: Vec<f64> = grid.points().map(|t| curve.p_value(t)).collect();
    let accepted: Vec<usize> = (0..n).filter(|&i| p[i] > alpha).collect();
    let max_p = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let argmax: Vec<usize> = (0..n).filter(|&i| p[i] == max_p).collect();
    let estimate = 0.5 * (grid.point(argmax[0]) + grid.point(*argmax.last().unwrap_or(&argmax[0])));
    let (ci_low, ci_high, contiguous, too_narrow) = match (accepted.first(), accepted.last()) {
        (Some(&lo), Some(&hi)) => (grid.point(lo), grid.point(hi), hi - lo + 1 == accepted.len(), lo == 0 || hi == n - 1),
        _ => (f64::NAN, f64::NAN, true, false),
    };
    Ok(InferenceResult {
        method: "randomization".into(),
        estimator: estimator.name().into(),
        design: design.label(),
        estimate,
        ci_low,
        ci_high,
        alpha,
        grid: Some(grid),
        m: Some(draws.len()),
        seed: Some(draws.seed),
        diagnostics: InferenceDiagnostics {
            acceptance_rate: Some(draws.acceptance_rate()),
            nonempty_acceptance_region: !accepted.is_empty(),
            contiguous,
            grid_too_narrow: too_narrow,
            standard_error: None,
            observed_estimate: curve.observed_estimate(),
            max_p_value: Some(max_p),
        },
    })
}

/// Interval `{tau in grid : p(tau) > alpha}` with the Hodges-Lehmann
/// estimate (the `tau` of highest p-value; midpoint of ties). One draw set
/// is shared by every `tau`.
pub fn invert_ci(
    dataset: &MatchedDataset,
    design: &DesignSpec,
    estimator: Estimator,
    alpha: f64,
    grid: Grid,
    m: usize,
    seed: u64,
) -> Result<InferenceResult> {
    let draws = Design::new(design, dataset)?.draw_set(m, seed)?;
    invert_ci_on_draws(dataset, design, &draws, estimator, alpha, grid)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(alloc::format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

fn neyman_result(design: &str, estimate: f64, se: f64, alpha: f64) -> InferenceResult {
    let z = stats::normal_quantile(1.0 - alpha / 2.0);
    InferenceResult {
        method: String::from(design),
        estimator: Estimator::MeanDiff.name().into(),
        design: String::from(design),
        estimate,
        ci_low: estimate - z * se,
        ci_high: estimate + z * se,
        alpha,
        grid: None,
        m: None,
        seed: None,
        diagnostics: InferenceDiagnostics {
            nonempty_acceptance_region: true,
            contiguous: true,
            standard_error: Some(se),
            observed_estimate: estimate,
            ..Default::default()
        },
    }
}

/// `tau_hat +- z sqrt(s_T^2 / N_T + s_C^2 / N_C)`.
pub fn neyman_ci_complete(dataset: &MatchedDataset, alpha: f64) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let y = outcome(dataset)?;
    let w = dataset.treatment();
    let (yt, yc): (Vec<f64>, Vec<f64>) = {
        let mut t = Vec::new();
        let mut c = Vec::new();
        for (v, b) in y.iter().zip(w.iter()) {
            if b {
                t.push(*v);
            } else {
                c.push(*v);
            }
        }
        (t, c)
    };
    if yt.len() < 2 || yc.len() < 2 {
        return Err(Error::DegenerateArm);
    }
    let estimate = stats::mean(&yt) - stats::mean(&yc);
    let se = math::sqrt(stats::sample_variance(&yt) / yt.len() as f64 + stats::sample_variance(&yc) / yc.len() as f64);
    Ok(neyman_result("neyman-complete", estimate, se, alpha))
}

/// `tau_hat +- z sqrt( sum_j (tau_j - tau_hat)^2 / (J (J - 1)) )`.
pub fn neyman_ci_paired(dataset: &MatchedDataset, alpha: f64) -> Result<InferenceResult> {
    check_alpha(alpha)?;
    let y = outcome(dataset)?;
    let pairs = dataset.pairs().ok_or(Error::NotPaired)?;
    let j = pairs.len();
    if j < 2 {
        return Err(Error::NotPaired);
    }
    let diffs: Vec<f64> = pairs.iter().map(|&(t, c)| y[t] - y[c]).collect();
    let estimate = stats::mean(&diffs);
    let ss: f64 = diffs.iter().map(|d| (d - estimate) * (d - estimate)).sum();
    let se = math::sqrt(ss / (j as f64 * (j as f64 - 1.0)));
    Ok(neyman_result("neyman-paired", estimate, se, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ds(x: Vec<Vec<f64>>, w: &[u8], y: Vec<f64>) -> MatchedDataset {
        let k = x.len();
        let x = Covariates::from_columns(x).unwrap();
        MatchedDataset::new(x, MatchedDataset::default_names(k), Assignment::from_indicator(w).unwrap())
            .unwrap()
            .with_outcome(y)
            .unwrap()
    }

    #[test]
    fn mean_difference_cases() {
        let d = ds(vec![vec![0.0, 1.0, 2.0, 3.0]], &[1, 1, 0, 0], vec![3.0, 3.0, 1.0, 1.0]);
        assert_eq!(mean_difference(&d, d.treatment()).unwrap(), 2.0);
        let d2 = d.clone().with_outcome(vec![5.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(mean_difference(&d2, d2.treatment()).unwrap(), 0.0);
        let d3 = d.clone().with_outcome(vec![13.0, 13.0, 11.0, 11.0]).unwrap();
        assert_eq!(mean_difference(&d3, d3.treatment()).unwrap(), 2.0);
        let d4 = d.outcome_free();
        assert_eq!(mean_difference(&d4, d4.treatment()), Err(Error::MissingOutcome));
    }

    #[test]
    fn ols_hand_normal_equations() {
        // [1, w, x] with x = (0, 1, 2, 3, 4), w = (1, 0, 1, 0, 0), y = (1, 2, 4, 3, 7)
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let w = [1u8, 0, 1, 0, 0];
        let y = vec![1.0, 2.0, 4.0, 3.0, 7.0];
        let d = ds(vec![x.clone()], &w, y.clone());
        let fit = ols_effect(&d, d.treatment()).unwrap();
        // Independent route: Cramer's rule on the 3x3 normal equations.
        let cols: [Vec<f64>; 3] = [vec![1.0; 5], w.iter().map(|&b| f64::from(b)).collect(), x];
        let g = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        let m: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| g(&cols[i], &cols[j])).collect()).collect();
        let r: Vec<f64> = (0..3).map(|i| g(&cols[i], &y)).collect();
        let det3 = |a: &Vec<Vec<f64>>| {
            a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
        };
        let mut m1 = m.clone();
        for i in 0..3 {
            m1[i][1] = r[i];
        }
        let beta_w = det3(&m1) / det3(&m);
        assert!((fit.coefficient - beta_w).abs() < 1e-12);
        // X'X = [[5,2,10],[2,2,2],[10,2,30]], X'y = [17,5,47] -> beta = (0, 1, 1.5)
        assert!((det3(&m) - 40.0).abs() < 1e-9);
        assert!((fit.coefficient - 1.0).abs() < 1e-12);
        assert!(fit.standard_error > 0.0);
    }

    #[test]
    fn ols_no_treatment_term_gives_zero() {
        let x = vec![0.3, -1.2, 2.2, 0.1, 1.0, -0.4];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 3.0 * v).collect();
        let d = ds(vec![x], &[1, 0, 1, 0, 1, 0], y);
        let fit = ols_effect(&d, d.treatment()).unwrap();
        assert!(fit.coefficient.abs() < 1e-9);
    }

    #[test]
    fn ols_orthogonal_covariate_equals_mean_difference() {
        // x is centered within each arm, hence orthogonal to w and centered
        let x = vec![1.0, -1.0, 2.0, -2.0, 0.5, -0.5, 3.0, -3.0];
        let w = [1u8, 1, 0, 0, 1, 1, 0, 0];
        let y = vec![2.0, 1.0, 0.5, 3.0, 4.0, -1.0, 2.5, 0.0];
        let d = ds(vec![x], &w, y);
        let fit = ols_effect(&d, d.treatment()).unwrap();
        let md = mean_difference(&d, d.treatment()).unwrap();
        assert!((fit.coefficient - md).abs() < 1e-12);
    }

    #[test]
    fn ols_rank_deficient() {
        let d = ds(vec![vec![1.0, 1.0, 0.0, 0.0, 0.0]], &[1, 1, 0, 0, 0], vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(ols_effect(&d, d.treatment()), Err(Error::RankDeficientDesign));
    }

    #[test]
    fn neyman_complete_hand_case() {
        let d = ds(vec![vec![0.0, 1.0, 2.0, 3.0]], &[1, 1, 0, 0], vec![1.0, 3.0, 0.0, 2.0]);
        let r = neyman_ci_complete(&d, 0.05).unwrap();
        let z = stats::normal_quantile(0.975);
        let se = math::sqrt(2.0);
        assert_eq!(r.estimate, 1.0);
        assert!((r.ci_low - (1.0 - z * se)).abs() < 1e-12);
        assert!((r.ci_high - (1.0 + z * se)).abs() < 1e-12);
        let narrow = neyman_ci_complete(&d, 0.32).unwrap();
        assert!(narrow.ci_low > r.ci_low && narrow.ci_high < r.ci_high);

        let flat = d.clone().with_outcome(vec![2.0, 2.0, 1.0, 1.0]).unwrap();
        let r = neyman_ci_complete(&flat, 0.05).unwrap();
        assert_eq!((r.ci_low, r.ci_high), (1.0, 1.0));
    }

    #[test]
    fn neyman_paired_hand_case() {
        let x = vec![vec![0.0; 6]];
        let y = vec![1.0, 1.0, 3.0, 2.0, 5.0, 3.0];
        let d = ds(x, &[1, 0, 1, 0, 1, 0], y).with_pairs(&[(0, 1), (2, 3), (4, 5)]);
        let r = neyman_ci_paired(&d, 0.05).unwrap();
        let z = stats::normal_quantile(0.975);
        let se = math::sqrt(2.0 / 6.0);
        assert_eq!(r.estimate, 1.0);
        assert!((se - 0.5774).abs() < 1e-4);
        assert!((r.ci_low - (1.0 - z * se)).abs() < 1e-12);
        assert!((r.ci_high - (1.0 + z * se)).abs() < 1e-12);

        let same = d.clone().with_outcome(vec![2.0, 1.0, 3.0, 2.0, 7.0, 6.0]).unwrap();
        let r = neyman_ci_paired(&same, 0.05).unwrap();
        assert_eq!(r.ci_low, r.ci_high);
        let unpaired = ds(vec![vec![0.0; 4]], &[1, 0, 1, 0], vec![0.0; 4]);
        assert_eq!(neyman_ci_paired(&unpaired, 0.05).unwrap_err(), Error::NotPaired);
    }

    #[test]
    fn grid_points() {
        let g = Grid::default();
        assert_eq!(g.len(), 2401);
        assert!((g.point(2400) - 12.0).abs() < 1e-12);
        assert!((g.point(1) + 11.99).abs() < 1e-12);
        assert_eq!(Grid::new(0.0, 1.0, 0.25).unwrap().len(), 5);
        assert!(Grid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_noise_additive_effect() {
        // Y(0) depends on nothing that varies with assignment: Y(0) = 5.
        let n = 12;
        let w: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let y: Vec<f64> = w.iter().map(|&b| 5.0 + f64::from(b)).collect();
        let x = vec![(0..n).map(|i| f64::from(i as u32)).collect()];
        let d = ds(x, &w, y).with_pairs(&(0..n / 2).map(|j| (2 * j, 2 * j + 1)).collect::<Vec<_>>());
        for spec in [DesignSpec::complete(), DesignSpec::paired()] {
            assert_eq!(sharp_null_pvalue(&d, &spec, 1.0, Estimator::MeanDiff, 200, 3).unwrap(), 1.0);
            let r = invert_ci(&d, &spec, Estimator::MeanDiff, 0.05, Grid::new(-3.0, 3.0, 0.01).unwrap(), 400, 5).unwrap();
            assert!(r.covers(1.0));
            assert!((r.estimate - 1.0).abs() <= 0.01 + 1e-12, "{}", r.estimate);
        }
    }

    #[test]
    fn fast_curve_matches_explicit_imputation() {
        let n = 16;
        let w: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 1)).collect();
        let x0: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x1: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 * x0[i] - x1[i] + 0.8 * f64::from(w[i]) + 0.3 * ((i * i) as f64).sin()).collect();
        let d = ds(vec![x0, x1], &w, y);
        let design = Design::new(&DesignSpec::complete(), &d).unwrap();
        let draws = design.draw_set(300, 8).unwrap();
        for est in [Estimator::MeanDiff, Estimator::Ols] {
            let curve = PValueCurve::new(&d, &draws, est).unwrap();
            for tau in [-2.0, -0.5, 0.0, 0.37, 1.0, 3.0] {
                let direct = sharp_null_pvalue_on_draws(&d, &draws, tau, est).unwrap();
                assert_eq!(curve.p_value(tau), direct, "{est:?} tau = {tau}");
            }
        }
    }
}
