//! Covariate balance statistics `t(W, X)`.
//!
//! Nothing here reads the outcome: every statistic is a function of the
//! assignment and the fixed covariates only.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Assignment, Covariates, MatchedDataset};
use crate::error::{Error, Result};
use crate::linalg;

/// Relative eigenvalue tolerance for the covariance pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-10;

/// Difference between the treated and control means of one column, given a
/// 0/1 mask. Both sums run in index order, so relabelling `w -> 1 - w`
/// negates the result exactly.
#[inline]
pub(crate) fn mean_difference_masked(col: &[f64], mask: &[f64], n_treated: f64, n_control: f64) -> f64 {
    let mut st = 0.0;
    let mut sc = 0.0;
    for (x, m) in col.iter().zip(mask) {
        st += x * m;
        sc += x * (1.0 - m);
    }
    st / n_treated - sc / n_control
}

pub(crate) fn mask_of(w: &Assignment) -> Vec<f64> {
    w.to_f64()
}

fn arm_sizes(w: &Assignment) -> Result<(usize, usize)> {
    let nt = w.n_treated();
    let nc = w.len() - nt;
    if nt == 0 || nc == 0 {
        return Err(Error::DegenerateArm);
    }
    Ok((nt, nc))
}

pub(crate) fn smd_masked(x: &Covariates, mask: &[f64], nt: usize, nc: usize) -> Vec<f64> {
    x.columns().map(|c| mean_difference_masked(c, mask, nt as f64, nc as f64)).collect()
}

/// Treated-minus-control mean of every covariate on the dataset's scale.
pub fn smd_vector(dataset: &MatchedDataset, w: &Assignment) -> Result<Vec<f64>> {
    check_len(dataset, w)?;
    let (nt, nc) = arm_sizes(w)?;
    Ok(smd_masked(dataset.covariates(), &mask_of(w), nt, nc))
}

pub fn max_abs_smd(dataset: &MatchedDataset, w: &Assignment) -> Result<f64> {
    Ok(smd_vector(dataset, w)?.iter().fold(0.0, |m, d| m.max(d.abs())))
}

fn check_len(dataset: &MatchedDataset, w: &Assignment) -> Result<()> {
    if w.len() != dataset.n_units() {
        return Err(Error::InvalidArgument(alloc::format!(
            "assignment has length {}, dataset has {} units",
            w.len(),
            dataset.n_units()
        )));
    }
    Ok(())
}

/// How to handle a rank-deficient covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularPolicy {
    /// Moore-Penrose pseudo-inverse (the default).
    #[default]
    PseudoInverse,
    /// Fail with [`Error::SingularCovariance`].
    Strict,
}

/// Mahalanobis balance metric with `cov(X)` fixed once for all draws.
#[derive(Debug, Clone)]
pub struct MahalanobisMetric {
    cov_pinv: DMatrix<f64>,
    rank: usize,
    n_covariates: usize,
}

impl MahalanobisMetric {
    pub fn new(x: &Covariates, policy: SingularPolicy) -> Result<Self> {
        let cov = linalg::covariance(x);
        let p = linalg::symmetric_pinv(&cov, PINV_RTOL);
        if !p.is_full_rank() && policy == SingularPolicy::Strict {
            return Err(Error::SingularCovariance);
        }
        Ok(MahalanobisMetric { rank: p.rank, cov_pinv: p.inverse, n_covariates: x.n_cols() })
    }

    pub fn for_dataset(dataset: &MatchedDataset) -> Result<Self> {
        Self::new(dataset.covariates(), SingularPolicy::PseudoInverse)
    }

    /// True when a pseudo-inverse was needed; callers should warn.
    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.n_covariates
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `d' [ N/(N_T N_C) cov(X) ]^+ d`.
    pub fn distance(&self, smd: &[f64], n_treated: usize, n_control: usize) -> f64 {
        let k = smd.len();
        let mut q = 0.0;
        for a in 0..k {
            let mut row = 0.0;
            for b in 0..k {
                row += self.cov_pinv[(a, b)] * smd[b];
            }
            q += smd[a] * row;
        }
        let n = (n_treated + n_control) as f64;
        let scale = (n_treated as f64 * n_control as f64) / n;
        (scale * q).max(0.0)
    }

    pub fn evaluate(&self, dataset: &MatchedDataset, w: &Assignment) -> Result<f64> {
        let d = smd_vector(dataset, w)?;
        let nt = w.n_treated();
        Ok(self.distance(&d, nt, w.len() - nt))
    }
}

/// Mahalanobis distance of `w` using the pseudo-inverse policy.
pub fn mahalanobis(dataset: &MatchedDataset, w: &Assignment) -> Result<f64> {
    MahalanobisMetric::for_dataset(dataset)?.evaluate(dataset, w)
}

/// A named balance statistic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Mahalanobis,
    MaxAbsSmd,
    /// Signed SMD of a single covariate (by column index).
    Smd(usize),
}

impl Statistic {
    /// Parses `mahalanobis`, `max_abs_smd`, or `smd:<name or 0-based index>`.
    pub fn parse(s: &str, covariate_names: &[String]) -> Result<Self> {
        match s {
            "mahalanobis" => Ok(Statistic::Mahalanobis),
            "max_abs_smd" => Ok(Statistic::MaxAbsSmd),
            _ => {
                let key = s.strip_prefix("smd:").ok_or_else(|| {
                    Error::InvalidArgument(alloc::format!("unknown statistic '{s}'"))
                })?;
                if let Some(k) = covariate_names.iter().position(|n| n == key) {
                    return Ok(Statistic::Smd(k));
                }
                match key.parse::<usize>() {
                    Ok(k) if k < covariate_names.len() => Ok(Statistic::Smd(k)),
                    _ => Err(Error::InvalidArgument(alloc::format!("unknown covariate in '{s}'"))),
                }
            }
        }
    }

    pub fn name(&self, covariate_names: &[String]) -> String {
        match self {
            Statistic::Mahalanobis => "mahalanobis".into(),
            Statistic::MaxAbsSmd => "max_abs_smd".into(),
            Statistic::Smd(k) => match covariate_names.get(*k) {
                Some(n) => alloc::format!("smd:{n}"),
                None => alloc::format!("smd:{k}"),
            },
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name(&[]))
    }
}

/// A statistic bound to a dataset, ready to evaluate many assignments.
#[derive(Debug, Clone)]
pub struct BalanceEvaluator<'a> {
    dataset: &'a MatchedDataset,
    statistic: Statistic,
    metric: Option<MahalanobisMetric>,
}

impl<'a> BalanceEvaluator<'a> {
    pub fn new(dataset: &'a MatchedDataset, statistic: Statistic) -> Result<Self> {
        let metric = match statistic {
            Statistic::Mahalanobis => Some(MahalanobisMetric::for_dataset(dataset)?),
            Statistic::Smd(k) if k >= dataset.n_covariates() => {
                return Err(Error::InvalidArgument(alloc::format!("covariate index {k} out of range")))
            }
            _ => None,
        };
        Ok(BalanceEvaluator { dataset, statistic, metric })
    }

    pub fn statistic(&self) -> &Statistic {
        &self.statistic
    }

    pub fn metric(&self) -> Option<&MahalanobisMetric> {
        self.metric.as_ref()
    }

    pub fn evaluate(&self, w: &Assignment) -> Result<f64> {
        check_len(self.dataset, w)?;
        let (nt, nc) = arm_sizes(w)?;
        let x = self.dataset.covariates();
        let mask = mask_of(w);
        Ok(match (&self.statistic, &self.metric) {
            (Statistic::Smd(k), _) => mean_difference_masked(x.column(*k), &mask, nt as f64, nc as f64),
            (Statistic::MaxAbsSmd, _) => smd_masked(x, &mask, nt, nc).iter().fold(0.0, |m, d| m.max(d.abs())),
            (Statistic::Mahalanobis, Some(metric)) => metric.distance(&smd_masked(x, &mask, nt, nc), nt, nc),
            (Statistic::Mahalanobis, None) => unreachable!("metric is built in new()"),
        })
    }
}
