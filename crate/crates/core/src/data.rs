//! Dataset and design data model.
//!
//! A [`MatchedDataset`] holds the fixed covariate matrix, the observed binary
//! treatment vector, an optional outcome, and an optional block (or pair)
//! structure. A [`DesignSpec`] describes the assignment mechanism that the
//! dataset is hypothesised to follow.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::math;

/// Column-major `N x K` matrix of covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Covariates {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Covariates { n_rows, n_cols, data: alloc::vec![0.0; n_rows * n_cols] }
    }

    /// Builds a matrix from columns; every column must have the same length.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_cols = columns.len();
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for col in &columns {
            if col.len() != n_rows {
                return Err(Error::Invalid(alloc::vec![Violation::DimensionMismatch {
                    what: "covariate column",
                    expected: n_rows,
                    found: col.len(),
                }]));
            }
            data.extend_from_slice(col);
        }
        Ok(Covariates { n_rows, n_cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut m = Covariates::zeros(n_rows, n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Invalid(alloc::vec![Violation::DimensionMismatch {
                    what: "covariate row",
                    expected: n_cols,
                    found: row.len(),
                }]));
            }
            for (k, &v) in row.iter().enumerate() {
                m.set(i, k, v);
            }
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_rows..(k + 1) * self.n_rows]
    }

    pub fn column_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n_rows..(k + 1) * self.n_rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_cols).map(move |k| self.column(k))
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[k * self.n_rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[k * self.n_rows + i] = v;
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols).map(|k| self.get(i, k)).collect()
    }

    /// Rows `units` in the given order.
    pub fn select_rows(&self, units: &[usize]) -> Self {
        let mut out = Covariates::zeros(units.len(), self.n_cols);
        for k in 0..self.n_cols {
            let src = self.column(k);
            for (dst, &i) in out.column_mut(k).iter_mut().zip(units) {
                *dst = src[i];
            }
        }
        out
    }
}

/// A binary treatment assignment vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Assignment(bits)
    }

    /// Parses a 0/1 indicator vector; any other value is rejected.
    pub fn from_indicator(values: &[u8]) -> Result<Self> {
        values
            .iter()
            .enumerate()
            .map(|(unit, &v)| match v {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(Error::Invalid(alloc::vec![Violation::NonBinaryTreatment { unit }])),
            })
            .collect::<Result<Vec<_>>>()
            .map(Assignment)
    }

    pub fn from_treated(n_units: usize, treated: &[usize]) -> Self {
        let mut bits = alloc::vec![false; n_units];
        for &i in treated {
            bits[i] = true;
        }
        Assignment(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_treated(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    #[inline]
    pub fn is_treated(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn treated_indices(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
    }

    pub fn control_indices(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &b)| !b).map(|(i, _)| i).collect()
    }

    /// `1 - w`.
    pub fn complement(&self) -> Self {
        Assignment(self.0.iter().map(|b| !b).collect())
    }

    pub fn to_indicator(&self) -> Vec<u8> {
        self.0.iter().map(|&b| u8::from(b)).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// A group of units randomized together with a fixed treated count `N_jT`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub units: Vec<usize>,
    pub n_treated: usize,
}

impl Block {
    pub fn is_pair(&self) -> bool {
        self.units.len() == 2 && self.n_treated == 1
    }
}

/// Affine parameters used to standardize one covariate column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub sd: f64,
}

impl ColumnScale {
    pub const IDENTITY: ColumnScale = ColumnScale { mean: 0.0, sd: 1.0 };

    pub fn to_raw(&self, standardized: f64) -> f64 {
        standardized * self.sd + self.mean
    }
}

/// Sample mean and sample standard deviation (`N - 1` denominator).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, math::sqrt(ss / (n - 1.0)))
}

/// Centers each column to mean zero and scales it to unit sample variance.
///
/// Returns the standardized matrix together with the per-column `(mean, sd)`
/// so that values can be mapped back to the raw scale.
pub fn standardize(raw: &Covariates) -> Result<(Covariates, Vec<ColumnScale>)> {
    let n = raw.n_rows();
    if n < 2 {
        return Err(Error::TooFewUnits(n));
    }
    let mut out = raw.clone();
    let mut scales = Vec::with_capacity(raw.n_cols());
    for k in 0..raw.n_cols() {
        let col = raw.column(k);
        let (mean, sd) = mean_sd(col);
        let magnitude = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if !(sd > 1e-13 * magnitude) || sd == 0.0 {
            return Err(Error::ConstantColumn(k));
        }
        for v in out.column_mut(k) {
            *v = (*v - mean) / sd;
        }
        scales.push(ColumnScale { mean, sd });
    }
    Ok((out, scales))
}

/// The fixed covariates, observed assignment, and optional outcome and block
/// structure of a (matched) dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedDataset {
    covariates: Covariates,
    covariate_names: Vec<String>,
    treatment: Assignment,
    outcome: Option<Vec<f64>>,
    blocks: Option<Vec<Block>>,
    scales: Option<Vec<ColumnScale>>,
}

impl MatchedDataset {
    /// Covariates are taken as given (already on the analysis scale).
    pub fn new(covariates: Covariates, covariate_names: Vec<String>, treatment: Assignment) -> Result<Self> {
        let mut violations = Vec::new();
        if covariate_names.len() != covariates.n_cols() {
            violations.push(Violation::DimensionMismatch {
                what: "covariate names",
                expected: covariates.n_cols(),
                found: covariate_names.len(),
            });
        }
        if treatment.len() != covariates.n_rows() {
            violations.push(Violation::DimensionMismatch {
                what: "treatment",
                expected: covariates.n_rows(),
                found: treatment.len(),
            });
        }
        if !violations.is_empty() {
            return Err(Error::Invalid(violations));
        }
        Ok(MatchedDataset { covariates, covariate_names, treatment, outcome: None, blocks: None, scales: None })
    }

    /// Standardizes `raw` on the full sample and records the scale parameters.
    pub fn from_raw(raw: &Covariates, covariate_names: Vec<String>, treatment: Assignment) -> Result<Self> {
        let (x, scales) = standardize(raw)?;
        let mut ds = MatchedDataset::new(x, covariate_names, treatment)?;
        ds.scales = Some(scales);
        Ok(ds)
    }

    /// Covariate names `x1..xK`.
    pub fn default_names(k: usize) -> Vec<String> {
        (1..=k).map(|i| alloc::format!("x{i}")).collect()
    }

    pub fn with_outcome(mut self, outcome: Vec<f64>) -> Result<Self> {
        if outcome.len() != self.n_units() {
            return Err(Error::Invalid(alloc::vec![Violation::DimensionMismatch {
                what: "outcome",
                expected: self.n_units(),
                found: outcome.len(),
            }]));
        }
        self.outcome = Some(outcome);
        Ok(self)
    }

    pub fn with_blocks(mut self, blocks: Vec<Block>) -> Self {
        self.blocks = Some(blocks);
        self
    }

    /// Blocks from per-unit labels; `N_jT` is the observed treated count.
    /// Units whose label is `None` belong to no block.
    pub fn with_block_labels<S: AsRef<str>>(self, labels: &[Option<S>]) -> Result<Self> {
        if labels.len() != self.n_units() {
            return Err(Error::Invalid(alloc::vec![Violation::DimensionMismatch {
                what: "block labels",
                expected: self.n_units(),
                found: labels.len(),
            }]));
        }
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut blocks: Vec<Block> = Vec::new();
        for (i, label) in labels.iter().enumerate() {
            let Some(label) = label else { continue };
            let j = *index.entry(label.as_ref()).or_insert_with(|| {
                blocks.push(Block { units: Vec::new(), n_treated: 0 });
                blocks.len() - 1
            });
            blocks[j].units.push(i);
            if self.treatment.is_treated(i) {
                blocks[j].n_treated += 1;
            }
        }
        Ok(self.with_blocks(blocks))
    }

    /// Pairs given as `(treated, control)` unit indices.
    pub fn with_pairs(self, pairs: &[(usize, usize)]) -> Self {
        let blocks = pairs.iter().map(|&(t, c)| Block { units: alloc::vec![t, c], n_treated: 1 }).collect();
        self.with_blocks(blocks)
    }

    pub fn with_scales(mut self, scales: Vec<ColumnScale>) -> Self {
        self.scales = Some(scales);
        self
    }

    pub fn with_treatment(mut self, treatment: Assignment) -> Result<Self> {
        if treatment.len() != self.n_units() {
            return Err(Error::Invalid(alloc::vec![Violation::DimensionMismatch {
                what: "treatment",
                expected: self.n_units(),
                found: treatment.len(),
            }]));
        }
        if let Some(blocks) = &mut self.blocks {
            for b in blocks.iter_mut() {
                b.n_treated = b.units.iter().filter(|&&i| treatment.is_treated(i)).count();
            }
        }
        self.treatment = treatment;
        Ok(self)
    }

    /// The same dataset with the outcome removed, for design-stage work.
    pub fn outcome_free(&self) -> Self {
        MatchedDataset { outcome: None, ..self.clone() }
    }

    /// Units `units` (in that order), dropping blocks; covariates keep their scale.
    pub fn select_units(&self, units: &[usize]) -> Self {
        MatchedDataset {
            covariates: self.covariates.select_rows(units),
            covariate_names: self.covariate_names.clone(),
            treatment: Assignment(units.iter().map(|&i| self.treatment.is_treated(i)).collect()),
            outcome: self.outcome.as_ref().map(|y| units.iter().map(|&i| y[i]).collect()),
            blocks: None,
            scales: self.scales.clone(),
        }
    }

    pub fn n_units(&self) -> usize {
        self.covariates.n_rows()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariates.n_cols()
    }

    pub fn n_treated(&self) -> usize {
        self.treatment.n_treated()
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    pub fn treatment(&self) -> &Assignment {
        &self.treatment
    }

    pub fn outcome(&self) -> Option<&[f64]> {
        self.outcome.as_deref()
    }

    pub fn blocks(&self) -> Option<&[Block]> {
        self.blocks.as_deref()
    }

    pub fn scales(&self) -> Option<&[ColumnScale]> {
        self.scales.as_deref()
    }

    /// `(treated, control)` pairs when every block is a pair.
    pub fn pairs(&self) -> Option<Vec<(usize, usize)>> {
        let blocks = self.blocks.as_ref()?;
        blocks
            .iter()
            .map(|b| {
                if b.units.len() != 2 {
                    return None;
                }
                let (a, c) = (b.units[0], b.units[1]);
                match (self.treatment.is_treated(a), self.treatment.is_treated(c)) {
                    (true, false) => Some((a, c)),
                    (false, true) => Some((c, a)),
                    _ => None,
                }
            })
            .collect()
    }

    fn dataset_violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let n = self.n_units();
        let nt = self.n_treated();
        if nt == 0 || nt == n {
            v.push(Violation::DegenerateTreatment { n_treated: nt, n_units: n });
        }
        for k in 0..self.n_covariates() {
            if let Some(i) = self.covariates.column(k).iter().position(|x| !x.is_finite()) {
                v.push(Violation::NonFiniteValue { what: "covariates", index: k * n + i });
            }
        }
        if let Some(y) = &self.outcome {
            if let Some(i) = y.iter().position(|x| !x.is_finite()) {
                v.push(Violation::NonFiniteValue { what: "outcome", index: i });
            }
        }
        if let Some(blocks) = &self.blocks {
            let mut seen = alloc::vec![false; n];
            for (j, b) in blocks.iter().enumerate() {
                if b.units.is_empty() {
                    v.push(Violation::EmptyBlock(j));
                    continue;
                }
                let mut treated = 0;
                for &u in &b.units {
                    if u >= n {
                        v.push(Violation::BlockUnitOutOfRange { block: j, unit: u });
                        continue;
                    }
                    if seen[u] {
                        v.push(Violation::OverlappingBlocks { unit: u });
                    }
                    seen[u] = true;
                    treated += usize::from(self.treatment.is_treated(u));
                }
                if treated != b.n_treated {
                    v.push(Violation::BlockTreatedCountMismatch(j));
                }
            }
        }
        v
    }
}

/// The family of assignment mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Complete,
    Block,
    Paired,
    Constrained,
    ConstrainedPaired,
}

impl DesignKind {
    pub fn is_constrained(self) -> bool {
        matches!(self, DesignKind::Constrained | DesignKind::ConstrainedPaired)
    }

    pub fn needs_blocks(self) -> bool {
        matches!(self, DesignKind::Block | DesignKind::Paired | DesignKind::ConstrainedPaired)
    }

    pub fn name(self) -> &'static str {
        match self {
            DesignKind::Complete => "complete",
            DesignKind::Block => "block",
            DesignKind::Paired => "paired",
            DesignKind::Constrained => "constrained",
            DesignKind::ConstrainedPaired => "constrained_paired",
        }
    }
}

/// Per-covariate absolute SMD upper bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Caps {
    /// One cap broadcast to every covariate.
    Uniform(f64),
    /// One cap per covariate, in column order.
    PerCovariate(Vec<f64>),
    /// Caps keyed by covariate name; unnamed covariates get `default`
    /// (unconstrained when `default` is `None`).
    Named { default: Option<f64>, named: Vec<(String, f64)> },
}

impl Caps {
    /// Resolves to one cap per covariate.
    pub fn resolve(&self, names: &[String]) -> core::result::Result<Vec<f64>, Violation> {
        let k = names.len();
        let caps = match self {
            Caps::Uniform(a) => alloc::vec![*a; k],
            Caps::PerCovariate(v) => {
                if v.len() != k {
                    return Err(Violation::CapsLengthMismatch { expected: k, found: v.len() });
                }
                v.clone()
            }
            Caps::Named { default, named } => {
                let mut caps = alloc::vec![default.unwrap_or(f64::INFINITY); k];
                for (name, cap) in named {
                    let idx = names
                        .iter()
                        .position(|n| n == name)
                        .ok_or_else(|| Violation::UnknownCovariate(name.clone()))?;
                    caps[idx] = *cap;
                }
                caps
            }
        };
        if let Some(k) = caps.iter().position(|c| !(*c > 0.0)) {
            return Err(Violation::NonPositiveCap(k));
        }
        Ok(caps)
    }
}

/// Algebraic description of an assignment mechanism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub kind: DesignKind,
    /// Treated count for complete/constrained designs; `None` means the
    /// dataset's observed `N_T`.
    pub n_treated: Option<usize>,
    pub caps: Option<Caps>,
}

impl DesignSpec {
    pub fn complete() -> Self {
        DesignSpec { kind: DesignKind::Complete, n_treated: None, caps: None }
    }

    pub fn block() -> Self {
        DesignSpec { kind: DesignKind::Block, n_treated: None, caps: None }
    }

    pub fn paired() -> Self {
        DesignSpec { kind: DesignKind::Paired, n_treated: None, caps: None }
    }

    pub fn constrained(caps: Caps) -> Self {
        DesignSpec { kind: DesignKind::Constrained, n_treated: None, caps: Some(caps) }
    }

    pub fn constrained_paired(caps: Caps) -> Self {
        DesignSpec { kind: DesignKind::ConstrainedPaired, n_treated: None, caps: Some(caps) }
    }

    pub fn with_n_treated(mut self, n_treated: usize) -> Self {
        self.n_treated = Some(n_treated);
        self
    }

    /// Short human-readable label, e.g. `constrained(0.05)`.
    pub fn label(&self) -> String {
        let mut s = self.kind.name().to_string();
        match &self.caps {
            Some(Caps::Uniform(a)) => s.push_str(&alloc::format!("({a})")),
            Some(Caps::PerCovariate(_)) => s.push_str("(per-covariate)"),
            Some(Caps::Named { default, named }) => {
                s.push('(');
                if let Some(d) = default {
                    s.push_str(&alloc::format!("*={d}"));
                }
                for (i, (n, c)) in named.iter().enumerate() {
                    if i > 0 || default.is_some() {
                        s.push(',');
                    }
                    s.push_str(&alloc::format!("{n}={c}"));
                }
                s.push(')');
            }
            None => {}
        }
        s
    }
}

impl fmt::Display for DesignSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Checks every dataset invariant and the compatibility of `design` with
/// `dataset`, reporting all violations at once.
pub fn validate(dataset: &MatchedDataset, design: &DesignSpec) -> Result<()> {
    let mut v = dataset.dataset_violations();
    let n = dataset.n_units();
    if let Some(nt) = design.n_treated {
        if nt == 0 || nt >= n {
            v.push(Violation::TreatedCountOutOfRange(nt));
        }
    }
    if design.kind.needs_blocks() {
        match dataset.blocks() {
            None => v.push(Violation::BlocksRequired),
            Some(blocks) => {
                if matches!(design.kind, DesignKind::Paired | DesignKind::ConstrainedPaired) {
                    for (j, b) in blocks.iter().enumerate() {
                        if !b.is_pair() {
                            v.push(Violation::PairSizeViolation(j));
                        }
                    }
                }
            }
        }
    }
    if design.kind.is_constrained() {
        match &design.caps {
            None => v.push(Violation::CapsRequired),
            Some(caps) => {
                if let Err(e) = caps.resolve(dataset.covariate_names()) {
                    v.push(e);
                }
            }
        }
    } else if let Some(caps) = &design.caps {
        if let Err(e) = caps.resolve(dataset.covariate_names()) {
            v.push(e);
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(v))
    }
}
