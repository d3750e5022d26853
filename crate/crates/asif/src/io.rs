//! CSV datasets.
//!
//! A dataset file has a header row. `w` (0/1) is required; `y` is the
//! outcome; `pair` or `block` holds block labels (empty cell: no block).
//! Every other column is a numeric covariate.

use std::fs;
use std::path::{Path, PathBuf};

use asif_core::matching::MatchResult;
use asif_core::{Assignment, Covariates, MatchedDataset};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const TREATMENT_COLUMN: &str = "w";
pub const OUTCOME_COLUMN: &str = "y";
pub const BLOCK_COLUMNS: [&str; 2] = ["pair", "block"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    /// Standardize covariates on the loaded sample.
    pub standardize: bool,
    /// Parse the outcome column. Design-stage commands leave this off and
    /// never look at the outcome values.
    pub read_outcome: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { standardize: true, read_outcome: false }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedCsv {
    pub path: PathBuf,
    pub sha256: String,
    pub headers: csv::StringRecord,
    /// Verbatim rows, for writing subsets back out.
    pub records: Vec<csv::StringRecord>,
    pub covariate_names: Vec<String>,
    pub raw: Covariates,
    pub treatment: Assignment,
    pub outcome: Option<Vec<f64>>,
    pub block_labels: Option<Vec<Option<String>>>,
    pub standardize: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn load_csv(path: &Path, opts: LoadOptions) -> Result<LoadedCsv> {
    let bytes = read_bytes(path)?;
    parse_csv(path, &bytes, opts)
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    parse_error(path, line, e.to_string())
}

pub fn parse_csv(path: &Path, bytes: &[u8], opts: LoadOptions) -> Result<LoadedCsv> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let w_col = find(TREATMENT_COLUMN)
        .ok_or_else(|| CliError::MissingColumn { path: path.to_path_buf(), column: TREATMENT_COLUMN.into() })?;
    let y_col = find(OUTCOME_COLUMN);
    let block_cols: Vec<usize> = BLOCK_COLUMNS.iter().filter_map(|c| find(c)).collect();
    if block_cols.len() > 1 {
        return Err(parse_error(path, 1, "both `pair` and `block` columns present"));
    }
    let block_col = block_cols.first().copied();
    let cov_cols: Vec<usize> =
        (0..headers.len()).filter(|&j| j != w_col && Some(j) != y_col && Some(j) != block_col).collect();
    if cov_cols.is_empty() {
        return Err(parse_error(path, 1, "no covariate columns"));
    }
    let mut seen = std::collections::BTreeSet::new();
    for &j in &cov_cols {
        if !seen.insert(&headers[j]) {
            return Err(parse_error(path, 1, format!("duplicate column `{}`", &headers[j])));
        }
    }

    let mut records = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); cov_cols.len()];
    let mut w = Vec::new();
    let mut y = Vec::new();
    let mut labels = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let cell = |j: usize| rec.get(j).unwrap_or("");
        w.push(match cell(w_col) {
            "1" => 1u8,
            "0" => 0u8,
            other => return Err(parse_error(path, line, format!("column `w` must be 0 or 1, found `{other}`"))),
        });
        for (col, &j) in columns.iter_mut().zip(&cov_cols) {
            col.push(parse_number(path, line, &headers[j], cell(j))?);
        }
        if opts.read_outcome {
            if let Some(j) = y_col {
                y.push(parse_number(path, line, OUTCOME_COLUMN, cell(j))?);
            }
        }
        if let Some(j) = block_col {
            let v = cell(j);
            labels.push(if v.is_empty() { None } else { Some(v.to_string()) });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(parse_error(path, 2, "no data rows"));
    }
    let raw = Covariates::from_columns(columns)?;
    Ok(LoadedCsv {
        path: path.to_path_buf(),
        sha256: sha256_hex(bytes),
        covariate_names: cov_cols.iter().map(|&j| headers[j].to_string()).collect(),
        headers,
        records,
        raw,
        treatment: Assignment::from_indicator(&w)?,
        outcome: (opts.read_outcome && y_col.is_some()).then_some(y),
        block_labels: block_col.map(|_| labels),
        standardize: opts.standardize,
    })
}

fn parse_number(path: &Path, line: u64, column: &str, text: &str) -> Result<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(path, line, format!("column `{column}`: `{text}` is not a finite number"))),
    }
}

impl LoadedCsv {
    pub fn n_units(&self) -> usize {
        self.records.len()
    }

    /// Dataset with covariates, treatment, blocks and (if loaded) outcome.
    pub fn dataset(&self) -> Result<MatchedDataset> {
        let names = self.covariate_names.clone();
        let mut ds = if self.standardize {
            MatchedDataset::from_raw(&self.raw, names, self.treatment.clone())?
        } else {
            MatchedDataset::new(self.raw.clone(), names, self.treatment.clone())?
        };
        if let Some(labels) = &self.block_labels {
            ds = ds.with_block_labels(labels)?;
        }
        if let Some(y) = &self.outcome {
            ds = ds.with_outcome(y.clone())?;
        }
        Ok(ds)
    }

    /// Kept rows of a match, in input order, with a `pair` column numbering
    /// the pairs from 1. An existing `pair`/`block` column is replaced.
    pub fn matched_csv(&self, result: &MatchResult) -> Result<Vec<u8>> {
        let mut pair_of = vec![None; self.n_units()];
        for (j, &(t, c)) in result.pairs.iter().enumerate() {
            pair_of[t] = Some(j + 1);
            pair_of[c] = Some(j + 1);
        }
        let skip: Vec<usize> =
            self.headers.iter().enumerate().filter(|(_, h)| BLOCK_COLUMNS.contains(h)).map(|(j, _)| j).collect();
        let mut out = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = self.headers.iter().enumerate().filter(|(j, _)| !skip.contains(j)).map(|(_, h)| h).collect();
        header.push("pair");
        out.write_record(&header).map_err(|e| CliError::Config(e.to_string()))?;
        for (i, rec) in self.records.iter().enumerate() {
            let Some(p) = pair_of[i] else { continue };
            let mut row: Vec<String> =
                rec.iter().enumerate().filter(|(j, _)| !skip.contains(j)).map(|(_, v)| v.to_string()).collect();
            row.push(p.to_string());
            out.write_record(&row).map_err(|e| CliError::Config(e.to_string()))?;
        }
        out.into_inner().map_err(|e| CliError::Config(e.to_string()))
    }
}
