//! JSON configuration: designs, caps and simulation settings.
//!
//! Caps are a number (all covariates), an array (column order), or an
//! object keyed by covariate name where `"*"` sets the default:
//!
//! ```json
//! {"kind": "constrained_paired", "caps": {"*": 0.15, "x3": 0.01}}
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use asif_core::{Caps, DesignKind, DesignSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapsConfig {
    Uniform(f64),
    PerCovariate(Vec<f64>),
    Named(BTreeMap<String, f64>),
}

impl CapsConfig {
    pub fn to_caps(&self) -> Caps {
        match self {
            CapsConfig::Uniform(a) => Caps::Uniform(*a),
            CapsConfig::PerCovariate(v) => Caps::PerCovariate(v.clone()),
            CapsConfig::Named(map) => Caps::Named {
                default: map.get("*").copied(),
                named: map.iter().filter(|(k, _)| k.as_str() != "*").map(|(k, v)| (k.clone(), *v)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub kind: DesignKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<CapsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_treated: Option<usize>,
}

impl DesignConfig {
    pub fn to_spec(&self) -> Result<DesignSpec> {
        match (self.kind.is_constrained(), &self.caps) {
            (true, None) => return Err(CliError::Config(format!("design `{}` needs caps", self.kind.name()))),
            (false, Some(_)) => {
                return Err(CliError::Config(format!("design `{}` does not take caps", self.kind.name())))
            }
            _ => {}
        }
        Ok(DesignSpec { kind: self.kind, n_treated: self.n_treated, caps: self.caps.as_ref().map(CapsConfig::to_caps) })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DesignsFile {
    One(DesignConfig),
    Many(Vec<DesignConfig>),
    Wrapped { designs: Vec<DesignConfig> },
}

/// The text of a JSON argument: a path to an existing file, or inline JSON.
pub fn json_argument(arg: &str) -> Result<String> {
    let path = Path::new(arg);
    if path.is_file() {
        std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
    } else {
        Ok(arg.to_string())
    }
}

fn from_json<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("{what}: {e}")))
}

pub fn parse_caps(text: &str) -> Result<Caps> {
    Ok(from_json::<CapsConfig>("caps", text)?.to_caps())
}

/// Bare kind names (`"paired"`) stand for `{"kind": "paired"}`.
fn expand_kinds(v: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::String(kind) => serde_json::json!({ "kind": kind }),
        Value::Array(items) => Value::Array(items.into_iter().map(expand_kinds).collect()),
        Value::Object(mut map) => {
            if let Some(designs) = map.remove("designs") {
                map.insert("designs".into(), expand_kinds(designs));
            }
            Value::Object(map)
        }
        other => other,
    }
}

/// One design, or an array (or `{"designs": [...]}`) of them. A bare kind
/// name such as `paired` is accepted anywhere a design is.
pub fn parse_designs(text: &str) -> Result<Vec<DesignSpec>> {
    let trimmed = text.trim();
    let value = if trimmed.starts_with(['{', '[', '"']) {
        from_json::<serde_json::Value>("designs", trimmed)?
    } else {
        serde_json::Value::from(trimmed)
    };
    let configs = match serde_json::from_value::<DesignsFile>(expand_kinds(value)) {
        Ok(DesignsFile::One(d)) => vec![d],
        Ok(DesignsFile::Many(v) | DesignsFile::Wrapped { designs: v }) => v,
        Err(e) => return Err(CliError::Config(format!("designs: {e}"))),
    };
    if configs.is_empty() {
        return Err(CliError::Config("at least one design is required".into()));
    }
    configs.iter().map(DesignConfig::to_spec).collect()
}

pub fn parse_design(text: &str) -> Result<DesignSpec> {
    let mut v = parse_designs(text)?;
    if v.len() != 1 {
        return Err(CliError::Config(format!("expected one design, got {}", v.len())));
    }
    Ok(v.remove(0))
}

/// `lo:hi:step`.
pub fn parse_grid(text: &str) -> Result<asif_core::inference::Grid> {
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    match nums.as_deref() {
        Some(&[lo, hi, step]) => Ok(asif_core::inference::Grid::new(lo, hi, step)?),
        _ => Err(CliError::Config(format!("grid must be lo:hi:step, got `{text}`"))),
    }
}
