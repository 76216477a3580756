//! Run configuration: a JSON file, optionally patched with `--set key=value`.

use std::fs;
use std::path::{Path, PathBuf};

use grom::bicitsgm::BiCitsgmConfig;
use grom::datastore::SnapshotSet;
use grom::oracle::{analytic_field, solve_burgers, AnalyticFamilyConfig, BurgersConfig};
use grom::pod::Truncation;
use grom::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleConfig {
    Analytic(AnalyticFamilyConfig),
    Burgers(BurgersConfig),
}

impl OracleConfig {
    pub fn solve(&self, parameter: f64) -> Result<SnapshotSet> {
        match self {
            OracleConfig::Analytic(c) => analytic_field(c, parameter),
            OracleConfig::Burgers(c) => solve_burgers(c, parameter),
        }
    }

    pub fn field_name(&self) -> &'static str {
        match self {
            OracleConfig::Analytic(_) => "f",
            OracleConfig::Burgers(_) => "u",
        }
    }

    fn check_parameter(&self, p: f64) -> Result<()> {
        match self {
            OracleConfig::Analytic(c) => {
                c.validate()?;
                if !p.is_finite() {
                    return Err(Error::Validation(format!("parameter {p} is not finite")));
                }
                Ok(())
            }
            OracleConfig::Burgers(c) => c.validate(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub oracle: OracleConfig,
    pub training: Vec<f64>,
    pub truncation: Truncation,
    #[serde(default)]
    pub bicitsgm: BiCitsgmConfig,
    #[serde(default)]
    pub queries: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("grom-run")
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            oracle: OracleConfig::Analytic(AnalyticFamilyConfig::default()),
            training: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            truncation: Truncation::Ric(0.9999),
            bicitsgm: BiCitsgmConfig::default(),
            queries: vec![0.75, 1.25, 1.75, 2.25],
            output_dir: default_output_dir(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from the defaults), applies the overrides and
    /// validates the result.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|source| Error::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => serde_json::to_value(RunConfig::default())
                .map_err(|e| Error::Config(e.to_string()))?,
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let min_nodes = [
            self.bicitsgm.itsgm_spatial.neighbor_count,
            self.bicitsgm.itsgm_temporal.neighbor_count,
            2,
        ]
        .into_iter()
        .max()
        .unwrap_or(2);
        if self.training.len() < min_nodes {
            return Err(Error::Config(format!(
                "training list needs at least {min_nodes} parameters for the configured ITSGM stencils, got {}",
                self.training.len()
            )));
        }
        if !self.training.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "training parameters must be strictly increasing".into(),
            ));
        }
        self.bicitsgm.validate()?;
        for &p in self.training.iter().chain(&self.queries) {
            self.oracle.check_parameter(p)?;
        }
        Ok(())
    }
}

/// Parses `a.b.c=value` and writes `value` at that path. The value is read as
/// JSON when it parses, otherwise as a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let path = path.trim();
    if path.is_empty() {
        return Err(Error::Config(format!("override {assignment:?} has an empty key")));
    }
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    for key in path.split('.') {
        cur = match cur {
            Value::Object(map) => map.entry(key.to_string()).or_insert(Value::Null),
            Value::Array(items) => {
                let i: usize = key
                    .parse()
                    .map_err(|_| Error::Config(format!("{path}: {key:?} is not an array index")))?;
                let len = items.len();
                items.get_mut(i).ok_or_else(|| {
                    Error::Config(format!("{path}: index {i} out of range (length {len})"))
                })?
            }
            Value::Null => {
                *cur = Value::Object(Default::default());
                match cur {
                    Value::Object(map) => map.entry(key.to_string()).or_insert(Value::Null),
                    _ => unreachable!(),
                }
            }
            _ => {
                return Err(Error::Config(format!(
                    "{path}: cannot descend into scalar at {key:?}"
                )))
            }
        };
    }
    *cur = new;
    Ok(())
}
