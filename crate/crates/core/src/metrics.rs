//! Error and timing reports, plus POD spectrum export.
//!
//! CSV columns are `query_param,field,eps_percent,method,wall_time_s`; the JSON
//! form carries the same rows with a `schema_version`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::bicitsgm::{mean_relative_error, PredictedSolution};
use crate::datastore::{SnapshotSet, TrainingDatabase};
use crate::error::{ensure, Error, Result};
use crate::galerkin::GalerkinPrediction;
use crate::pod::ric_curve;

pub const SCHEMA_VERSION: u32 = 1;
pub const METHOD_BICITSGM: &str = "bicitsgm";
pub const METHOD_GALERKIN: &str = "itsgm_galerkin";

/// Anything that produced a full-field prediction at one parameter.
pub trait Prediction {
    fn method(&self) -> &'static str;
    fn parameter(&self) -> f64;
    fn reconstruction(&self) -> &SnapshotSet;
    fn wall_time(&self) -> f64;
}

impl Prediction for PredictedSolution {
    fn method(&self) -> &'static str {
        METHOD_BICITSGM
    }
    fn parameter(&self) -> f64 {
        self.parameter
    }
    fn reconstruction(&self) -> &SnapshotSet {
        &self.reconstruction
    }
    fn wall_time(&self) -> f64 {
        self.wall_time
    }
}

impl Prediction for GalerkinPrediction {
    fn method(&self) -> &'static str {
        METHOD_GALERKIN
    }
    fn parameter(&self) -> f64 {
        self.parameter
    }
    fn reconstruction(&self) -> &SnapshotSet {
        &self.reconstruction
    }
    fn wall_time(&self) -> f64 {
        self.wall_time
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub query_param: f64,
    pub field: String,
    /// `None` when no truth was available for this query.
    pub eps_percent: Option<f64>,
    pub method: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub parameter: f64,
    pub field: String,
    pub eigenvalues: Vec<f64>,
    pub ric: Vec<f64>,
}

impl SpectrumRow {
    pub fn new(parameter: f64, field: &str, eigenvalues: &[f64]) -> Result<Self> {
        Ok(SpectrumRow {
            parameter,
            field: field.to_string(),
            eigenvalues: eigenvalues.to_vec(),
            ric: ric_curve(eigenvalues)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub query_params: Vec<f64>,
    pub rows: Vec<ReportRow>,
    /// Median baseline time over median Bi-CITSGM time, when both ran.
    pub speedup: Option<f64>,
    pub spectra: Vec<SpectrumRow>,
    pub warnings: Vec<String>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn rows_for<P: Prediction>(
    preds: &[P],
    truth: &[SnapshotSet],
    rows: &mut Vec<ReportRow>,
    warnings: &mut Vec<String>,
) -> Result<()> {
    for p in preds {
        let rec = p.reconstruction();
        let matching = truth
            .iter()
            .find(|t| t.parameter() == p.parameter() && t.field_name() == rec.field_name());
        let eps = match matching {
            Some(t) => Some(mean_relative_error(t, rec, None)?),
            None => {
                let msg = format!(
                    "no truth for {} at parameter {}; error left blank",
                    p.method(),
                    p.parameter()
                );
                warn!("{msg}");
                warnings.push(msg);
                None
            }
        };
        rows.push(ReportRow {
            query_param: p.parameter(),
            field: rec.field_name().to_string(),
            eps_percent: eps,
            method: p.method().to_string(),
            wall_time_s: p.wall_time(),
        });
    }
    Ok(())
}

pub fn build_report(
    truth: &[SnapshotSet],
    predictions: &[PredictedSolution],
    baselines: Option<&[GalerkinPrediction]>,
) -> Result<EvaluationReport> {
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    rows_for(predictions, truth, &mut rows, &mut warnings)?;
    if let Some(b) = baselines {
        rows_for(b, truth, &mut rows, &mut warnings)?;
    }
    let mut query_params: Vec<f64> = rows.iter().map(|r| r.query_param).collect();
    query_params.sort_by(f64::total_cmp);
    query_params.dedup();

    let times_of = |m: &str| -> Vec<f64> {
        rows.iter()
            .filter(|r| r.method == m)
            .map(|r| r.wall_time_s)
            .collect()
    };
    let speedup = match (
        median(&mut times_of(METHOD_GALERKIN)),
        median(&mut times_of(METHOD_BICITSGM)),
    ) {
        (Some(g), Some(b)) if b > 0.0 && g > 0.0 => Some(g / b),
        _ => None,
    };
    Ok(EvaluationReport {
        schema_version: SCHEMA_VERSION,
        query_params,
        rows,
        speedup,
        spectra: Vec::new(),
        warnings,
    })
}

/// Eigenvalue spectra and RIC curves of every training parameter.
pub fn database_spectra(db: &TrainingDatabase) -> Result<Vec<SpectrumRow>> {
    db.triplets
        .iter()
        .map(|t| SpectrumRow::new(t.parameter, &db.field_name, t.eigenvalues.as_slice()))
        .collect()
}

impl EvaluationReport {
    pub fn with_spectra(mut self, spectra: Vec<SpectrumRow>) -> Self {
        self.spectra = spectra;
        self
    }

    /// Checks that every error is a finite nonnegative percentage and every
    /// speedup positive.
    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            if let Some(e) = r.eps_percent {
                ensure!(
                    e.is_finite() && e >= 0.0,
                    "error {e} at {} is not a finite nonnegative percentage",
                    r.query_param
                );
            }
        }
        if let Some(s) = self.speedup {
            ensure!(s > 0.0 && s.is_finite(), "speedup must be positive, got {s}");
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("query_param,field,eps_percent,method,wall_time_s\n");
        for r in &self.rows {
            let eps = r.eps_percent.map(|e| e.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.query_param, r.field, eps, r.method, r.wall_time_s
            );
        }
        out
    }

    pub fn spectra_csv(&self) -> String {
        let mut out = String::from("parameter,field,k,eigenvalue,ric\n");
        for s in &self.spectra {
            for (k, (l, r)) in s.eigenvalues.iter().zip(&s.ric).enumerate() {
                let _ = writeln!(out, "{},{},{},{},{}", s.parameter, s.field, k + 1, l, r);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("cannot serialize report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: EvaluationReport = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("cannot parse report: {e}")))?;
        ensure!(
            report.schema_version == SCHEMA_VERSION,
            "unsupported report schema version {}",
            report.schema_version
        );
        Ok(report)
    }

    /// Writes `report.json`, `report.csv` and, if any spectra are present,
    /// `spectra.csv` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        write("report.json", self.to_json()?)?;
        write("report.csv", self.to_csv())?;
        if !self.spectra.is_empty() {
            write("spectra.csv", self.spectra_csv())?;
        }
        Ok(())
    }

    /// Copy with every wall-time zeroed, for run-to-run comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.wall_time_s = 0.0;
        }
        r.speedup = None;
        r
    }
}
