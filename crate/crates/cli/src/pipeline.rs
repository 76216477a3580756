//! The six commands. Every command reads the resolved [`RunConfig`] and works
//! inside the run directory:
//!
//! ```text
//! <out>/config.json     resolved configuration of the last command
//! <out>/snapshots/      training snapshot sets (generate)
//! <out>/truth/          oracle solutions at the query parameters (on demand)
//! <out>/database/       mean field and POD triplets (train)
//! <out>/bicitsgm/       predicted fields + report (interp)
//! <out>/galerkin/       baseline fields + report (galerkin)
//! <out>/report/         combined report and spectra (evaluate)
//! <out>/spectrum/       eigenvalue / RIC table (spectrum)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use grom::bicitsgm::{predict, PredictedSolution};
use grom::datastore::{
    load_database, matrix_shape, save_databases, store_snapshot, SnapshotIndex, SnapshotSet,
    TrainingDatabase,
};
use grom::galerkin::{galerkin_predict, GalerkinPrediction};
use grom::metrics::{build_report, database_spectra, EvaluationReport, SpectrumRow};
use grom::pod::train_database;
use grom::{Error, Result};
use log::{error, info};
use rayon::prelude::*;
use rayon::ThreadPool;

use crate::config::{OracleConfig, RunConfig};

/// `println!` that ignores a closed stdout, e.g. when piped into `head`.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub force: bool,
    pub pool: ThreadPool,
}

impl Context {
    pub fn new(config: RunConfig, out: Option<PathBuf>, force: bool, jobs: Option<usize>) -> Result<Self> {
        let out = out.unwrap_or_else(|| config.output_dir.clone());
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            builder = builder.num_threads(j);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
        Ok(Context { config, out, force, pool })
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn save_config(&self) -> Result<()> {
        fs::create_dir_all(&self.out).map_err(|source| Error::Io {
            path: self.out.clone(),
            source,
        })?;
        let path = self.out.join("config.json");
        let text = serde_json::to_string_pretty(&self.config)
            .map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, text).map_err(|source| Error::Io { path, source })
    }

    fn load_database(&self) -> Result<TrainingDatabase> {
        load_database(self.dir("database"), self.config.oracle.field_name())
    }
}

fn stored_set(dir: &Path, index: Option<&SnapshotIndex>, parameter: f64) -> Option<Result<SnapshotSet>> {
    let index = index?;
    let entry = index.find(parameter)?;
    matrix_shape(dir.join(&entry.file)).ok()?;
    Some(index.load_set(dir, entry))
}

/// Returns the oracle solution at every parameter, reading what `dir` already
/// holds and solving the rest in parallel. Files are written one at a time.
/// The count of freshly solved sets is returned alongside.
fn ensure_sets(ctx: &Context, dir: &Path, params: &[f64]) -> Result<(Vec<SnapshotSet>, usize)> {
    let index_path = dir.join("snapshots.json");
    if ctx.force && index_path.exists() {
        fs::remove_file(&index_path).map_err(|source| Error::Io {
            path: index_path.clone(),
            source,
        })?;
    }
    let index = if index_path.exists() {
        Some(SnapshotIndex::load(dir)?)
    } else {
        None
    };
    let oracle = ctx.config.oracle;
    let results: Vec<Result<(SnapshotSet, bool)>> = ctx.pool.install(|| {
        params
            .par_iter()
            .map(|&p| match stored_set(dir, index.as_ref(), p) {
                Some(set) => set.map(|s| (s, false)),
                None => {
                    info!("solving oracle at {p}");
                    oracle.solve(p).map(|s| (s, true)).inspect_err(|e| {
                        error!("oracle failed at parameter {p}: {e}");
                    })
                }
            })
            .collect()
    });
    let mut sets = Vec::with_capacity(params.len());
    let mut solved = 0;
    for r in results {
        let (set, fresh) = r?;
        if fresh {
            store_snapshot(dir, &set)?;
            solved += 1;
        }
        sets.push(set);
    }
    Ok((sets, solved))
}

pub fn generate(ctx: &Context) -> Result<()> {
    ctx.save_config()?;
    let dir = ctx.dir("snapshots");
    let (sets, solved) = ensure_sets(ctx, &dir, &ctx.config.training)?;
    out!(
        "generate: {} training sets in {} ({} solved, {} already present)",
        sets.len(),
        dir.display(),
        solved,
        sets.len() - solved
    );
    Ok(())
}

fn load_training(ctx: &Context) -> Result<Vec<SnapshotSet>> {
    let dir = ctx.dir("snapshots");
    let index = SnapshotIndex::load(&dir)?;
    ctx.config
        .training
        .iter()
        .map(|&p| {
            let entry = index.find(p).ok_or_else(|| {
                Error::Validation(format!(
                    "no snapshots for training parameter {p} in {}; run `grom generate` first",
                    dir.display()
                ))
            })?;
            index.load_set(&dir, entry)
        })
        .collect()
}

fn print_spectra(spectra: &[SpectrumRow], q: usize) {
    out!("parameter\tk\teigenvalue\tric");
    for s in spectra {
        let shown = (q + 2).min(s.eigenvalues.len());
        for k in 0..shown {
            out!("{}\t{}\t{:.6e}\t{:.10}", s.parameter, k + 1, s.eigenvalues[k], s.ric[k]);
        }
    }
}

pub fn train(ctx: &Context) -> Result<()> {
    ctx.save_config()?;
    let sets = load_training(ctx)?;
    let db = train_database(&sets, ctx.config.truncation)?;
    let dir = ctx.dir("database");
    save_databases(std::slice::from_ref(&db), &dir)?;
    out!(
        "train: rank {} over {} parameters written to {}",
        db.rank(),
        db.triplets.len(),
        dir.display()
    );
    print_spectra(&database_spectra(&db)?, db.rank());
    Ok(())
}

fn query_truth(ctx: &Context) -> Result<Vec<SnapshotSet>> {
    Ok(ensure_sets(ctx, &ctx.dir("truth"), &ctx.config.queries)?.0)
}

fn run_bicitsgm(ctx: &Context, db: &TrainingDatabase) -> Result<Vec<PredictedSolution>> {
    let cfg = ctx.config.bicitsgm;
    let results: Vec<Result<PredictedSolution>> = ctx.pool.install(|| {
        ctx.config
            .queries
            .par_iter()
            .map(|&q| predict(db, q, &cfg).inspect_err(|e| error!("prediction at {q} failed: {e}")))
            .collect()
    });
    let preds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let dir = ctx.dir("bicitsgm");
    for p in &preds {
        store_snapshot(&dir, &p.reconstruction)?;
    }
    Ok(preds)
}

fn burgers(ctx: &Context) -> Result<grom::oracle::BurgersConfig> {
    match ctx.config.oracle {
        OracleConfig::Burgers(c) => Ok(c),
        OracleConfig::Analytic(_) => Err(Error::Validation(
            "the Galerkin baseline needs the burgers oracle".into(),
        )),
    }
}

fn run_galerkin(ctx: &Context, db: &TrainingDatabase) -> Result<Vec<GalerkinPrediction>> {
    let cfg = burgers(ctx)?;
    let itsgm = ctx.config.bicitsgm.itsgm_spatial;
    let results: Vec<Result<GalerkinPrediction>> = ctx.pool.install(|| {
        ctx.config
            .queries
            .par_iter()
            .map(|&q| {
                galerkin_predict(db, &cfg, q, &itsgm)
                    .inspect_err(|e| error!("Galerkin baseline at {q} failed: {e}"))
            })
            .collect()
    });
    let preds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let dir = ctx.dir("galerkin");
    for p in &preds {
        store_snapshot(&dir, &p.reconstruction)?;
    }
    Ok(preds)
}

fn print_report(report: &EvaluationReport) {
    out!("query_param\tmethod\teps_percent\twall_time_s");
    for r in &report.rows {
        let eps = r
            .eps_percent
            .map(|e| format!("{e:.4}"))
            .unwrap_or_else(|| "-".into());
        out!("{}\t{}\t{}\t{:.3e}", r.query_param, r.method, eps, r.wall_time_s);
    }
    if let Some(s) = report.speedup {
        out!("speedup (median baseline / median bicitsgm): {s:.2}");
    }
}

pub fn interp(ctx: &Context) -> Result<()> {
    ctx.save_config()?;
    let db = ctx.load_database()?;
    let truth = query_truth(ctx)?;
    let preds = run_bicitsgm(ctx, &db)?;
    let report = build_report(&truth, &preds, None)?;
    report.save(ctx.dir("bicitsgm"))?;
    print_report(&report);
    Ok(())
}

pub fn galerkin(ctx: &Context) -> Result<()> {
    burgers(ctx)?;
    ctx.save_config()?;
    let db = ctx.load_database()?;
    let truth = query_truth(ctx)?;
    let base = run_galerkin(ctx, &db)?;
    let report = build_report(&truth, &[], Some(&base))?;
    report.save(ctx.dir("galerkin"))?;
    print_report(&report);
    Ok(())
}

pub fn evaluate(ctx: &Context) -> Result<()> {
    ctx.save_config()?;
    let db = ctx.load_database()?;
    let truth = query_truth(ctx)?;
    let preds = run_bicitsgm(ctx, &db)?;
    let base = match ctx.config.oracle {
        OracleConfig::Burgers(_) => Some(run_galerkin(ctx, &db)?),
        OracleConfig::Analytic(_) => None,
    };
    let report = build_report(&truth, &preds, base.as_deref())?.with_spectra(database_spectra(&db)?);
    report.validate()?;
    let dir = ctx.dir("report");
    report.save(&dir)?;
    print_report(&report);
    out!("evaluate: report written to {}", dir.display());
    Ok(())
}

pub fn spectrum(ctx: &Context) -> Result<()> {
    let db = ctx.load_database()?;
    let spectra = database_spectra(&db)?;
    let report = build_report(&[], &[], None)?.with_spectra(spectra);
    let dir = ctx.dir("spectrum");
    fs::create_dir_all(&dir).map_err(|source| Error::Io {
        path: dir.clone(),
        source,
    })?;
    let path = dir.join("spectra.csv");
    fs::write(&path, report.spectra_csv()).map_err(|source| Error::Io { path, source })?;
    print_spectra(&report.spectra, db.rank());
    Ok(())
}
