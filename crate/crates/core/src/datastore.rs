//! On-disk formats: the `.grom` binary matrix file, the JSON database manifest,
//! and the directory layouts for snapshot collections and training databases.
//!
//! A `.grom` file is
//!
//! ```text
//! offset  size  content
//! 0       4     magic "GROM"
//! 4       4     format version, u32 little-endian (currently 1)
//! 8       8     rows, u64 little-endian
//! 16      8     cols, u64 little-endian
//! 24      8·r·c values, f64 little-endian, column-major
//! ```
//!
//! Column-major order keeps each snapshot (one column) contiguous.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::pod::{MeanField, PodTriplet};

pub const MAGIC: &[u8; 4] = b"GROM";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 24;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNAPSHOT_INDEX_FILE: &str = "snapshots.json";

const UNIFORM_RTOL: f64 = 1e-9;

/// One parameter's space-time solution: `data` is `N_x × N_s`, one snapshot per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    parameter: f64,
    times: Vec<f64>,
    data: DMatrix<f64>,
    field_name: String,
}

impl SnapshotSet {
    pub fn new(
        field_name: impl Into<String>,
        parameter: f64,
        times: Vec<f64>,
        data: DMatrix<f64>,
    ) -> Result<Self> {
        ensure!(parameter.is_finite(), "parameter must be finite, got {parameter}");
        ensure!(data.nrows() >= 1, "snapshot set needs at least one spatial DOF");
        ensure!(
            data.ncols() >= 2,
            "snapshot set needs at least two snapshots, got {}",
            data.ncols()
        );
        ensure!(
            times.len() == data.ncols(),
            "{} time stamps for {} snapshot columns",
            times.len(),
            data.ncols()
        );
        check_uniform_grid(&times)?;
        ensure!(
            crate::linalg::all_finite(&data),
            "snapshot data contains non-finite entries"
        );
        Ok(SnapshotSet {
            parameter,
            times,
            data,
            field_name: field_name.into(),
        })
    }

    pub fn parameter(&self) -> f64 {
        self.parameter
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn field_name(&self) -> &str {
        &self.field_name
    }

    pub fn n_space(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Same metadata, new data of identical shape.
    pub fn with_data(&self, data: DMatrix<f64>) -> Result<Self> {
        ensure!(
            data.shape() == self.data.shape(),
            "replacement data is {:?}, expected {:?}",
            data.shape(),
            self.data.shape()
        );
        SnapshotSet::new(self.field_name.clone(), self.parameter, self.times.clone(), data)
    }
}

pub(crate) fn check_uniform_grid(times: &[f64]) -> Result<()> {
    ensure!(times.len() >= 2, "time grid needs at least two points");
    ensure!(
        times.iter().all(|t| t.is_finite()),
        "time grid contains non-finite entries"
    );
    let span = times[times.len() - 1] - times[0];
    ensure!(span > 0.0, "time stamps must be strictly increasing");
    let step = span / (times.len() - 1) as f64;
    for (i, w) in times.windows(2).enumerate() {
        let dt = w[1] - w[0];
        ensure!(dt > 0.0, "time stamps not strictly increasing at index {}", i + 1);
        ensure!(
            (dt - step).abs() <= UNIFORM_RTOL * step.abs().max(f64::MIN_POSITIVE),
            "time grid is not uniform at index {}",
            i + 1
        );
    }
    Ok(())
}

fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    // nalgebra storage is column-major already
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

/// Writes `m` in the `.grom` format. Refuses matrices with non-finite entries.
pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    ensure!(
        crate::linalg::all_finite(m),
        "refusing to write non-finite matrix to {}",
        path.display()
    );
    fs::write(path, encode_matrix(m)).map_err(|e| Error::io(path, e))
}

fn decode_header(path: &Path, bytes: &[u8]) -> Result<(usize, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            path,
            format!("file is {} bytes, shorter than the header", bytes.len()),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(path, "bad magic bytes"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN as u64));
    match expected {
        Some(n) if n == bytes.len() as u64 => Ok((rows as usize, cols as usize)),
        _ => Err(Error::format(
            path,
            format!(
                "size mismatch: header declares {rows}×{cols}, file has {} bytes",
                bytes.len()
            ),
        )),
    }
}

pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (rows, cols) = decode_header(path, &bytes)?;
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    Ok(DMatrix::from_iterator(rows, cols, values))
}

/// Validates a `.grom` file and returns its declared shape without keeping the payload.
pub fn matrix_shape(path: impl AsRef<Path>) -> Result<(usize, usize)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_header(path, &bytes)
}

/// Per-field truncation data for a training database.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub rank: usize,
    pub mean_path: String,
    /// One directory per training parameter, in parameter order.
    pub triplet_dirs: Vec<String>,
}

/// `manifest.json` of a training database directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatabaseManifest {
    pub parameters: Vec<f64>,
    pub field_names: Vec<String>,
    pub fields: BTreeMap<String, FieldEntry>,
    /// Common snapshot time grid.
    pub times: Vec<f64>,
}

impl DatabaseManifest {
    pub fn rank(&self, field: &str) -> Option<usize> {
        self.fields.get(field).map(|f| f.rank)
    }

    fn validate_shape(&self) -> Result<()> {
        check_parameters(&self.parameters)?;
        check_uniform_grid(&self.times)?;
        for name in &self.field_names {
            let entry = self
                .fields
                .get(name)
                .ok_or_else(|| Error::Validation(format!("no entry for field {name:?}")))?;
            ensure!(entry.rank >= 1, "field {name:?} declares rank 0");
            ensure!(
                entry.triplet_dirs.len() == self.parameters.len(),
                "field {name:?} lists {} triplets for {} parameters",
                entry.triplet_dirs.len(),
                self.parameters.len()
            );
        }
        ensure!(
            self.fields.len() == self.field_names.len(),
            "manifest has entries for fields not listed in field_names"
        );
        Ok(())
    }

    /// Checks every referenced file and that the stored triplet shapes agree with the
    /// declared ranks and time grid.
    fn validate_files(&self, dir: &Path) -> Result<()> {
        let n_s = self.times.len();
        for name in &self.field_names {
            let entry = &self.fields[name];
            let (n_x, one) = matrix_shape(dir.join(&entry.mean_path))?;
            ensure!(one == 1, "mean of {name:?} must be a column vector");
            let q = entry.rank;
            for tdir in &entry.triplet_dirs {
                let tdir = dir.join(tdir);
                let phi = matrix_shape(tdir.join("phi.grom"))?;
                let sigma = matrix_shape(tdir.join("sigma.grom"))?;
                let psi = matrix_shape(tdir.join("psi.grom"))?;
                let eig = matrix_shape(tdir.join("eigenvalues.grom"))?;
                ensure!(
                    phi == (n_x, q) && sigma == (q, 1) && psi == (n_s, q) && eig.1 == 1,
                    "triplet in {} has shapes phi {:?}, sigma {:?}, psi {:?}; expected rank {q} on {n_x}×{n_s}",
                    tdir.display(),
                    phi,
                    sigma,
                    psi
                );
            }
        }
        Ok(())
    }
}

pub(crate) fn check_parameters(parameters: &[f64]) -> Result<()> {
    ensure!(
        parameters.len() >= 2,
        "need at least two training parameters, got {}",
        parameters.len()
    );
    ensure!(
        parameters.iter().all(|p| p.is_finite()),
        "training parameters must be finite"
    );
    for w in parameters.windows(2) {
        ensure!(
            w[0] < w[1],
            "training parameters must be strictly increasing ({} then {})",
            w[0],
            w[1]
        );
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_manifest(manifest: &DatabaseManifest, dir: impl AsRef<Path>) -> Result<()> {
    manifest.validate_shape()?;
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(MANIFEST_FILE), manifest)
}

/// Loads and fully validates `manifest.json`, including every referenced matrix file.
pub fn load_manifest(dir: impl AsRef<Path>) -> Result<DatabaseManifest> {
    let dir = dir.as_ref();
    let manifest: DatabaseManifest = read_json(&dir.join(MANIFEST_FILE))?;
    manifest.validate_shape()?;
    manifest.validate_files(dir)?;
    Ok(manifest)
}

/// Ordered POD triplets for one field plus the global mean they were computed against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDatabase {
    pub field_name: String,
    pub times: Vec<f64>,
    pub mean: MeanField,
    pub triplets: Vec<PodTriplet>,
}

impl TrainingDatabase {
    pub fn new(
        field_name: impl Into<String>,
        times: Vec<f64>,
        mean: MeanField,
        triplets: Vec<PodTriplet>,
    ) -> Result<Self> {
        let params: Vec<f64> = triplets.iter().map(|t| t.parameter).collect();
        check_parameters(&params)?;
        check_uniform_grid(&times)?;
        let q = triplets[0].rank();
        for t in &triplets {
            ensure!(
                t.rank() == q,
                "triplet at parameter {} has rank {}, expected {q}",
                t.parameter,
                t.rank()
            );
            ensure!(
                t.phi.nrows() == mean.mean.len() && t.psi.nrows() == times.len(),
                "triplet at parameter {} does not match the {}×{} grid",
                t.parameter,
                mean.mean.len(),
                times.len()
            );
        }
        Ok(TrainingDatabase {
            field_name: field_name.into(),
            times,
            mean,
            triplets,
        })
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.triplets.iter().map(|t| t.parameter).collect()
    }

    pub fn rank(&self) -> usize {
        self.triplets[0].rank()
    }

    pub fn n_space(&self) -> usize {
        self.mean.mean.len()
    }
}

pub fn triplet_dir_name(field: &str, index: usize) -> String {
    format!("triplet_{field}_{index:03}")
}

pub fn mean_file_name(field: &str) -> String {
    format!("mean_{field}.grom")
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Writes the databases (one per field, sharing parameters and time grid) under `dir`
/// using the layout `manifest.json`, `mean_<field>.grom`,
/// `triplet_<field>_<index>/{phi,sigma,psi,eigenvalues}.grom`.
pub fn save_databases(dbs: &[TrainingDatabase], dir: impl AsRef<Path>) -> Result<DatabaseManifest> {
    let dir = dir.as_ref();
    ensure!(!dbs.is_empty(), "no databases to save");
    let parameters = dbs[0].parameters();
    for db in dbs {
        ensure!(
            db.parameters() == parameters && db.times == dbs[0].times,
            "field {:?} has a different parameter set or time grid",
            db.field_name
        );
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut fields = BTreeMap::new();
    for db in dbs {
        let mean_path = mean_file_name(&db.field_name);
        write_matrix(dir.join(&mean_path), &column(&db.mean.mean))?;
        let mut triplet_dirs = Vec::with_capacity(db.triplets.len());
        for (i, t) in db.triplets.iter().enumerate() {
            let name = triplet_dir_name(&db.field_name, i);
            let tdir = dir.join(&name);
            fs::create_dir_all(&tdir).map_err(|e| Error::io(&tdir, e))?;
            write_matrix(tdir.join("phi.grom"), &t.phi)?;
            write_matrix(tdir.join("sigma.grom"), &column(&t.sigma))?;
            write_matrix(tdir.join("psi.grom"), &t.psi)?;
            write_matrix(tdir.join("eigenvalues.grom"), &column(&t.eigenvalues))?;
            triplet_dirs.push(name);
        }
        fields.insert(
            db.field_name.clone(),
            FieldEntry {
                rank: db.rank(),
                mean_path,
                triplet_dirs,
            },
        );
    }
    let manifest = DatabaseManifest {
        parameters,
        field_names: dbs.iter().map(|d| d.field_name.clone()).collect(),
        fields,
        times: dbs[0].times.clone(),
    };
    save_manifest(&manifest, dir)?;
    Ok(manifest)
}

/// Loads one field's training database from a directory written by [`save_databases`].
pub fn load_database(dir: impl AsRef<Path>, field: &str) -> Result<TrainingDatabase> {
    let dir = dir.as_ref();
    let manifest = load_manifest(dir)?;
    let entry = manifest.fields.get(field).ok_or_else(|| {
        Error::Validation(format!(
            "database has no field {field:?} (available: {:?})",
            manifest.field_names
        ))
    })?;
    let mean = MeanField {
        field_name: field.to_string(),
        mean: read_matrix(dir.join(&entry.mean_path))?.column(0).into_owned(),
    };
    let mut triplets = Vec::with_capacity(manifest.parameters.len());
    for (p, tdir) in manifest.parameters.iter().zip(&entry.triplet_dirs) {
        let tdir = dir.join(tdir);
        triplets.push(PodTriplet {
            parameter: *p,
            phi: read_matrix(tdir.join("phi.grom"))?,
            sigma: read_matrix(tdir.join("sigma.grom"))?.column(0).into_owned(),
            psi: read_matrix(tdir.join("psi.grom"))?,
            eigenvalues: read_matrix(tdir.join("eigenvalues.grom"))?
                .column(0)
                .into_owned(),
        });
    }
    TrainingDatabase::new(field, manifest.times, mean, triplets)
}

/// `snapshots.json`: index of a directory of raw snapshot sets of one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotIndex {
    pub field_name: String,
    pub times: Vec<f64>,
    pub entries: Vec<SnapshotEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub parameter: f64,
    pub file: String,
}

impl SnapshotIndex {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        read_json(&dir.as_ref().join(SNAPSHOT_INDEX_FILE))
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join(SNAPSHOT_INDEX_FILE), self)
    }

    pub fn find(&self, parameter: f64) -> Option<&SnapshotEntry> {
        self.entries.iter().find(|e| e.parameter == parameter)
    }

    pub fn load_set(&self, dir: impl AsRef<Path>, entry: &SnapshotEntry) -> Result<SnapshotSet> {
        let data = read_matrix(dir.as_ref().join(&entry.file))?;
        SnapshotSet::new(&self.field_name, entry.parameter, self.times.clone(), data)
    }

    /// Inserts or replaces the entry for `set.parameter()`, keeping entries sorted.
    pub fn upsert(&mut self, parameter: f64, file: String) {
        self.entries.retain(|e| e.parameter != parameter);
        self.entries.push(SnapshotEntry { parameter, file });
        self.entries
            .sort_by(|a, b| a.parameter.total_cmp(&b.parameter));
    }
}

pub fn snapshot_file_name(field: &str, parameter: f64) -> String {
    format!("{field}_{parameter}.grom")
}

/// Writes `set` into `dir` and records it in the directory's snapshot index.
pub fn store_snapshot(dir: impl AsRef<Path>, set: &SnapshotSet) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut index = match SnapshotIndex::load(dir) {
        Ok(idx) => {
            ensure!(
                idx.field_name == set.field_name() && idx.times == set.times(),
                "snapshot directory {} holds field {:?} on a different time grid",
                dir.display(),
                idx.field_name
            );
            idx
        }
        Err(Error::Io { .. }) => SnapshotIndex {
            field_name: set.field_name().to_string(),
            times: set.times().to_vec(),
            entries: Vec::new(),
        },
        Err(e) => return Err(e),
    };
    let file = snapshot_file_name(set.field_name(), set.parameter());
    let path = dir.join(&file);
    write_matrix(&path, set.data())?;
    index.upsert(set.parameter(), file);
    index.save(dir)?;
    Ok(path)
}
