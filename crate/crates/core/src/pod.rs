//! Proper orthogonal decomposition of snapshot sets.
//!
//! Snapshots are split into a global mean (over every parameter and every
//! snapshot) and a fluctuation. The truncated thin SVD of the fluctuation
//! matrix gives the POD triplet `(Φ, σ, Ψ)` with `u' ≈ Φ·diag(σ)·Ψᵀ`.
//!
//! Eigenvalues are reported as `λ_i = σ_i²`, without a `1/N_s` factor; the
//! relative information content `RIC^k = Σ_{i≤k} λ_i / Σ_i λ_i` does not see
//! the scale.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datastore::{SnapshotSet, TrainingDatabase};
use crate::error::{ensure, Error, Result};
use crate::linalg::{scaled_product, thin_svd};

/// Singular values below this fraction of `σ_1` count as numerically zero.
pub const RANK_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub field_name: String,
    pub mean: DVector<f64>,
}

/// Truncated POD of one parameter's fluctuation field.
#[derive(Debug, Clone, PartialEq)]
pub struct PodTriplet {
    pub parameter: f64,
    /// `N_x × q`, orthonormal columns.
    pub phi: DMatrix<f64>,
    /// Length `q`, positive and nonincreasing.
    pub sigma: DVector<f64>,
    /// `N_s × q`, orthonormal columns.
    pub psi: DMatrix<f64>,
    /// Full spectrum `σ_i²`, length `min(N_x, N_s)`.
    pub eigenvalues: DVector<f64>,
}

impl PodTriplet {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `Φ·diag(σ)·Ψᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        scaled_product(&self.phi, &self.sigma, &self.psi)
    }

    pub fn ric(&self) -> Result<f64> {
        ric(self.eigenvalues.as_slice(), self.rank())
    }
}

pub fn compute_global_mean(sets: &[SnapshotSet]) -> Result<MeanField> {
    ensure!(!sets.is_empty(), "cannot average an empty list of snapshot sets");
    let (n_x, n_s) = sets[0].data().shape();
    let mut sum = DVector::zeros(n_x);
    for set in sets {
        ensure!(
            set.data().shape() == (n_x, n_s),
            "snapshot set at parameter {} is {:?}, expected {:?}",
            set.parameter(),
            set.data().shape(),
            (n_x, n_s)
        );
        for col in set.data().column_iter() {
            sum += col;
        }
    }
    Ok(MeanField {
        field_name: sets[0].field_name().to_string(),
        mean: sum / (sets.len() * n_s) as f64,
    })
}

fn check_mean(set: &SnapshotSet, mean: &MeanField) -> Result<()> {
    ensure!(
        set.n_space() == mean.mean.len(),
        "mean field has {} entries, snapshots have {} rows",
        mean.mean.len(),
        set.n_space()
    );
    Ok(())
}

/// `u' = u − ū` column by column.
pub fn subtract_mean(set: &SnapshotSet, mean: &MeanField) -> Result<SnapshotSet> {
    check_mean(set, mean)?;
    let mut data = set.data().clone();
    for mut col in data.column_iter_mut() {
        col -= &mean.mean;
    }
    set.with_data(data)
}

/// Inverse of [`subtract_mean`].
pub fn add_mean(set: &SnapshotSet, mean: &MeanField) -> Result<SnapshotSet> {
    check_mean(set, mean)?;
    let mut data = set.data().clone();
    for mut col in data.column_iter_mut() {
        col += &mean.mean;
    }
    set.with_data(data)
}

/// Number of singular values above `RANK_RTOL · σ_1`.
pub fn numerical_rank(singular_values: &[f64]) -> usize {
    match singular_values.first() {
        Some(&s1) if s1 > 0.0 => singular_values
            .iter()
            .take_while(|&&s| s > RANK_RTOL * s1)
            .count(),
        _ => 0,
    }
}

/// Flips each mode pair so the largest-magnitude entry of the spatial mode is positive.
fn fix_signs(phi: &mut DMatrix<f64>, psi: &mut DMatrix<f64>) {
    for j in 0..phi.ncols() {
        let col = phi.column(j);
        let mut best = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            phi.column_mut(j).neg_mut();
            psi.column_mut(j).neg_mut();
        }
    }
}

/// Truncated POD of a fluctuation snapshot set.
pub fn pod_decompose(fluct: &SnapshotSet, q: usize) -> Result<PodTriplet> {
    let full = full_pod(fluct.data())?;
    let max_rank = numerical_rank(full.sigma.as_slice());
    if q == 0 || q > max_rank {
        return Err(Error::RankDeficient {
            requested: q,
            max_rank,
        });
    }
    Ok(PodTriplet {
        parameter: fluct.parameter(),
        phi: full.phi.columns(0, q).into_owned(),
        sigma: full.sigma.rows(0, q).into_owned(),
        psi: full.psi.columns(0, q).into_owned(),
        eigenvalues: full.eigenvalues,
    })
}

struct FullPod {
    phi: DMatrix<f64>,
    sigma: DVector<f64>,
    psi: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

fn full_pod(m: &DMatrix<f64>) -> Result<FullPod> {
    ensure!(
        crate::linalg::all_finite(m),
        "fluctuation matrix contains non-finite entries"
    );
    let svd = thin_svd(m)?;
    let mut phi = svd.u;
    let mut psi = svd.vt.transpose();
    fix_signs(&mut phi, &mut psi);
    let eigenvalues = svd.s.map(|s| s * s);
    Ok(FullPod {
        phi,
        sigma: svd.s,
        psi,
        eigenvalues,
    })
}

/// Full POD eigenvalue spectrum `σ_i²` of a fluctuation set.
pub fn eigenvalues(fluct: &SnapshotSet) -> Result<DVector<f64>> {
    Ok(full_pod(fluct.data())?.eigenvalues)
}

fn spectrum_total(eigenvalues: &[f64]) -> Result<f64> {
    ensure!(!eigenvalues.is_empty(), "empty eigenvalue spectrum");
    ensure!(
        eigenvalues.iter().all(|&l| l >= 0.0 && l.is_finite()),
        "eigenvalues must be finite and nonnegative"
    );
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    Ok(total)
}

/// Relative information content of the first `k` modes.
pub fn ric(eigenvalues: &[f64], k: usize) -> Result<f64> {
    let total = spectrum_total(eigenvalues)?;
    ensure!(
        (1..=eigenvalues.len()).contains(&k),
        "RIC index {k} outside 1..={}",
        eigenvalues.len()
    );
    if k == eigenvalues.len() {
        return Ok(1.0);
    }
    let partial: f64 = eigenvalues[..k].iter().sum();
    Ok((partial / total).min(1.0))
}

/// `RIC^k` for every `k = 1..=len`, ending at exactly 1.
pub fn ric_curve(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    let total = spectrum_total(eigenvalues)?;
    let mut acc = 0.0;
    let n = eigenvalues.len();
    Ok(eigenvalues
        .iter()
        .enumerate()
        .map(|(i, l)| {
            acc += l;
            if i + 1 == n {
                1.0
            } else {
                (acc / total).min(1.0)
            }
        })
        .collect())
}

/// Smallest `k` with `RIC^k ≥ threshold`.
pub fn rank_for_ric(eigenvalues: &[f64], threshold: f64) -> Result<usize> {
    ensure!(
        threshold > 0.0 && threshold <= 1.0,
        "RIC threshold must lie in (0, 1], got {threshold}"
    );
    let curve = ric_curve(eigenvalues)?;
    Ok(curve
        .iter()
        .position(|&r| r >= threshold)
        .map(|i| i + 1)
        .unwrap_or(eigenvalues.len()))
}

/// Flips mode pairs `(φ_i, ψ_i)` of each triplet so that `φ_i` has a
/// nonnegative inner product with the same mode of the previous triplet.
///
/// The per-set largest-entry rule can disagree between neighbouring parameters
/// when a mode has two extrema of nearly equal size; calibration needs a
/// consistent orientation across the whole training family.
pub fn align_mode_signs(triplets: &mut [PodTriplet]) {
    for k in 1..triplets.len() {
        let (done, rest) = triplets.split_at_mut(k);
        let prev = &done[k - 1];
        let cur = &mut rest[0];
        for i in 0..cur.rank().min(prev.rank()) {
            if cur.phi.column(i).dot(&prev.phi.column(i)) < 0.0 {
                cur.phi.column_mut(i).neg_mut();
                cur.psi.column_mut(i).neg_mut();
            }
        }
    }
}

/// How the truncation rank of a training database is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    /// Fixed rank for every training parameter.
    Rank(usize),
    /// Smallest rank at which every training parameter reaches this RIC.
    Ric(f64),
}

/// Global mean, fluctuations and truncated POD of every training set.
///
/// All sets must share the field, grid and time stamps, and be sorted by
/// strictly increasing parameter.
pub fn train_database(sets: &[SnapshotSet], truncation: Truncation) -> Result<TrainingDatabase> {
    ensure!(!sets.is_empty(), "no training snapshot sets");
    for s in sets {
        ensure!(
            s.times() == sets[0].times() && s.field_name() == sets[0].field_name(),
            "training set at parameter {} has a different field or time grid",
            s.parameter()
        );
    }
    let mean = compute_global_mean(sets)?;
    let flucts = sets
        .iter()
        .map(|s| subtract_mean(s, &mean))
        .collect::<Result<Vec<_>>>()?;
    let q = match truncation {
        Truncation::Rank(q) => q,
        Truncation::Ric(threshold) => {
            let mut q = 1;
            for f in &flucts {
                q = q.max(rank_for_ric(eigenvalues(f)?.as_slice(), threshold)?);
            }
            q
        }
    };
    let mut triplets = flucts
        .iter()
        .map(|f| pod_decompose(f, q))
        .collect::<Result<Vec<_>>>()?;
    align_mode_signs(&mut triplets);
    TrainingDatabase::new(
        sets[0].field_name(),
        sets[0].times().to_vec(),
        mean,
        triplets,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(data: DMatrix<f64>) -> SnapshotSet {
        let times = (0..data.ncols()).map(|i| i as f64).collect();
        SnapshotSet::new("u", 1.0, times, data).unwrap()
    }

    #[test]
    fn mean_of_constant_and_symmetric_fields() {
        let a = set(DMatrix::from_element(3, 2, 2.5));
        let b = set(DMatrix::from_element(3, 2, 2.5));
        let m = compute_global_mean(&[a, b]).unwrap();
        assert_eq!(m.mean, DVector::from_element(3, 2.5));

        // one snapshot per set is below the SnapshotSet minimum, so pair each
        // column with itself
        let a = set(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]));
        let b = set(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]));
        let m = compute_global_mean(&[a, b]).unwrap();
        assert_eq!(m.mean, DVector::from_vec(vec![0.5, 0.5]));
    }

    #[test]
    fn mean_rejects_mismatched_sets() {
        let a = set(DMatrix::zeros(3, 2));
        let b = set(DMatrix::zeros(4, 2));
        assert!(matches!(
            compute_global_mean(&[a, b]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn subtract_mean_edge_cases() {
        let mean = MeanField {
            field_name: "u".into(),
            mean: DVector::from_vec(vec![1.0, -2.0]),
        };
        let replicated = set(DMatrix::from_columns(&[mean.mean.clone(), mean.mean.clone()]));
        assert_eq!(
            subtract_mean(&replicated, &mean).unwrap().data(),
            &DMatrix::zeros(2, 2)
        );
        let zero = MeanField {
            field_name: "u".into(),
            mean: DVector::zeros(2),
        };
        let s = set(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(subtract_mean(&s, &zero).unwrap(), s);
        let wrong = MeanField {
            field_name: "u".into(),
            mean: DVector::zeros(3),
        };
        assert!(subtract_mean(&s, &wrong).is_err());
    }

    #[test]
    fn rank_one_and_diagonal() {
        let u = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0 / 2f64.sqrt(), -1.0 / 2f64.sqrt()]);
        let t = pod_decompose(&set(&u * v.transpose()), 1).unwrap();
        assert!((t.sigma[0] - 1.0).abs() < 1e-14);
        assert!((t.ric().unwrap() - 1.0).abs() < 1e-14);
        // sign convention: largest entry (0.8) positive
        assert!(t.phi[(1, 0)] > 0.0);

        let t = pod_decompose(&set(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0]))), 2)
            .unwrap();
        assert!((t.sigma[0] - 3.0).abs() < 1e-14);
        assert!((t.sigma[1] - 1.0).abs() < 1e-14);
        assert_eq!(t.eigenvalues.len(), 2);
    }

    #[test]
    fn rank_deficiency_names_admissible_rank() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let v = DVector::from_vec(vec![1.0, -1.0, 0.5]);
        match pod_decompose(&set(&u * v.transpose()), 2) {
            Err(Error::RankDeficient { requested, max_rank }) => {
                assert_eq!((requested, max_rank), (2, 1));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(matches!(
            pod_decompose(&set(DMatrix::zeros(3, 3)), 1),
            Err(Error::RankDeficient { max_rank: 0, .. })
        ));
    }

    #[test]
    fn ric_examples() {
        assert_eq!(ric(&[3.0, 1.0], 1).unwrap(), 0.75);
        assert_eq!(ric(&[3.0, 1.0], 2).unwrap(), 1.0);
        assert_eq!(ric(&[5.0], 1).unwrap(), 1.0);
        assert!(matches!(ric(&[0.0, 0.0], 1), Err(Error::DegenerateSpectrum)));
        assert!(ric(&[3.0, 1.0], 0).is_err());
        assert!(ric(&[3.0, 1.0], 3).is_err());
        assert_eq!(rank_for_ric(&[3.0, 1.0], 0.75).unwrap(), 1);
        assert_eq!(rank_for_ric(&[3.0, 1.0], 0.76).unwrap(), 2);
        assert!(rank_for_ric(&[3.0, 1.0], 0.0).is_err());
        assert!(rank_for_ric(&[3.0, 1.0], 1.1).is_err());
        assert!(matches!(
            rank_for_ric(&[0.0], 0.5),
            Err(Error::DegenerateSpectrum)
        ));
    }

    #[test]
    fn mode_signs_follow_previous_parameter() {
        let phi = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, 0.8, -0.6]);
        let psi = DMatrix::identity(2, 2);
        let mk = |p: f64, phi: DMatrix<f64>, psi: DMatrix<f64>| PodTriplet {
            parameter: p,
            phi,
            sigma: DVector::from_vec(vec![2.0, 1.0]),
            psi,
            eigenvalues: DVector::from_vec(vec![4.0, 1.0]),
        };
        let mut flipped_phi = phi.clone();
        flipped_phi.column_mut(1).neg_mut();
        let mut flipped_psi = psi.clone();
        flipped_psi.column_mut(1).neg_mut();
        let mut ts = vec![mk(1.0, phi.clone(), psi.clone()), mk(2.0, flipped_phi, flipped_psi)];
        let before = ts[1].reconstruct();
        align_mode_signs(&mut ts);
        assert_eq!(ts[1].phi, phi);
        assert_eq!(ts[1].psi, psi);
        assert_eq!(ts[1].reconstruct(), before);
    }
}
