//! Geometry of the Grassmann manifold `G(q, n)`, the set of `q`-dimensional
//! subspaces of `ℝⁿ`.
//!
//! A point is represented by any `n × q` matrix `Y` with orthonormal columns;
//! `Y` and `Y·R` (with `R ∈ O(q)`) are the same point. Tangent vectors at `Y` are
//! horizontal matrices `Γ` with `Yᵀ·Γ = 0`.
//!
//! With the thin SVDs written out, the maps used here are
//!
//! ```text
//! log_Y0(Y1):  (I − Y0·Y0ᵀ)·Y1·(Y0ᵀ·Y1)⁻¹ = U·S·Vᵀ   ⇒   Γ = U·atan(S)·Vᵀ
//! exp_Y0(Γ):   Γ = U·S·Vᵀ                          ⇒   Y = Y0·V·cos(S)·Vᵀ + U·sin(S)·Vᵀ
//! ```
//!
//! and the geodesic distance is the 2-norm of the principal-angle vector.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;

use crate::error::{ensure, Error, Result};
use crate::linalg::{orthonormality_defect, orthonormalize, thin_svd};

pub const ORTHONORMAL_TOL: f64 = 1e-10;
pub const HORIZONTAL_TOL: f64 = 1e-8;
/// `exp` refuses tangent matrices whose vertical part exceeds this.
pub const EXP_HORIZONTAL_TOL: f64 = 1e-6;
/// `σ_min(Y0ᵀ·Y1)` below this is treated as a principal angle of `π/2`.
pub const CUT_LOCUS_TOL: f64 = 1e-10;

/// Orthonormal representative of a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint(DMatrix<f64>);

impl StiefelPoint {
    /// Wraps `y`, checking `‖yᵀy − I‖_F ≤ 1e-10`.
    pub fn new(y: DMatrix<f64>) -> Result<Self> {
        ensure!(
            y.ncols() >= 1 && y.ncols() <= y.nrows(),
            "a {}×{} matrix cannot represent a subspace",
            y.nrows(),
            y.ncols()
        );
        let defect = orthonormality_defect(&y);
        ensure!(
            defect <= ORTHONORMAL_TOL,
            "columns are not orthonormal (‖YᵀY − I‖_F = {defect:e})"
        );
        Ok(StiefelPoint(y))
    }

    /// Orthonormal basis of the column span of `m` (thin QR, positive `R` diagonal).
    pub fn from_span(m: DMatrix<f64>) -> Result<Self> {
        ensure!(
            m.ncols() >= 1 && m.ncols() <= m.nrows() && crate::linalg::all_finite(&m),
            "cannot orthonormalize a {}×{} matrix",
            m.nrows(),
            m.ncols()
        );
        StiefelPoint::new(orthonormalize(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Ambient dimension `n`.
    pub fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }

    /// Subspace dimension `q`.
    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    /// Same subspace, representative `Y·R`.
    pub fn rotate(&self, r: &DMatrix<f64>) -> Result<Self> {
        StiefelPoint::new(&self.0 * r)
    }
}

/// Horizontal tangent matrix attached at `reference`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    gamma: DMatrix<f64>,
    reference: StiefelPoint,
}

fn vertical_part(reference: &StiefelPoint, gamma: &DMatrix<f64>) -> f64 {
    reference.matrix().tr_mul(gamma).norm()
}

impl TangentVector {
    pub fn new(reference: StiefelPoint, gamma: DMatrix<f64>) -> Result<Self> {
        ensure!(
            gamma.shape() == reference.matrix().shape(),
            "tangent matrix is {:?}, reference is {:?}",
            gamma.shape(),
            reference.matrix().shape()
        );
        let v = vertical_part(&reference, &gamma);
        ensure!(
            v <= HORIZONTAL_TOL * gamma.norm().max(1.0),
            "tangent matrix is not horizontal (‖YᵀΓ‖_F = {v:e})"
        );
        Ok(TangentVector { gamma, reference })
    }

    pub fn zero(reference: StiefelPoint) -> Self {
        let gamma = DMatrix::zeros(reference.ambient_dim(), reference.dim());
        TangentVector { gamma, reference }
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn reference(&self) -> &StiefelPoint {
        &self.reference
    }

    pub fn norm(&self) -> f64 {
        self.gamma.norm()
    }

    /// `Σ_k w_k·Γ_k` for tangent vectors sharing one reference point.
    pub fn combine(reference: &StiefelPoint, terms: &[(f64, &TangentVector)]) -> Result<Self> {
        let mut gamma = DMatrix::zeros(reference.ambient_dim(), reference.dim());
        for (w, tv) in terms {
            ensure!(
                tv.reference.matrix() == reference.matrix(),
                "cannot combine tangent vectors attached at different points"
            );
            gamma += &tv.gamma * *w;
        }
        Ok(TangentVector {
            gamma,
            reference: reference.clone(),
        })
    }
}

fn check_same_grassmannian(y0: &StiefelPoint, y1: &StiefelPoint) -> Result<()> {
    ensure!(
        y0.matrix().shape() == y1.matrix().shape(),
        "subspace representatives differ in shape: {:?} vs {:?}",
        y0.matrix().shape(),
        y1.matrix().shape()
    );
    Ok(())
}

/// Principal angles between `span(y0)` and `span(y1)`, nondecreasing in `[0, π/2]`.
///
/// Cosines come from the singular values of `y0ᵀ·y1` and sines from those of
/// `y1 − y0·(y0ᵀ·y1)`; pairing them through `atan2` keeps small angles accurate
/// where `arccos` alone would lose them.
pub fn principal_angles(y0: &StiefelPoint, y1: &StiefelPoint) -> Result<Vec<f64>> {
    check_same_grassmannian(y0, y1)?;
    let cross = y0.matrix().tr_mul(y1.matrix());
    let residual = y1.matrix() - y0.matrix() * &cross;
    let cos = thin_svd(&cross)?.s;
    let sin = thin_svd(&residual)?.s;
    let q = y0.dim();
    Ok((0..q)
        .map(|i| {
            let c = cos[i].clamp(-1.0, 1.0);
            // sines ascending pair with cosines descending
            let s = sin[q - 1 - i].clamp(0.0, 1.0);
            s.atan2(c).clamp(0.0, FRAC_PI_2)
        })
        .collect())
}

pub fn geodesic_distance(y0: &StiefelPoint, y1: &StiefelPoint) -> Result<f64> {
    Ok(principal_angles(y0, y1)?
        .iter()
        .map(|t| t * t)
        .sum::<f64>()
        .sqrt())
}

/// Initial velocity of the geodesic from `span(y0)` to `span(y1)`.
pub fn grassmann_log(y0: &StiefelPoint, y1: &StiefelPoint) -> Result<TangentVector> {
    check_same_grassmannian(y0, y1)?;
    let cross = y0.matrix().tr_mul(y1.matrix());
    let cross_svd = thin_svd(&cross)?;
    let min_cos = cross_svd.s[cross_svd.s.len() - 1];
    if !(min_cos >= CUT_LOCUS_TOL) {
        return Err(Error::CutLocus {
            min_cosine: min_cos,
            context: None,
        });
    }
    // (y1 − y0·C)·C⁻¹ via the SVD of C = U·S·Vᵀ already at hand: C⁻¹ = V·S⁻¹·Uᵀ
    let horizontal = y1.matrix() - y0.matrix() * &cross;
    let mut v_sinv = cross_svd.vt.transpose();
    for (j, mut col) in v_sinv.column_iter_mut().enumerate() {
        col /= cross_svd.s[j];
    }
    let a = horizontal * v_sinv * cross_svd.u.transpose();

    let svd = thin_svd(&a)?;
    let mut u_atan = svd.u;
    for (j, mut col) in u_atan.column_iter_mut().enumerate() {
        col *= svd.s[j].atan();
    }
    let gamma = u_atan * svd.vt;
    TangentVector::new(y0.clone(), gamma)
}

/// Endpoint at unit time of the geodesic leaving `y0` with velocity `gamma`.
///
/// The result is re-orthonormalized by thin QR with a positive `R` diagonal.
pub fn grassmann_exp(y0: &StiefelPoint, gamma: &TangentVector) -> Result<StiefelPoint> {
    ensure!(
        gamma.gamma.shape() == y0.matrix().shape(),
        "tangent matrix is {:?}, base point is {:?}",
        gamma.gamma.shape(),
        y0.matrix().shape()
    );
    let v = vertical_part(y0, &gamma.gamma);
    ensure!(
        v <= EXP_HORIZONTAL_TOL,
        "tangent matrix is not horizontal at the base point (‖YᵀΓ‖_F = {v:e})"
    );
    if gamma.gamma.iter().all(|&x| x == 0.0) {
        return Ok(y0.clone());
    }
    let svd = thin_svd(&gamma.gamma)?;
    let v = svd.vt.transpose();
    let mut v_cos = v.clone();
    let mut u_sin = svd.u;
    for j in 0..svd.s.len() {
        let (s, c) = svd.s[j].sin_cos();
        v_cos.column_mut(j).scale_mut(c);
        u_sin.column_mut(j).scale_mut(s);
    }
    let y = (y0.matrix() * v_cos + u_sin) * &svd.vt;
    StiefelPoint::from_span(y)
}

/// Orthogonal `Q` maximizing `trace(Qᵀ·sourceᵀ·target)`, so that `source·Q` is the
/// representative of `span(source)` closest to `target`.
pub fn procrustes_align(target: &DMatrix<f64>, source: &StiefelPoint) -> Result<DMatrix<f64>> {
    ensure!(
        target.shape() == source.matrix().shape(),
        "alignment target is {:?}, source is {:?}",
        target.shape(),
        source.matrix().shape()
    );
    procrustes_from_cross(&source.matrix().tr_mul(target), target.norm())
}

/// `Q = U·Vᵀ` from the thin SVD of the cross-Gramian `m = U·S·Vᵀ`.
pub(crate) fn procrustes_from_cross(m: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let norm = m.norm();
    if !norm.is_finite() || norm <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateAlignment);
    }
    let svd = thin_svd(m)?;
    Ok(svd.u * svd.vt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};

    fn col(v: &[f64]) -> StiefelPoint {
        StiefelPoint::new(DMatrix::from_column_slice(v.len(), 1, v)).unwrap()
    }

    fn r4_pair(theta: f64) -> (StiefelPoint, StiefelPoint) {
        let y0 = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let (s, c) = theta.sin_cos();
        let y1 = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, c, s, 0.0]);
        (
            StiefelPoint::new(y0).unwrap(),
            StiefelPoint::new(y1).unwrap(),
        )
    }

    #[test]
    fn rejects_non_orthonormal() {
        assert!(StiefelPoint::new(DMatrix::from_element(3, 1, 1.0)).is_err());
        assert!(StiefelPoint::new(DMatrix::identity(2, 3)).is_err());
    }

    #[test]
    fn angles_closed_form() {
        let (y0, y1) = r4_pair(FRAC_PI_6);
        let a = principal_angles(&y0, &y1).unwrap();
        assert!(a[0].abs() < 1e-15);
        assert!((a[1] - FRAC_PI_6).abs() < 1e-15);
        assert!((geodesic_distance(&y0, &y1).unwrap() - FRAC_PI_6).abs() < 1e-15);

        let a = principal_angles(&col(&[1.0, 0.0]), &col(&[0.0, 1.0])).unwrap();
        assert_eq!(a, vec![FRAC_PI_2]);

        let r = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let a = principal_angles(&y0, &y0.rotate(&r).unwrap()).unwrap();
        assert_eq!(a, vec![0.0, 0.0]);
    }

    #[test]
    fn angle_dimension_mismatch() {
        let (y0, _) = r4_pair(0.1);
        assert!(principal_angles(&y0, &col(&[1.0, 0.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn planar_log_and_exp() {
        let y0 = col(&[1.0, 0.0]);
        let (s, c) = FRAC_PI_6.sin_cos();
        let y1 = col(&[c, s]);
        let g = grassmann_log(&y0, &y1).unwrap();
        assert!((g.gamma()[(0, 0)]).abs() < 1e-15);
        assert!((g.gamma()[(1, 0)] - FRAC_PI_6).abs() < 1e-15);
        assert!((g.norm() - FRAC_PI_6).abs() < 1e-15);

        let y = grassmann_exp(&y0, &g).unwrap();
        assert!((y.matrix()[(0, 0)] - c).abs() < 1e-15);
        assert!((y.matrix()[(1, 0)] - s).abs() < 1e-15);
    }

    #[test]
    fn log_of_same_span_is_zero() {
        let (y0, _) = r4_pair(0.0);
        let r = DMatrix::from_row_slice(2, 2, &[0.6, 0.8, -0.8, 0.6]);
        let g = grassmann_log(&y0, &y0.rotate(&r).unwrap()).unwrap();
        assert!(g.norm() < 1e-15);
        let y = grassmann_exp(&y0, &TangentVector::zero(y0.clone())).unwrap();
        assert_eq!(y, y0);
    }

    #[test]
    fn cut_locus_detected() {
        match grassmann_log(&col(&[1.0, 0.0]), &col(&[0.0, 1.0])) {
            Err(Error::CutLocus { .. }) => {}
            other => panic!("expected cut locus, got {other:?}"),
        }
    }

    #[test]
    fn exp_rejects_vertical_tangent() {
        let y0 = col(&[1.0, 0.0]);
        let elsewhere = col(&[0.0, 1.0]);
        let tv = TangentVector::new(elsewhere, DMatrix::from_column_slice(2, 1, &[0.3, 0.0]))
            .unwrap();
        assert!(matches!(
            grassmann_exp(&y0, &tv),
            Err(Error::Validation(_))
        ));
        assert!(TangentVector::new(y0, DMatrix::from_column_slice(2, 1, &[0.3, 0.0])).is_err());
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let (y0, _) = r4_pair(0.0);
        let q = procrustes_align(y0.matrix(), &y0).unwrap();
        assert!((q - DMatrix::identity(2, 2)).norm() < 1e-15);
        let (s, c) = FRAC_PI_3.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let target = y0.matrix() * &r;
        let q = procrustes_align(&target, &y0).unwrap();
        assert!((q - r).norm() < 1e-14);
        assert!(matches!(
            procrustes_align(&DMatrix::zeros(4, 2), &y0),
            Err(Error::DegenerateAlignment)
        ));
    }
}
