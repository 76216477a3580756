//! Small dense linear-algebra helpers shared by the POD and manifold code.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{ensure, Error, Result};

/// Thin SVD `m = u * diag(s) * vt` with singular values sorted nonincreasing.
///
/// For an `r × c` input, `u` is `r × k`, `s` has length `k` and `vt` is `k × c`
/// with `k = min(r, c)`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub vt: DMatrix<f64>,
}

/// Computed with faer, sequentially, so repeated calls are bit-identical.
/// nalgebra's own SVD returns inaccurate factors for some rank-deficient
/// inputs, which the tangent-space maps produce routinely.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(r, 0),
            s: DVector::zeros(0),
            vt: DMatrix::zeros(0, c),
        });
    }
    ensure!(all_finite(m), "cannot decompose a matrix with non-finite entries");
    let a = Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)]);
    let svd = a.thin_svd().map_err(|_| Error::SvdFailed { rows: r, cols: c })?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());

    let mut order: Vec<usize> = (0..k).collect();
    // stable, so ties keep the solver's order
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    Ok(ThinSvd {
        u: DMatrix::from_fn(r, k, |i, j| u[(i, order[j])]),
        s: DVector::from_fn(k, |i, _| s[order[i]]),
        vt: DMatrix::from_fn(k, c, |i, j| v[(j, order[i])]),
    })
}

/// Orthonormalizes the columns of `m` by thin QR, forcing a positive diagonal in R.
pub fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `‖aᵀa − I‖_F`.
pub fn orthonormality_defect(a: &DMatrix<f64>) -> f64 {
    let g = a.tr_mul(a);
    (g - DMatrix::identity(a.ncols(), a.ncols())).norm()
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// `u * diag(s) * vᵀ` without forming the diagonal matrix.
pub fn scaled_product(u: &DMatrix<f64>, s: &DVector<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let mut us = u.clone();
    for (j, mut col) in us.column_iter_mut().enumerate() {
        col *= s[j];
    }
    us * v.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_sorted_and_reconstructs() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 5.0, 3.0, -1.0]);
        let svd = thin_svd(&m).unwrap();
        assert!(svd.s[0] >= svd.s[1]);
        let back = &svd.u * DMatrix::from_diagonal(&svd.s) * &svd.vt;
        assert!((back - m).norm() < 1e-13);
    }

    #[test]
    fn rank_deficient_input_reconstructs() {
        // the horizontal part of a 3×2 frame has rank one
        let y = orthonormalize(DMatrix::from_row_slice(3, 2, &[1.0, 0.2, 0.3, 1.0, -0.5, 0.4]));
        let z = DMatrix::from_row_slice(3, 2, &[0.3, -1.0, 0.7, 0.2, 1.1, 0.5]);
        let h = &z - &y * y.tr_mul(&z);
        let svd = thin_svd(&h).unwrap();
        let back = scaled_product(&svd.u, &svd.s, &svd.vt.transpose());
        assert!((back - &h).norm() < 1e-14);
        assert!(orthonormality_defect(&svd.u) < 1e-14);
        assert!(svd.s[1] < 1e-14);
    }

    #[test]
    fn empty_and_wide_inputs() {
        let svd = thin_svd(&DMatrix::zeros(0, 3)).unwrap();
        assert_eq!((svd.u.shape(), svd.vt.shape()), ((0, 0), (0, 3)));
        let m = DMatrix::from_row_slice(2, 3, &[3.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        let svd = thin_svd(&m).unwrap();
        assert_eq!(svd.s.as_slice(), &[3.0, 2.0]);
        assert_eq!((svd.u.shape(), svd.vt.shape()), ((2, 2), (2, 3)));
        assert!(thin_svd(&DMatrix::from_element(2, 2, f64::NAN)).is_err());
    }

    #[test]
    fn orthonormalize_keeps_span_and_positive_diagonal() {
        let m = DMatrix::from_row_slice(3, 2, &[-2.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let q = orthonormalize(m.clone());
        assert!(orthonormality_defect(&q) < 1e-14);
        assert!(q[(0, 0)] < 0.0);
        // residual of projecting m onto span(q) vanishes
        let res = &m - &q * q.tr_mul(&m);
        assert!(res.norm() < 1e-14);
    }
}
