//! Bi-calibrated ITSGM prediction of full snapshot matrices at untrained parameters.
//!
//! For a query `p` the pipeline runs, in order:
//!
//! 1. `Φ̃ = ITSGM` over the training spatial bases;
//! 2. `Ψ̃ = ITSGM` over the training temporal bases;
//! 3. `σ̃_i(p)` from a natural cubic spline through `σ_i(p_k)` for each mode;
//! 4. calibration rotations `Q_Φ`, `Q_Ψ` from weighted orthogonal Procrustes
//!    problems against the training bases, with weights `|p − p_k|^{-m}` and
//!    `|p − p_k|^{-l}`;
//! 5. `u(p) ≈ ū + (Φ̃·Q_Φ)·diag(σ̃)·(Ψ̃·Q_Ψ)ᵀ`.
//!
//! Interpolation on the Grassmann manifold only fixes subspaces. The
//! calibration picks, inside each interpolated subspace, the representative
//! whose columns line up with the training modes, which is what gives the
//! product of independently interpolated factors a meaning.

use std::time::Instant;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datastore::{SnapshotSet, TrainingDatabase};
use crate::error::{ensure, Error, Result};
use crate::grassmann::{procrustes_align, procrustes_from_cross, StiefelPoint};
use crate::interp::{k_nearest, linear_eval, InterpNodes, NaturalCubicSpline};
use crate::itsgm::{itsgm_interpolate, ItsgmConfig};
use crate::linalg::scaled_product;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiCitsgmConfig {
    pub itsgm_spatial: ItsgmConfig,
    pub itsgm_temporal: ItsgmConfig,
    /// Inverse-distance power `m` of the spatial calibration weights.
    pub calib_power_spatial: f64,
    /// Inverse-distance power `l` of the temporal calibration weights.
    pub calib_power_temporal: f64,
    /// Training bases entering the calibration; `None` uses all of them.
    pub calib_neighbor_count: Option<usize>,
}

impl Default for BiCitsgmConfig {
    fn default() -> Self {
        BiCitsgmConfig {
            itsgm_spatial: ItsgmConfig::default(),
            itsgm_temporal: ItsgmConfig::default(),
            calib_power_spatial: 3.0,
            calib_power_temporal: 3.0,
            calib_neighbor_count: None,
        }
    }
}

impl BiCitsgmConfig {
    pub fn validate(&self) -> Result<()> {
        self.itsgm_spatial.validate()?;
        self.itsgm_temporal.validate()?;
        for (name, p) in [
            ("calib_power_spatial", self.calib_power_spatial),
            ("calib_power_temporal", self.calib_power_temporal),
        ] {
            ensure!(p > 0.0 && p.is_finite(), "{name} must be positive, got {p}");
        }
        if let Some(k) = self.calib_neighbor_count {
            ensure!(k >= 1, "calib_neighbor_count must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedSolution {
    pub parameter: f64,
    /// Calibrated spatial modes `Φ̃·Q_Φ`.
    pub phi_cal: DMatrix<f64>,
    pub sigma: DVector<f64>,
    /// Calibrated temporal modes `Ψ̃·Q_Ψ`.
    pub psi_cal: DMatrix<f64>,
    /// Full field, mean included.
    pub reconstruction: SnapshotSet,
    /// Seconds spent in the online stages.
    pub wall_time: f64,
}

/// Natural cubic spline of each singular-value curve over all training parameters.
///
/// Falls back to piecewise-linear interpolation (with a warning) when there are
/// fewer than three training parameters. Results are clamped from below at
/// `1e-14·σ̃_1`.
pub fn interpolate_singular_values(db: &TrainingDatabase, query: f64) -> Result<DVector<f64>> {
    ensure!(query.is_finite(), "query parameter must be finite");
    let params = db.parameters();
    let q = db.rank();
    if params.len() < 3 {
        warn!(
            "only {} training parameters; interpolating singular values linearly",
            params.len()
        );
    }
    let mut out = DVector::zeros(q);
    for i in 0..q {
        let ys: Vec<f64> = db.triplets.iter().map(|t| t.sigma[i]).collect();
        let nodes = InterpNodes::new(params.clone(), ys)?;
        out[i] = if params.len() >= 3 {
            NaturalCubicSpline::new(&nodes)?.eval(query)
        } else {
            linear_eval(&nodes, query)?
        };
    }
    ensure!(
        out.iter().all(|s| s.is_finite()),
        "interpolated singular values are not finite"
    );
    let floor = 1e-14 * out[0].abs().max(f64::MIN_POSITIVE);
    Ok(out.map(|s| s.max(floor)))
}

/// Orthogonal `Q` maximizing `trace(Qᵀ·Σ_k w_k·interpᵀ·y_k)` with
/// `w_k ∝ d_k^{-power}`; `interp·Q` is the calibrated basis.
///
/// A zero distance means the query sits on a training point: the result is then
/// the plain Procrustes alignment to that basis.
pub fn calibrate_basis(
    interp: &StiefelPoint,
    training: &[(f64, &StiefelPoint)],
    power: f64,
) -> Result<DMatrix<f64>> {
    ensure!(!training.is_empty(), "calibration needs at least one training basis");
    ensure!(
        power > 0.0 && power.is_finite(),
        "calibration power must be positive, got {power}"
    );
    for (d, y) in training {
        ensure!(
            d.is_finite() && *d >= 0.0,
            "calibration distance must be finite and nonnegative, got {d}"
        );
        ensure!(
            y.matrix().shape() == interp.matrix().shape(),
            "training basis is {:?}, interpolated basis is {:?}",
            y.matrix().shape(),
            interp.matrix().shape()
        );
    }
    if let Some((_, y)) = training.iter().find(|(d, _)| *d == 0.0) {
        return procrustes_align(y.matrix(), interp);
    }
    // weights relative to the nearest point stay in (0, 1]
    let d_min = training
        .iter()
        .map(|(d, _)| *d)
        .fold(f64::INFINITY, f64::min);
    let q = interp.dim();
    let mut cross = DMatrix::zeros(q, q);
    let mut scale = 0.0;
    for (d, y) in training {
        let w = (d_min / d).powf(power);
        cross += interp.matrix().tr_mul(y.matrix()) * w;
        scale += w * y.matrix().norm();
    }
    procrustes_from_cross(&cross, scale)
}

fn stiefel_points(db: &TrainingDatabase, temporal: bool) -> Result<Vec<(f64, StiefelPoint)>> {
    db.triplets
        .iter()
        .map(|t| {
            let m = if temporal { &t.psi } else { &t.phi };
            Ok((t.parameter, StiefelPoint::new(m.clone())?))
        })
        .collect()
}

fn calibration_set<'a>(
    points: &'a [(f64, StiefelPoint)],
    query: f64,
    count: Option<usize>,
) -> Result<Vec<(f64, &'a StiefelPoint)>> {
    let indices: Vec<usize> = match count {
        Some(k) if k < points.len() => {
            let params: Vec<f64> = points.iter().map(|(p, _)| *p).collect();
            k_nearest(&params, query, k)?
        }
        _ => (0..points.len()).collect(),
    };
    Ok(indices
        .into_iter()
        .map(|i| ((query - points[i].0).abs(), &points[i].1))
        .collect())
}

/// Predicts the full snapshot matrix at `query`.
pub fn predict(db: &TrainingDatabase, query: f64, config: &BiCitsgmConfig) -> Result<PredictedSolution> {
    config.validate()?;
    ensure!(query.is_finite(), "query parameter must be finite");
    let params = db.parameters();
    if query < params[0] || query > params[params.len() - 1] {
        warn!(
            "query {query} lies outside the training range [{}, {}]; extrapolating",
            params[0],
            params[params.len() - 1]
        );
    }
    let spatial = stiefel_points(db, false).map_err(|e| e.in_stage("spatial bases"))?;
    let temporal = stiefel_points(db, true).map_err(|e| e.in_stage("temporal bases"))?;

    let start = Instant::now();
    let phi = itsgm_interpolate(&spatial, query, &config.itsgm_spatial)
        .map_err(|e| e.in_stage("spatial ITSGM"))?;
    let psi = itsgm_interpolate(&temporal, query, &config.itsgm_temporal)
        .map_err(|e| e.in_stage("temporal ITSGM"))?;
    let sigma = interpolate_singular_values(db, query)
        .map_err(|e| e.in_stage("singular-value interpolation"))?;

    let q_phi = calibrate_basis(
        &phi,
        &calibration_set(&spatial, query, config.calib_neighbor_count)?,
        config.calib_power_spatial,
    )
    .map_err(|e| e.in_stage("spatial calibration"))?;
    let q_psi = calibrate_basis(
        &psi,
        &calibration_set(&temporal, query, config.calib_neighbor_count)?,
        config.calib_power_temporal,
    )
    .map_err(|e| e.in_stage("temporal calibration"))?;
    let phi_cal = phi.matrix() * q_phi;
    let psi_cal = psi.matrix() * q_psi;

    let mut field = scaled_product(&phi_cal, &sigma, &psi_cal);
    for mut col in field.column_iter_mut() {
        col += &db.mean.mean;
    }
    let wall_time = start.elapsed().as_secs_f64();

    let reconstruction = SnapshotSet::new(db.field_name.clone(), query, db.times.clone(), field)
        .map_err(|e| e.in_stage("reconstruction"))?;
    Ok(PredictedSolution {
        parameter: query,
        phi_cal,
        sigma,
        psi_cal,
        reconstruction,
        wall_time,
    })
}

/// Trapezoid weights on a uniform grid of `n` points (up to the step size).
fn trapezoid_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    w[0] = 0.5;
    w[n - 1] = 0.5;
    w
}

/// Time-integrated relative L² error in percent,
/// `100·sqrt(∫‖f − f̃‖²dt / ∫‖f‖²dt)`, with trapezoidal time quadrature and an
/// optionally weighted Euclidean norm in space.
pub fn mean_relative_error(
    truth: &SnapshotSet,
    approx: &SnapshotSet,
    quadrature_weights: Option<&[f64]>,
) -> Result<f64> {
    ensure!(
        truth.data().shape() == approx.data().shape(),
        "truth is {:?} but approximation is {:?}",
        truth.data().shape(),
        approx.data().shape()
    );
    if let Some(w) = quadrature_weights {
        ensure!(
            w.len() == truth.n_space(),
            "{} spatial weights for {} DOFs",
            w.len(),
            truth.n_space()
        );
        ensure!(
            w.iter().all(|x| x.is_finite() && *x >= 0.0),
            "spatial weights must be finite and nonnegative"
        );
    }
    let tw = trapezoid_weights(truth.n_snapshots());
    let (f, g) = (truth.data(), approx.data());
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..f.ncols() {
        let (mut e2, mut f2) = (0.0, 0.0);
        for i in 0..f.nrows() {
            let sw = quadrature_weights.map_or(1.0, |w| w[i]);
            let e = f[(i, j)] - g[(i, j)];
            e2 += sw * e * e;
            f2 += sw * f[(i, j)] * f[(i, j)];
        }
        num += tw[j] * e2;
        den += tw[j] * f2;
    }
    if den <= 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok(100.0 * (num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pod::{MeanField, PodTriplet};

    fn set(data: DMatrix<f64>) -> SnapshotSet {
        let times = (0..data.ncols()).map(|i| 0.1 * i as f64).collect();
        SnapshotSet::new("u", 1.0, times, data).unwrap()
    }

    #[test]
    fn error_metric_examples() {
        let f = DMatrix::from_fn(4, 5, |i, j| 1.0 + i as f64 - 0.3 * j as f64);
        let truth = set(f.clone());
        assert_eq!(mean_relative_error(&truth, &truth, None).unwrap(), 0.0);
        let zero = set(DMatrix::zeros(4, 5));
        assert!((mean_relative_error(&truth, &zero, None).unwrap() - 100.0).abs() < 1e-12);
        let scaled = set(&f * (1.0 + 1e-3));
        assert!((mean_relative_error(&truth, &scaled, None).unwrap() - 0.1).abs() < 1e-4);
        assert!(matches!(
            mean_relative_error(&zero, &truth, None),
            Err(Error::ZeroReference)
        ));
        let w = [1.0, 2.0, 0.5, 1.0];
        assert!(mean_relative_error(&truth, &scaled, Some(&w)).is_ok());
        assert!(mean_relative_error(&truth, &scaled, Some(&w[..3])).is_err());
    }

    #[test]
    fn calibration_single_basis() {
        let y = StiefelPoint::from_span(DMatrix::from_fn(5, 2, |i, j| ((i + 2 * j) as f64).sin() + 0.1 * i as f64)).unwrap();
        let q = calibrate_basis(&y, &[(1.0, &y)], 3.0).unwrap();
        assert!((q - DMatrix::identity(2, 2)).norm() < 1e-14);

        let (s, c) = 0.7f64.sin_cos();
        let r = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
        let target = y.rotate(&r).unwrap();
        let q = calibrate_basis(&y, &[(2.5, &target)], 3.0).unwrap();
        assert!((y.matrix() * q - target.matrix()).norm() < 1e-10);
        // zero distance short-circuits to that basis even with others around
        let q = calibrate_basis(&y, &[(1.0, &y), (0.0, &target)], 3.0).unwrap();
        assert!((y.matrix() * q - target.matrix()).norm() < 1e-10);
        assert!(calibrate_basis(&y, &[], 3.0).is_err());
        assert!(calibrate_basis(&y, &[(1.0, &y)], 0.0).is_err());
    }

    fn tiny_db(sigmas: &[[f64; 1]]) -> TrainingDatabase {
        let triplets = sigmas
            .iter()
            .enumerate()
            .map(|(k, s)| PodTriplet {
                parameter: k as f64,
                phi: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
                sigma: DVector::from_column_slice(s),
                psi: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
                eigenvalues: DVector::from_vec(vec![s[0] * s[0], 0.0]),
            })
            .collect();
        let mean = MeanField {
            field_name: "u".into(),
            mean: DVector::zeros(2),
        };
        TrainingDatabase::new("u", vec![0.0, 1.0], mean, triplets).unwrap()
    }

    #[test]
    fn singular_values_at_nodes_and_constant() {
        let db = tiny_db(&[[2.0], [3.0], [5.0], [4.0]]);
        assert_eq!(interpolate_singular_values(&db, 2.0).unwrap()[0], 5.0);
        let db = tiny_db(&[[1.5], [1.5], [1.5]]);
        assert!((interpolate_singular_values(&db, 0.3).unwrap()[0] - 1.5).abs() < 1e-14);
        // linear fallback
        let db = tiny_db(&[[1.0], [3.0]]);
        assert!((interpolate_singular_values(&db, 0.5).unwrap()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let mut c = BiCitsgmConfig::default();
        assert!(c.validate().is_ok());
        c.calib_power_temporal = 0.0;
        assert!(c.validate().is_err());
        let parsed: BiCitsgmConfig =
            serde_json::from_str(r#"{"calib_power_spatial": 2.0}"#).unwrap();
        assert_eq!(parsed.calib_power_spatial, 2.0);
        assert_eq!(parsed.calib_power_temporal, 3.0);
        assert_eq!(parsed.itsgm_spatial.neighbor_count, 3);
    }
}
