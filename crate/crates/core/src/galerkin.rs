//! Intrusive POD-Galerkin reduced model of the Burgers oracle.
//!
//! With `u ≈ ū + Φ·a`, projecting the semi-discrete equations
//! `u_t = ν·D₂u + B(u, u)` onto `span(Φ)` gives
//!
//! ```text
//! da/dt = ν·L·a + C·a + c + [aᵀ·Q_k·a]_k
//!
//! L   = Φᵀ·D₂·Φ                     viscous operator
//! C   = 2·Φᵀ·B(ū, Φ)                 linear coupling with the mean
//! c   = Φᵀ·(ν·D₂ū + B(ū, ū))         constant forcing
//! Q_k = [φ_kᵀ·B(φ_i, φ_j)]_{ij}      convective tensor
//! ```
//!
//! `D₂` and `B` are the exact stencils of the full-order solver, so a complete
//! basis reproduces the full model.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::datastore::{SnapshotSet, TrainingDatabase};
use crate::error::{ensure, Error, Result};
use crate::grassmann::StiefelPoint;
use crate::itsgm::{itsgm_interpolate, ItsgmConfig};
use crate::oracle::{convection_bilinear, laplacian, BurgersConfig};
use crate::pod::MeanField;

/// `‖a‖` beyond which integration is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinRom {
    pub phi: DMatrix<f64>,
    pub mean: DVector<f64>,
    pub viscosity: f64,
    pub dt: f64,
    pub linear_operator: DMatrix<f64>,
    /// `Q_k` for `k = 0..q`, each `q × q` and symmetric.
    pub quadratic_tensor: Vec<DMatrix<f64>>,
    pub mean_coupling: DMatrix<f64>,
    pub mean_forcing: DVector<f64>,
    pub a0: DVector<f64>,
}

fn columns_op(m: &DMatrix<f64>, op: impl Fn(&[f64], &mut [f64])) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let col: Vec<f64> = m.column(j).iter().copied().collect();
        let mut buf = vec![0.0; m.nrows()];
        op(&col, &mut buf);
        out.column_mut(j).copy_from_slice(&buf);
    }
    out
}

/// Projects the Burgers operators at viscosity `nu` onto `span(phi)`, starting
/// from the projection of `cfg.initial_condition()`.
pub fn build_rom(phi: &DMatrix<f64>, mean: &MeanField, cfg: &BurgersConfig, nu: f64) -> Result<GalerkinRom> {
    ensure!(
        phi.nrows() == cfg.n_x,
        "basis has {} rows, Burgers grid has {} points",
        phi.nrows(),
        cfg.n_x
    );
    ensure!(
        mean.mean.len() == cfg.n_x,
        "mean field has {} entries, Burgers grid has {} points",
        mean.mean.len(),
        cfg.n_x
    );
    ensure!(phi.ncols() >= 1, "empty reduced basis");
    let defect = crate::linalg::orthonormality_defect(phi);
    ensure!(defect <= 1e-8, "reduced basis is not orthonormal (defect {defect:e})");
    ensure!(nu > 0.0 && nu.is_finite(), "viscosity must be positive, got {nu}");
    cfg.steps()?;

    let dx = cfg.dx();
    let q = phi.ncols();
    let n = phi.nrows();
    let ubar: Vec<f64> = mean.mean.iter().copied().collect();

    let d2_phi = columns_op(phi, |v, out| laplacian(v, dx, out));
    let linear_operator = phi.tr_mul(&d2_phi);

    let b_mean_phi = columns_op(phi, |v, out| convection_bilinear(&ubar, v, dx, out));
    let mean_coupling = phi.tr_mul(&b_mean_phi) * 2.0;

    let mut lap_mean = vec![0.0; n];
    laplacian(&ubar, dx, &mut lap_mean);
    let mut b_mean = vec![0.0; n];
    convection_bilinear(&ubar, &ubar, dx, &mut b_mean);
    let forcing_full = DVector::from_iterator(n, lap_mean.iter().zip(&b_mean).map(|(l, b)| nu * l + b));
    let mean_forcing = phi.tr_mul(&forcing_full);

    // B(φ_i, φ_j) for i ≤ j, projected onto every φ_k
    let cols: Vec<Vec<f64>> = (0..q).map(|j| phi.column(j).iter().copied().collect()).collect();
    let mut quadratic_tensor = vec![DMatrix::zeros(q, q); q];
    let mut buf = vec![0.0; n];
    for i in 0..q {
        for j in i..q {
            convection_bilinear(&cols[i], &cols[j], dx, &mut buf);
            let proj = phi.tr_mul(&DVector::from_column_slice(&buf));
            for k in 0..q {
                quadratic_tensor[k][(i, j)] = proj[k];
                quadratic_tensor[k][(j, i)] = proj[k];
            }
        }
    }

    let u0 = cfg.initial_condition() - &mean.mean;
    let a0 = phi.tr_mul(&u0);
    Ok(GalerkinRom {
        phi: phi.clone(),
        mean: mean.mean.clone(),
        viscosity: nu,
        dt: cfg.dt,
        linear_operator,
        quadratic_tensor,
        mean_coupling,
        mean_forcing,
        a0,
    })
}

struct RhsWorkspace {
    affine: DMatrix<f64>,
    flat_tensor: Vec<f64>,
    outer: Vec<f64>,
}

impl GalerkinRom {
    pub fn rank(&self) -> usize {
        self.phi.ncols()
    }

    fn workspace(&self) -> RhsWorkspace {
        let q = self.rank();
        let mut flat_tensor = Vec::with_capacity(q * q * q);
        for qk in &self.quadratic_tensor {
            flat_tensor.extend_from_slice(qk.as_slice());
        }
        RhsWorkspace {
            affine: &self.linear_operator * self.viscosity + &self.mean_coupling,
            flat_tensor,
            outer: vec![0.0; q * q],
        }
    }

    fn rhs(&self, ws: &mut RhsWorkspace, a: &DVector<f64>, out: &mut DVector<f64>) {
        let q = self.rank();
        out.copy_from(&self.mean_forcing);
        out.gemv(1.0, &ws.affine, a, 1.0);
        for j in 0..q {
            for i in 0..q {
                ws.outer[j * q + i] = a[i] * a[j];
            }
        }
        for k in 0..q {
            let qk = &ws.flat_tensor[k * q * q..(k + 1) * q * q];
            out[k] += qk.iter().zip(&ws.outer).map(|(x, y)| x * y).sum::<f64>();
        }
    }

    /// Modal time derivative at state `a`.
    pub fn eval_rhs(&self, a: &DVector<f64>) -> DVector<f64> {
        let mut ws = self.workspace();
        let mut out = DVector::zeros(self.rank());
        self.rhs(&mut ws, a, &mut out);
        out
    }

    /// `ū + Φ·a(t)` for every column of `coefficients`.
    pub fn reconstruct(&self, coefficients: &DMatrix<f64>) -> DMatrix<f64> {
        let mut field = &self.phi * coefficients;
        for mut col in field.column_iter_mut() {
            col += &self.mean;
        }
        field
    }
}

/// Classical RK4 with the ROM's `dt`, starting from `a0` at `times[0]` and
/// recording the coefficients at every entry of the uniform grid `times`.
pub fn integrate_rom(rom: &GalerkinRom, times: &[f64]) -> Result<DMatrix<f64>> {
    crate::datastore::check_uniform_grid(times)?;
    let h = times[1] - times[0];
    let per = (h / rom.dt).round();
    ensure!(
        per >= 1.0 && (per * rom.dt - h).abs() <= 1e-9 * h,
        "snapshot spacing {h} is not a whole number of steps of dt = {}",
        rom.dt
    );
    let per = per as usize;
    let q = rom.rank();
    let dt = rom.dt;
    let mut ws = rom.workspace();
    let mut out = DMatrix::zeros(q, times.len());
    let mut a = rom.a0.clone();
    let (mut k1, mut k2, mut k3, mut k4) = (
        DVector::zeros(q),
        DVector::zeros(q),
        DVector::zeros(q),
        DVector::zeros(q),
    );
    let mut stage = DVector::zeros(q);
    out.column_mut(0).copy_from(&a);
    let mut step = 0;
    for j in 1..times.len() {
        for _ in 0..per {
            step += 1;
            rom.rhs(&mut ws, &a, &mut k1);
            stage.copy_from(&a);
            stage.axpy(0.5 * dt, &k1, 1.0);
            rom.rhs(&mut ws, &stage, &mut k2);
            stage.copy_from(&a);
            stage.axpy(0.5 * dt, &k2, 1.0);
            rom.rhs(&mut ws, &stage, &mut k3);
            stage.copy_from(&a);
            stage.axpy(dt, &k3, 1.0);
            rom.rhs(&mut ws, &stage, &mut k4);
            a.axpy(dt / 6.0, &k1, 1.0);
            a.axpy(dt / 3.0, &k2, 1.0);
            a.axpy(dt / 3.0, &k3, 1.0);
            a.axpy(dt / 6.0, &k4, 1.0);
            let norm = a.norm();
            if !(norm <= DIVERGENCE_LIMIT) {
                return Err(Error::Instability {
                    step,
                    reason: format!("modal coefficients diverged (‖a‖ = {norm:e})"),
                });
            }
        }
        out.column_mut(j).copy_from(&a);
    }
    Ok(out)
}

/// Result of the ITSGM + Galerkin baseline at one query.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinPrediction {
    pub parameter: f64,
    pub reconstruction: SnapshotSet,
    /// Seconds spent interpolating the basis, projecting and integrating.
    pub wall_time: f64,
}

/// Interpolates the spatial basis at viscosity `query` by ITSGM, projects the
/// Burgers operators onto it and integrates over the database time grid.
pub fn galerkin_predict(
    db: &TrainingDatabase,
    cfg: &BurgersConfig,
    query: f64,
    itsgm: &ItsgmConfig,
) -> Result<GalerkinPrediction> {
    ensure!(
        db.times.first() == Some(&0.0),
        "Galerkin baseline needs snapshots starting at the initial condition (t = 0)"
    );
    let spatial = db
        .triplets
        .iter()
        .map(|t| Ok((t.parameter, StiefelPoint::new(t.phi.clone())?)))
        .collect::<Result<Vec<_>>>()?;
    let start = Instant::now();
    let phi = itsgm_interpolate(&spatial, query, itsgm).map_err(|e| e.in_stage("spatial ITSGM"))?;
    let rom = build_rom(phi.matrix(), &db.mean, cfg, query).map_err(|e| e.in_stage("Galerkin projection"))?;
    let coeffs = integrate_rom(&rom, &db.times).map_err(|e| e.in_stage("Galerkin integration"))?;
    let field = rom.reconstruct(&coeffs);
    let wall_time = start.elapsed().as_secs_f64();
    Ok(GalerkinPrediction {
        parameter: query,
        reconstruction: SnapshotSet::new(db.field_name.clone(), query, db.times.clone(), field)?,
        wall_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> BurgersConfig {
        BurgersConfig {
            n_x: 32,
            dt: 1e-4,
            t_final: 0.01,
            snapshot_stride: 10,
            viscosity_range: [0.01, 0.1],
        }
    }

    fn zero_mean(n: usize) -> MeanField {
        MeanField {
            field_name: "u".into(),
            mean: DVector::zeros(n),
        }
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let cfg = small_cfg();
        let phi = DMatrix::identity(32, 4);
        let mut rom = build_rom(&phi, &zero_mean(32), &cfg, 0.05).unwrap();
        rom.a0 = DVector::zeros(4);
        let a = integrate_rom(&rom, &cfg.times().unwrap()).unwrap();
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn viscous_operator_is_symmetric_nsd_with_constant_null_vector() {
        let cfg = small_cfg();
        let n = 32;
        // constant mode first, then a few orthonormalized Fourier-like columns
        let raw = DMatrix::from_fn(n, 5, |i, j| {
            let x = i as f64 / n as f64;
            match j {
                0 => 1.0,
                _ => ((j as f64 + 1.0) * std::f64::consts::PI * x + 0.3 * j as f64).sin(),
            }
        });
        let phi = crate::linalg::orthonormalize(raw);
        let rom = build_rom(&phi, &zero_mean(n), &cfg, 0.05).unwrap();
        let l = &rom.linear_operator;
        assert!((l - l.transpose()).norm() < 1e-8);
        let eig = l.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e <= 1e-8));
        assert!(l.column(0).norm() < 1e-10);
        assert!(l.row(0).norm() < 1e-10);
    }

    #[test]
    fn rejects_mismatched_basis() {
        let cfg = small_cfg();
        assert!(build_rom(&DMatrix::identity(16, 2), &zero_mean(16), &cfg, 0.05).is_err());
        let not_orth = DMatrix::from_element(32, 2, 1.0);
        assert!(build_rom(&not_orth, &zero_mean(32), &cfg, 0.05).is_err());
    }

    #[test]
    fn divergence_reported_with_step() {
        let cfg = small_cfg();
        let phi = DMatrix::identity(32, 2);
        let mut rom = build_rom(&phi, &zero_mean(32), &cfg, 0.05).unwrap();
        rom.viscosity = -1e8;
        rom.a0 = DVector::from_element(2, 1.0);
        match integrate_rom(&rom, &cfg.times().unwrap()) {
            Err(Error::Instability { step, .. }) => assert!(step >= 1),
            other => panic!("expected instability, got {other:?}"),
        }
    }
}
