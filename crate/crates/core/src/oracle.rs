//! High-fidelity truth generators.
//!
//! * [`analytic_field`]: a separable parametrized field whose mode amplitudes and
//!   temporal frequencies both move with the parameter.
//! * [`solve_burgers`]: periodic 1D viscous Burgers, `u_t + (u²/2)_x = ν·u_xx`,
//!   with the viscosity as parameter.
//!
//! The Burgers discretization is second-order central in space and Heun (RK2) in
//! time. The convective term is written in flux form with the skew-symmetric
//! flux `F_{i+1/2} = (u_i² + u_i·u_{i+1} + u_{i+1}²)/6`, which conserves
//! `Σ u_i` exactly and does not feed the discrete energy; only viscosity removes
//! it. The same stencils are reused by the Galerkin projection.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datastore::SnapshotSet;
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticFamilyConfig {
    pub n_x: usize,
    pub n_s: usize,
    pub t_final: f64,
    pub mode_count: usize,
    pub parameter_range: [f64; 2],
}

impl Default for AnalyticFamilyConfig {
    fn default() -> Self {
        AnalyticFamilyConfig {
            n_x: 256,
            n_s: 200,
            t_final: 4.0,
            mode_count: 4,
            parameter_range: [0.5, 2.5],
        }
    }
}

impl AnalyticFamilyConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_x >= 32, "analytic family needs n_x ≥ 32, got {}", self.n_x);
        ensure!(self.n_s >= 16, "analytic family needs n_s ≥ 16, got {}", self.n_s);
        ensure!(
            (1..=8).contains(&self.mode_count),
            "mode_count must be in 1..=8, got {}",
            self.mode_count
        );
        ensure!(
            self.t_final > 0.0 && self.t_final.is_finite(),
            "t_final must be positive"
        );
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = 1.0 / (self.n_x - 1) as f64;
        (0..self.n_x).map(|i| i as f64 * h).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.t_final / (self.n_s - 1) as f64;
        (0..self.n_s).map(|j| j as f64 * dt).collect()
    }
}

/// `f(x,t;μ) = Σ_{k=1}^{r} k⁻¹·e^{−kμ/4}·sin(kπx)·cos(8πk(1+μ/5)·t/t_final)` on
/// `n_x` equispaced points of `[0, 1]` (ends included) and `n_s` equispaced times
/// of `[0, t_final]`.
pub fn analytic_field(cfg: &AnalyticFamilyConfig, mu: f64) -> Result<SnapshotSet> {
    cfg.validate()?;
    ensure!(mu.is_finite(), "parameter must be finite");
    let [lo, hi] = cfg.parameter_range;
    if mu < lo || mu > hi {
        log::warn!("analytic parameter {mu} outside configured range [{lo}, {hi}]");
    }
    let xs = cfg.grid();
    let ts = cfg.times();
    let mut data = DMatrix::zeros(cfg.n_x, cfg.n_s);
    for k in 1..=cfg.mode_count {
        let kf = k as f64;
        let amp = (-kf * mu / 4.0).exp() / kf;
        let omega = kf * (1.0 + mu / 5.0) * 2.0 * PI * 4.0 / cfg.t_final;
        let space: Vec<f64> = xs.iter().map(|x| (kf * PI * x).sin()).collect();
        for (j, t) in ts.iter().enumerate() {
            let c = amp * (omega * t).cos();
            for (i, s) in space.iter().enumerate() {
                data[(i, j)] += s * c;
            }
        }
    }
    SnapshotSet::new("f", mu, ts, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BurgersConfig {
    /// Grid points on the periodic unit interval.
    pub n_x: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Time steps between recorded snapshots.
    pub snapshot_stride: usize,
    pub viscosity_range: [f64; 2],
}

impl Default for BurgersConfig {
    fn default() -> Self {
        BurgersConfig {
            n_x: 512,
            dt: 2.5e-5,
            t_final: 2.0,
            snapshot_stride: 400,
            viscosity_range: [0.005, 0.05],
        }
    }
}

impl BurgersConfig {
    pub fn dx(&self) -> f64 {
        1.0 / self.n_x as f64
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.n_x).map(|i| i as f64 * self.dx()).collect()
    }

    /// `u₀(x) = sin(2πx) + 0.5·sin(4πx)`.
    pub fn initial_condition(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n_x,
            self.grid()
                .into_iter()
                .map(|x| (2.0 * PI * x).sin() + 0.5 * (4.0 * PI * x).sin()),
        )
    }

    /// Total number of time steps.
    pub fn steps(&self) -> Result<usize> {
        ensure!(
            self.dt > 0.0 && self.dt.is_finite() && self.t_final > 0.0,
            "dt and t_final must be positive"
        );
        let steps = (self.t_final / self.dt).round();
        ensure!(
            (steps * self.dt - self.t_final).abs() <= 1e-9 * self.t_final,
            "t_final = {} is not a whole number of steps of dt = {}",
            self.t_final,
            self.dt
        );
        let steps = steps as usize;
        ensure!(
            self.snapshot_stride >= 1 && steps % self.snapshot_stride == 0,
            "snapshot_stride {} does not divide the {steps} time steps",
            self.snapshot_stride
        );
        ensure!(
            steps / self.snapshot_stride >= 1,
            "run records fewer than two snapshots"
        );
        Ok(steps)
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        let n = self.steps()? / self.snapshot_stride;
        let h = self.dt * self.snapshot_stride as f64;
        Ok((0..=n).map(|j| j as f64 * h).collect())
    }

    /// Checks the grid, step counts and both stability limits for viscosity `nu`.
    pub fn validate(&self, nu: f64) -> Result<()> {
        ensure!(self.n_x >= 4, "Burgers grid needs at least 4 points");
        self.steps()?;
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Config(format!("viscosity must be positive, got ν = {nu}")));
        }
        let dx = self.dx();
        let diffusive = 0.4 * dx * dx / nu;
        if self.dt > diffusive {
            return Err(Error::Config(format!(
                "dt = {} violates the diffusive limit 0.4·dx²/ν = {diffusive:.3e} for ν = {nu}",
                self.dt
            )));
        }
        let umax = self.initial_condition().amax();
        let advective = 0.4 * dx / umax;
        if self.dt > advective {
            return Err(Error::Config(format!(
                "dt = {} violates the advective limit 0.4·dx/max|u₀| = {advective:.3e} for ν = {nu}",
                self.dt
            )));
        }
        Ok(())
    }
}

/// Periodic second difference `(u_{i+1} − 2u_i + u_{i−1})/dx²`.
pub fn laplacian(u: &[f64], dx: f64, out: &mut [f64]) {
    let n = u.len();
    let inv = 1.0 / (dx * dx);
    for i in 0..n {
        let l = u[(i + n - 1) % n];
        let r = u[(i + 1) % n];
        out[i] = (l - 2.0 * u[i] + r) * inv;
    }
}

/// Symmetric bilinear convective operator `B(v, w)` with `B(u, u) = −∂ₓ(u²/2)`
/// discretized by the skew-symmetric flux.
pub fn convection_bilinear(v: &[f64], w: &[f64], dx: f64, out: &mut [f64]) {
    let n = v.len();
    let flux = |i: usize| {
        let j = (i + 1) % n;
        (v[i] * w[i] + 0.5 * (v[i] * w[j] + v[j] * w[i]) + v[j] * w[j]) / 6.0
    };
    let inv = 1.0 / dx;
    let mut left = flux(n - 1);
    for i in 0..n {
        let right = flux(i);
        out[i] = -(right - left) * inv;
        left = right;
    }
}

/// `ν·u_xx − ∂ₓ(u²/2)` on the periodic grid.
pub fn burgers_rhs(u: &[f64], nu: f64, dx: f64, out: &mut [f64], scratch: &mut [f64]) {
    laplacian(u, dx, scratch);
    convection_bilinear(u, u, dx, out);
    for (o, l) in out.iter_mut().zip(scratch.iter()) {
        *o += nu * l;
    }
}

/// Integrates Burgers from `cfg.initial_condition()` with viscosity `nu`.
/// The snapshot set holds `u` at `t = 0, stride·dt, …, t_final` and carries `nu`
/// as its parameter.
pub fn solve_burgers(cfg: &BurgersConfig, nu: f64) -> Result<SnapshotSet> {
    cfg.validate(nu)?;
    solve_burgers_from(cfg, nu, cfg.initial_condition().as_slice())
}

/// Like [`solve_burgers`] from an arbitrary initial state (stability limits are
/// not rechecked against it).
pub fn solve_burgers_from(cfg: &BurgersConfig, nu: f64, u0: &[f64]) -> Result<SnapshotSet> {
    ensure!(
        u0.len() == cfg.n_x,
        "initial state has {} points, grid has {}",
        u0.len(),
        cfg.n_x
    );
    let steps = cfg.steps()?;
    let times = cfg.times()?;
    let n = cfg.n_x;
    let dx = cfg.dx();
    let dt = cfg.dt;

    let mut data = DMatrix::zeros(n, times.len());
    let mut u = u0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    data.column_mut(0).copy_from_slice(&u);
    for step in 1..=steps {
        burgers_rhs(&u, nu, dx, &mut k1, &mut scratch);
        for i in 0..n {
            stage[i] = u[i] + dt * k1[i];
        }
        burgers_rhs(&stage, nu, dx, &mut k2, &mut scratch);
        let mut finite = true;
        for i in 0..n {
            u[i] += 0.5 * dt * (k1[i] + k2[i]);
            finite &= u[i].is_finite();
        }
        if !finite {
            return Err(Error::Instability {
                step,
                reason: format!("non-finite Burgers state for ν = {nu}"),
            });
        }
        if step % cfg.snapshot_stride == 0 {
            data.column_mut(step / cfg.snapshot_stride).copy_from_slice(&u);
        }
    }
    SnapshotSet::new("u", nu, times, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_is_deterministic_and_bounded() {
        let cfg = AnalyticFamilyConfig::default();
        let a = analytic_field(&cfg, 1.3).unwrap();
        let b = analytic_field(&cfg, 1.3).unwrap();
        assert_eq!(a, b);
        let bound: f64 = (1..=cfg.mode_count).map(|k| 1.0 / k as f64).sum();
        assert!(a.data().amax() <= bound);
        assert_eq!(a.data().shape(), (256, 200));
    }

    #[test]
    fn analytic_config_limits() {
        let mut cfg = AnalyticFamilyConfig::default();
        cfg.mode_count = 9;
        assert!(analytic_field(&cfg, 1.0).is_err());
        let cfg = AnalyticFamilyConfig {
            n_x: 16,
            ..Default::default()
        };
        assert!(analytic_field(&cfg, 1.0).is_err());
    }

    #[test]
    fn cfl_violation_names_viscosity() {
        let cfg = BurgersConfig {
            dt: 5e-4,
            ..Default::default()
        };
        let err = solve_burgers(&cfg, 0.05).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("0.05"));
    }

    #[test]
    fn default_config_is_stable_over_its_range() {
        let cfg = BurgersConfig::default();
        for nu in cfg.viscosity_range {
            cfg.validate(nu).unwrap();
        }
        assert_eq!(cfg.times().unwrap().len(), 201);
    }

    #[test]
    fn laplacian_annihilates_constants() {
        let u = vec![2.5; 16];
        let mut out = vec![1.0; 16];
        laplacian(&u, 0.1, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn convective_flux_is_conservative_and_energy_neutral() {
        let n = 64;
        let dx = 1.0 / n as f64;
        let u: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * i as f64 * dx).sin() + 0.3 * (6.0 * PI * i as f64 * dx).cos())
            .collect();
        let mut out = vec![0.0; n];
        convection_bilinear(&u, &u, dx, &mut out);
        let mass: f64 = out.iter().sum();
        let energy: f64 = out.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!(mass.abs() < 1e-11);
        assert!(energy.abs() < 1e-11);
    }
}
