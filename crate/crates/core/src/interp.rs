//! One-dimensional interpolation in the parameter.
//!
//! Every interpolator here is linear in the node values, so each one can also be
//! expressed as a weight vector over the nodes ([`Interpolator::weights`]). That
//! is how matrices (tangent vectors) are interpolated entrywise: `Σ_k w_k·Γ_k`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Scalar node set: strictly increasing abscissae and matching values.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpNodes {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl InterpNodes {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        ensure!(
            xs.len() == ys.len(),
            "{} abscissae but {} values",
            xs.len(),
            ys.len()
        );
        check_abscissae(&xs, 2)?;
        ensure!(ys.iter().all(|y| y.is_finite()), "node values must be finite");
        Ok(InterpNodes { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

fn check_abscissae(xs: &[f64], min_nodes: usize) -> Result<()> {
    ensure!(
        xs.len() >= min_nodes,
        "need at least {min_nodes} nodes, got {}",
        xs.len()
    );
    ensure!(xs.iter().all(|x| x.is_finite()), "abscissae must be finite");
    for w in xs.windows(2) {
        ensure!(
            w[0] < w[1],
            "abscissae must be distinct and increasing ({} then {})",
            w[0],
            w[1]
        );
    }
    Ok(())
}

fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    w[j] = 1.0;
    w
}

fn dot(w: &[f64], ys: &[f64]) -> f64 {
    w.iter().zip(ys).map(|(a, b)| a * b).sum()
}

/// Choice of interpolation rule, serialized as `{"kind": "lagrange"}`,
/// `{"kind": "idw", "power": 3.0}` or `{"kind": "cubic_spline"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interpolator {
    Lagrange,
    Idw { power: f64 },
    CubicSpline,
}

impl Default for Interpolator {
    fn default() -> Self {
        Interpolator::Lagrange
    }
}

impl Interpolator {
    pub fn min_nodes(&self) -> usize {
        match self {
            Interpolator::CubicSpline => 3,
            _ => 2,
        }
    }

    /// Node weights `w` such that the interpolant at `x` equals `Σ_k w_k·y_k`.
    pub fn weights(&self, xs: &[f64], x: f64) -> Result<Vec<f64>> {
        match *self {
            Interpolator::Lagrange => lagrange_weights(xs, x),
            Interpolator::Idw { power } => idw_weights(xs, x, power),
            Interpolator::CubicSpline => spline_weights(xs, x),
        }
    }

    pub fn eval(&self, nodes: &InterpNodes, x: f64) -> Result<f64> {
        Ok(dot(&self.weights(&nodes.xs, x)?, &nodes.ys))
    }
}

/// Lagrange basis polynomials evaluated at `x`.
pub fn lagrange_weights(xs: &[f64], x: f64) -> Result<Vec<f64>> {
    check_abscissae(xs, 2)?;
    ensure!(x.is_finite(), "query must be finite");
    if let Some(j) = xs.iter().position(|&xj| xj == x) {
        return Ok(unit(xs.len(), j));
    }
    Ok((0..xs.len())
        .map(|j| {
            xs.iter()
                .enumerate()
                .filter(|&(m, _)| m != j)
                .map(|(_, &xm)| (x - xm) / (xs[j] - xm))
                .product()
        })
        .collect())
}

pub fn lagrange_eval(nodes: &InterpNodes, x: f64) -> Result<f64> {
    Ok(dot(&lagrange_weights(&nodes.xs, x)?, &nodes.ys))
}

/// Normalized inverse-distance weights `d_k^{-power} / Σ d^{-power}`; a query on a
/// node gets that node's value exactly.
pub fn idw_weights(xs: &[f64], x: f64, power: f64) -> Result<Vec<f64>> {
    check_abscissae(xs, 2)?;
    ensure!(x.is_finite(), "query must be finite");
    ensure!(
        power > 0.0 && power.is_finite(),
        "inverse-distance power must be positive, got {power}"
    );
    if let Some(j) = xs.iter().position(|&xj| xj == x) {
        return Ok(unit(xs.len(), j));
    }
    let raw: Vec<f64> = xs.iter().map(|&xk| (x - xk).abs().powf(-power)).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

pub fn idw_eval(nodes: &InterpNodes, x: f64, power: f64) -> Result<f64> {
    Ok(dot(&idw_weights(&nodes.xs, x, power)?, &nodes.ys))
}

/// Natural cubic spline (zero second derivative at both ends), extended linearly
/// outside the node range with the end-segment slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the nodes.
    m: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(nodes: &InterpNodes) -> Result<Self> {
        check_abscissae(&nodes.xs, 3)?;
        let (xs, ys) = (&nodes.xs, &nodes.ys);
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();

        // Thomas algorithm on the interior second derivatives M_1..M_{n-2}.
        let interior = n - 2;
        let mut diag = vec![0.0; interior];
        let mut rhs = vec![0.0; interior];
        for i in 0..interior {
            let k = i + 1;
            diag[i] = 2.0 * (h[k - 1] + h[k]);
            rhs[i] = 6.0 * ((ys[k + 1] - ys[k]) / h[k] - (ys[k] - ys[k - 1]) / h[k - 1]);
        }
        for i in 1..interior {
            // sub-diagonal h[i] (row i), super-diagonal h[i] (row i-1)
            let factor = h[i] / diag[i - 1];
            diag[i] -= factor * h[i];
            rhs[i] -= factor * rhs[i - 1];
        }
        let mut m = vec![0.0; n];
        for i in (0..interior).rev() {
            let upper = if i + 1 < interior { h[i + 1] * m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - upper) / diag[i];
        }
        Ok(NaturalCubicSpline {
            xs: xs.clone(),
            ys: ys.clone(),
            m,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (xs, ys, m) = (&self.xs, &self.ys, &self.m);
        let n = xs.len();
        if let Some(j) = xs.iter().position(|&xj| xj == x) {
            return ys[j];
        }
        if x < xs[0] {
            let h = xs[1] - xs[0];
            let slope = (ys[1] - ys[0]) / h - h * (2.0 * m[0] + m[1]) / 6.0;
            return ys[0] + slope * (x - xs[0]);
        }
        if x > xs[n - 1] {
            let h = xs[n - 1] - xs[n - 2];
            let slope = (ys[n - 1] - ys[n - 2]) / h + h * (m[n - 2] + 2.0 * m[n - 1]) / 6.0;
            return ys[n - 1] + slope * (x - xs[n - 1]);
        }
        let i = xs.partition_point(|&xi| xi <= x).clamp(1, n - 1) - 1;
        let h = xs[i + 1] - xs[i];
        let a = xs[i + 1] - x;
        let b = x - xs[i];
        m[i] * a * a * a / (6.0 * h)
            + m[i + 1] * b * b * b / (6.0 * h)
            + (ys[i] / h - m[i] * h / 6.0) * a
            + (ys[i + 1] / h - m[i + 1] * h / 6.0) * b
    }
}

pub fn cubic_spline_eval(nodes: &InterpNodes, x: f64) -> Result<f64> {
    ensure!(x.is_finite(), "query must be finite");
    Ok(NaturalCubicSpline::new(nodes)?.eval(x))
}

/// Spline weights: the spline of the `k`-th unit vector evaluated at `x`.
pub fn spline_weights(xs: &[f64], x: f64) -> Result<Vec<f64>> {
    check_abscissae(xs, 3)?;
    ensure!(x.is_finite(), "query must be finite");
    if let Some(j) = xs.iter().position(|&xj| xj == x) {
        return Ok(unit(xs.len(), j));
    }
    (0..xs.len())
        .map(|k| {
            let nodes = InterpNodes {
                xs: xs.to_vec(),
                ys: unit(xs.len(), k),
            };
            Ok(NaturalCubicSpline::new(&nodes)?.eval(x))
        })
        .collect()
}

/// Piecewise-linear interpolation, extended linearly past the ends.
pub fn linear_eval(nodes: &InterpNodes, x: f64) -> Result<f64> {
    ensure!(x.is_finite(), "query must be finite");
    let (xs, ys) = (&nodes.xs, &nodes.ys);
    if let Some(j) = xs.iter().position(|&xj| xj == x) {
        return Ok(ys[j]);
    }
    let n = xs.len();
    let i = xs.partition_point(|&xi| xi <= x).clamp(1, n - 1) - 1;
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    Ok(ys[i] + t * (ys[i + 1] - ys[i]))
}

/// Indices of the `k` abscissae closest to `x`, ties going to the smaller
/// abscissa, returned in increasing abscissa order.
pub fn k_nearest(xs: &[f64], x: f64, k: usize) -> Result<Vec<usize>> {
    check_abscissae(xs, 1)?;
    ensure!(x.is_finite(), "query must be finite");
    ensure!(
        (1..=xs.len()).contains(&k),
        "neighbour count {k} outside 1..={}",
        xs.len()
    );
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| {
        (xs[a] - x)
            .abs()
            .total_cmp(&(xs[b] - x).abs())
            .then(xs[a].total_cmp(&xs[b]))
    });
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}
