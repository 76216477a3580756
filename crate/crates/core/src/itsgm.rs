//! Subspace interpolation in the tangent space of the Grassmann manifold.
//!
//! Given training subspaces `Y_k` at parameters `p_k` and a query `p`:
//!
//! 1. pick a reference `Y_r` (by default the training point closest to `p`);
//! 2. lift the `k` nearest training subspaces to the tangent space at `Y_r`,
//!    `Γ_k = log_{Y_r}(Y_k)`;
//! 3. interpolate the tangent matrices entrywise in the parameter,
//!    `Γ̃ = Σ_k w_k(p)·Γ_k`;
//! 4. map back, `Ỹ = exp_{Y_r}(Γ̃)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::grassmann::{grassmann_exp, grassmann_log, StiefelPoint, TangentVector};
use crate::interp::{k_nearest, Interpolator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceRule {
    #[default]
    ClosestTrainingPoint,
    FixedIndex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ItsgmConfig {
    pub interpolator: Interpolator,
    /// Number of closest training points whose tangent vectors are interpolated.
    pub neighbor_count: usize,
    pub reference_rule: ReferenceRule,
}

impl Default for ItsgmConfig {
    fn default() -> Self {
        ItsgmConfig {
            interpolator: Interpolator::Lagrange,
            neighbor_count: 3,
            reference_rule: ReferenceRule::ClosestTrainingPoint,
        }
    }
}

impl ItsgmConfig {
    pub fn validate(&self) -> Result<()> {
        let min = self.interpolator.min_nodes().max(2);
        ensure!(
            self.neighbor_count >= min,
            "ITSGM needs at least {min} neighbours for {:?}, got {}",
            self.interpolator,
            self.neighbor_count
        );
        Ok(())
    }
}

/// The stencil chosen for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub reference: usize,
    /// Indices into the training list, increasing.
    pub neighbors: Vec<usize>,
}

pub fn select_stencil(params: &[f64], query: f64, config: &ItsgmConfig) -> Result<Stencil> {
    config.validate()?;
    ensure!(
        params.len() >= config.neighbor_count,
        "ITSGM needs {} training points, got {}",
        config.neighbor_count,
        params.len()
    );
    let mut neighbors = k_nearest(params, query, config.neighbor_count)?;
    let reference = match config.reference_rule {
        ReferenceRule::ClosestTrainingPoint => k_nearest(params, query, 1)?[0],
        ReferenceRule::FixedIndex(i) => {
            ensure!(
                i < params.len(),
                "reference index {i} out of range for {} training points",
                params.len()
            );
            i
        }
    };
    if !neighbors.contains(&reference) {
        neighbors.push(reference);
        neighbors.sort_unstable();
    }
    Ok(Stencil {
        reference,
        neighbors,
    })
}

/// Interpolated subspace at `query` from `(parameter, subspace)` training pairs
/// sorted by parameter.
pub fn itsgm_interpolate(
    points: &[(f64, StiefelPoint)],
    query: f64,
    config: &ItsgmConfig,
) -> Result<StiefelPoint> {
    ensure!(query.is_finite(), "query parameter must be finite");
    let params: Vec<f64> = points.iter().map(|(p, _)| *p).collect();
    for w in params.windows(2) {
        ensure!(
            w[0] < w[1],
            "training parameters must be distinct and increasing ({} then {})",
            w[0],
            w[1]
        );
    }
    let stencil = select_stencil(&params, query, config)?;
    let y_ref = &points[stencil.reference].1;

    let mut tangents = Vec::with_capacity(stencil.neighbors.len());
    for &k in &stencil.neighbors {
        let (p, y) = &points[k];
        if k == stencil.reference {
            tangents.push(TangentVector::zero(y_ref.clone()));
            continue;
        }
        let tv = grassmann_log(y_ref, y).map_err(|e| match e {
            Error::CutLocus { min_cosine, .. } => Error::CutLocus {
                min_cosine,
                context: Some(format!(
                    "training parameter {p} (reference {})",
                    points[stencil.reference].0
                )),
            },
            e => e,
        })?;
        tangents.push(tv);
    }

    let xs: Vec<f64> = stencil.neighbors.iter().map(|&k| params[k]).collect();
    let weights = config.interpolator.weights(&xs, query)?;
    let terms: Vec<(f64, &TangentVector)> = weights.iter().copied().zip(&tangents).collect();
    let gamma = TangentVector::combine(y_ref, &terms)?;
    grassmann_exp(y_ref, &gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::principal_angles;
    use nalgebra::DMatrix;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};

    fn line(angle: f64) -> StiefelPoint {
        let (s, c) = angle.sin_cos();
        StiefelPoint::new(DMatrix::from_column_slice(2, 1, &[c, s])).unwrap()
    }

    #[test]
    fn planar_midpoint() {
        let pts = vec![(0.0, line(0.0)), (1.0, line(FRAC_PI_3))];
        let cfg = ItsgmConfig {
            neighbor_count: 2,
            ..Default::default()
        };
        let y = itsgm_interpolate(&pts, 0.5, &cfg).unwrap();
        let a = principal_angles(&y, &line(FRAC_PI_6)).unwrap();
        assert!(a[0] < 1e-9);
    }

    #[test]
    fn query_at_reference_returns_reference() {
        let pts = vec![(0.0, line(0.0)), (1.0, line(0.4)), (2.0, line(0.7))];
        let y = itsgm_interpolate(&pts, 1.0, &ItsgmConfig::default()).unwrap();
        assert_eq!(&y, &pts[1].1);
    }

    #[test]
    fn stencil_selection() {
        let params: Vec<f64> = (0..13).map(|i| 90.0 + 30.0 * i as f64).collect();
        let s = select_stencil(&params, 195.0, &ItsgmConfig::default()).unwrap();
        assert_eq!(s.neighbors, vec![2, 3, 4]);
        assert_eq!(s.reference, 3);

        let cfg = ItsgmConfig {
            reference_rule: ReferenceRule::FixedIndex(0),
            ..Default::default()
        };
        let s = select_stencil(&params, 195.0, &cfg).unwrap();
        assert_eq!(s.neighbors, vec![0, 2, 3, 4]);
    }

    #[test]
    fn insufficient_neighbours() {
        let pts = vec![(0.0, line(0.0)), (1.0, line(0.4))];
        assert!(itsgm_interpolate(&pts, 0.5, &ItsgmConfig::default()).is_err());
        let cfg = ItsgmConfig {
            neighbor_count: 1,
            ..Default::default()
        };
        assert!(itsgm_interpolate(&pts, 0.5, &cfg).is_err());
        let cfg = ItsgmConfig {
            interpolator: Interpolator::CubicSpline,
            neighbor_count: 2,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cut_locus_names_parameter() {
        let pts = vec![
            (0.0, line(0.0)),
            (1.0, line(std::f64::consts::FRAC_PI_2)),
            (2.0, line(0.1)),
        ];
        let err = itsgm_interpolate(&pts, 0.1, &ItsgmConfig::default()).unwrap_err();
        assert!(matches!(err, Error::CutLocus { .. }));
        assert!(err.to_string().contains("training parameter 1"));
    }
}
