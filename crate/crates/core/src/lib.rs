//! Non-intrusive parametric model-order reduction on the Grassmann manifold.
//!
//! Training solutions, one snapshot matrix per parameter value, are reduced to
//! POD triplets `(Φ, σ, Ψ)`. A solution at an untrained parameter is predicted
//! by interpolating the spatial and temporal bases on the Grassmann manifold
//! ([`itsgm`]), interpolating singular values with a cubic spline, and
//! calibrating both interpolated bases with weighted orthogonal Procrustes
//! rotations ([`bicitsgm`]). An intrusive POD-Galerkin model ([`galerkin`]) of a
//! built-in Burgers problem ([`oracle`]) serves as the reference baseline.
//!
//! ```
//! use grom::oracle::{analytic_field, AnalyticFamilyConfig};
//! use grom::pod::{train_database, Truncation};
//! use grom::bicitsgm::{mean_relative_error, predict, BiCitsgmConfig};
//!
//! let cfg = AnalyticFamilyConfig { n_x: 64, n_s: 128, ..Default::default() };
//! let sets: Vec<_> = (0..33)
//!     .map(|k| analytic_field(&cfg, 0.5 + k as f64 / 16.0).unwrap())
//!     .collect();
//! let db = train_database(&sets, Truncation::Ric(0.9999)).unwrap();
//! let pred = predict(&db, 1.22, &BiCitsgmConfig::default()).unwrap();
//! let truth = analytic_field(&cfg, 1.22).unwrap();
//! let eps = mean_relative_error(&truth, &pred.reconstruction, None).unwrap();
//! assert!(eps < 2.0);
//! ```
//!
//! The guide in `book/` walks through each stage; its code listings are compiled
//! and run as doc-tests of this crate.

pub mod bicitsgm;
pub mod datastore;
mod error;
pub mod galerkin;
pub mod grassmann;
pub mod interp;
pub mod itsgm;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod pod;

pub use error::{Error, ErrorClass, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/pod.md")]
    mod pod {}
    #[doc = include_str!("../../../book/src/interpolation.md")]
    mod interpolation {}
    #[doc = include_str!("../../../book/src/grassmann.md")]
    mod grassmann {}
    #[doc = include_str!("../../../book/src/itsgm.md")]
    mod itsgm {}
    #[doc = include_str!("../../../book/src/bicitsgm.md")]
    mod bicitsgm {}
    #[doc = include_str!("../../../book/src/burgers-galerkin.md")]
    mod burgers_galerkin {}
    #[doc = include_str!("../../../book/src/formats-cli.md")]
    mod formats_cli {}
}
