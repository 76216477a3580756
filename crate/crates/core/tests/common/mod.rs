#![allow(dead_code)]

use grom::grassmann::{grassmann_exp, StiefelPoint, TangentVector};
use grom::linalg::thin_svd;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian with sign-fixed R).
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian(rng, n, n).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn random_stiefel(rng: &mut impl Rng, n: usize, q: usize) -> StiefelPoint {
    StiefelPoint::from_span(gaussian(rng, n, q)).unwrap()
}

/// A subspace whose largest principal angle to `y0` is exactly `max_angle`
/// (up to rounding), reached along a random horizontal direction.
pub fn subspace_at_angle(rng: &mut impl Rng, y0: &StiefelPoint, max_angle: f64) -> StiefelPoint {
    let (n, q) = (y0.ambient_dim(), y0.dim());
    let z = gaussian(rng, n, q);
    let y = y0.matrix();
    let h = &z - y * y.tr_mul(&z);
    let top = thin_svd(&h).unwrap().s[0];
    let gamma = TangentVector::new(y0.clone(), h * (max_angle / top)).unwrap();
    grassmann_exp(y0, &gamma).unwrap()
}

pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
