//! Behavioural probes on the analytic family.

use grom::bicitsgm::{mean_relative_error, predict, BiCitsgmConfig};
use grom::grassmann::{geodesic_distance, StiefelPoint};
use grom::itsgm::{itsgm_interpolate, ItsgmConfig};
use grom::oracle::{analytic_field, AnalyticFamilyConfig};
use grom::pod::{train_database, Truncation};

fn cfg() -> AnalyticFamilyConfig {
    AnalyticFamilyConfig {
        n_x: 128,
        n_s: 160,
        ..AnalyticFamilyConfig::default()
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn interpolated_subspace_approaches_the_node() {
    let cfg = cfg();
    let params = uniform(0.5, 2.5, 5);
    let sets: Vec<_> = params.iter().map(|&mu| analytic_field(&cfg, mu).unwrap()).collect();
    let db = train_database(&sets, Truncation::Ric(0.9999)).unwrap();
    // the spatial span is the same at every parameter, the temporal one is not
    let points: Vec<(f64, StiefelPoint)> = db
        .triplets
        .iter()
        .map(|t| (t.parameter, StiefelPoint::new(t.psi.clone()).unwrap()))
        .collect();
    let spacing = params[1] - params[0];
    for (node, y) in &points[1..4] {
        let dist: Vec<f64> = (0..7)
            .map(|j| {
                let q = node + spacing / 100.0 * 10f64.powi(-j);
                let out = itsgm_interpolate(&points, q, &ItsgmConfig::default()).unwrap();
                geodesic_distance(&out, y).unwrap()
            })
            .collect();
        assert!(dist.windows(2).all(|w| w[1] < w[0]), "node {node}: {dist:?}");
        assert!(dist[6] < 1e-6, "node {node}: {dist:?}");
    }
}

#[test]
fn halving_grid_spacing_does_not_raise_median_error() {
    let cfg = cfg();
    let queries: Vec<f64> = (0..10).map(|k| 0.6 + 0.19 * k as f64).collect();
    let truth: Vec<_> = queries.iter().map(|&mu| analytic_field(&cfg, mu).unwrap()).collect();
    let median_error = |n: usize| {
        let sets: Vec<_> = uniform(0.5, 2.5, n)
            .iter()
            .map(|&mu| analytic_field(&cfg, mu).unwrap())
            .collect();
        let db = train_database(&sets, Truncation::Ric(0.9999)).unwrap();
        let errs = truth
            .iter()
            .map(|t| {
                let p = predict(&db, t.parameter(), &BiCitsgmConfig::default()).unwrap();
                mean_relative_error(t, &p.reconstruction, None).unwrap()
            })
            .collect();
        median(errs)
    };
    let coarse = median_error(5);
    let fine = median_error(9);
    let finer = median_error(17);
    assert!(fine <= coarse && finer <= fine, "medians {coarse}% → {fine}% → {finer}%");
}
