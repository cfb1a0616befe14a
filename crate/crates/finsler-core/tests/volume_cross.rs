//! Monte-Carlo cross-check of the quadrature-based volume density and an
//! S-curvature oracle on the classified family, which predicts
//! `S = (n+1) c(x) F` for the Busemann–Hausdorff volume form.

use finsler_core::families::{Family, MetricFamilySpec};
use finsler_core::geometry::TangentPoint;
use finsler_core::sample::Rng;
use finsler_core::volume::{ball_volume, bh_density, s_curvature};

/// σ via Monte-Carlo estimation of Vol{y : F(x,y) < 1} in a bounding box.
fn mc_density(m: &dyn finsler_core::geometry::MetricField, x: &[f64], samples: usize) -> f64 {
    let n = m.dim();
    // bound: F ≥ c|y| for some c; find a safe box from axis evaluations.
    let mut rmax: f64 = 0.0;
    let mut rng = Rng::new(77);
    for _ in 0..200 {
        let e = rng.unit_vector(n);
        let f = m.eval(x, &e).unwrap();
        rmax = rmax.max(1.0 / f);
    }
    let half = rmax * 1.2;
    let mut hits = 0usize;
    for _ in 0..samples {
        let y: Vec<f64> = (0..n).map(|_| rng.uniform_in(-half, half)).collect();
        if m.eval(x, &y).unwrap() < 1.0 {
            hits += 1;
        }
    }
    let box_vol = libm::pow(2.0 * half, n as f64);
    ball_volume(n) / (box_vol * hits as f64 / samples as f64)
}

#[test]
fn quadrature_density_matches_monte_carlo() {
    let mut spec = MetricFamilySpec::new(Family::CmsFamily, 3);
    spec.params.delta = 0.1;
    spec.params.a = Some(vec![0.05, -0.03, 0.02]);
    spec.params.b = Some(vec![0.1, -0.05, 0.0]);
    let m = spec.construct().unwrap();
    let x = [0.1, -0.15, 0.2];
    let quad = bh_density(m.as_ref(), &x, 1).unwrap();
    let mc = mc_density(m.as_ref(), &x, 2_000_000);
    assert!(
        (quad - mc).abs() / quad < 5e-3,
        "quadrature {quad} vs monte-carlo {mc}"
    );
}

#[test]
fn family_s_curvature_is_isotropic() {
    // S = (n+1) c(x) F for the classified family.
    let mut spec = MetricFamilySpec::new(Family::CmsFamily, 3);
    spec.params.delta = 0.1;
    spec.params.mu = -0.2;
    spec.params.a = Some(vec![0.05, -0.03, 0.02]);
    spec.params.b = Some(vec![0.02, 0.04, -0.01]);
    let m = spec.construct().unwrap();
    let inv = spec.predicted_invariants().unwrap();
    let mut rng = Rng::new(31);
    for _ in 0..6 {
        let x: Vec<f64> = (0..3).map(|_| rng.uniform_in(-0.25, 0.25)).collect();
        let y = rng.unit_vector(3);
        let p = TangentPoint::new(x.clone(), y.clone()).unwrap();
        let s = s_curvature(m.as_ref(), &p, 1).unwrap();
        let f = m.eval(&x, &y).unwrap();
        let predicted = inv.s_coefficient(&x).unwrap() * f;
        assert!(
            (s - predicted).abs() < 1e-6 * (1.0 + predicted.abs()),
            "S {s} vs predicted {predicted}"
        );
    }
}
