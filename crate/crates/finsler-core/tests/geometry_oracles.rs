//! Closed-form oracles for the curvature pipeline: constant-curvature
//! metrics, the predicted curvature of the classified family, projective
//! flatness of the Funk metric, and the homogeneity/Euler structure every
//! Finsler metric must satisfy.

use finsler_core::families::{Family, MetricFamilySpec};
use finsler_core::geometry::{
    flag_curvature, scalar_flag_fit, spray, JetBundle, TangentPoint,
};
use finsler_core::sample::{Rng, SampleConfig};

#[test]
fn space_form_flag_curvature_is_constant() {
    for mu in [0.3, -0.2] {
        let mut spec = MetricFamilySpec::new(Family::SpaceForm, 3);
        spec.params.mu = mu;
        let m = spec.construct().unwrap();
        let sampler = SampleConfig::centered(3, 0.3, 10, 5);
        let mut rng = Rng::new(99);
        for p in sampler.sample(m.as_ref()).unwrap() {
            // random transverse flag direction
            let u = rng.unit_vector(3);
            let k = flag_curvature(m.as_ref(), &p, &u).unwrap();
            assert!((k - mu).abs() < 1e-7, "mu {mu}: K {k}");
        }
    }
}

#[test]
fn delta_only_family_has_constant_negative_curvature() {
    let mut spec = MetricFamilySpec::new(Family::CmsFamily, 3);
    spec.params.delta = 0.1;
    let m = spec.construct().unwrap();
    let sampler = SampleConfig::centered(3, 0.3, 10, 6);
    for p in sampler.sample(m.as_ref()).unwrap() {
        let (k, resid) = scalar_flag_fit(m.as_ref(), &p).unwrap();
        assert!(resid < 1e-10, "{resid:e}");
        assert!((k + 0.01).abs() < 1e-6, "K {k}");
    }
}

#[test]
fn family_curvature_matches_closed_form() {
    let mut rng = Rng::new(2024);
    for draw in 0..5 {
        let mut spec = MetricFamilySpec::new(Family::CmsFamily, 3);
        spec.params.delta = 0.0;
        spec.params.mu = if draw % 2 == 0 { 0.0 } else { 0.3 };
        spec.params.a = Some(vec![0.1, 0.0, 0.0]);
        let s = 0.02;
        let q01 = rng.uniform_in(-s, s);
        let q02 = rng.uniform_in(-s, s);
        let q12 = rng.uniform_in(-s, s);
        spec.params.q = Some(vec![
            vec![0.0, q01, q02],
            vec![-q01, 0.0, q12],
            vec![-q02, -q12, 0.0],
        ]);
        spec.params.b = Some((0..3).map(|_| rng.uniform_in(-s, s)).collect());
        let m = spec.construct().unwrap();
        let inv = spec.predicted_invariants().unwrap();
        let sampler = SampleConfig::centered(3, 0.25, 10, 40 + draw);
        for p in sampler.sample(m.as_ref()).unwrap() {
            let (k, resid) = scalar_flag_fit(m.as_ref(), &p).unwrap();
            assert!(resid < 1e-8, "{resid:e}");
            let predicted = inv.flag_curvature(m.as_ref(), &p.x, &p.y).unwrap();
            let scale = k.abs().max(predicted.abs()).max(1e-3);
            assert!(
                (k - predicted).abs() / scale < 1e-5,
                "draw {draw}: K {k} vs predicted {predicted}"
            );
        }
    }
}

#[test]
fn funk_projective_curvature_is_minus_quarter() {
    let m = MetricFamilySpec::new(Family::Funk, 3).construct().unwrap();
    let sampler = SampleConfig::centered(3, 0.3, 20, 8);
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for p in sampler.sample(m.as_ref()).unwrap() {
        let (_, kproj) = finsler_core::geometry::projective(m.as_ref(), &p).unwrap();
        min = min.min(kproj);
        max = max.max(kproj);
        assert!((kproj + 0.25).abs() < 1e-8, "{kproj}");
    }
    assert!(max - min < 1e-6);
}

#[test]
fn spray_is_positively_2_homogeneous() {
    let spec = {
        let mut s = MetricFamilySpec::new(Family::CmsFamily, 3);
        s.params.delta = 0.1;
        s.params.a = Some(vec![0.05, -0.03, 0.02]);
        s
    };
    let m = spec.construct().unwrap();
    let x = vec![0.1, -0.2, 0.15];
    let y = vec![0.6, -0.3, 0.75];
    let y2: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
    let (g1, n1, _) = spray(
        m.as_ref(),
        &TangentPoint::new(x.clone(), y.clone()).unwrap(),
    )
    .unwrap();
    let (g2, n2, _) = spray(m.as_ref(), &TangentPoint::new(x.clone(), y2).unwrap()).unwrap();
    for i in 0..3 {
        assert!((g2[i] - 4.0 * g1[i]).abs() < 1e-12 * (1.0 + g1[i].abs()));
        for k in 0..3 {
            // N is 1-homogeneous
            assert!((n2[i][k] - 2.0 * n1[i][k]).abs() < 1e-12 * (1.0 + n1[i][k].abs()));
        }
    }
}

#[test]
fn euler_relations_hold() {
    let spec = {
        let mut s = MetricFamilySpec::new(Family::CmsFamily, 3);
        s.params.delta = 0.1;
        s.params.mu = -0.1;
        s.params.a = Some(vec![0.05, -0.03, 0.02]);
        s
    };
    let m = spec.construct().unwrap();
    let p = TangentPoint::new(vec![0.1, -0.2, 0.15], vec![0.6, -0.3, 0.75]).unwrap();
    let b = JetBundle::new(m.as_ref(), &p, 4).unwrap();
    let f = b.f.value();
    let g = b.g_values();
    // g_ij y^i y^j = F²
    let mut quad = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            quad += g[i][j] * p.y[i] * p.y[j];
        }
    }
    assert!((quad - f * f).abs() < 1e-12 * f * f);
    // F_{·k} y^k = F
    let fyy: f64 = b.fy.iter().zip(&p.y).map(|(j, y)| j.value() * y).sum();
    assert!((fyy - f).abs() < 1e-12 * f);
    // g_ij y^j = F F_{·i}
    for i in 0..3 {
        let gy: f64 = (0..3).map(|j| g[i][j] * p.y[j]).sum();
        assert!((gy - f * b.fy[i].value()).abs() < 1e-12 * f);
    }
}

#[test]
fn generic_riemannian_is_not_scalar_flag_in_3d() {
    let mut spec = MetricFamilySpec::new(Family::Riemannian, 3);
    spec.params.amplitude = 0.8;
    let m = spec.construct().unwrap();
    let sampler = SampleConfig::centered(3, 0.4, 8, 9);
    let mut worst: f64 = 0.0;
    for p in sampler.sample(m.as_ref()).unwrap() {
        let (_, resid) = scalar_flag_fit(m.as_ref(), &p).unwrap();
        worst = worst.max(resid);
    }
    assert!(worst > 1e-3, "{worst:e}");
}
