//! Busemann–Hausdorff volume density and S-curvature.
//!
//! The density of the Busemann–Hausdorff volume form in a coordinate chart
//! is
//!
//! ```text
//! σ_F(x) = Vol(Bⁿ) / Vol{ y : F(x, y) < 1 }
//!        = Vol(Bⁿ) / ( (1/n) ∫_{S^{n-1}} F(x, e)^{-n} dΩ(e) )
//! ```
//!
//! and the S-curvature is `S(x, y) = ∂G^m/∂y^m − y^m ∂(ln σ_F)/∂x^m`.
//! The sphere integral is evaluated with product Gauss–Legendre rules
//! (trapezoid on the circle, which is spectrally accurate for periodic
//! smooth integrands). Evaluating the integrand on jets in `x` gives the
//! exact gradient of the quadrature approximant, so the log-derivative in
//! `S` inherits quadrature accuracy only — no finite differencing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{JetBundle, MetricField, TangentPoint};
use crate::jet::JetContext;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev initial guess, then Newton on P_n.
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        for _ in 0..64 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if libm::fabs(dx) < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Legendre polynomial `P_n(x)` and derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// A quadrature rule on the unit sphere `S^{n-1}`: unit directions and
/// weights summing to the sphere's surface area. `level` scales the node
/// count; the default level 1 is already spectrally accurate for the
/// smooth positive integrands used here.
pub fn sphere_quadrature(n: usize, level: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let l = level.max(1);
    let two_pi = 2.0 * core::f64::consts::PI;
    match n {
        2 => {
            let m = 64 * l;
            Ok((0..m)
                .map(|k| {
                    let t = two_pi * k as f64 / m as f64;
                    (vec![libm::cos(t), libm::sin(t)], two_pi / m as f64)
                })
                .collect())
        }
        3 => {
            let (nodes, wts) = gauss_legendre(24 * l);
            let m = 48 * l;
            let mut out = Vec::with_capacity(nodes.len() * m);
            for (z, wz) in nodes.iter().zip(&wts) {
                let r = libm::sqrt((1.0 - z * z).max(0.0));
                for k in 0..m {
                    let t = two_pi * k as f64 / m as f64;
                    out.push((
                        vec![r * libm::cos(t), r * libm::sin(t), *z],
                        wz * two_pi / m as f64,
                    ));
                }
            }
            Ok(out)
        }
        4 => {
            // e = (cos χ, sin χ cos θ, sin χ sin θ cos φ, sin χ sin θ sin φ),
            // dΩ = sin²χ dχ · sin θ dθ · dφ.
            let (cn, cw) = gauss_legendre(24 * l);
            let (tn, tw) = gauss_legendre(24 * l);
            let m = 48 * l;
            let half_pi = core::f64::consts::PI / 2.0;
            let mut out = Vec::with_capacity(cn.len() * tn.len() * m);
            for (cu, cwu) in cn.iter().zip(&cw) {
                // map u ∈ [−1,1] to χ ∈ [0,π]
                let chi = half_pi * (cu + 1.0);
                let (schi, cchi) = (libm::sin(chi), libm::cos(chi));
                let wchi = cwu * half_pi * schi * schi;
                for (z, wz) in tn.iter().zip(&tw) {
                    let r = libm::sqrt((1.0 - z * z).max(0.0));
                    for k in 0..m {
                        let t = two_pi * k as f64 / m as f64;
                        out.push((
                            vec![
                                cchi,
                                schi * z,
                                schi * r * libm::cos(t),
                                schi * r * libm::sin(t),
                            ],
                            wchi * wz * two_pi / m as f64,
                        ));
                    }
                }
            }
            Ok(out)
        }
        _ => Err(Error::InvalidContext(
            "sphere quadrature implemented for dimensions 2, 3 and 4",
        )),
    }
}

/// Euclidean unit-ball volume `Vol(Bⁿ)`.
pub fn ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => core::f64::consts::PI,
        3 => 4.0 * core::f64::consts::PI / 3.0,
        4 => core::f64::consts::PI * core::f64::consts::PI / 2.0,
        _ => {
            // Vol(Bⁿ) = 2π/n · Vol(B^{n-2})
            2.0 * core::f64::consts::PI / n as f64 * ball_volume(n - 2)
        }
    }
}

/// Busemann–Hausdorff density `σ_F(x)`.
pub fn bh_density(m: &dyn MetricField, x: &[f64], level: usize) -> Result<f64> {
    let n = m.dim();
    let quad = sphere_quadrature(n, level)?;
    let mut integral = 0.0;
    for (e, w) in &quad {
        let f = m.eval(x, e)?;
        if f <= 0.0 {
            return Err(Error::DomainViolation { point: x.to_vec() });
        }
        integral += w * libm::pow(f, -(n as f64));
    }
    Ok(ball_volume(n) / (integral / n as f64))
}

/// `σ_F(x)` together with its spatial gradient, both exact derivatives of
/// the quadrature approximant (integrand evaluated on jets in `x`).
pub fn bh_density_with_gradient(
    m: &dyn MetricField,
    x: &[f64],
    level: usize,
) -> Result<(f64, Vec<f64>)> {
    let n = m.dim();
    let ctx = JetContext::new(2 * n, 1)?;
    let xj: Vec<_> = (0..n)
        .map(|i| ctx.seed_variable(i, x[i]))
        .collect::<Result<_>>()?;
    let quad = sphere_quadrature(n, level)?;
    let mut integral = ctx.constant(0.0);
    for (e, w) in &quad {
        let ej: Vec<_> = e.iter().map(|&c| ctx.constant(c)).collect();
        let f = m.eval_jet(&xj, &ej)?;
        if f.value() <= 0.0 {
            return Err(Error::DomainViolation { point: x.to_vec() });
        }
        integral = &integral + &f.powi(-(n as i32))?.scale(*w);
    }
    let sigma = integral.recip()?.scale(ball_volume(n) * n as f64);
    let grad = (0..n)
        .map(|k| sigma.derivative(k).map(|d| d.value()))
        .collect::<Result<Vec<f64>>>()?;
    Ok((sigma.value(), grad))
}

/// S-curvature `S(x, y) = ∂G^m/∂y^m − y^m ∂(ln σ_F)/∂x^m`.
pub fn s_curvature(m: &dyn MetricField, p: &TangentPoint, level: usize) -> Result<f64> {
    let b = JetBundle::new(m, p, 3)?;
    let mut div_g = 0.0;
    for i in 0..b.n {
        div_g += b.nmat[i][i].value();
    }
    let (sigma, grad) = bh_density_with_gradient(m, &p.x, level)?;
    let mut log_term = 0.0;
    for (yk, gk) in p.y.iter().zip(&grad) {
        log_term += yk * gk / sigma;
    }
    Ok(div_g - log_term)
}
