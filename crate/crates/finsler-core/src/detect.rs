//! Detection procedures: weakly-isotropic curvature fits and Randers-form
//! extraction.
//!
//! A metric of scalar flag curvature is *weakly isotropic* when
//! `K = θ_m y^m / F + σ` for a 1-form θ and a scalar σ depending on the
//! position only. The fit recovers `(θ, σ)` at a fixed `x` by least squares
//! over sampled directions; the Randers split recovers `α` and `β` from the
//! even and odd parts of `F` in `y`, which is the unique decomposition if
//! `F = α + β` at all.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{JetBundle, MetricField, TangentPoint};
use crate::linalg;
use crate::sample::spiral_directions;

/// Result of the weakly-isotropic fit `K·F = θ_i y^i + σ F` at fixed `x`.
#[derive(Debug, Clone)]
pub struct WeaklyIsotropicFit {
    /// Fitted 1-form coefficients θ_i(x).
    pub theta: Vec<f64>,
    /// Fitted scalar σ(x).
    pub sigma: f64,
    /// Normalized max deviation of `K·F − θ_i y^i − σ F` over the samples.
    pub residual: f64,
}

/// Fits `(θ, σ)` at `x` by least squares over `num_dirs` quasi-uniform
/// directions (default when 0: `6(n+1)`). Requires the metric to have
/// scalar flag curvature at `x` for the fitted model to be meaningful.
pub fn weakly_isotropic_fit(
    m: &dyn MetricField,
    x: &[f64],
    num_dirs: usize,
) -> Result<WeaklyIsotropicFit> {
    let n = m.dim();
    let count = if num_dirs == 0 { 6 * (n + 1) } else { num_dirs };
    if count < n + 1 {
        return Err(Error::RankDeficient(count));
    }
    let dirs = spiral_directions(n, count);
    let mut rows = Vec::with_capacity(count);
    let mut rhs = Vec::with_capacity(count);
    let mut scale: f64 = 1e-300;
    for e in &dirs {
        let p = TangentPoint::new(x.to_vec(), e.clone())?;
        let b = JetBundle::new(m, &p, 4)?;
        let k = b.k_jet()?.value();
        let f = b.f.value();
        let mut row = e.clone();
        row.push(f);
        rows.push(row);
        rhs.push(k * f);
        scale = scale.max(libm::fabs(k * f));
    }
    let sol = linalg::lstsq(&rows, &rhs)?;
    let mut worst: f64 = 0.0;
    for (row, &b) in rows.iter().zip(&rhs) {
        worst = worst.max(libm::fabs(linalg::dot(row, &sol) - b));
    }
    Ok(WeaklyIsotropicFit {
        theta: sol[..n].to_vec(),
        sigma: sol[n],
        residual: worst / scale,
    })
}

/// Result of splitting `F` into even and odd parts at fixed `x`.
#[derive(Debug, Clone)]
pub struct RandersSplit {
    /// Fitted `a_ij` with `α = √(a_ij y^i y^j)`; symmetric positive
    /// definite when the split succeeds.
    pub alpha_matrix: Vec<Vec<f64>>,
    /// Fitted 1-form coefficients `b_i` with `β = b_i y^i`.
    pub beta: Vec<f64>,
    /// Max normalized deviation, over fresh directions, of the even part
    /// squared from the fitted quadratic form and of the odd part from the
    /// fitted linear form. Small iff `F` is Randers at `x`.
    pub quadratic_residual: f64,
}

/// Extracts the candidate Randers data at `x`. A large
/// `quadratic_residual` is a valid negative finding (the metric is not of
/// Randers type), not an error; errors are reserved for a non-positive
/// fitted `a_ij`.
pub fn randers_split(m: &dyn MetricField, x: &[f64]) -> Result<RandersSplit> {
    let n = m.dim();
    let even = |e: &[f64]| -> Result<f64> {
        let neg: Vec<f64> = e.iter().map(|c| -c).collect();
        Ok(0.5 * (m.eval(x, e)? + m.eval(x, &neg)?))
    };
    let odd = |e: &[f64]| -> Result<f64> {
        let neg: Vec<f64> = e.iter().map(|c| -c).collect();
        Ok(0.5 * (m.eval(x, e)? - m.eval(x, &neg)?))
    };

    let fit_dirs = spiral_directions(n, 6 * (n + 1));
    // α² as a quadratic form: unknowns a_ij for i ≤ j.
    let quad_unknowns = n * (n + 1) / 2;
    let mut qrows = Vec::with_capacity(fit_dirs.len());
    let mut qrhs = Vec::with_capacity(fit_dirs.len());
    let mut lrows = Vec::with_capacity(fit_dirs.len());
    let mut lrhs = Vec::with_capacity(fit_dirs.len());
    for e in &fit_dirs {
        let mut row = Vec::with_capacity(quad_unknowns);
        for i in 0..n {
            for j in i..n {
                row.push(if i == j { e[i] * e[j] } else { 2.0 * e[i] * e[j] });
            }
        }
        let a = even(e)?;
        qrows.push(row);
        qrhs.push(a * a);
        lrows.push(e.clone());
        lrhs.push(odd(e)?);
    }
    let qsol = linalg::lstsq(&qrows, &qrhs)?;
    let beta = linalg::lstsq(&lrows, &lrhs)?;
    let mut alpha_matrix = vec![vec![0.0; n]; n];
    let mut slot = 0;
    for i in 0..n {
        for j in i..n {
            alpha_matrix[i][j] = qsol[slot];
            alpha_matrix[j][i] = qsol[slot];
            slot += 1;
        }
    }
    let eigenvalues = linalg::sym_eigenvalues(&alpha_matrix);
    if eigenvalues[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite { eigenvalues });
    }

    // Cross-validate on a disjoint direction set.
    let fresh = spiral_directions(n, 7 * (n + 1) + 3);
    let mut worst: f64 = 0.0;
    let mut qscale: f64 = 1e-300;
    let mut lscale: f64 = 1e-300;
    let mut qdev: f64 = 0.0;
    let mut ldev: f64 = 0.0;
    for e in &fresh {
        let a = even(e)?;
        let b = odd(e)?;
        let mut model_q = 0.0;
        for i in 0..n {
            for j in 0..n {
                model_q += alpha_matrix[i][j] * e[i] * e[j];
            }
        }
        qdev = qdev.max(libm::fabs(a * a - model_q));
        qscale = qscale.max(a * a);
        ldev = ldev.max(libm::fabs(b - linalg::dot(&beta, e)));
        lscale = lscale.max(libm::fabs(b)).max(1e-6);
    }
    worst = worst.max(qdev / qscale).max(ldev / lscale);
    Ok(RandersSplit {
        alpha_matrix,
        beta,
        quadratic_residual: worst,
    })
}

/// The positive branch of `a F² + η F + ξ = 0`:
/// `F = (−η + √(η² − 4aξ)) / (2a)`.
pub fn quadratic_root(a: f64, eta: f64, xi: f64) -> Result<f64> {
    if a == 0.0 {
        return Err(Error::DegenerateQuadratic);
    }
    let disc = eta * eta - 4.0 * a * xi;
    if disc < 0.0 {
        return Err(Error::NegativeDiscriminant(disc));
    }
    Ok((-eta + libm::sqrt(disc)) / (2.0 * a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Family, MetricFamilySpec};
    use alloc::vec;

    #[test]
    fn quadratic_root_examples() {
        assert!((quadratic_root(1.0, 0.0, -4.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((quadratic_root(2.0, -3.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            quadratic_root(0.0, 1.0, 1.0),
            Err(Error::DegenerateQuadratic)
        ));
        assert!(matches!(
            quadratic_root(1.0, 0.0, 1.0),
            Err(Error::NegativeDiscriminant(_))
        ));
    }

    #[test]
    fn quadratic_root_satisfies_equation() {
        let (a, eta, xi) = (1.3, -0.7, -2.1);
        let f = quadratic_root(a, eta, xi).unwrap();
        assert!((a * f * f + eta * f + xi).abs() < 1e-12);
    }

    #[test]
    fn euclidean_fit_is_flat() {
        let m = MetricFamilySpec::new(Family::Euclidean, 3)
            .construct()
            .unwrap();
        let fit = weakly_isotropic_fit(m.as_ref(), &[0.1, 0.0, -0.2], 0).unwrap();
        assert!(linalg::norm(&fit.theta) < 1e-10);
        assert!(fit.sigma.abs() < 1e-10);
    }

    #[test]
    fn randers_split_recovers_constant_oneform() {
        let mut spec = MetricFamilySpec::new(Family::Randers, 3);
        spec.params.b = Some(vec![0.5, 0.0, 0.0]);
        let m = spec.construct().unwrap();
        let split = randers_split(m.as_ref(), &[0.0; 3]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((split.alpha_matrix[i][j] - expect).abs() < 1e-10);
            }
        }
        assert!((split.beta[0] - 0.5).abs() < 1e-10);
        assert!(split.beta[1].abs() < 1e-10);
        assert!(split.quadratic_residual < 1e-10);
    }

    #[test]
    fn quartic_is_rejected_as_randers() {
        let m = MetricFamilySpec::new(Family::Quartic, 3)
            .construct()
            .unwrap();
        let split = randers_split(m.as_ref(), &[0.0; 3]).unwrap();
        assert!(split.quadratic_residual > 1e-2, "{}", split.quadratic_residual);
    }
}
