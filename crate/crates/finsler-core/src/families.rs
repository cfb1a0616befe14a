//! Built-in metric families.
//!
//! Each family implements [`MetricField`] through a single formula that is
//! generic over the scalar type, so the same code path produces plain
//! values and jets. The central fixture is the classified Randers family
//!
//! ```text
//! F = ( √((1 − ‖W‖²_h) h² + (W_i y^i)²) − W_i y^i ) / (1 − ‖W‖²_h)
//! ```
//!
//! on a space form of curvature μ, with
//!
//! ```text
//! h    = √(|y|² + μ(|x|²|y|² − ⟨x,y⟩²)) / (1 + μ|x|²)
//! W    = −2[(δ√(1+μ|x|²) + ⟨a,x⟩) x − a |x|²/(√(1+μ|x|²)+1)] + xQ + b + μ⟨b,x⟩x
//! c    = (δ + ⟨a,x⟩)/√(1+μ|x|²)
//! σ    = μ − c² − 2 c_{x^m} W^m
//! ```
//!
//! whose flag curvature is `K = 3 c_{x^m} y^m / F + σ`. Here `⟨·,·⟩` and
//! `|·|` are Euclidean, `Q` is antisymmetric and `(xQ)^i = x^j q_j^{\ i}`,
//! the `h`-metric tensor lowers `W` (`W_i = h_ij W^j`) and gives
//! `‖W‖²_h = W_i W^i`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::MetricField;
use crate::jet::{JetValue, Scalar};
use crate::linalg;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// The built-in family tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Family {
    Euclidean,
    Riemannian,
    SpaceForm,
    Randers,
    CmsFamily,
    Funk,
    Quartic,
}

/// Family-specific parameters. Unused fields are ignored by families that
/// do not consume them.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FamilyParams {
    pub delta: f64,
    pub mu: f64,
    /// Antisymmetric matrix, row-major: `q[j][i] = q_j^{\ i}`.
    #[cfg_attr(feature = "serde", serde(alias = "Q"))]
    pub q: Option<Vec<Vec<f64>>>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    /// Conformal bump strength for `riemannian`, perturbation size for
    /// `quartic`.
    pub amplitude: f64,
    /// Strength of the position-dependent rotational part of the Randers
    /// 1-form; nonzero values make the metric non-projectively-flat.
    pub curl: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            delta: 0.0,
            mu: 0.0,
            q: None,
            a: None,
            b: None,
            amplitude: 0.0,
            curl: 0.0,
        }
    }
}

/// Serializable description of a metric fixture.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MetricFamilySpec {
    pub family: Family,
    pub dimension: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub params: FamilyParams,
}

impl MetricFamilySpec {
    pub fn new(family: Family, dimension: usize) -> Self {
        MetricFamilySpec {
            family,
            dimension,
            params: FamilyParams::default(),
        }
    }

    fn vec_param(&self, v: &Option<Vec<f64>>, name: &str) -> Result<Vec<f64>> {
        match v {
            None => Ok(vec![0.0; self.dimension]),
            Some(v) if v.len() == self.dimension => Ok(v.clone()),
            Some(v) => Err(Error::InvalidFamily(format!(
                "parameter `{name}` has length {}, expected {}",
                v.len(),
                self.dimension
            ))),
        }
    }

    fn matrix_param(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.dimension;
        match &self.params.q {
            None => Ok(vec![vec![0.0; n]; n]),
            Some(q) => {
                if q.len() != n || q.iter().any(|row| row.len() != n) {
                    return Err(Error::InvalidFamily(format!(
                        "parameter `Q` is not an {n}×{n} matrix"
                    )));
                }
                for j in 0..n {
                    for i in 0..n {
                        if (q[j][i] + q[i][j]).abs() > 1e-12 {
                            return Err(Error::InvalidFamily(String::from(
                                "parameter `Q` is not antisymmetric",
                            )));
                        }
                    }
                }
                Ok(q.clone())
            }
        }
    }

    /// Constructs the metric, validating parameters. For the classified
    /// family and for Randers metrics, `‖W‖` is probed on a lattice in
    /// `[−0.5, 0.5]^n` and construction fails where it reaches 1.
    pub fn construct(&self) -> Result<Box<dyn MetricField>> {
        let n = self.dimension;
        if n < 2 {
            return Err(Error::InvalidFamily(String::from("dimension must be ≥ 2")));
        }
        match self.family {
            Family::Euclidean => Ok(Box::new(Euclidean { n })),
            Family::Riemannian => Ok(Box::new(ConformalFlat {
                n,
                amplitude: self.params.amplitude,
            })),
            Family::SpaceForm => Ok(Box::new(SpaceForm {
                n,
                mu: self.params.mu,
            })),
            Family::Randers => {
                let m = Randers {
                    n,
                    b0: self.vec_param(&self.params.b, "b")?,
                    curl: self.params.curl,
                };
                for x in lattice(n, 0.5) {
                    let norm = linalg::norm(&m.oneform(&x));
                    if norm >= 1.0 {
                        return Err(Error::InvalidFamily(format!(
                            "‖β‖ = {norm:.6} ≥ 1 at probe point {x:?}"
                        )));
                    }
                }
                Ok(Box::new(m))
            }
            Family::CmsFamily => {
                let m = Cms {
                    n,
                    delta: self.params.delta,
                    mu: self.params.mu,
                    q: self.matrix_param()?,
                    a: self.vec_param(&self.params.a, "a")?,
                    b: self.vec_param(&self.params.b, "b")?,
                };
                for x in lattice(n, 0.5) {
                    if !m.domain_contains(&x) {
                        let w2 = m.w_norm2(&x);
                        return Err(Error::InvalidFamily(format!(
                            "‖W‖²_h = {w2:.6} ≥ 1 at probe point {x:?}"
                        )));
                    }
                }
                Ok(Box::new(m))
            }
            Family::Funk => Ok(Box::new(Funk { n })),
            Family::Quartic => Ok(Box::new(Quartic {
                n,
                amplitude: if self.params.amplitude == 0.0 {
                    0.1
                } else {
                    self.params.amplitude
                },
            })),
        }
    }

    /// Closed-form invariants of the classified family.
    pub fn predicted_invariants(&self) -> Result<PredictedInvariants> {
        if self.family != Family::CmsFamily {
            return Err(Error::InvalidFamily(String::from(
                "predicted invariants are defined for the classified family only",
            )));
        }
        Ok(PredictedInvariants {
            n: self.dimension,
            delta: self.params.delta,
            mu: self.params.mu,
            q: self.matrix_param()?,
            a: self.vec_param(&self.params.a, "a")?,
            b: self.vec_param(&self.params.b, "b")?,
        })
    }
}

/// Probe lattice `{−half, −half/2, 0, half/2, half}^n`.
fn lattice(n: usize, half: f64) -> Vec<Vec<f64>> {
    let axis = [-half, -half / 2.0, 0.0, half / 2.0, half];
    let mut out = Vec::with_capacity(5usize.pow(n as u32));
    let total = 5usize.pow(n as u32);
    for mut flat in 0..total {
        let mut x = Vec::with_capacity(n);
        for _ in 0..n {
            x.push(axis[flat % 5]);
            flat /= 5;
        }
        out.push(x);
    }
    out
}

fn dot_s<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = Scalar::mul(&a[0], &b[0]);
    for i in 1..a.len() {
        acc = Scalar::add(&acc, &Scalar::mul(&a[i], &b[i]));
    }
    acc
}

/// Flat metric `F = |y|`.
#[derive(Debug, Clone)]
pub struct Euclidean {
    n: usize,
}

impl Euclidean {
    fn formula<S: Scalar>(&self, _x: &[S], y: &[S]) -> Result<S> {
        Scalar::sqrt(&dot_s(y, y))
    }
}

/// Conformally flat Riemannian metric `F² = (1 + amplitude·|x|²) |y|²`.
/// Generic (non-constant-curvature) Riemannian fixture when the amplitude
/// is nonzero.
#[derive(Debug, Clone)]
pub struct ConformalFlat {
    n: usize,
    amplitude: f64,
}

impl ConformalFlat {
    fn formula<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let lam = dot_s(x, x).scale(self.amplitude).lift_add(1.0);
        Scalar::sqrt(&Scalar::mul(&lam, &dot_s(y, y)))
    }
}

/// Space form of constant sectional curvature μ:
/// `F = √(|y|² + μ(|x|²|y|² − ⟨x,y⟩²)) / (1 + μ|x|²)`.
#[derive(Debug, Clone)]
pub struct SpaceForm {
    n: usize,
    mu: f64,
}

impl SpaceForm {
    fn formula<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let x2 = dot_s(x, x);
        let y2 = dot_s(y, y);
        let xy = dot_s(x, y);
        let num = Scalar::add(
            &y2,
            &Scalar::sub(&Scalar::mul(&x2, &y2), &Scalar::mul(&xy, &xy)).scale(self.mu),
        );
        Scalar::div(&Scalar::sqrt(&num)?, &x2.scale(self.mu).lift_add(1.0))
    }
}

/// Randers metric `F = |y| + β_i(x) y^i` with flat α and
/// `β(x) = b₀ + curl·(x², −x¹, 0, …)`. A nonzero curl makes `dβ ≠ 0`,
/// which destroys projective flatness — the standard negative control.
#[derive(Debug, Clone)]
pub struct Randers {
    n: usize,
    b0: Vec<f64>,
    curl: f64,
}

impl Randers {
    fn oneform(&self, x: &[f64]) -> Vec<f64> {
        let mut b = self.b0.clone();
        b[0] += self.curl * x[1];
        b[1] -= self.curl * x[0];
        b
    }

    fn formula<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let alpha = Scalar::sqrt(&dot_s(y, y))?;
        let mut beta = Scalar::mul(&y[0].lift(self.b0[0]), &y[0]);
        for i in 1..self.n {
            beta = Scalar::add(&beta, &Scalar::mul(&y[i].lift(self.b0[i]), &y[i]));
        }
        let rot = Scalar::sub(
            &Scalar::mul(&x[1], &y[0]),
            &Scalar::mul(&x[0], &y[1]),
        )
        .scale(self.curl);
        Ok(Scalar::add(&alpha, &Scalar::add(&beta, &rot)))
    }
}

/// The classified family (see module docs).
#[derive(Debug, Clone)]
pub struct Cms {
    n: usize,
    delta: f64,
    mu: f64,
    q: Vec<Vec<f64>>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Cms {
    /// `W^i(x)` as scalars of the same type as `x`.
    fn w_vector<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let n = self.n;
        let proto = &x[0];
        let x2 = dot_s(x, x);
        let sq = Scalar::sqrt(&x2.scale(self.mu).lift_add(1.0))?;
        let av: Vec<S> = (0..n).map(|i| proto.lift(self.a[i])).collect();
        let ax = dot_s(&av, x);
        // coefficient of x: δ√(1+μ|x|²) + ⟨a,x⟩
        let cx = Scalar::add(&sq.scale(self.delta), &ax);
        // a |x|² / (√(1+μ|x|²)+1)
        let ax2 = Scalar::div(&x2, &sq.lift_add(1.0))?;
        let bv: Vec<S> = (0..n).map(|i| proto.lift(self.b[i])).collect();
        let bx = dot_s(&bv, x);
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            let mut wi = Scalar::sub(
                &Scalar::mul(&cx, &x[i]),
                &Scalar::mul(&ax2, &proto.lift(self.a[i])),
            )
            .scale(-2.0);
            // (xQ)^i = x^j q_j^i
            for j in 0..n {
                wi = Scalar::add(&wi, &x[j].scale(self.q[j][i]));
            }
            wi = Scalar::add(&wi, &proto.lift(self.b[i]));
            wi = Scalar::add(&wi, &Scalar::mul(&bx, &x[i]).scale(self.mu));
            w.push(wi);
        }
        Ok(w)
    }

    /// `h_ij(x) v^i w^j` for the space-form metric tensor
    /// `h_ij = [(1+μ|x|²)δ_ij − μ x_i x_j] / (1+μ|x|²)²`.
    fn h_pair<S: Scalar>(&self, x: &[S], v: &[S], w: &[S]) -> Result<S> {
        let lam = dot_s(x, x).scale(self.mu).lift_add(1.0);
        let xv = dot_s(x, v);
        let xw = dot_s(x, w);
        let num = Scalar::sub(
            &Scalar::mul(&lam, &dot_s(v, w)),
            &Scalar::mul(&xv, &xw).scale(self.mu),
        );
        Scalar::div(&num, &Scalar::mul(&lam, &lam))
    }

    fn w_norm2(&self, x: &[f64]) -> f64 {
        let w = self.w_vector(x).unwrap();
        self.h_pair(x, &w, &w).unwrap()
    }

    fn formula<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let w = self.w_vector(x)?;
        let w2 = self.h_pair(x, &w, &w)?;
        let wy = self.h_pair(x, &w, y)?;
        let h2 = self.h_pair(x, y, y)?;
        let one_minus = w2.scale(-1.0).lift_add(1.0);
        let inner = Scalar::add(&Scalar::mul(&one_minus, &h2), &Scalar::mul(&wy, &wy));
        Scalar::div(&Scalar::sub(&Scalar::sqrt(&inner)?, &wy), &one_minus)
    }
}

/// The Funk metric on the open unit ball:
/// `F = (√(|y|² − (|x|²|y|² − ⟨x,y⟩²)) + ⟨x,y⟩)/(1 − |x|²)`.
/// Projectively flat with constant projective flag curvature −¼.
#[derive(Debug, Clone)]
pub struct Funk {
    n: usize,
}

impl Funk {
    fn formula<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<S> {
        let x2 = dot_s(x, x);
        let y2 = dot_s(y, y);
        let xy = dot_s(x, y);
        let inner = Scalar::sub(
            &y2,
            &Scalar::sub(&Scalar::mul(&x2, &y2), &Scalar::mul(&xy, &xy)),
        );
        Scalar::div(
            &Scalar::add(&Scalar::sqrt(&inner)?, &xy),
            &x2.scale(-1.0).lift_add(1.0),
        )
    }
}

/// Non-Randers control: `F = (Σ (y^i)⁴)^{1/4} + amplitude·|y|`.
#[derive(Debug, Clone)]
pub struct Quartic {
    n: usize,
    amplitude: f64,
}

impl Quartic {
    fn formula<S: Scalar>(&self, _x: &[S], y: &[S]) -> Result<S> {
        let mut quart = {
            let s = Scalar::mul(&y[0], &y[0]);
            Scalar::mul(&s, &s)
        };
        for yi in &y[1..] {
            let s = Scalar::mul(yi, yi);
            quart = Scalar::add(&quart, &Scalar::mul(&s, &s));
        }
        let root = Scalar::sqrt(&Scalar::sqrt(&quart)?)?;
        Ok(Scalar::add(
            &root,
            &Scalar::sqrt(&dot_s(y, y))?.scale(self.amplitude),
        ))
    }
}

/// Small convenience for `v.scale(c) + 1` chains.
trait LiftAdd: Scalar {
    fn lift_add(&self, c: f64) -> Self {
        Scalar::add(self, &self.lift(c))
    }
}
impl<S: Scalar> LiftAdd for S {}

macro_rules! impl_metric_field {
    ($ty:ident) => {
        impl MetricField for $ty {
            fn dim(&self) -> usize {
                self.n
            }
            fn eval_jet(&self, x: &[JetValue], y: &[JetValue]) -> Result<JetValue> {
                self.formula(x, y)
            }
            fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
                self.formula(x, y)
            }
        }
    };
}

impl_metric_field!(Euclidean);
impl_metric_field!(ConformalFlat);
impl_metric_field!(SpaceForm);
impl_metric_field!(Randers);
impl_metric_field!(Quartic);

impl MetricField for Cms {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval_jet(&self, x: &[JetValue], y: &[JetValue]) -> Result<JetValue> {
        self.formula(x, y)
    }
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.formula(x, y)
    }
    fn domain_contains(&self, x: &[f64]) -> bool {
        if self.mu < 0.0 && 1.0 + self.mu * linalg::dot(x, x) <= 0.0 {
            return false;
        }
        self.w_norm2(x) < 1.0
    }
}

impl MetricField for Funk {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval_jet(&self, x: &[JetValue], y: &[JetValue]) -> Result<JetValue> {
        self.formula(x, y)
    }
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.formula(x, y)
    }
    fn domain_contains(&self, x: &[f64]) -> bool {
        linalg::dot(x, x) < 1.0
    }
}

/// Closed-form invariants of the classified family, evaluated at a point
/// or lifted to jets.
#[derive(Debug, Clone)]
pub struct PredictedInvariants {
    n: usize,
    delta: f64,
    mu: f64,
    q: Vec<Vec<f64>>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PredictedInvariants {
    /// `c(x) = (δ + ⟨a,x⟩)/√(1+μ|x|²)`.
    pub fn c<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let proto = &x[0];
        let av: Vec<S> = (0..self.n).map(|i| proto.lift(self.a[i])).collect();
        let num = dot_s(&av, x).lift_add(self.delta);
        let sq = Scalar::sqrt(&dot_s(x, x).scale(self.mu).lift_add(1.0))?;
        Scalar::div(&num, &sq)
    }

    /// Closed-form gradient `c_{x^m} = a_m/√(1+μ|x|²) − c μ x_m/(1+μ|x|²)`.
    pub fn c_grad<S: Scalar>(&self, x: &[S]) -> Result<Vec<S>> {
        let proto = &x[0];
        let lam = dot_s(x, x).scale(self.mu).lift_add(1.0);
        let sq = Scalar::sqrt(&lam)?;
        let c = self.c(x)?;
        let cf = Scalar::div(&c.scale(self.mu), &lam)?;
        (0..self.n)
            .map(|m| {
                Ok(Scalar::sub(
                    &Scalar::div(&proto.lift(self.a[m]), &sq)?,
                    &Scalar::mul(&cf, &x[m]),
                ))
            })
            .collect()
    }

    /// Fitted-convention 1-form coefficients `θ_m = 3 c_{x^m}`.
    pub fn theta(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.c_grad(x)?.into_iter().map(|v| 3.0 * v).collect())
    }

    /// `σ(x) = μ − c² − 2 c_{x^m} W^m`.
    pub fn sigma<S: Scalar>(&self, x: &[S]) -> Result<S> {
        let cms = Cms {
            n: self.n,
            delta: self.delta,
            mu: self.mu,
            q: self.q.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
        };
        let w = cms.w_vector(x)?;
        let c = self.c(x)?;
        let grad = self.c_grad(x)?;
        let mut acc = Scalar::mul(&c, &c).scale(-1.0).lift_add(self.mu);
        for m in 0..self.n {
            acc = Scalar::sub(&acc, &Scalar::mul(&grad[m], &w[m]).scale(2.0));
        }
        Ok(acc)
    }

    /// Coefficient of the S-curvature law, `(n+1)·c(x)`.
    pub fn s_coefficient(&self, x: &[f64]) -> Result<f64> {
        Ok((self.n as f64 + 1.0) * self.c(x)?)
    }

    /// Predicted flag curvature `K = 3 c_{x^m} y^m / F + σ`.
    pub fn flag_curvature(&self, m: &dyn MetricField, x: &[f64], y: &[f64]) -> Result<f64> {
        let grad = self.c_grad(x)?;
        let f = m.eval(x, y)?;
        Ok(3.0 * linalg::dot(&grad, y) / f + self.sigma(x)?)
    }
}
