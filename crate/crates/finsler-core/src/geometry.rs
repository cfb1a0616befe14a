//! Finsler-geometric quantities at a tangent point, computed with jets.
//!
//! Everything here is driven by one object, the [`JetBundle`]: the metric is
//! evaluated once with seeded coordinate jets in the 2n variables
//! `(x¹..xⁿ, y¹..yⁿ)`, and every tensor of the Berwald-connection calculus
//! is then obtained by reading or combining jet coefficients. Because the
//! jet arithmetic is exact, the only error anywhere is floating-point
//! rounding.
//!
//! Conventions: `g_ij = ½ [F²]_{y^i y^j}`, the geodesic coefficients are
//! `G^i = ¼ g^{il} { [F²]_{x^m y^l} y^m − [F²]_{x^l} }`, the nonlinear
//! connection is `N^i_k = ∂G^i/∂y^k`, and the Berwald Christoffel symbols
//! are `Γ^i_jk = ∂²G^i/∂y^j∂y^k`. The horizontal derivative of a scalar on
//! the tangent bundle is `T_{|k} = ∂T/∂x^k − N^m_k ∂T/∂y^m`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::jet::{jet_linear_solve, JetContext, JetValue};
use crate::linalg;

/// An evaluatable Finsler metric `F(x, y)`.
///
/// Implementations must be reentrant: the harness evaluates different
/// sample points concurrently with no coordination.
pub trait MetricField: Send + Sync {
    fn dim(&self) -> usize;

    /// Evaluates `F` on jet-valued coordinates. `x` and `y` each carry
    /// `dim()` jets from a common context.
    fn eval_jet(&self, x: &[JetValue], y: &[JetValue]) -> Result<JetValue>;

    /// Plain-real evaluation.
    fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64>;

    /// Chart domain predicate for the position coordinate.
    fn domain_contains(&self, _x: &[f64]) -> bool {
        true
    }
}

/// A point of the (slit) tangent bundle: position and nonzero direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TangentPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if linalg::norm(&y) == 0.0 {
            return Err(Error::DegenerateFlag);
        }
        Ok(TangentPoint { x, y })
    }
}

/// Variance of a tensor slot under the Berwald covariant derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Upper,
    Lower,
}

/// A dense tensor of jet values with `rank` slots, each running over the
/// manifold dimension. Tracks index variance so the Berwald covariant
/// derivative can apply the right Christoffel corrections.
#[derive(Debug, Clone)]
pub struct JetTensor {
    n: usize,
    kinds: Vec<IndexKind>,
    data: Vec<JetValue>,
}

impl JetTensor {
    pub fn from_fn(
        n: usize,
        kinds: &[IndexKind],
        mut f: impl FnMut(&[usize]) -> Result<JetValue>,
    ) -> Result<Self> {
        let rank = kinds.len();
        let total = n.pow(rank as u32);
        let mut data = Vec::with_capacity(total);
        let mut idx = vec![0usize; rank];
        for flat in 0..total {
            unflatten(flat, n, &mut idx);
            data.push(f(&idx)?);
        }
        Ok(JetTensor {
            n,
            kinds: kinds.to_vec(),
            data,
        })
    }

    pub fn rank(&self) -> usize {
        self.kinds.len()
    }

    pub fn get(&self, idx: &[usize]) -> &JetValue {
        &self.data[flatten(idx, self.n)]
    }

    /// Berwald covariant derivative: appends one lower index.
    pub fn cov(&self, b: &JetBundle) -> Result<JetTensor> {
        let n = self.n;
        let rank = self.rank();
        let mut kinds = self.kinds.clone();
        kinds.push(IndexKind::Lower);
        let mut out_data = Vec::with_capacity(self.data.len() * n);
        let mut idx = vec![0usize; rank];
        for flat in 0..self.data.len() {
            unflatten(flat, n, &mut idx);
            for k in 0..n {
                let mut acc = b.hderiv(&self.data[flat], k)?;
                for (p, kind) in self.kinds.iter().enumerate() {
                    let label = idx[p];
                    let mut swapped = idx.clone();
                    for m in 0..n {
                        swapped[p] = m;
                        let t = self.get(&swapped);
                        let term = match kind {
                            IndexKind::Upper => t * &b.gamma[label][m][k],
                            IndexKind::Lower => (t * &b.gamma[m][label][k]).scale(-1.0),
                        };
                        acc = &acc + &term;
                    }
                }
                out_data.push(acc);
            }
        }
        Ok(JetTensor {
            n,
            kinds,
            data: out_data,
        })
    }

    /// Contracts the index at `pos` with the direction jets `y^m`.
    pub fn contract_y(&self, b: &JetBundle) -> JetTensor {
        // Contraction with y is only ever needed on the last index ("|0").
        let pos = self.rank() - 1;
        let n = self.n;
        let rank = self.rank();
        let out_rank = rank - 1;
        let total = n.pow(out_rank as u32);
        let mut out_data = Vec::with_capacity(total);
        let mut idx = vec![0usize; out_rank];
        let mut full = vec![0usize; rank];
        for flat in 0..total {
            unflatten(flat, n, &mut idx);
            full[..pos].copy_from_slice(&idx[..pos]);
            let mut acc: Option<JetValue> = None;
            for m in 0..n {
                full[pos] = m;
                let term = self.get(&full) * &b.yj[m];
                acc = Some(match acc {
                    None => term,
                    Some(a) => &a + &term,
                });
            }
            out_data.push(acc.unwrap());
        }
        let mut kinds = self.kinds.clone();
        kinds.remove(pos);
        JetTensor {
            n,
            kinds,
            data: out_data,
        }
    }
}

fn flatten(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

fn unflatten(mut flat: usize, n: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % n;
        flat /= n;
    }
}

/// Jet-valued geometric data at one tangent point: the metric evaluated on
/// seeded coordinate jets, plus the derived connection quantities every
/// curvature computation shares.
pub struct JetBundle {
    pub n: usize,
    pub ctx: Arc<JetContext>,
    pub point: TangentPoint,
    pub xj: Vec<JetValue>,
    pub yj: Vec<JetValue>,
    /// `F` and `F²` as jets.
    pub f: JetValue,
    pub f2: JetValue,
    /// `F_{·i}` as jets.
    pub fy: Vec<JetValue>,
    /// Fundamental tensor `g_ij` and inverse `g^{ij}` as jets.
    pub g: Vec<Vec<JetValue>>,
    pub ginv: Vec<Vec<JetValue>>,
    /// Geodesic coefficients `G^i`.
    pub spray: Vec<JetValue>,
    /// `N^i_k = ∂G^i/∂y^k`.
    pub nmat: Vec<Vec<JetValue>>,
    /// `Γ^i_jk = ∂²G^i/∂y^j∂y^k`.
    pub gamma: Vec<Vec<Vec<JetValue>>>,
    /// `R^i_k`, present when the jet order admits it (order ≥ 4).
    pub riemann: Option<Vec<Vec<JetValue>>>,
}

impl JetBundle {
    /// Evaluates the metric and the shared connection data at `p`, with all
    /// jets truncated at `order`. The connection coefficients `Γ` require
    /// `order ≥ 4`.
    pub fn new(m: &dyn MetricField, p: &TangentPoint, order: usize) -> Result<Self> {
        let ctx = JetContext::new(2 * m.dim(), order.max(4))?;
        Self::with_ctx(m, p, ctx)
    }

    /// Like [`JetBundle::new`] but on a caller-supplied context, so that
    /// bundles at different directions over the same position share jets.
    pub fn with_ctx(m: &dyn MetricField, p: &TangentPoint, ctx: Arc<JetContext>) -> Result<Self> {
        let n = m.dim();
        let order = ctx.order();
        if order < 4 {
            return Err(Error::InvalidContext("jet bundle requires order >= 4"));
        }
        if p.x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: p.x.len(),
            });
        }
        if !m.domain_contains(&p.x) {
            return Err(Error::DomainViolation { point: p.x.clone() });
        }
        let xj: Vec<JetValue> = (0..n)
            .map(|i| ctx.seed_variable(i, p.x[i]))
            .collect::<Result<_>>()?;
        let yj: Vec<JetValue> = (0..n)
            .map(|i| ctx.seed_variable(n + i, p.y[i]))
            .collect::<Result<_>>()?;
        let f = m.eval_jet(&xj, &yj)?;
        let f2 = &f * &f;
        let fy: Vec<JetValue> = (0..n)
            .map(|i| f.derivative(n + i))
            .collect::<Result<_>>()?;

        // g_ij = ½ [F²]_{y^i y^j}
        let mut g = Vec::with_capacity(n);
        for i in 0..n {
            let fi = f2.derivative(n + i)?;
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(fi.derivative(n + j)?.scale(0.5));
            }
            g.push(row);
        }
        let g_vals: Vec<Vec<f64>> = g
            .iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect();
        let eigenvalues = linalg::sym_eigenvalues(&g_vals);
        if eigenvalues[0] <= 0.0 {
            return Err(Error::NotPositiveDefinite { eigenvalues });
        }

        // g^{ij} column by column.
        let mut ginv = vec![Vec::with_capacity(n); n];
        for col in 0..n {
            let e: Vec<JetValue> = (0..n)
                .map(|r| ctx.constant(if r == col { 1.0 } else { 0.0 }))
                .collect();
            let x = jet_linear_solve(&g, &e)?;
            for (r, v) in x.into_iter().enumerate() {
                ginv[r].push(v);
            }
        }

        // G^i = ¼ g^{il} { [F²]_{x^m y^l} y^m − [F²]_{x^l} }
        let mut rhs = Vec::with_capacity(n);
        for l in 0..n {
            let f2yl = f2.derivative(n + l)?;
            let mut acc = f2.derivative(l)?.scale(-1.0);
            for mvar in 0..n {
                acc = &acc + &(&f2yl.derivative(mvar)? * &yj[mvar]);
            }
            rhs.push(acc);
        }
        let spray: Vec<JetValue> = jet_linear_solve(&g, &rhs)?
            .into_iter()
            .map(|v| v.scale(0.25))
            .collect();

        let mut nmat = Vec::with_capacity(n);
        let mut gamma = Vec::with_capacity(n);
        for gi in &spray {
            let mut nrow = Vec::with_capacity(n);
            let mut grow = Vec::with_capacity(n);
            for k in 0..n {
                nrow.push(gi.derivative(n + k)?);
            }
            for j in 0..n {
                let gij = &nrow[j];
                let mut gcol = Vec::with_capacity(n);
                for k in 0..n {
                    gcol.push(gij.derivative(n + k)?);
                }
                grow.push(gcol);
            }
            nmat.push(nrow);
            gamma.push(grow);
        }

        let riemann = if order >= 4 {
            let mut r = Vec::with_capacity(n);
            for i in 0..n {
                let mut row = Vec::with_capacity(n);
                let dx_g: Vec<JetValue> = (0..n)
                    .map(|l| spray[i].derivative(l))
                    .collect::<Result<_>>()?;
                for k in 0..n {
                    let mut acc = dx_g[k].scale(2.0);
                    for l in 0..n {
                        acc = &acc - &(&dx_g[l].derivative(n + k)? * &yj[l]);
                        acc = &acc + &(&spray[l] * &gamma[i][l][k]).scale(2.0);
                        acc = &acc - &(&nmat[i][l] * &nmat[l][k]);
                    }
                    row.push(acc);
                }
                r.push(row);
            }
            Some(r)
        } else {
            None
        };

        Ok(JetBundle {
            n,
            ctx,
            point: p.clone(),
            xj,
            yj,
            f,
            f2,
            fy,
            g,
            ginv,
            spray,
            nmat,
            gamma,
            riemann,
        })
    }

    pub fn riemann(&self) -> Result<&Vec<Vec<JetValue>>> {
        self.riemann.as_ref().ok_or(Error::OrderExceeded {
            requested: 4,
            valid: self.ctx.order(),
        })
    }

    /// ∂/∂x^k of a jet on this bundle's context.
    pub fn dx(&self, j: &JetValue, k: usize) -> Result<JetValue> {
        j.derivative(k)
    }

    /// ∂/∂y^k.
    pub fn dy(&self, j: &JetValue, k: usize) -> Result<JetValue> {
        j.derivative(self.n + k)
    }

    /// Horizontal (Berwald) derivative of a scalar on the tangent bundle:
    /// `T_{|k} = ∂T/∂x^k − N^m_k ∂T/∂y^m`.
    pub fn hderiv(&self, t: &JetValue, k: usize) -> Result<JetValue> {
        let mut acc = t.derivative(k)?;
        for m in 0..self.n {
            acc = &acc - &(&self.nmat[m][k] * &t.derivative(self.n + m)?);
        }
        Ok(acc)
    }

    /// `T_{|0} = T_{|m} y^m` for a scalar.
    pub fn hderiv0(&self, t: &JetValue) -> Result<JetValue> {
        let mut acc: Option<JetValue> = None;
        for k in 0..self.n {
            let term = &self.hderiv(t, k)? * &self.yj[k];
            acc = Some(match acc {
                None => term,
                Some(a) => &a + &term,
            });
        }
        Ok(acc.unwrap())
    }

    /// Cartan torsion `C_ijk = ½ ∂g_ij/∂y^k = ¼ [F²]_{·i·j·k}` and mean
    /// Cartan torsion `I_k = g^{ij} C_ijk`, as jets.
    pub fn cartan(&self) -> Result<(JetTensor, Vec<JetValue>)> {
        let n = self.n;
        let c = JetTensor::from_fn(n, &[IndexKind::Lower; 3], |idx| {
            Ok(self
                .f2
                .derivative(n + idx[0])?
                .derivative(n + idx[1])?
                .derivative(n + idx[2])?
                .scale(0.25))
        })?;
        let mut mean = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc: Option<JetValue> = None;
            for i in 0..n {
                for j in 0..n {
                    let term = &self.ginv[i][j] * c.get(&[i, j, k]);
                    acc = Some(match acc {
                        None => term,
                        Some(a) => &a + &term,
                    });
                }
            }
            mean.push(acc.unwrap());
        }
        Ok((c, mean))
    }

    /// Berwald curvature `B^i_jkl = ∂³G^i/∂y^j∂y^k∂y^l`, Landsberg
    /// curvature `L_ijk = −½ y^m g_ml B^l_ijk` and mean Landsberg `J_k`.
    pub fn berwald_landsberg(&self) -> Result<(JetTensor, JetTensor, Vec<JetValue>)> {
        let n = self.n;
        let b = JetTensor::from_fn(
            n,
            &[IndexKind::Upper, IndexKind::Lower, IndexKind::Lower, IndexKind::Lower],
            |idx| {
                self.gamma[idx[0]][idx[1]][idx[2]].derivative(n + idx[3])
            },
        )?;
        // y^m g_ml = F F_{·l} by Euler's relation.
        let ffy: Vec<JetValue> = (0..n).map(|l| &self.f * &self.fy[l]).collect();
        let l = JetTensor::from_fn(n, &[IndexKind::Lower; 3], |idx| {
            let mut acc: Option<JetValue> = None;
            for m in 0..n {
                let term = &ffy[m] * b.get(&[m, idx[0], idx[1], idx[2]]);
                acc = Some(match acc {
                    None => term,
                    Some(a) => &a + &term,
                });
            }
            Ok(acc.unwrap().scale(-0.5))
        })?;
        let mut j = Vec::with_capacity(n);
        for k in 0..n {
            let mut acc: Option<JetValue> = None;
            for p in 0..n {
                for q in 0..n {
                    let term = &self.ginv[p][q] * l.get(&[p, q, k]);
                    acc = Some(match acc {
                        None => term,
                        Some(a) => &a + &term,
                    });
                }
            }
            j.push(acc.unwrap());
        }
        Ok((b, l, j))
    }

    /// Riemann curvature as a `JetTensor` with slots `(upper l, lower i)`.
    pub fn riemann_tensor(&self) -> Result<JetTensor> {
        let r = self.riemann()?;
        JetTensor::from_fn(self.n, &[IndexKind::Upper, IndexKind::Lower], |idx| {
            Ok(r[idx[0]][idx[1]].clone())
        })
    }

    /// hh-curvature of the Berwald connection:
    /// `R_m^l_{ij} = ⅓ (∂²R^l_i/∂y^m∂y^j − ∂²R^l_j/∂y^m∂y^i)`
    /// with slots `(lower m, upper l, lower i, lower j)`.
    pub fn hh_curvature(&self) -> Result<JetTensor> {
        let n = self.n;
        let r = self.riemann()?;
        JetTensor::from_fn(
            n,
            &[IndexKind::Lower, IndexKind::Upper, IndexKind::Lower, IndexKind::Lower],
            |idx| {
                let (m, l, i, j) = (idx[0], idx[1], idx[2], idx[3]);
                let a = r[l][i].derivative(n + m)?.derivative(n + j)?;
                let b = r[l][j].derivative(n + m)?.derivative(n + i)?;
                Ok((&a - &b).scale(1.0 / 3.0))
            },
        )
    }

    /// Three-index curvature `R^l_{ij} = ⅓ (∂R^l_i/∂y^j − ∂R^l_j/∂y^i)`
    /// with slots `(upper l, lower i, lower j)`.
    pub fn r3(&self) -> Result<JetTensor> {
        let n = self.n;
        let r = self.riemann()?;
        JetTensor::from_fn(
            n,
            &[IndexKind::Upper, IndexKind::Lower, IndexKind::Lower],
            |idx| {
                let (l, i, j) = (idx[0], idx[1], idx[2]);
                let a = r[l][i].derivative(n + j)?;
                let b = r[l][j].derivative(n + i)?;
                Ok((&a - &b).scale(1.0 / 3.0))
            },
        )
    }

    /// Scalar flag curvature as a jet, `K = R^m_m / ((n−1) F²)`.
    pub fn k_jet(&self) -> Result<JetValue> {
        let r = self.riemann()?;
        let mut tr = r[0][0].clone();
        for m in 1..self.n {
            tr = &tr + &r[m][m];
        }
        tr.scale(1.0 / (self.n as f64 - 1.0)).div(&self.f2)
    }

    /// Projective factor `P = F_{x^k} y^k / (2F)` as a jet.
    pub fn projective_factor(&self) -> Result<JetValue> {
        let mut acc: Option<JetValue> = None;
        for k in 0..self.n {
            let term = &self.f.derivative(k)? * &self.yj[k];
            acc = Some(match acc {
                None => term,
                Some(a) => &a + &term,
            });
        }
        acc.unwrap().scale(0.5).div(&self.f)
    }

    /// Angular metric `h_jk = g_jk − F_{·j} F_{·k}` (values).
    pub fn angular(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| self.g[j][k].value() - self.fy[j].value() * self.fy[k].value())
                    .collect()
            })
            .collect()
    }

    /// Angular metric jets `h_jk`.
    pub fn angular_jets(&self) -> Vec<Vec<JetValue>> {
        let n = self.n;
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| &self.g[j][k] - &(&self.fy[j] * &self.fy[k]))
                    .collect()
            })
            .collect()
    }

    pub fn g_values(&self) -> Vec<Vec<f64>> {
        self.g
            .iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect()
    }

    pub fn riemann_values(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .riemann()?
            .iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect())
    }
}

/// Full set of curvature tensors at one tangent point, as plain values.
#[derive(Debug, Clone)]
pub struct CurvatureBundle {
    pub f: f64,
    pub g: Vec<Vec<f64>>,
    pub g_inv: Vec<Vec<f64>>,
    pub spray: Vec<f64>,
    pub connection_n: Vec<Vec<f64>>,
    pub christoffel: Vec<Vec<Vec<f64>>>,
    pub riemann: Vec<Vec<f64>>,
    pub cartan: Vec<Vec<Vec<f64>>>,
    pub mean_cartan: Vec<f64>,
    pub berwald: Vec<Vec<Vec<Vec<f64>>>>,
    pub landsberg: Vec<Vec<Vec<f64>>>,
    pub mean_landsberg: Vec<f64>,
    pub angular: Vec<Vec<f64>>,
    pub angular_mixed: Vec<Vec<f64>>,
}

/// Computes the full curvature bundle at `p` (jet order 5).
pub fn curvature_bundle(m: &dyn MetricField, p: &TangentPoint) -> Result<CurvatureBundle> {
    let b = JetBundle::new(m, p, 5)?;
    let n = b.n;
    let (c, i) = b.cartan()?;
    let (bw, l, j) = b.berwald_landsberg()?;
    let fval = b.f.value();
    let angular = b.angular();
    let mut angular_mixed = vec![vec![0.0; n]; n];
    for iu in 0..n {
        for k in 0..n {
            angular_mixed[iu][k] = if iu == k { 1.0 } else { 0.0 }
                - b.fy[k].value() * p.y[iu] / fval;
        }
    }
    Ok(CurvatureBundle {
        f: fval,
        g: b.g_values(),
        g_inv: b
            .ginv
            .iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect(),
        spray: b.spray.iter().map(|j| j.value()).collect(),
        connection_n: b
            .nmat
            .iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect(),
        christoffel: (0..n)
            .map(|a| {
                (0..n)
                    .map(|bb| (0..n).map(|cc| b.gamma[a][bb][cc].value()).collect())
                    .collect()
            })
            .collect(),
        riemann: b.riemann_values()?,
        cartan: (0..n)
            .map(|a| {
                (0..n)
                    .map(|bb| (0..n).map(|cc| c.get(&[a, bb, cc]).value()).collect())
                    .collect()
            })
            .collect(),
        mean_cartan: i.iter().map(|j| j.value()).collect(),
        berwald: (0..n)
            .map(|a| {
                (0..n)
                    .map(|bb| {
                        (0..n)
                            .map(|cc| {
                                (0..n).map(|dd| bw.get(&[a, bb, cc, dd]).value()).collect()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        landsberg: (0..n)
            .map(|a| {
                (0..n)
                    .map(|bb| (0..n).map(|cc| l.get(&[a, bb, cc]).value()).collect())
                    .collect()
            })
            .collect(),
        mean_landsberg: j.iter().map(|j| j.value()).collect(),
        angular,
        angular_mixed,
    })
}

/// Fundamental tensor `g_ij` and its inverse at `p` (values).
pub fn fundamental_tensor(
    m: &dyn MetricField,
    p: &TangentPoint,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let b = JetBundle::new(m, p, 2)?;
    Ok((
        b.g_values(),
        b.ginv
            .iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect(),
    ))
}

/// Geodesic coefficients `G^i`, nonlinear connection `N^i_k` and Berwald
/// Christoffel symbols `Γ^i_jk` at `p` (values).
pub fn spray(
    m: &dyn MetricField,
    p: &TangentPoint,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)> {
    let b = JetBundle::new(m, p, 4)?;
    let n = b.n;
    Ok((
        b.spray.iter().map(|j| j.value()).collect(),
        b.nmat
            .iter()
            .map(|row| row.iter().map(|j| j.value()).collect())
            .collect(),
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|bb| (0..n).map(|cc| b.gamma[a][bb][cc].value()).collect())
                    .collect()
            })
            .collect(),
    ))
}

/// Riemann curvature `R^i_k` at `p` (values).
pub fn riemann_curvature(m: &dyn MetricField, p: &TangentPoint) -> Result<Vec<Vec<f64>>> {
    let b = JetBundle::new(m, p, 4)?;
    b.riemann_values()
}

/// Flag curvature of the flag spanned by `y` and `u`:
/// `K(Π, y) = g_im R^i_k u^k u^m / (F² g_ij u^i u^j − (g_ij y^i u^j)²)`.
pub fn flag_curvature(m: &dyn MetricField, p: &TangentPoint, u: &[f64]) -> Result<f64> {
    let b = JetBundle::new(m, p, 4)?;
    flag_curvature_from_bundle(&b, u)
}

pub fn flag_curvature_from_bundle(b: &JetBundle, u: &[f64]) -> Result<f64> {
    let n = b.n;
    let g = b.g_values();
    let r = b.riemann_values()?;
    let f2 = b.f2.value();
    let mut guu = 0.0;
    let mut gyu = 0.0;
    let mut num = 0.0;
    for i in 0..n {
        for k in 0..n {
            guu += g[i][k] * u[i] * u[k];
            gyu += g[i][k] * b.point.y[i] * u[k];
            for mm in 0..n {
                num += g[i][mm] * r[i][k] * u[k] * u[mm];
            }
        }
    }
    let denom = f2 * guu - gyu * gyu;
    if denom.abs() < 1e-12 * f2 * guu {
        return Err(Error::DegenerateFlag);
    }
    Ok(num / denom)
}

/// Best scalar-flag-curvature fit: `K = R^m_m / ((n−1) F²)` and the
/// normalized max deviation of `R^i_k` from `K (F² δ^i_k − F F_{·k} y^i)`.
pub fn scalar_flag_fit(m: &dyn MetricField, p: &TangentPoint) -> Result<(f64, f64)> {
    let b = JetBundle::new(m, p, 4)?;
    scalar_flag_fit_from_bundle(&b)
}

pub fn scalar_flag_fit_from_bundle(b: &JetBundle) -> Result<(f64, f64)> {
    let n = b.n;
    let r = b.riemann_values()?;
    let f = b.f.value();
    let f2 = b.f2.value();
    let k = (0..n).map(|mm| r[mm][mm]).sum::<f64>() / ((n as f64 - 1.0) * f2);
    let mut resid: f64 = 0.0;
    let mut scale: f64 = 1e-300;
    for i in 0..n {
        for kk in 0..n {
            let model = k * (f2 * if i == kk { 1.0 } else { 0.0 }
                - f * b.fy[kk].value() * b.point.y[i]);
            resid = resid.max((r[i][kk] - model).abs());
            scale = scale.max(r[i][kk].abs()).max(model.abs()).max(k.abs() * f2);
        }
    }
    Ok((k, resid / scale))
}

/// Hamel residual `∂²F/∂x^l∂y^k − ∂²F/∂x^k∂y^l`; identically zero exactly
/// when the metric is projectively flat in the chart.
pub fn hamel_residual(m: &dyn MetricField, p: &TangentPoint) -> Result<Vec<Vec<f64>>> {
    let b = JetBundle::new(m, p, 2)?;
    let n = b.n;
    let mut out = vec![vec![0.0; n]; n];
    for l in 0..n {
        let fl = b.f.derivative(l)?;
        for k in 0..n {
            out[l][k] = fl.derivative(n + k)?.value();
        }
    }
    let mut anti = vec![vec![0.0; n]; n];
    for l in 0..n {
        for k in 0..n {
            anti[l][k] = out[l][k] - out[k][l];
        }
    }
    Ok(anti)
}

/// Projective factor `P` and projective flag curvature
/// `K = (P² − P_{x^m} y^m)/F²`. Meaningful when the Hamel residual
/// vanishes; computed regardless.
pub fn projective(m: &dyn MetricField, p: &TangentPoint) -> Result<(f64, f64)> {
    let b = JetBundle::new(m, p, 3)?;
    let pj = b.projective_factor()?;
    let mut pxy = 0.0;
    for k in 0..b.n {
        pxy += pj.derivative(k)?.value() * p.y[k];
    }
    let pval = pj.value();
    Ok((pval, (pval * pval - pxy) / b.f2.value()))
}
