//! Truncated multivariate Taylor arithmetic ("jets").
//!
//! A [`JetValue`] stores the Taylor coefficients of a scalar quantity at a
//! base point, for every multi-index `α` with `|α| ≤ order`:
//! `coeffs[α] = ∂^α f / α!`. Arithmetic on jets is exact in the truncated
//! polynomial ring, so any composite expression built from seeded coordinate
//! jets carries the exact partial derivatives of the composite — no
//! finite-difference noise, no step-size tuning.
//!
//! Coefficients are stored densely, indexed by the graded-lexicographic rank
//! of the multi-index. Multiplication is a direct convolution over a
//! precomputed pair table with a degree cutoff; at the problem sizes this
//! crate targets (2n ≤ 8 variables, order ≤ 7) that beats anything fancier.
//!
//! Each value tracks its *valid order*: differentiating a jet of valid order
//! `v` yields one of valid order `v − 1`, and products propagate the minimum
//! of their factors' valid orders. Reading a coefficient past the valid
//! order is an error rather than a silently wrong number.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Shared description of a truncated jet algebra: number of variables,
/// truncation order, and the combinatorial tables used by the arithmetic.
#[derive(Debug)]
pub struct JetContext {
    num_vars: usize,
    order: usize,
    /// Multi-index exponents, flattened: `exps[r * num_vars ..][..num_vars]`.
    exps: Vec<u8>,
    /// Degree block boundaries: ranks with `|α| = d` live in
    /// `offsets[d] .. offsets[d + 1]`.
    offsets: Vec<usize>,
    /// `up[r * num_vars + k]` = rank of `α + e_k`, or `u32::MAX` if that
    /// leaves the truncation.
    up: Vec<u32>,
    /// All ordered rank pairs `(i, j, rank(α_i + α_j))` with
    /// `|α_i| + |α_j| ≤ order`, sorted by total degree.
    pairs: Vec<(u32, u32, u32)>,
    /// `pairs[.. pair_offsets[d + 1]]` are the pairs with total degree ≤ d.
    pair_offsets: Vec<usize>,
}

fn binomial_table(max: usize) -> Vec<Vec<u64>> {
    let mut t = vec![vec![0u64; max + 1]; max + 1];
    for n in 0..=max {
        t[n][0] = 1;
        for k in 1..=n {
            t[n][k] = t[n - 1][k - 1] + if k <= n - 1 { t[n - 1][k] } else { 0 };
        }
    }
    t
}

impl JetContext {
    /// Builds the context for `num_vars` variables truncated at total
    /// degree `order`. `num_vars` must be even and at least 2 (n position
    /// plus n direction coordinates), `order` at least 1.
    pub fn new(num_vars: usize, order: usize) -> Result<Arc<Self>> {
        if num_vars < 2 || num_vars % 2 != 0 {
            return Err(Error::InvalidContext("num_vars must be even and >= 2"));
        }
        if order < 1 {
            return Err(Error::InvalidContext("order must be >= 1"));
        }
        let binom = binomial_table(num_vars + order + 1);

        // Enumerate multi-indices degree block by degree block, lexicographic
        // within a block with the first variable most significant.
        let mut exps: Vec<u8> = Vec::new();
        let mut offsets = vec![0usize];
        let mut deg: Vec<u8> = Vec::new();
        let mut stack = vec![0u8; num_vars];
        for d in 0..=order {
            gen_degree(d, 0, num_vars, &mut stack, &mut exps);
            let count = exps.len() / num_vars;
            deg.resize(count, d as u8);
            offsets.push(count);
        }
        let count = offsets[order + 1];

        let rank_of = |alpha: &[u8]| -> usize {
            let d: usize = alpha.iter().map(|&e| e as usize).sum();
            let mut r = offsets[d];
            let mut rem = d;
            for (k, &e) in alpha.iter().enumerate() {
                let vars_left = num_vars - k - 1;
                if vars_left == 0 {
                    break;
                }
                // Monomials whose exponent at slot k exceeds e come first.
                for f in (e as usize + 1)..=rem {
                    r += binom[rem - f + vars_left - 1][vars_left - 1] as usize;
                }
                rem -= e as usize;
            }
            r
        };

        let mut up = vec![u32::MAX; count * num_vars];
        let mut alpha = vec![0u8; num_vars];
        for r in 0..count {
            alpha.copy_from_slice(&exps[r * num_vars..(r + 1) * num_vars]);
            if (deg[r] as usize) < order {
                for k in 0..num_vars {
                    alpha[k] += 1;
                    up[r * num_vars + k] = rank_of(&alpha) as u32;
                    alpha[k] -= 1;
                }
            }
        }

        let mut pairs = Vec::new();
        let mut pair_offsets = vec![0usize];
        let mut sum = vec![0u8; num_vars];
        for total in 0..=order {
            for d1 in 0..=total {
                let d2 = total - d1;
                for i in offsets[d1]..offsets[d1 + 1] {
                    for j in offsets[d2]..offsets[d2 + 1] {
                        for k in 0..num_vars {
                            sum[k] = exps[i * num_vars + k] + exps[j * num_vars + k];
                        }
                        pairs.push((i as u32, j as u32, rank_of(&sum) as u32));
                    }
                }
            }
            pair_offsets.push(pairs.len());
        }

        Ok(Arc::new(JetContext {
            num_vars,
            order,
            exps,
            offsets,
            up,
            pairs,
            pair_offsets,
        }))
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of coefficients retained up to total degree `v`.
    pub fn len_at(&self, v: usize) -> usize {
        self.offsets[v + 1]
    }

    /// The constant jet of value `v` (exact to the full context order).
    pub fn constant(self: &Arc<Self>, v: f64) -> JetValue {
        let mut coeffs = vec![0.0; self.len_at(self.order)];
        coeffs[0] = v;
        JetValue {
            ctx: Arc::clone(self),
            valid: self.order,
            coeffs,
        }
    }

    /// The jet of the coordinate function `v ↦ v_index` at base value
    /// `value`: constant term `value`, unit linear term in slot `index`.
    pub fn seed_variable(self: &Arc<Self>, index: usize, value: f64) -> Result<JetValue> {
        if index >= self.num_vars {
            return Err(Error::IndexOutOfRange {
                index,
                num_vars: self.num_vars,
            });
        }
        let mut j = self.constant(value);
        // Degree-1 block is ordered with variable 0 first.
        j.coeffs[1 + index] = 1.0;
        Ok(j)
    }

    fn rank(&self, alpha: &[usize]) -> Result<usize> {
        if alpha.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: alpha.len(),
            });
        }
        let d: usize = alpha.iter().sum();
        if d > self.order {
            return Err(Error::OrderExceeded {
                requested: d,
                valid: self.order,
            });
        }
        // Walk up from the zero multi-index with the precomputed table.
        let mut r = 0usize;
        for (k, &e) in alpha.iter().enumerate() {
            for _ in 0..e {
                r = self.up[r * self.num_vars + k] as usize;
            }
        }
        Ok(r)
    }
}

fn gen_degree(d: usize, k: usize, num_vars: usize, cur: &mut [u8], out: &mut Vec<u8>) {
    if k == num_vars - 1 {
        cur[k] = d as u8;
        out.extend_from_slice(cur);
        return;
    }
    for e in (0..=d).rev() {
        cur[k] = e as u8;
        gen_degree(d - e, k + 1, num_vars, cur, out);
    }
    cur[k] = 0;
}

/// A truncated multivariate Taylor polynomial: all partial derivatives of a
/// scalar quantity at a base point, up to the value's valid order.
#[derive(Debug, Clone)]
pub struct JetValue {
    ctx: Arc<JetContext>,
    valid: usize,
    coeffs: Vec<f64>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

impl JetValue {
    pub fn context(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    /// The plain value of the quantity at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Truncation order up to which the coefficients are exact.
    pub fn valid_order(&self) -> usize {
        self.valid
    }

    /// Taylor coefficient at multi-index `alpha` (`∂^α f / α!`).
    pub fn coeff(&self, alpha: &[usize]) -> Result<f64> {
        let d: usize = alpha.iter().sum();
        if d > self.valid {
            return Err(Error::OrderExceeded {
                requested: d,
                valid: self.valid,
            });
        }
        Ok(self.coeffs[self.ctx.rank(alpha)?])
    }

    /// The exact mixed partial derivative `∂^α f = α! · coeffs[α]`.
    pub fn extract_partial(&self, alpha: &[usize]) -> Result<f64> {
        let c = self.coeff(alpha)?;
        let fact: f64 = alpha.iter().map(|&e| factorial(e)).product();
        Ok(c * fact)
    }

    fn same_ctx(&self, other: &JetValue) {
        assert!(
            Arc::ptr_eq(&self.ctx, &other.ctx),
            "jet values belong to different contexts"
        );
    }

    /// Partial derivative with respect to variable `var`, exact one order
    /// below `self`.
    pub fn derivative(&self, var: usize) -> Result<JetValue> {
        if var >= self.ctx.num_vars {
            return Err(Error::IndexOutOfRange {
                index: var,
                num_vars: self.ctx.num_vars,
            });
        }
        if self.valid == 0 {
            return Err(Error::OrderExceeded {
                requested: 1,
                valid: 0,
            });
        }
        let nv = self.ctx.num_vars;
        let vout = self.valid - 1;
        let mut coeffs = vec![0.0; self.ctx.len_at(vout)];
        for (r, c) in coeffs.iter_mut().enumerate() {
            let upr = self.ctx.up[r * nv + var] as usize;
            let e = self.ctx.exps[upr * nv + var] as f64;
            *c = e * self.coeffs[upr];
        }
        Ok(JetValue {
            ctx: Arc::clone(&self.ctx),
            valid: vout,
            coeffs,
        })
    }

    pub fn scale(&self, c: f64) -> JetValue {
        let mut out = self.clone();
        for v in &mut out.coeffs {
            *v *= c;
        }
        out
    }

    pub fn add_scalar(&self, c: f64) -> JetValue {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Multiplication with an explicit target order, treating missing
    /// coefficients of either factor as zero. Newton iterations rely on this
    /// to extend the valid order beyond the factors' own.
    fn mul_to_order(&self, rhs: &JetValue, w: usize) -> JetValue {
        self.same_ctx(rhs);
        let ctx = &self.ctx;
        let mut coeffs = vec![0.0; ctx.len_at(w)];
        let la = self.coeffs.len();
        let lb = rhs.coeffs.len();
        for &(i, j, k) in &ctx.pairs[..ctx.pair_offsets[w + 1]] {
            let (i, j, k) = (i as usize, j as usize, k as usize);
            if i < la && j < lb {
                coeffs[k] += self.coeffs[i] * rhs.coeffs[j];
            }
        }
        JetValue {
            ctx: Arc::clone(ctx),
            valid: w,
            coeffs,
        }
    }

    /// Reciprocal by Newton iteration in the jet algebra; exact to the
    /// valid order of `self`.
    pub fn recip(&self) -> Result<JetValue> {
        let b0 = self.value();
        if b0 == 0.0 {
            return Err(Error::DivisionByZero);
        }
        let mut r = self.ctx.constant(1.0 / b0);
        r.valid = 0;
        r.coeffs.truncate(1);
        let mut w = 0usize;
        while w < self.valid {
            w = (2 * w + 1).min(self.valid);
            // r <- r (2 - b r), correct to order w.
            let br = self.mul_to_order(&r, w);
            let two_minus = br.scale(-1.0).add_scalar(2.0);
            r = r.mul_to_order(&two_minus, w);
        }
        Ok(r)
    }

    pub fn div(&self, rhs: &JetValue) -> Result<JetValue> {
        let w = self.valid.min(rhs.valid);
        let r = rhs.recip()?;
        Ok(self.mul_to_order(&r, w))
    }

    /// Square root by Newton iteration on the inverse square root; requires
    /// a positive constant term.
    pub fn sqrt(&self) -> Result<JetValue> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(Error::NonPositiveSqrt(a0));
        }
        let mut r = self.ctx.constant(1.0 / libm::sqrt(a0));
        r.valid = 0;
        r.coeffs.truncate(1);
        let mut w = 0usize;
        while w < self.valid {
            w = (2 * w + 1).min(self.valid);
            // r <- r (3 - a r^2) / 2, correct to order w.
            let r2 = r.mul_to_order(&r, w);
            let ar2 = self.mul_to_order(&r2, w);
            let three_minus = ar2.scale(-1.0).add_scalar(3.0);
            r = r.mul_to_order(&three_minus, w).scale(0.5);
        }
        Ok(self.mul_to_order(&r, self.valid))
    }

    /// Integer power; negative exponents go through [`JetValue::recip`].
    pub fn powi(&self, n: i32) -> Result<JetValue> {
        if n < 0 {
            return self.recip()?.powi(-n);
        }
        let mut acc = self.ctx.constant(1.0);
        acc.valid = self.valid;
        acc.coeffs.truncate(self.ctx.len_at(self.valid));
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Ok(acc)
    }
}

impl Add for &JetValue {
    type Output = JetValue;
    fn add(self, rhs: &JetValue) -> JetValue {
        self.same_ctx(rhs);
        let v = self.valid.min(rhs.valid);
        let len = self.ctx.len_at(v);
        let mut coeffs = Vec::with_capacity(len);
        for r in 0..len {
            coeffs.push(self.coeffs[r] + rhs.coeffs[r]);
        }
        JetValue {
            ctx: Arc::clone(&self.ctx),
            valid: v,
            coeffs,
        }
    }
}

impl Sub for &JetValue {
    type Output = JetValue;
    fn sub(self, rhs: &JetValue) -> JetValue {
        self.same_ctx(rhs);
        let v = self.valid.min(rhs.valid);
        let len = self.ctx.len_at(v);
        let mut coeffs = Vec::with_capacity(len);
        for r in 0..len {
            coeffs.push(self.coeffs[r] - rhs.coeffs[r]);
        }
        JetValue {
            ctx: Arc::clone(&self.ctx),
            valid: v,
            coeffs,
        }
    }
}

impl Mul for &JetValue {
    type Output = JetValue;
    fn mul(self, rhs: &JetValue) -> JetValue {
        self.mul_to_order(rhs, self.valid.min(rhs.valid))
    }
}

impl Neg for &JetValue {
    type Output = JetValue;
    fn neg(self) -> JetValue {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($trait:ident, $method:ident) => {
        impl $trait for JetValue {
            type Output = JetValue;
            fn $method(self, rhs: JetValue) -> JetValue {
                $trait::$method(&self, &rhs)
            }
        }
        impl $trait<&JetValue> for JetValue {
            type Output = JetValue;
            fn $method(self, rhs: &JetValue) -> JetValue {
                $trait::$method(&self, rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for JetValue {
    type Output = JetValue;
    fn neg(self) -> JetValue {
        self.scale(-1.0)
    }
}

/// Solves `A · x = b` in the truncated jet algebra by Gaussian elimination
/// with partial pivoting on the constant terms. Fails if the constant-term
/// matrix is singular.
pub fn jet_linear_solve(a: &[Vec<JetValue>], b: &[JetValue]) -> Result<Vec<JetValue>> {
    let n = a.len();
    let mut m: Vec<Vec<JetValue>> = a.to_vec();
    let mut rhs: Vec<JetValue> = b.to_vec();
    for col in 0..n {
        let mut piv = col;
        let mut best = libm::fabs(m[col][col].value());
        for row in col + 1..n {
            let v = libm::fabs(m[row][col].value());
            if v > best {
                best = v;
                piv = row;
            }
        }
        if best < 1e-300 {
            return Err(Error::SingularMatrix);
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].recip()?;
        for row in col + 1..n {
            let factor = &m[row][col] * &inv;
            for k in col..n {
                m[row][k] = &m[row][k] - &(&factor * &m[col][k]);
            }
            rhs[row] = &rhs[row] - &(&factor * &rhs[col]);
        }
    }
    let zero_like = |j: &JetValue| j.scale(0.0);
    let mut x: Vec<JetValue> = rhs.iter().map(zero_like).collect();
    for col in (0..n).rev() {
        let mut acc = rhs[col].clone();
        for k in col + 1..n {
            acc = &acc - &(&m[col][k] * &x[k]);
        }
        x[col] = acc.div(&m[col][col])?;
    }
    Ok(x)
}

/// Scalar abstraction letting metric formulas run on plain reals or jets
/// with the same code path. `lift` creates a constant compatible with
/// `self` (for jets, one in the same context).
pub trait Scalar: Clone {
    fn lift(&self, c: f64) -> Self;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn scale(&self, c: f64) -> Self;
    fn div(&self, rhs: &Self) -> Result<Self>;
    fn sqrt(&self) -> Result<Self>;
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn lift(&self, c: f64) -> f64 {
        c
    }
    fn add(&self, rhs: &f64) -> f64 {
        self + rhs
    }
    fn sub(&self, rhs: &f64) -> f64 {
        self - rhs
    }
    fn mul(&self, rhs: &f64) -> f64 {
        self * rhs
    }
    fn scale(&self, c: f64) -> f64 {
        self * c
    }
    fn div(&self, rhs: &f64) -> Result<f64> {
        if *rhs == 0.0 {
            return Err(Error::DivisionByZero);
        }
        Ok(self / rhs)
    }
    fn sqrt(&self) -> Result<f64> {
        if *self <= 0.0 {
            return Err(Error::NonPositiveSqrt(*self));
        }
        Ok(libm::sqrt(*self))
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl Scalar for JetValue {
    fn lift(&self, c: f64) -> JetValue {
        let mut j = self.ctx.constant(c);
        j.valid = self.valid;
        j.coeffs.truncate(self.ctx.len_at(self.valid));
        j
    }
    fn add(&self, rhs: &JetValue) -> JetValue {
        self + rhs
    }
    fn sub(&self, rhs: &JetValue) -> JetValue {
        self - rhs
    }
    fn mul(&self, rhs: &JetValue) -> JetValue {
        self * rhs
    }
    fn scale(&self, c: f64) -> JetValue {
        JetValue::scale(self, c)
    }
    fn div(&self, rhs: &JetValue) -> Result<JetValue> {
        JetValue::div(self, rhs)
    }
    fn sqrt(&self) -> Result<JetValue> {
        JetValue::sqrt(self)
    }
    fn value(&self) -> f64 {
        JetValue::value(self)
    }
}
