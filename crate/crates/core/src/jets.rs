//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores every Taylor coefficient of total degree `<= d` of a
//! function of `m` variables around a base point. Coefficients are kept
//! Taylor-normalized (raw partial divided by the multi-index factorial), so
//! the product of two jets is a plain truncated Cauchy product.
//!
//! Jets produced by [`Jet::derivative`] stay in the same context; their
//! top-degree coefficients are zeroed and should be treated as unknown. Every
//! arithmetic operation below computes the degree-`k` coefficients of the
//! result from input coefficients of degree `<= k` only, so a jet that is
//! valid to order `k` stays valid to order `k` through any chain of
//! operations.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

/// Largest supported truncation order.
pub const MAX_ORDER: usize = 4;
/// Largest supported variable count (two copies of an 8-dimensional chart).
pub const MAX_VARS: usize = 16;
/// Default magnitude below which a divisor counts as zero.
pub const DEFAULT_DIV_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("invalid jet context: {0}")]
    InvalidContext(String),
    #[error("variable index {index} out of range for {num_vars} variables")]
    IndexOutOfRange { index: usize, num_vars: usize },
    #[error("jets belong to different contexts")]
    ContextMismatch,
    #[error("degenerate value {value:e} in {op}")]
    DegenerateValue { op: &'static str, value: f64 },
    #[error("{func} undefined at {value}")]
    DomainError { func: &'static str, value: f64 },
    #[error("multi-index of degree {degree} exceeds jet order {order}")]
    DegreeOverflow { degree: usize, order: usize },
}

/// Shape and lookup tables shared by all jets of one computation.
pub struct JetContext {
    num_vars: usize,
    order: usize,
    div_floor: f64,
    indices: Vec<Vec<u8>>,
    degree: Vec<usize>,
    lookup: HashMap<Vec<u8>, usize>,
    /// For each result coefficient k, the pairs (i, j) with i + j = k.
    products: Vec<Vec<(u32, u32)>>,
    /// For each variable: (target, source, factor) moving coefficient
    /// `source = target + e_v` down with factor `target_v + 1`.
    derivatives: Vec<Vec<(u32, u32, f64)>>,
    factorials: Vec<f64>,
}

impl fmt::Debug for JetContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetContext")
            .field("num_vars", &self.num_vars)
            .field("order", &self.order)
            .field("len", &self.indices.len())
            .finish()
    }
}

fn push_indices(m: usize, remaining: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if prefix.len() == m - 1 {
        prefix.push(remaining as u8);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for e in (0..=remaining).rev() {
        prefix.push(e as u8);
        push_indices(m, remaining - e, prefix, out);
        prefix.pop();
    }
}

fn sub_indices(k: &[u8], pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if pos == k.len() {
        out.push(cur.clone());
        return;
    }
    for e in 0..=k[pos] {
        cur.push(e);
        sub_indices(k, pos + 1, cur, out);
        cur.pop();
    }
}

impl JetContext {
    pub fn new(num_vars: usize, order: usize) -> Result<Arc<Self>, JetError> {
        Self::with_floor(num_vars, order, DEFAULT_DIV_FLOOR)
    }

    pub fn with_floor(num_vars: usize, order: usize, div_floor: f64) -> Result<Arc<Self>, JetError> {
        if num_vars == 0 || num_vars > MAX_VARS {
            return Err(JetError::InvalidContext(format!(
                "num_vars must be in 1..={MAX_VARS}, got {num_vars}"
            )));
        }
        if order == 0 || order > MAX_ORDER {
            return Err(JetError::InvalidContext(format!(
                "order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        if !(div_floor >= 0.0) {
            return Err(JetError::InvalidContext("division floor must be >= 0".into()));
        }

        // graded lexicographic: by degree, then descending exponent of x0, x1, ...
        let mut indices = Vec::new();
        for deg in 0..=order {
            push_indices(num_vars, deg, &mut Vec::with_capacity(num_vars), &mut indices);
        }
        let degree: Vec<usize> = indices.iter().map(|k| k.iter().map(|&e| e as usize).sum()).collect();
        let lookup: HashMap<Vec<u8>, usize> =
            indices.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect();

        let mut products = Vec::with_capacity(indices.len());
        for k in &indices {
            let mut subs = Vec::new();
            sub_indices(k, 0, &mut Vec::with_capacity(num_vars), &mut subs);
            let pairs = subs
                .iter()
                .map(|i| {
                    let j: Vec<u8> = k.iter().zip(i).map(|(a, b)| a - b).collect();
                    (lookup[i] as u32, lookup[&j] as u32)
                })
                .collect();
            products.push(pairs);
        }

        let mut derivatives = Vec::with_capacity(num_vars);
        for v in 0..num_vars {
            let mut moves = Vec::new();
            for (t, k) in indices.iter().enumerate() {
                if degree[t] == order {
                    continue;
                }
                let mut src = k.clone();
                src[v] += 1;
                moves.push((t as u32, lookup[&src] as u32, (k[v] + 1) as f64));
            }
            derivatives.push(moves);
        }

        let factorials = indices
            .iter()
            .map(|k| k.iter().map(|&e| (1..=e as u32).product::<u32>() as f64).product())
            .collect();

        Ok(Arc::new(Self {
            num_vars,
            order,
            div_floor,
            indices,
            degree,
            lookup,
            products,
            derivatives,
            factorials,
        }))
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn div_floor(&self) -> f64 {
        self.div_floor
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Multi-index at a storage position.
    pub fn multi_index(&self, pos: usize) -> &[u8] {
        &self.indices[pos]
    }

    pub fn position(&self, multi_index: &[u8]) -> Option<usize> {
        self.lookup.get(multi_index).copied()
    }

    fn same_shape(&self, other: &JetContext) -> bool {
        self.num_vars == other.num_vars && self.order == other.order
    }
}

/// Binary operations exposed through [`arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Elementary functions exposed through [`Jet::apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JetFn {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    PowReal(f64),
}

#[derive(Clone)]
pub struct Jet {
    ctx: Arc<JetContext>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet").field("value", &self.value()).field("coeffs", &self.coeffs).finish()
    }
}

impl Jet {
    pub fn constant(ctx: &Arc<JetContext>, value: f64) -> Self {
        let mut coeffs = vec![0.0; ctx.len()];
        coeffs[0] = value;
        Self { ctx: Arc::clone(ctx), coeffs }
    }

    pub fn zero(ctx: &Arc<JetContext>) -> Self {
        Self::constant(ctx, 0.0)
    }

    /// Coordinate jet `x_index` around `value`.
    pub fn variable(ctx: &Arc<JetContext>, index: usize, value: f64) -> Result<Self, JetError> {
        if index >= ctx.num_vars {
            return Err(JetError::IndexOutOfRange { index, num_vars: ctx.num_vars });
        }
        let mut jet = Self::constant(ctx, value);
        // degree-1 indices follow the constant term in descending order of x0
        jet.coeffs[1 + index] = 1.0;
        Ok(jet)
    }

    pub fn context(&self) -> &Arc<JetContext> {
        &self.ctx
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn from_coeffs(ctx: &Arc<JetContext>, coeffs: Vec<f64>) -> Result<Self, JetError> {
        if coeffs.len() != ctx.len() {
            return Err(JetError::InvalidContext(format!(
                "expected {} coefficients, got {}",
                ctx.len(),
                coeffs.len()
            )));
        }
        Ok(Self { ctx: Arc::clone(ctx), coeffs })
    }

    /// Raw partial derivative for a multi-index (exponent per variable).
    pub fn partial(&self, multi_index: &[u8]) -> Result<f64, JetError> {
        if multi_index.len() != self.ctx.num_vars {
            return Err(JetError::InvalidContext(format!(
                "multi-index has {} entries, context has {} variables",
                multi_index.len(),
                self.ctx.num_vars
            )));
        }
        let degree: usize = multi_index.iter().map(|&e| e as usize).sum();
        if degree > self.ctx.order {
            return Err(JetError::DegreeOverflow { degree, order: self.ctx.order });
        }
        let pos = self.ctx.lookup[multi_index];
        Ok(self.coeffs[pos] * self.ctx.factorials[pos])
    }

    /// Raw partial derivative with respect to a list of variables,
    /// e.g. `[0, 0, 1]` for d³/dx0²dx1.
    pub fn partial_vars(&self, vars: &[usize]) -> Result<f64, JetError> {
        let mut mi = vec![0u8; self.ctx.num_vars];
        for &v in vars {
            if v >= self.ctx.num_vars {
                return Err(JetError::IndexOutOfRange { index: v, num_vars: self.ctx.num_vars });
            }
            mi[v] += 1;
        }
        self.partial(&mi)
    }

    /// Jet of the partial derivative in variable `var`. Valid to one order
    /// less than `self`.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(var < self.ctx.num_vars, "derivative variable out of range");
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(t, s, f) in &self.ctx.derivatives[var] {
            coeffs[t as usize] = f * self.coeffs[s as usize];
        }
        Jet { ctx: Arc::clone(&self.ctx), coeffs }
    }

    fn check(&self, other: &Jet) -> Result<(), JetError> {
        if Arc::ptr_eq(&self.ctx, &other.ctx) || self.ctx.same_shape(&other.ctx) {
            Ok(())
        } else {
            Err(JetError::ContextMismatch)
        }
    }

    pub fn checked_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Jet { ctx: Arc::clone(&self.ctx), coeffs })
    }

    pub fn checked_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Jet { ctx: Arc::clone(&self.ctx), coeffs })
    }

    pub fn checked_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        let coeffs = self
            .ctx
            .products
            .iter()
            .map(|pairs| {
                pairs
                    .iter()
                    .map(|&(i, j)| self.coeffs[i as usize] * other.coeffs[j as usize])
                    .sum()
            })
            .collect();
        Ok(Jet { ctx: Arc::clone(&self.ctx), coeffs })
    }

    pub fn div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check(other)?;
        let b0 = other.coeffs[0];
        if !(b0.abs() > self.ctx.div_floor) {
            return Err(JetError::DegenerateValue { op: "div", value: b0 });
        }
        let mut out = vec![0.0; self.coeffs.len()];
        for (k, pairs) in self.ctx.products.iter().enumerate() {
            let mut acc = self.coeffs[k];
            for &(i, j) in pairs {
                // j == 0 is the term being solved for
                if j != 0 {
                    acc -= out[i as usize] * other.coeffs[j as usize];
                }
            }
            out[k] = acc / b0;
        }
        Ok(Jet { ctx: Arc::clone(&self.ctx), coeffs: out })
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        Jet::constant(&self.ctx, 1.0).div(self)
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet { ctx: Arc::clone(&self.ctx), coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    pub fn add_scalar(&self, value: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += value;
        out
    }

    /// Integer power by repeated multiplication; negative exponents divide.
    pub fn powi(&self, exponent: i32) -> Result<Jet, JetError> {
        let mut result = Jet::constant(&self.ctx, 1.0);
        let mut base = self.clone();
        let mut e = exponent.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        if exponent < 0 {
            Jet::constant(&self.ctx, 1.0).div(&result)
        } else {
            Ok(result)
        }
    }

    /// Compose with a univariate function given its Taylor coefficients
    /// `f^(k)(a0) / k!` at the value of `self`.
    fn compose(&self, taylor: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let d = taylor.len() - 1;
        let mut acc = Jet::constant(&self.ctx, taylor[d]);
        for k in (0..d).rev() {
            acc = (&acc * &h).add_scalar(taylor[k]);
        }
        acc
    }

    pub fn apply(&self, func: JetFn) -> Result<Jet, JetError> {
        let a = self.value();
        let d = self.ctx.order;
        let mut t = vec![0.0; d + 1];
        match func {
            JetFn::Exp => {
                let e = a.exp();
                let mut fact = 1.0;
                for (k, tk) in t.iter_mut().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    *tk = e / fact;
                }
            }
            JetFn::Ln => {
                if !(a > 0.0) {
                    return Err(JetError::DomainError { func: "ln", value: a });
                }
                t[0] = a.ln();
                for (k, tk) in t.iter_mut().enumerate().skip(1) {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    *tk = sign / (k as f64 * a.powi(k as i32));
                }
            }
            JetFn::Sin | JetFn::Cos => {
                let (s, c) = a.sin_cos();
                // derivative cycle of sin: s, c, -s, -c
                let cycle = [s, c, -s, -c];
                let shift = if func == JetFn::Sin { 0 } else { 1 };
                let mut fact = 1.0;
                for (k, tk) in t.iter_mut().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    *tk = cycle[(k + shift) % 4] / fact;
                }
            }
            JetFn::Sqrt => {
                if !(a > 0.0) {
                    return Err(JetError::DomainError { func: "sqrt", value: a });
                }
                return self.pow_real(0.5);
            }
            JetFn::PowReal(r) => return self.pow_real(r),
        }
        Ok(self.compose(&t))
    }

    /// `self^r` for real `r`. Non-integer exponents need a positive base.
    pub fn pow_real(&self, r: f64) -> Result<Jet, JetError> {
        let a = self.value();
        if r.fract() == 0.0 && r.abs() <= i32::MAX as f64 {
            if r < 0.0 && !(a.abs() > self.ctx.div_floor) {
                return Err(JetError::DegenerateValue { op: "pow", value: a });
            }
            return self.powi(r as i32);
        }
        if !(a > 0.0) {
            return Err(JetError::DomainError { func: "pow", value: a });
        }
        let d = self.ctx.order;
        let mut t = vec![0.0; d + 1];
        // binomial series: C(r, k) a^(r-k)
        let mut binom = 1.0;
        for (k, tk) in t.iter_mut().enumerate() {
            if k > 0 {
                binom *= (r - (k as f64 - 1.0)) / k as f64;
            }
            *tk = binom * a.powf(r - k as f64);
        }
        Ok(self.compose(&t))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        self.apply(JetFn::Sqrt)
    }

    pub fn exp(&self) -> Jet {
        self.apply(JetFn::Exp).expect("exp is total")
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        self.apply(JetFn::Ln)
    }

    pub fn sin(&self) -> Jet {
        self.apply(JetFn::Sin).expect("sin is total")
    }

    pub fn cos(&self) -> Jet {
        self.apply(JetFn::Cos).expect("cos is total")
    }

    /// Copy of `self` with every coefficient above `order` zeroed.
    pub fn truncated(&self, order: usize) -> Jet {
        let coeffs = self
            .coeffs
            .iter()
            .zip(&self.ctx.degree)
            .map(|(&c, &deg)| if deg <= order { c } else { 0.0 })
            .collect();
        Jet { ctx: Arc::clone(&self.ctx), coeffs }
    }
}

/// Binary arithmetic with full error reporting.
pub fn arith(op: ArithOp, a: &Jet, b: &Jet) -> Result<Jet, JetError> {
    match op {
        ArithOp::Add => a.checked_add(b),
        ArithOp::Sub => a.checked_sub(b),
        ArithOp::Mul => a.checked_mul(b),
        ArithOp::Div => a.div(b),
    }
}

// Operator impls panic on mismatched contexts; mixing contexts is a
// programming error inside this crate. Use `arith` for checked access.

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.checked_add(rhs).expect("jet context mismatch")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.checked_sub(rhs).expect("jet context mismatch")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.checked_mul(rhs).expect("jet context mismatch")
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        assert!(self.check(rhs).is_ok(), "jet context mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

/// Inverse of a square matrix of jets.
///
/// The constant part is inverted with partial pivoting; the higher-order
/// terms are recovered by Newton-Schulz steps `X <- X (2I - A X)`, each of
/// which doubles the number of correct orders.
pub fn invert_matrix(a: &[Vec<Jet>], pivot_floor: f64) -> Result<Vec<Vec<Jet>>, crate::linalg::LinalgError> {
    let n = a.len();
    let ctx = Arc::clone(a[0][0].context());
    let values: Vec<Vec<f64>> = a.iter().map(|row| row.iter().map(Jet::value).collect()).collect();
    let inv0 = crate::linalg::invert(&values, pivot_floor)?;
    let mut x: Vec<Vec<Jet>> =
        inv0.iter().map(|row| row.iter().map(|&v| Jet::constant(&ctx, v)).collect()).collect();
    let mut correct = 1;
    while correct <= ctx.order() {
        let ax = matmul(a, &x);
        let mut resid = ax;
        for (i, row) in resid.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = if i == j { e.scale(-1.0).add_scalar(2.0) } else { e.scale(-1.0) };
            }
        }
        x = matmul(&x, &resid);
        correct *= 2;
    }
    debug_assert_eq!(x.len(), n);
    Ok(x)
}

pub fn matmul(a: &[Vec<Jet>], b: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let n = a.len();
    let m = b[0].len();
    let ctx = a[0][0].context();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = Jet::zero(ctx);
                    for (k, bk) in b.iter().enumerate() {
                        acc += &(&a[i][k] * &bk[j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lift_variable() {
        let ctx = JetContext::new(2, 2).unwrap();
        let x = Jet::variable(&ctx, 0, 3.0).unwrap();
        assert_eq!(x.value(), 3.0);
        assert_eq!(x.partial_vars(&[0]).unwrap(), 1.0);
        assert_eq!(x.partial_vars(&[1]).unwrap(), 0.0);
        assert_eq!(x.partial_vars(&[0, 1]).unwrap(), 0.0);
        let sq = &x * &x;
        assert_eq!(sq.value(), 9.0);
        assert_eq!(sq.partial_vars(&[0]).unwrap(), 6.0);
        assert_eq!(sq.partial_vars(&[0, 0]).unwrap(), 2.0);

        let ctx1 = JetContext::new(1, 1).unwrap();
        let t = Jet::variable(&ctx1, 0, 0.0).unwrap();
        assert_eq!(t.value(), 0.0);
        assert_eq!(t.partial_vars(&[0]).unwrap(), 1.0);
        assert!(matches!(Jet::variable(&ctx1, 1, 0.0), Err(JetError::IndexOutOfRange { .. })));
    }

    #[test]
    fn graded_lex_layout() {
        let ctx = JetContext::new(2, 2).unwrap();
        let order: Vec<&[u8]> = (0..ctx.len()).map(|i| ctx.multi_index(i)).collect();
        assert_eq!(order, vec![&[0, 0][..], &[1, 0], &[0, 1], &[2, 0], &[1, 1], &[0, 2]]);
        // C(m + d, d)
        assert_eq!(JetContext::new(4, 4).unwrap().len(), 70);
        assert_eq!(JetContext::new(8, 4).unwrap().len(), 495);
    }

    #[test]
    fn polynomial_partials() {
        let ctx = JetContext::new(2, 3).unwrap();
        let x0 = Jet::variable(&ctx, 0, 3.0).unwrap();
        let x1 = Jet::variable(&ctx, 1, 2.0).unwrap();
        let f = &(&x0 * &x0) * &x1;
        assert_eq!(f.partial_vars(&[]).unwrap(), 18.0);
        assert_eq!(f.partial_vars(&[0, 0]).unwrap(), 4.0);
        assert_eq!(f.partial_vars(&[0, 0, 1]).unwrap(), 2.0);
        assert_eq!(f.partial(&[2, 1]).unwrap(), 2.0);
    }

    #[test]
    fn geometric_series_division() {
        let ctx = JetContext::new(1, 2).unwrap();
        let x = Jet::variable(&ctx, 0, 0.0).unwrap();
        let f = Jet::constant(&ctx, 1.0).div(&x.add_scalar(1.0)).unwrap();
        assert_eq!(f.value(), 1.0);
        assert_eq!(f.partial_vars(&[0]).unwrap(), -1.0);
        assert_eq!(f.partial_vars(&[0, 0]).unwrap(), 2.0);
    }

    #[test]
    fn division_by_zero_value() {
        let ctx = JetContext::new(1, 2).unwrap();
        let x = Jet::variable(&ctx, 0, 0.0).unwrap();
        let one = Jet::constant(&ctx, 1.0);
        assert!(matches!(one.div(&x), Err(JetError::DegenerateValue { .. })));
        let tiny = Jet::constant(&ctx, 1e-15);
        assert!(matches!(one.div(&tiny), Err(JetError::DegenerateValue { .. })));
        let custom = JetContext::with_floor(1, 2, 0.0).unwrap();
        assert!(Jet::constant(&custom, 1.0).div(&Jet::constant(&custom, 1e-15)).is_ok());
    }

    #[test]
    fn context_mismatch() {
        let a = Jet::constant(&JetContext::new(1, 2).unwrap(), 1.0);
        let b = Jet::constant(&JetContext::new(2, 2).unwrap(), 1.0);
        assert_eq!(arith(ArithOp::Add, &a, &b).unwrap_err(), JetError::ContextMismatch);
        assert_eq!(arith(ArithOp::Div, &a, &b).unwrap_err(), JetError::ContextMismatch);
        // equal shape, different allocation
        let c = Jet::constant(&JetContext::new(1, 2).unwrap(), 2.0);
        assert_eq!(arith(ArithOp::Mul, &a, &c).unwrap().value(), 2.0);
    }

    #[test]
    fn sqrt_at_four() {
        let ctx = JetContext::new(1, 2).unwrap();
        let x = Jet::variable(&ctx, 0, 4.0).unwrap();
        let r = x.sqrt().unwrap();
        assert_relative_eq!(r.value(), 2.0);
        assert_relative_eq!(r.partial_vars(&[0]).unwrap(), 0.25);
        assert_relative_eq!(r.partial_vars(&[0, 0]).unwrap(), -1.0 / 32.0);
    }

    #[test]
    fn integer_pow_matches_product() {
        let ctx = JetContext::new(2, 4).unwrap();
        let s = &Jet::variable(&ctx, 0, 0.3).unwrap() * &Jet::variable(&ctx, 1, -0.7).unwrap();
        let one_plus = s.add_scalar(1.0);
        let sq = one_plus.pow_real(2.0).unwrap();
        let prod = &one_plus * &one_plus;
        for (a, b) in sq.coeffs().iter().zip(prod.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        // the general binomial series agrees with repeated products too
        let near_two = one_plus.pow_real(2.0 + 1e-12).unwrap();
        for (a, b) in near_two.coeffs().iter().zip(prod.coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn domain_errors() {
        let ctx = JetContext::new(1, 2).unwrap();
        let zero = Jet::variable(&ctx, 0, 0.0).unwrap();
        assert!(matches!(zero.ln(), Err(JetError::DomainError { func: "ln", .. })));
        assert!(matches!(zero.sqrt(), Err(JetError::DomainError { .. })));
        assert!(matches!(zero.add_scalar(-1.0).pow_real(0.5), Err(JetError::DomainError { .. })));
        // integer powers of negative values are fine
        assert_eq!(zero.add_scalar(-2.0).pow_real(3.0).unwrap().value(), -8.0);
    }

    #[test]
    fn extract_degree_overflow() {
        let ctx = JetContext::new(2, 4).unwrap();
        let x = Jet::variable(&ctx, 0, 1.0).unwrap();
        assert_eq!(x.partial(&[0, 0]).unwrap(), 1.0);
        assert!(matches!(x.partial(&[3, 2]), Err(JetError::DegreeOverflow { degree: 5, order: 4 })));
    }

    #[test]
    fn elementary_series_at_zero() {
        let ctx = JetContext::new(1, 4).unwrap();
        let x = Jet::variable(&ctx, 0, 0.0).unwrap();
        let close = |j: &Jet, expect: [f64; 5]| {
            for (c, e) in j.coeffs().iter().zip(expect) {
                assert_relative_eq!(*c, e, epsilon = 1e-15);
            }
        };
        close(&x.exp(), [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0]);
        close(&x.sin(), [0.0, 1.0, 0.0, -1.0 / 6.0, 0.0]);
        close(&x.cos(), [1.0, 0.0, -0.5, 0.0, 1.0 / 24.0]);
        close(&x.add_scalar(1.0).ln().unwrap(), [0.0, 1.0, -0.5, 1.0 / 3.0, -0.25]);
    }

    #[test]
    fn derivative_shifts_coefficients() {
        let ctx = JetContext::new(2, 3).unwrap();
        let x = Jet::variable(&ctx, 0, 0.5).unwrap();
        let y = Jet::variable(&ctx, 1, -1.5).unwrap();
        let f = &(&x * &x).sin() * &y.exp();
        let fx = f.derivative(0);
        assert_relative_eq!(fx.value(), f.partial_vars(&[0]).unwrap(), epsilon = 1e-14);
        assert_relative_eq!(fx.partial_vars(&[0, 1]).unwrap(), f.partial_vars(&[0, 0, 1]).unwrap(), epsilon = 1e-13);
        assert_eq!(fx.partial_vars(&[0, 0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn jet_matrix_inverse() {
        let ctx = JetContext::new(2, 4).unwrap();
        let x = Jet::variable(&ctx, 0, 0.4).unwrap();
        let y = Jet::variable(&ctx, 1, -0.2).unwrap();
        let a = vec![
            vec![x.exp(), &x * &y],
            vec![&x * &y, (&y * &y).add_scalar(2.0)],
        ];
        let inv = invert_matrix(&a, 1e-12).unwrap();
        let prod = matmul(&a, &inv);
        for (i, row) in prod.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(e.value(), target, epsilon = 1e-14);
                for c in &e.coeffs()[1..] {
                    assert!(c.abs() < 1e-13, "{c}");
                }
            }
        }
    }
}
