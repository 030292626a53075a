//! Riemannian data of `alpha` and the covariant-derivative tensors of `beta`.
//!
//! This path never differentiates a Finsler function. It evaluates `a_ij(x)`
//! and `b_i(x)` as order-3 jets in `x`, builds Christoffel symbols and
//! covariant derivatives from explicit formulas, and contracts the results
//! with `y` only at the end. Indices are raised and lowered with `a_ij`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::finsler::{FinslerMetric, TangentSample, PIVOT_FLOOR};
use crate::jets::{self, Jet, JetContext};
use crate::linalg::{self, Matrix};

/// Jet order used for `a_ij(x)` and `b_i(x)`.
const X_ORDER: usize = 3;

/// Symmetric matrix of coordinate expressions `a_ij(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaSpec {
    entries: Vec<Vec<Expr>>,
}

impl AlphaSpec {
    pub fn new(entries: Vec<Vec<Expr>>) -> Result<Self> {
        let n = entries.len();
        if n == 0 || n > crate::expr::MAX_COORDS {
            return Err(Error::Invalid(format!("alpha dimension must be in 1..=8, got {n}")));
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Invalid(format!("row {i} of a has {} entries, expected {n}", row.len())));
            }
            for (j, e) in row.iter().enumerate() {
                e.check_dim(n)?;
                if j < i && *e != entries[j][i] {
                    return Err(Error::Invalid(format!("a is not symmetric at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        Ok(Self { entries })
    }

    /// Parse a square matrix of expression strings.
    pub fn parse<S: AsRef<str>>(rows: &[Vec<S>]) -> Result<Self> {
        let entries = rows
            .iter()
            .map(|r| r.iter().map(|s| crate::expr::parse(s.as_ref())).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(entries)
    }

    pub fn euclidean(n: usize) -> Self {
        let entries = (0..n)
            .map(|i| (0..n).map(|j| Expr::Number(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        Self { entries }
    }

    /// `a_ij = factor(x) * delta_ij`.
    pub fn conformal(n: usize, factor: Expr) -> Self {
        let entries = (0..n)
            .map(|i| (0..n).map(|j| if i == j { factor.clone() } else { Expr::Number(0.0) }).collect())
            .collect();
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.entries
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Result<Vec<Vec<Jet>>> {
        let n = self.dim();
        let mut out: Vec<Vec<Jet>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                row.push(if j < i { out[j][i].clone() } else { self.entries[i][j].eval_jets(x)? });
            }
            out.push(row);
        }
        Ok(out)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Matrix> {
        self.entries
            .iter()
            .map(|r| r.iter().map(|e| e.eval(x).map_err(Error::from)).collect())
            .collect()
    }

    /// `alpha = sqrt(a_ij y^i y^j)` over jets.
    pub fn alpha_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        Ok(quadratic(&self.eval_jets(x)?, y).sqrt()?)
    }
}

fn quadratic(a: &[Vec<Jet>], y: &[Jet]) -> Jet {
    let mut acc = Jet::zero(y[0].context());
    for (i, row) in a.iter().enumerate() {
        for (j, aij) in row.iter().enumerate() {
            acc += &(&(aij * &y[i]) * &y[j]);
        }
    }
    acc
}

/// Covector of coordinate expressions `b_i(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSpec {
    comps: Vec<Expr>,
}

impl BetaSpec {
    pub fn new(comps: Vec<Expr>) -> Result<Self> {
        let n = comps.len();
        for c in &comps {
            c.check_dim(n)?;
        }
        Ok(Self { comps })
    }

    pub fn parse<S: AsRef<str>>(comps: &[S]) -> Result<Self> {
        Self::new(comps.iter().map(|s| crate::expr::parse(s.as_ref())).collect::<Result<Vec<_>, _>>()?)
    }

    pub fn zero(n: usize) -> Self {
        Self { comps: vec![Expr::Number(0.0); n] }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comps(&self) -> &[Expr] {
        &self.comps
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Result<Vec<Jet>> {
        self.comps.iter().map(|e| e.eval_jets(x).map_err(Error::from)).collect()
    }

    pub fn beta_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let mut acc = Jet::zero(y[0].context());
        for (b, yi) in self.eval_jets(x)?.iter().zip(y) {
            acc += &(b * yi);
        }
        Ok(acc)
    }
}

/// `F = alpha`.
#[derive(Debug, Clone)]
pub struct RiemannianMetric {
    pub alpha: AlphaSpec,
}

impl FinslerMetric for RiemannianMetric {
    fn dim(&self) -> usize {
        self.alpha.dim()
    }

    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        self.alpha.alpha_jet(x, y)
    }
}

/// Sign of the `b^l R_klij` term in the first Ricci identity.
///
/// With `R_ijkl = K (a_ik a_jl - a_il a_jk)` on constant curvature `K`, the
/// identity `s_ij|k = r_ik|j - r_jk|i - b^l R_klij` holds only with the
/// opposite sign on the curvature term. The other three identities hold as
/// written. [`calibrate_klij_sign`] selects the sign numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum KlijSign {
    AsWritten,
    Alternate,
}

impl KlijSign {
    /// Coefficient of `b^l R_klij` on the right-hand side.
    pub fn coefficient(self) -> f64 {
        match self {
            KlijSign::AsWritten => -1.0,
            KlijSign::Alternate => 1.0,
        }
    }
}

/// Curvature convention used by [`ricci_identity_residuals`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IdentityConvention {
    pub klij: KlijSign,
    /// Negates every curvature term; the identities must then fail.
    pub flipped: bool,
}

impl IdentityConvention {
    pub fn calibrated() -> Self {
        Self { klij: calibrate_klij_sign(), flipped: false }
    }

    pub fn flipped(self) -> Self {
        Self { flipped: !self.flipped, ..self }
    }

    fn curvature_factor(self) -> f64 {
        if self.flipped {
            -1.0
        } else {
            1.0
        }
    }
}

/// Levi-Civita data of `alpha` at one point.
#[derive(Debug, Clone, Serialize)]
pub struct RiemannData {
    pub x: Vec<f64>,
    pub a: Matrix,
    pub a_inv: Matrix,
    /// `christoffel[i][j][k] = Gamma^i_jk`
    pub christoffel: Vec<Vec<Vec<f64>>>,
    /// `riemann4[i][j][k][l] = R_ijkl`, fully lowered, with
    /// `R_ijkl = K (a_ik a_jl - a_il a_jk)` on a space of constant curvature.
    pub riemann4: Vec<Vec<Vec<Vec<f64>>>>,
    /// `ricci[j][l] = a^ik R_ijkl`
    pub ricci: Matrix,
}

impl RiemannData {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// `Ric_alpha(y) = Ric_ij y^i y^j`
    pub fn ricci_alpha(&self, y: &[f64]) -> f64 {
        linalg::bilinear(&self.ricci, y, y)
    }

    /// Scalar curvature `a^ij Ric_ij`.
    pub fn scalar_curvature(&self) -> f64 {
        contract2(&self.a_inv, &self.ricci)
    }

    /// Sectional curvature; in two dimensions this is the Gauss curvature
    /// `lambda` with `Ric_alpha = lambda alpha^2`.
    pub fn sectional_curvature(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = self.dim();
        let mut num = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        num += self.riemann4[i][j][k][l] * u[i] * v[j] * u[k] * v[l];
                    }
                }
            }
        }
        let uu = linalg::bilinear(&self.a, u, u);
        let vv = linalg::bilinear(&self.a, v, v);
        let uv = linalg::bilinear(&self.a, u, v);
        num / (uu * vv - uv * uv)
    }

    /// Largest violation of `R_ijkl = -R_ijlk` and the first Bianchi identity.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.dim();
        let r = &self.riemann4;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        worst = worst.max((r[i][j][k][l] + r[i][j][l][k]).abs());
                        worst = worst.max((r[i][j][k][l] + r[i][k][l][j] + r[i][l][j][k]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Spray of `alpha`: `G^i = 1/2 Gamma^i_jk y^j y^k`.
    pub fn spray(&self, y: &[f64]) -> Vec<f64> {
        self.christoffel.iter().map(|gi| 0.5 * linalg::bilinear(gi, y, y)).collect()
    }
}

fn contract2(up: &[Vec<f64>], low: &[Vec<f64>]) -> f64 {
    up.iter().zip(low).map(|(u, l)| u.iter().zip(l).map(|(a, b)| a * b).sum::<f64>()).sum()
}

/// Jets of the Riemannian data; valid orders: `a` 3, `Gamma` 2.
pub(crate) struct AlphaJets {
    ctx: Arc<JetContext>,
    coords: Vec<Jet>,
    a: Vec<Vec<Jet>>,
    a_inv: Vec<Vec<Jet>>,
    gamma: Vec<Vec<Vec<Jet>>>,
    data: RiemannData,
}

impl AlphaJets {
    pub(crate) fn new(alpha: &AlphaSpec, x: &[f64]) -> Result<Self> {
        let n = alpha.dim();
        if x.len() != n {
            return Err(Error::Invalid(format!("point has {} coordinates, alpha has dimension {n}", x.len())));
        }
        let ctx = JetContext::new(n, X_ORDER)?;
        let coords: Vec<Jet> = x.iter().enumerate().map(|(i, &v)| Jet::variable(&ctx, i, v)).collect::<Result<_, _>>()?;
        let a = alpha.eval_jets(&coords)?;
        let a_val: Matrix = a.iter().map(|r| r.iter().map(Jet::value).collect()).collect();
        linalg::cholesky(&a_val).map_err(|_| Error::NotPositiveDefinite)?;
        let a_inv = jets::invert_matrix(&a, PIVOT_FLOOR)?;

        // Gamma^i_jk = 1/2 a^il (d_j a_lk + d_k a_lj - d_l a_jk)
        let da: Vec<Vec<Vec<Jet>>> =
            (0..n).map(|k| a.iter().map(|row| row.iter().map(|e| e.derivative(k)).collect()).collect()).collect();
        let mut lower = vec![vec![vec![Jet::zero(&ctx); n]; n]; n];
        for l in 0..n {
            for j in 0..n {
                for k in 0..n {
                    lower[l][j][k] = (&(&da[j][l][k] + &da[k][l][j]) - &da[l][j][k]).scale(0.5);
                }
            }
        }
        let gamma: Vec<Vec<Vec<Jet>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| {
                                let mut acc = Jet::zero(&ctx);
                                for l in 0..n {
                                    acc += &(&a_inv[i][l] * &lower[l][j][k]);
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let gv = |i: usize, j: usize, k: usize| gamma[i][j][k].value();
        // R^i_jkl = d_k Gamma^i_jl - d_l Gamma^i_jk + Gamma^i_km Gamma^m_jl - Gamma^i_lm Gamma^m_jk
        let mut up = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut r = gamma[i][j][l].derivative(k).value() - gamma[i][j][k].derivative(l).value();
                        for m in 0..n {
                            r += gv(i, k, m) * gv(m, j, l) - gv(i, l, m) * gv(m, j, k);
                        }
                        up[i][j][k][l] = r;
                    }
                }
            }
        }
        let a_inv_val: Matrix = a_inv.iter().map(|r| r.iter().map(Jet::value).collect()).collect();
        let mut riemann4 = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        riemann4[i][j][k][l] = (0..n).map(|m| a_val[i][m] * up[m][j][k][l]).sum();
                    }
                }
            }
        }
        let ricci: Matrix = (0..n).map(|j| (0..n).map(|l| (0..n).map(|k| up[k][j][k][l]).sum()).collect()).collect();
        let christoffel = (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| gv(i, j, k)).collect()).collect()).collect();
        let data = RiemannData { x: x.to_vec(), a: a_val, a_inv: a_inv_val, christoffel, riemann4, ricci };
        Ok(Self { ctx, coords, a, a_inv, gamma, data })
    }

    pub(crate) fn coords(&self) -> &[Jet] {
        &self.coords
    }

    /// `a^ij b_i b_j` as a jet.
    pub(crate) fn norm_sq(&self, b: &[Jet]) -> Jet {
        let mut acc = Jet::zero(&self.ctx);
        for (lo, hi) in b.iter().zip(self.raise(b)) {
            acc += &(lo * &hi);
        }
        acc
    }

    fn n(&self) -> usize {
        self.a.len()
    }

    fn raise(&self, v: &[Jet]) -> Vec<Jet> {
        self.a_inv
            .iter()
            .map(|row| {
                let mut acc = Jet::zero(&self.ctx);
                for (aij, vj) in row.iter().zip(v) {
                    acc += &(aij * vj);
                }
                acc
            })
            .collect()
    }

    /// `T^i_j = a^ik T_kj`
    fn raise_first(&self, t: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
        let n = self.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut acc = Jet::zero(&self.ctx);
                        for k in 0..n {
                            acc += &(&self.a_inv[i][k] * &t[k][j]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// `v_{j|k} = d_k v_j - Gamma^m_jk v_m`
    fn cov_covector(&self, v: &[Jet]) -> Vec<Vec<Jet>> {
        let n = self.n();
        (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| {
                        let mut acc = v[j].derivative(k);
                        for m in 0..n {
                            acc = &acc - &(&self.gamma[m][j][k] * &v[m]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// `T_{ij|k} = d_k T_ij - Gamma^m_ik T_mj - Gamma^m_jk T_im`
    fn cov_tensor(&self, t: &[Vec<Jet>]) -> Vec<Vec<Vec<Jet>>> {
        let n = self.n();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| {
                                let mut acc = t[i][j].derivative(k);
                                for m in 0..n {
                                    acc = &acc - &(&self.gamma[m][i][k] * &t[m][j]);
                                    acc = &acc - &(&self.gamma[m][j][k] * &t[i][m]);
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }
}

fn values1(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::value).collect()
}

fn values2(v: &[Vec<Jet>]) -> Matrix {
    v.iter().map(|r| values1(r)).collect()
}

fn values3(v: &[Vec<Vec<Jet>>]) -> Vec<Matrix> {
    v.iter().map(|r| values2(r)).collect()
}

fn grad(j: &Jet, n: usize) -> Vec<f64> {
    (0..n).map(|k| j.derivative(k).value()).collect()
}

/// The full `beta` tensor bundle at one point.
#[derive(Debug, Clone, Serialize)]
pub struct AbTensors {
    pub b: Vec<f64>,
    pub b_up: Vec<f64>,
    pub b_sq: f64,
    pub b_sq_grad: Vec<f64>,
    /// `bcov[i][j] = b_{i|j}`
    pub bcov: Matrix,
    pub r: Matrix,
    pub s: Matrix,
    /// `r_up[i][j] = r^i_j`
    pub r_up: Matrix,
    pub s_up: Matrix,
    pub q: Matrix,
    pub t: Matrix,
    pub r_vec: Vec<f64>,
    pub s_vec: Vec<f64>,
    pub q_vec: Vec<f64>,
    pub t_vec: Vec<f64>,
    /// `r^k_k`
    pub r_trace: f64,
    /// `t^k_k`
    pub t_trace: f64,
    /// `d_k r^m_m`
    pub r_trace_grad: Vec<f64>,
    /// `r_cov[i][j][k] = r_{ij|k}`
    pub r_cov: Vec<Matrix>,
    pub s_cov: Vec<Matrix>,
    /// `r_vec_cov[j][k] = r_{j|k}`
    pub r_vec_cov: Matrix,
    pub s_vec_cov: Matrix,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl AbTensors {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn beta(&self, y: &[f64]) -> f64 {
        dot(&self.b, y)
    }

    pub fn r00(&self, y: &[f64]) -> f64 {
        linalg::bilinear(&self.r, y, y)
    }

    pub fn s0(&self, y: &[f64]) -> f64 {
        dot(&self.s_vec, y)
    }

    pub fn r0(&self, y: &[f64]) -> f64 {
        dot(&self.r_vec, y)
    }

    pub fn t0(&self, y: &[f64]) -> f64 {
        dot(&self.t_vec, y)
    }

    pub fn q00(&self, y: &[f64]) -> f64 {
        linalg::bilinear(&self.q, y, y)
    }

    pub fn t00(&self, y: &[f64]) -> f64 {
        linalg::bilinear(&self.t, y, y)
    }

    /// `s^i_0 = s^i_j y^j`
    pub fn s_up0(&self, y: &[f64]) -> Vec<f64> {
        linalg::matvec(&self.s_up, y)
    }

    /// `s_m s^m`
    pub fn s_norm_sq(&self, a_inv: &[Vec<f64>]) -> f64 {
        linalg::bilinear(a_inv, &self.s_vec, &self.s_vec)
    }

    /// `r_{00|0}`
    pub fn r00_0(&self, y: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    acc += self.r_cov[i][j][k] * y[i] * y[j] * y[k];
                }
            }
        }
        acc
    }

    /// `s_{0|0}`
    pub fn s0_0(&self, y: &[f64]) -> f64 {
        linalg::bilinear(&self.s_vec_cov, y, y)
    }

    /// Covector `j -> a^km s_{mj|k}` (i.e. `s^k_{j|k}`).
    pub fn s_div(&self, a_inv: &[Vec<f64>]) -> Vec<f64> {
        div_first(&self.s_cov, a_inv)
    }

    /// Covector `j -> r^k_{j|k}`.
    pub fn r_div(&self, a_inv: &[Vec<f64>]) -> Vec<f64> {
        div_first(&self.r_cov, a_inv)
    }

    /// `s^k_{0|k}`
    pub fn s_div0(&self, a_inv: &[Vec<f64>], y: &[f64]) -> f64 {
        dot(&self.s_div(a_inv), y)
    }
}

fn div_first(cov: &[Matrix], a_inv: &[Vec<f64>]) -> Vec<f64> {
    let n = cov.len();
    (0..n)
        .map(|j| {
            let mut acc = 0.0;
            for k in 0..n {
                for m in 0..n {
                    acc += a_inv[k][m] * cov[m][j][k];
                }
            }
            acc
        })
        .collect()
}

pub(crate) fn tensors_from_jets(aj: &AlphaJets, b: &[Jet]) -> AbTensors {
    let n = aj.n();
    let b_up = aj.raise(b);
    let b_sq = aj.norm_sq(b);
    let bcov = aj.cov_covector(b);
    let r: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| (&bcov[i][j] + &bcov[j][i]).scale(0.5)).collect()).collect();
    let s: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| (&bcov[i][j] - &bcov[j][i]).scale(0.5)).collect()).collect();
    let r_up = aj.raise_first(&r);
    let s_up = aj.raise_first(&s);
    let lower_times_mixed = |lo: &[Vec<Jet>], mixed: &[Vec<Jet>]| -> Vec<Vec<Jet>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut acc = Jet::zero(&aj.ctx);
                        for m in 0..n {
                            acc += &(&lo[i][m] * &mixed[m][j]);
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    };
    let q = lower_times_mixed(&r, &s_up);
    let t = lower_times_mixed(&s, &s_up);
    let contract_b = |m: &[Vec<Jet>]| -> Vec<Jet> {
        (0..n)
            .map(|j| {
                let mut acc = Jet::zero(&aj.ctx);
                for i in 0..n {
                    acc += &(&b_up[i] * &m[i][j]);
                }
                acc
            })
            .collect()
    };
    let r_vec = contract_b(&r);
    let s_vec = contract_b(&s);
    let q_vec = contract_b(&q);
    let t_vec = contract_b(&t);
    let trace = |m: &[Vec<Jet>]| {
        let mut acc = Jet::zero(&aj.ctx);
        for (k, row) in m.iter().enumerate() {
            acc += &row[k];
        }
        acc
    };
    let r_trace = trace(&r_up);
    let t_up = aj.raise_first(&t);
    let t_trace = trace(&t_up);

    AbTensors {
        b: values1(b),
        b_up: values1(&b_up),
        b_sq: b_sq.value(),
        b_sq_grad: grad(&b_sq, n),
        bcov: values2(&bcov),
        r: values2(&r),
        s: values2(&s),
        r_up: values2(&r_up),
        s_up: values2(&s_up),
        q: values2(&q),
        t: values2(&t),
        r_vec: values1(&r_vec),
        s_vec: values1(&s_vec),
        q_vec: values1(&q_vec),
        t_vec: values1(&t_vec),
        r_trace: r_trace.value(),
        t_trace: t_trace.value(),
        r_trace_grad: grad(&r_trace, n),
        r_cov: values3(&aj.cov_tensor(&r)),
        s_cov: values3(&aj.cov_tensor(&s)),
        r_vec_cov: values2(&aj.cov_covector(&r_vec)),
        s_vec_cov: values2(&aj.cov_covector(&s_vec)),
    }
}

pub fn riemann_data(alpha: &AlphaSpec, x: &[f64]) -> Result<RiemannData> {
    Ok(AlphaJets::new(alpha, x)?.data)
}

/// Riemannian data together with the `beta` tensors at `x`.
pub fn ab_tensors(alpha: &AlphaSpec, beta: &BetaSpec, x: &[f64]) -> Result<(RiemannData, AbTensors)> {
    check_pair(alpha, beta)?;
    let aj = AlphaJets::new(alpha, x)?;
    let b = beta.eval_jets(aj.coords())?;
    let t = tensors_from_jets(&aj, &b);
    Ok((aj.data, t))
}

pub(crate) fn check_pair(alpha: &AlphaSpec, beta: &BetaSpec) -> Result<()> {
    if alpha.dim() != beta.dim() {
        return Err(Error::Invalid(format!(
            "alpha has dimension {}, beta has {} components",
            alpha.dim(),
            beta.dim()
        )));
    }
    Ok(())
}

/// `phi(s) = (1 + s)^p` and the coefficients of the `(alpha, beta)` spray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SprayCoefficients {
    pub q: f64,
    pub theta: f64,
    pub psi: f64,
    pub delta: f64,
}

/// `Q = phi'/(phi - s phi')`, `Theta = (Q - s Q')/(2 Delta)`,
/// `Psi = Q'/(2 Delta)`, `Delta = 1 + s Q + (b^2 - s^2) Q'` for the p-power
/// profile.
pub fn ppower_coefficients(p: f64, s: f64, b_sq: f64) -> Result<SprayCoefficients> {
    let one_plus = 1.0 + s;
    if !(one_plus > 0.0) {
        return Err(Error::Domain(format!("1 + s = {one_plus} is not positive")));
    }
    // phi - s phi' = (1+s)^(p-1) (1 + (1-p) s)
    let den = 1.0 + (1.0 - p) * s;
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateValue(format!("phi - s phi' vanishes at s = {s}")));
    }
    let q = p / den;
    let dq = p * (p - 1.0) / (den * den);
    let delta = 1.0 + s * q + (b_sq - s * s) * dq;
    if delta.abs() < 1e-12 {
        return Err(Error::DegenerateValue(format!("Delta vanishes at s = {s}")));
    }
    Ok(SprayCoefficients { q, theta: (q - s * dq) / (2.0 * delta), psi: dq / (2.0 * delta), delta })
}

/// Spray of `F = alpha (1 + beta/alpha)^p` assembled from the Riemannian
/// spray of `alpha` and the `beta` tensors:
/// `G^i = G^i_alpha + alpha Q s^i_0 + alpha^-1 Theta (r00 - 2 alpha Q s0) y^i + Psi (r00 - 2 alpha Q s0) b^i`.
pub fn structural_spray(alpha: &AlphaSpec, beta: &BetaSpec, p: f64, sample: &TangentSample) -> Result<Vec<f64>> {
    let (rd, ab) = ab_tensors(alpha, beta, &sample.x)?;
    structural_spray_from(&rd, &ab, p, &sample.y)
}

pub fn structural_spray_from(rd: &RiemannData, ab: &AbTensors, p: f64, y: &[f64]) -> Result<Vec<f64>> {
    let a2 = linalg::bilinear(&rd.a, y, y);
    if !(a2 > 0.0) {
        return Err(Error::Domain("alpha(y) = 0".into()));
    }
    let alpha = a2.sqrt();
    let s = ab.beta(y) / alpha;
    let c = ppower_coefficients(p, s, ab.b_sq)?;
    let core = ab.r00(y) - 2.0 * alpha * c.q * ab.s0(y);
    let s_up0 = ab.s_up0(y);
    let g_alpha = rd.spray(y);
    Ok((0..y.len())
        .map(|i| g_alpha[i] + alpha * c.q * s_up0[i] + c.theta * core * y[i] / alpha + c.psi * core * ab.b_up[i])
        .collect())
}

/// Ricci curvature of the Randers metric `alpha + beta` from the tensors of
/// `alpha` and `beta` alone.
pub fn randers_ricci(alpha: &AlphaSpec, beta: &BetaSpec, sample: &TangentSample) -> Result<f64> {
    let (rd, ab) = ab_tensors(alpha, beta, &sample.x)?;
    randers_ricci_from(&rd, &ab, &sample.y)
}

pub fn randers_ricci_from(rd: &RiemannData, ab: &AbTensors, y: &[f64]) -> Result<f64> {
    let n = y.len() as f64;
    let a2 = linalg::bilinear(&rd.a, y, y);
    if !(a2 > 0.0) {
        return Err(Error::Domain("alpha(y) = 0".into()));
    }
    let alpha = a2.sqrt();
    let f = alpha + ab.beta(y);
    if !(f > 0.0) {
        return Err(Error::Domain(format!("F = {f} is not positive")));
    }
    let r00 = ab.r00(y);
    let s0 = ab.s0(y);
    let base = rd.ricci_alpha(y) + 2.0 * alpha * ab.s_div0(&rd.a_inv, y) - 2.0 * ab.t00(y) - a2 * ab.t_trace;
    let quad = 3.0 * (r00 - 2.0 * alpha * s0).powi(2) / (4.0 * f * f);
    let lin = (4.0 * alpha * (ab.q00(y) - alpha * ab.t0(y)) - ab.r00_0(y) + 2.0 * alpha * ab.s0_0(y)) / (2.0 * f);
    Ok(base + (n - 1.0) * (quad + lin))
}

/// Residuals of the four Ricci identities relating the covariant
/// derivatives of `r_ij`, `s_ij` and the curvature of `alpha`:
///
/// 1. `s_ij|k = r_ik|j - r_jk|i - b^l R_klij`
/// 2. `s^k_0|k = r^k_k|0 - r^k_0|k + b^l Ric_l0`
/// 3. `b^k s_0|k = r_k s^k_0 - t_0 + b^k b^l r_kl|0 - b^k b^l r_k0|l`
/// 4. `s^k_|k = r^k_|k - t^k_k - r^i_j r^j_i - b^i r^k_k|i - b^k b^i Ric_ik`
///
/// The sign of the curvature term in (1) follows `conv.klij`. Identities
/// with a free `0` index are compared componentwise (max norm), so no `y`
/// is needed.
pub fn ricci_identity_residuals(
    alpha: &AlphaSpec,
    beta: &BetaSpec,
    x: &[f64],
    conv: IdentityConvention,
) -> Result<[f64; 4]> {
    let (rd, ab) = ab_tensors(alpha, beta, x)?;
    Ok(ricci_identity_residuals_from(&rd, &ab, conv))
}

pub fn ricci_identity_residuals_from(rd: &RiemannData, ab: &AbTensors, conv: IdentityConvention) -> [f64; 4] {
    let n = ab.dim();
    let kappa = conv.curvature_factor();
    let ai = &rd.a_inv;
    let rm = &rd.riemann4;
    let ric = &rd.ricci;

    let mut res1: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let curv: f64 = (0..n).map(|l| ab.b_up[l] * rm[k][l][i][j]).sum();
                let rhs = ab.r_cov[i][k][j] - ab.r_cov[j][k][i] + kappa * conv.klij.coefficient() * curv;
                res1 = res1.max((ab.s_cov[i][j][k] - rhs).abs());
            }
        }
    }

    let s_div = ab.s_div(ai);
    let r_div = ab.r_div(ai);
    let mut res2: f64 = 0.0;
    for j in 0..n {
        let curv: f64 = (0..n).map(|l| ab.b_up[l] * ric[l][j]).sum();
        let rhs = ab.r_trace_grad[j] - r_div[j] + kappa * curv;
        res2 = res2.max((s_div[j] - rhs).abs());
    }

    let mut res3: f64 = 0.0;
    for j in 0..n {
        let lhs: f64 = (0..n).map(|k| ab.b_up[k] * ab.s_vec_cov[j][k]).sum();
        let mut rhs: f64 = (0..n).map(|k| ab.r_vec[k] * ab.s_up[k][j]).sum::<f64>() - ab.t_vec[j];
        for k in 0..n {
            for l in 0..n {
                rhs += ab.b_up[k] * ab.b_up[l] * (ab.r_cov[k][l][j] - ab.r_cov[k][j][l]);
            }
        }
        res3 = res3.max((lhs - rhs).abs());
    }

    let s_up_div: f64 = (0..n).map(|k| (0..n).map(|j| ai[k][j] * ab.s_vec_cov[j][k]).sum::<f64>()).sum();
    let r_up_div: f64 = (0..n).map(|k| (0..n).map(|j| ai[k][j] * ab.r_vec_cov[j][k]).sum::<f64>()).sum();
    let rr: f64 = (0..n).map(|i| (0..n).map(|j| ab.r_up[i][j] * ab.r_up[j][i]).sum::<f64>()).sum();
    let rhs4 = r_up_div - ab.t_trace - rr - dot(&ab.b_up, &ab.r_trace_grad)
        - kappa * linalg::bilinear(ric, &ab.b_up, &ab.b_up);
    let res4 = (s_up_div - rhs4).abs();

    [res1, res2, res3, res4]
}

/// Picks the sign of the `b^l R_klij` term that makes the first identity
/// hold on a fixed curved instance with a non-closed one-form.
pub fn calibrate_klij_sign() -> KlijSign {
    static CHOICE: std::sync::OnceLock<KlijSign> = std::sync::OnceLock::new();
    *CHOICE.get_or_init(|| {
        let alpha = AlphaSpec::conformal(2, crate::expr::parse("4/(1 + x1^2 + x2^2)^2").expect("literal parses"));
        let beta = BetaSpec::parse(&["0.2*x2 + 0.1*x1^2", "-0.3*x1*x2"]).expect("literal parses");
        let (rd, ab) = ab_tensors(&alpha, &beta, &[0.3, -0.2]).expect("sphere chart is regular at the probe");
        let res = |klij| ricci_identity_residuals_from(&rd, &ab, IdentityConvention { klij, flipped: false })[0];
        if res(KlijSign::AsWritten) <= res(KlijSign::Alternate) {
            KlijSign::AsWritten
        } else {
            KlijSign::Alternate
        }
    })
}

/// Gauss curvature of a conformally flat 2D metric `a = e^(2 sigma) delta`
/// from `lambda = -e^(-2 sigma) (sigma_11 + sigma_22)`.
pub fn conformal_gauss_curvature(alpha: &AlphaSpec, x: &[f64]) -> Result<f64> {
    if alpha.dim() != 2 {
        return Err(Error::Invalid("conformal curvature formula needs n = 2".into()));
    }
    let ctx = JetContext::new(2, X_ORDER)?;
    let coords: Vec<Jet> = x.iter().enumerate().map(|(i, &v)| Jet::variable(&ctx, i, v)).collect::<Result<_, _>>()?;
    let a = alpha.eval_jets(&coords)?;
    let off = a[0][1].coeffs().iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let diff = (&a[0][0] - &a[1][1]).coeffs().iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if off > 1e-12 || diff > 1e-12 * a[0][0].value().abs().max(1.0) {
        return Err(Error::Invalid("alpha is not written in a conformally flat chart".into()));
    }
    let sigma = a[0][0].ln()?.scale(0.5);
    let lap = sigma.partial_vars(&[0, 0])? + sigma.partial_vars(&[1, 1])?;
    Ok(-(-2.0 * sigma.value()).exp() * lap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use approx::assert_relative_eq;

    fn sphere_alpha() -> AlphaSpec {
        AlphaSpec::conformal(2, parse("4/(1 + x1^2 + x2^2)^2").unwrap())
    }

    #[test]
    fn euclidean_is_flat() {
        let rd = riemann_data(&AlphaSpec::euclidean(3), &[0.1, 0.2, 0.3]).unwrap();
        assert!(rd.christoffel.iter().flatten().flatten().all(|g| *g == 0.0));
        assert!(rd.riemann4.iter().flatten().flatten().flatten().all(|g| *g == 0.0));
    }

    #[test]
    fn polar_chart_christoffel() {
        let alpha = AlphaSpec::parse(&[vec!["1", "0"], vec!["0", "x1^2"]]).unwrap();
        let rd = riemann_data(&alpha, &[2.0, 0.7]).unwrap();
        assert_relative_eq!(rd.christoffel[0][1][1], -2.0, epsilon = 1e-14);
        assert_relative_eq!(rd.christoffel[1][0][1], 0.5, epsilon = 1e-14);
        assert_relative_eq!(rd.christoffel[1][1][0], 0.5, epsilon = 1e-14);
        assert!(rd.riemann4.iter().flatten().flatten().flatten().all(|g| g.abs() < 1e-13));
    }

    #[test]
    fn sphere_convention() {
        let rd = riemann_data(&sphere_alpha(), &[0.3, -0.4]).unwrap();
        // R_ijkl = K (a_ik a_jl - a_il a_jk) with K = 1
        let a = &rd.a;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let expect = a[i][k] * a[j][l] - a[i][l] * a[j][k];
                        assert_relative_eq!(rd.riemann4[i][j][k][l], expect, epsilon = 1e-12);
                    }
                }
            }
        }
        assert_relative_eq!(rd.sectional_curvature(&[1.0, 0.0], &[0.3, 1.0]), 1.0, epsilon = 1e-12);
        assert_relative_eq!(rd.ricci_alpha(&[0.2, 0.7]), linalg::bilinear(a, &[0.2, 0.7], &[0.2, 0.7]), epsilon = 1e-12);
        assert!(rd.symmetry_residual() < 1e-12);
        assert_relative_eq!(conformal_gauss_curvature(&sphere_alpha(), &[0.3, -0.4]).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shear_one_form_tensors() {
        // flat alpha, b = (0.3 x2, 0) at x = (0, 1)
        let beta = BetaSpec::parse(&["0.3*x2", "0"]).unwrap();
        let (_, ab) = ab_tensors(&AlphaSpec::euclidean(2), &beta, &[0.0, 1.0]).unwrap();
        assert_relative_eq!(ab.r[0][1], 0.15, epsilon = 1e-15);
        assert_relative_eq!(ab.s[0][1], 0.15, epsilon = 1e-15);
        assert_relative_eq!(ab.s[1][0], -0.15, epsilon = 1e-15);
        assert_relative_eq!(ab.s_vec[1], 0.045, epsilon = 1e-15);
        assert_eq!(ab.s_vec[0], 0.0);
        assert_relative_eq!(ab.t[0][0], -0.0225, epsilon = 1e-15);
        assert_relative_eq!(ab.b_sq, 0.09, epsilon = 1e-15);
    }

    #[test]
    fn parallel_form_has_no_derivatives() {
        let beta = BetaSpec::parse(&["0.2", "-0.1"]).unwrap();
        let (_, ab) = ab_tensors(&AlphaSpec::euclidean(2), &beta, &[0.5, 0.5]).unwrap();
        for m in [&ab.r, &ab.s, &ab.q, &ab.t] {
            assert!(m.iter().flatten().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn randers_coefficients_closed_form() {
        let c = ppower_coefficients(1.0, 0.3, 0.2).unwrap();
        assert_eq!(c.q, 1.0);
        assert_relative_eq!(c.delta, 1.3, epsilon = 1e-15);
        assert_relative_eq!(c.theta, 1.0 / 2.6, epsilon = 1e-15);
        assert_eq!(c.psi, 0.0);
    }

    #[test]
    fn asymmetric_alpha_rejected() {
        assert!(AlphaSpec::parse(&[vec!["1", "x1"], vec!["0", "1"]]).is_err());
        assert!(AlphaSpec::parse(&[vec!["1", "0"]]).is_err());
        let err = riemann_data(&AlphaSpec::parse(&[vec!["1", "0"], vec!["0", "-1"]]).unwrap(), &[0.0, 0.0]);
        assert_eq!(err.unwrap_err(), Error::NotPositiveDefinite);
    }
}
