//! Generic Finsler curvature from any jet-evaluable `F(x, y)`.
//!
//! Everything is computed from one order-4 jet of `F` in the `2n` variables
//! `(x, y)`: the fundamental tensor from two `y`-derivatives of `F^2`, the
//! spray from one more `x`-derivative, and the Riemann curvature from two
//! derivatives of the spray.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{self, Jet, JetContext};
use crate::linalg::{self, Matrix};
use crate::sampling;

/// Relative pivot floor used when inverting `g`.
pub const PIVOT_FLOOR: f64 = 1e-12;

/// A base point `x` and a nonzero direction `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl TangentSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn reversed(&self) -> Self {
        Self { x: self.x.clone(), y: self.y.iter().map(|v| -v).collect() }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { x: self.x.clone(), y: self.y.iter().map(|v| v * t).collect() }
    }
}

/// A Finsler function on an open set of `TM`, evaluable over jets.
pub trait FinslerMetric: Send + Sync {
    fn dim(&self) -> usize;

    /// Jet of `F` given coordinate jets for `x` and `y`.
    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet>;

    /// Domain predicate. The default accepts any `y != 0` where `F`
    /// evaluates to a positive number.
    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        y.iter().any(|v| *v != 0.0) && matches!(self.value(x, y), Ok(f) if f > 0.0)
    }

    fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let n = self.dim();
        let ctx = JetContext::new(2 * n, 1)?;
        let (xs, ys) = lift(&ctx, x, y)?;
        Ok(self.eval_jet(&xs, &ys)?.value())
    }
}

impl<T: FinslerMetric + ?Sized> FinslerMetric for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        (**self).eval_jet(x, y)
    }
    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        (**self).in_domain(x, y)
    }
}

impl<T: FinslerMetric + ?Sized> FinslerMetric for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        (**self).eval_jet(x, y)
    }
    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        (**self).in_domain(x, y)
    }
}

/// Metric given by a closure, mostly for tests and ad-hoc experiments.
pub struct FnMetric<F> {
    dim: usize,
    func: F,
}

impl<F> FnMetric<F>
where
    F: Fn(&[Jet], &[Jet]) -> Result<Jet> + Send + Sync,
{
    pub fn new(dim: usize, func: F) -> Self {
        Self { dim, func }
    }
}

impl<F> FinslerMetric for FnMetric<F>
where
    F: Fn(&[Jet], &[Jet]) -> Result<Jet> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        (self.func)(x, y)
    }
}

/// Lift `x` to variables `0..n` and `y` to `n..2n`.
pub fn lift(ctx: &Arc<JetContext>, x: &[f64], y: &[f64]) -> Result<(Vec<Jet>, Vec<Jet>)> {
    let n = x.len();
    let xs = x.iter().enumerate().map(|(i, &v)| Jet::variable(ctx, i, v)).collect::<Result<Vec<_>, _>>()?;
    let ys = y.iter().enumerate().map(|(i, &v)| Jet::variable(ctx, n + i, v)).collect::<Result<Vec<_>, _>>()?;
    Ok((xs, ys))
}

fn check_sample(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<()> {
    let n = metric.dim();
    if n < 2 {
        return Err(Error::Invalid(format!("dimension must be at least 2, got {n}")));
    }
    if s.x.len() != n || s.y.len() != n {
        return Err(Error::Invalid(format!(
            "sample has |x| = {}, |y| = {}, metric dimension {n}",
            s.x.len(),
            s.y.len()
        )));
    }
    if s.y.iter().all(|v| *v == 0.0) {
        return Err(Error::Domain("y = 0".into()));
    }
    Ok(())
}

/// Intermediate jets shared by the spray and curvature routines.
struct SprayJets {
    f: f64,
    g: Matrix,
    g_inv: Matrix,
    /// `F^2`, valid to order `order`.
    lagrangian: Jet,
    /// `G^i` as jets; valid to order `order - 2`.
    spray: Vec<Jet>,
}

fn spray_jets(metric: &dyn FinslerMetric, s: &TangentSample, order: usize) -> Result<SprayJets> {
    check_sample(metric, s)?;
    let n = metric.dim();
    let ctx = JetContext::new(2 * n, order)?;
    let (xs, ys) = lift(&ctx, &s.x, &s.y)?;
    let f = metric.eval_jet(&xs, &ys)?;
    if !(f.value() > 0.0) {
        return Err(Error::Domain(format!("F = {} is not positive", f.value())));
    }
    let l = &f * &f;
    let ly: Vec<Jet> = (0..n).map(|j| l.derivative(n + j)).collect();
    let g_jets: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| ly[i].derivative(n + j).scale(0.5)).collect()).collect();
    let g: Matrix = g_jets.iter().map(|r| r.iter().map(Jet::value).collect()).collect();
    linalg::cholesky(&g).map_err(|_| Error::SingularMetric("g is not positive definite".into()))?;
    let g_inv = linalg::invert(&g, PIVOT_FLOOR)?;

    // [F^2]_{x^k y^l} y^k - [F^2]_{x^l}
    let h: Vec<Jet> = (0..n)
        .map(|l_idx| {
            let mut acc = -&l.derivative(l_idx);
            for (k, yk) in ys.iter().enumerate() {
                acc += &(&ly[l_idx].derivative(k) * yk);
            }
            acc
        })
        .collect();

    let spray = if order > 2 {
        let g_inv_jets = jets::invert_matrix(&g_jets, PIVOT_FLOOR)?;
        (0..n)
            .map(|i| {
                let mut acc = Jet::zero(&ctx);
                for (gi, hl) in g_inv_jets[i].iter().zip(&h) {
                    acc += &(gi * hl);
                }
                acc.scale(0.25)
            })
            .collect()
    } else {
        (0..n)
            .map(|i| {
                let v: f64 = g_inv[i].iter().zip(&h).map(|(a, b)| a * b.value()).sum();
                Jet::constant(&ctx, 0.25 * v)
            })
            .collect()
    };
    Ok(SprayJets { f: f.value(), g, g_inv, lagrangian: l, spray })
}

/// Fundamental tensor `g_ij = 1/2 [F^2]_{y^i y^j}` and its inverse.
pub fn fundamental_tensor(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<(Matrix, Matrix)> {
    let sj = spray_jets(metric, s, 2)?;
    Ok((sj.g, sj.g_inv))
}

/// Geodesic coefficients `G^i`.
pub fn spray(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<Vec<f64>> {
    let sj = spray_jets(metric, s, 2)?;
    Ok(sj.spray.iter().map(Jet::value).collect())
}

/// All per-sample curvature quantities.
#[derive(Debug, Clone, Serialize)]
pub struct CurvaturePoint {
    pub sample: TangentSample,
    pub f: f64,
    pub g: Matrix,
    pub g_inv: Matrix,
    pub spray: Vec<f64>,
    /// `riemann[i][k] = R^i_k`
    pub riemann: Matrix,
    pub ricci: f64,
    pub einstein_scalar: f64,
}

impl CurvaturePoint {
    /// Flag curvature of the plane spanned by `y` and `u`.
    pub fn flag_curvature(&self, u: &[f64]) -> Result<f64> {
        let y = &self.sample.y;
        let ru = linalg::matvec(&self.riemann, u);
        let num = linalg::bilinear(&self.g, u, &ru);
        let guu = linalg::bilinear(&self.g, u, u);
        let gyu = linalg::bilinear(&self.g, y, u);
        let den = self.f * self.f * guu - gyu * gyu;
        if !(den > PIVOT_FLOOR * self.f * self.f * guu) {
            return Err(Error::DegeneratePlane);
        }
        Ok(num / den)
    }
}

pub fn curvature_point(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<CurvaturePoint> {
    let n = metric.dim();
    let sj = spray_jets(metric, s, 4)?;
    let g_vals: Vec<f64> = sj.spray.iter().map(Jet::value).collect();
    let dgx: Vec<Vec<Jet>> = sj.spray.iter().map(|gi| (0..n).map(|k| gi.derivative(k)).collect()).collect();
    let dgy: Vec<Vec<Jet>> =
        sj.spray.iter().map(|gi| (0..n).map(|k| gi.derivative(n + k)).collect()).collect();

    let mut riemann = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let mut r = 2.0 * dgx[i][k].value();
            for j in 0..n {
                r -= s.y[j] * dgx[i][j].derivative(n + k).value();
                r += 2.0 * g_vals[j] * dgy[i][j].derivative(n + k).value();
                r -= dgy[i][j].value() * dgy[j][k].value();
            }
            riemann[i][k] = r;
        }
    }
    let ricci: f64 = (0..n).map(|k| riemann[k][k]).sum();
    let einstein_scalar = ricci / ((n as f64 - 1.0) * sj.f * sj.f);
    Ok(CurvaturePoint {
        sample: s.clone(),
        f: sj.f,
        g: sj.g,
        g_inv: sj.g_inv,
        spray: g_vals,
        riemann,
        ricci,
        einstein_scalar,
    })
}

pub fn riemann_curvature(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<Matrix> {
    Ok(curvature_point(metric, s)?.riemann)
}

pub fn ricci(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<f64> {
    Ok(curvature_point(metric, s)?.ricci)
}

/// `lambda = Ric / ((n - 1) F^2)`.
pub fn einstein_scalar(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<f64> {
    Ok(curvature_point(metric, s)?.einstein_scalar)
}

/// `|lambda(x, y) - lambda(x, -y)|`; a domain error if `-y` is not admissible.
pub fn reversibility_residual(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<f64> {
    let rev = s.reversed();
    if !metric.in_domain(&rev.x, &rev.y) {
        return Err(Error::Domain("-y leaves the metric domain".into()));
    }
    let a = einstein_scalar(metric, s)?;
    let b = einstein_scalar(metric, &rev)?;
    Ok((a - b).abs())
}

pub fn flag_curvature(metric: &dyn FinslerMetric, s: &TangentSample, u: &[f64]) -> Result<f64> {
    curvature_point(metric, s)?.flag_curvature(u)
}

/// `F^2` as an order-4 jet in `(x, y)` and `G^i` as jets valid to order 2,
/// which are exactly the derivative orders the curvature uses.
pub fn lagrangian_and_spray_jets(metric: &dyn FinslerMetric, s: &TangentSample) -> Result<(Jet, Vec<Jet>)> {
    let sj = spray_jets(metric, s, 4)?;
    Ok((sj.lagrangian, sj.spray))
}

/// Largest deviation between jet partials and central finite differences.
///
/// Every partial of `F^2` of order 1..=4 and of `G^i` of order 1..=2 is
/// compared with the central difference, in its first variable, of the
/// next-lower partial evaluated at `(x, y) +- step e_v`. Order-1 partials of
/// `F^2` are differenced from plain `F` values, so the chain bottoms out in
/// ordinary evaluation. Deviations are relative to `max(1, |partial|)`.
pub fn fd_soundness(metric: &dyn FinslerMetric, s: &TangentSample, step: f64) -> Result<f64> {
    let n = metric.dim();
    let nv = 2 * n;
    let (l0, g0) = lagrangian_and_spray_jets(metric, s)?;
    let shifted = |v: usize, h: f64| -> Result<(Jet, Vec<Jet>)> {
        let mut t = s.clone();
        if v < n {
            t.x[v] += h;
        } else {
            t.y[v - n] += h;
        }
        lagrangian_and_spray_jets(metric, &t)
    };
    let plain_sq = |v: usize, h: f64| -> Result<f64> {
        let (mut x, mut y) = (s.x.clone(), s.y.clone());
        if v < n {
            x[v] += h;
        } else {
            y[v - n] += h;
        }
        Ok(metric.value(&x, &y)?.powi(2))
    };
    let mut plus = Vec::with_capacity(nv);
    let mut minus = Vec::with_capacity(nv);
    for v in 0..nv {
        plus.push(shifted(v, step)?);
        minus.push(shifted(v, -step)?);
    }
    let ctx = l0.context().clone();
    let mut worst: f64 = 0.0;
    for pos in 1..ctx.len() {
        let mi = ctx.multi_index(pos).to_vec();
        let degree: usize = mi.iter().map(|&e| e as usize).sum();
        let v = mi.iter().position(|&e| e > 0).expect("nonzero multi-index");
        let mut lower = mi.clone();
        lower[v] -= 1;
        let mut compare = |jet: f64, p: f64, m: f64| {
            let fd = (p - m) / (2.0 * step);
            worst = worst.max((jet - fd).abs() / jet.abs().max(1.0));
        };
        let lp = if degree == 1 {
            (plain_sq(v, step)?, plain_sq(v, -step)?)
        } else {
            (plus[v].0.partial(&lower)?, minus[v].0.partial(&lower)?)
        };
        compare(l0.partial(&mi)?, lp.0, lp.1);
        if degree <= 2 {
            for i in 0..n {
                compare(g0[i].partial(&mi)?, plus[v].1[i].partial(&lower)?, minus[v].1[i].partial(&lower)?);
            }
        }
    }
    Ok(worst)
}

/// Outcome of [`einstein_check`].
#[derive(Debug, Clone, Serialize)]
pub struct EinsteinVerdict {
    pub verdict: bool,
    pub tolerance: f64,
    pub max_spread: f64,
    pub spreads: Vec<f64>,
    /// Einstein scalar per point and admissible direction.
    pub lambdas: Vec<Vec<f64>>,
}

/// Spread of `lambda(x, .)` over `directions_per_point` evenly spread unit
/// directions at each point. Directions outside the domain are skipped.
pub fn einstein_check(
    metric: &dyn FinslerMetric,
    points: &[Vec<f64>],
    directions_per_point: usize,
    tolerance: f64,
) -> Result<EinsteinVerdict> {
    let dirs = sampling::unit_directions(metric.dim(), directions_per_point);
    let lambdas = points
        .par_iter()
        .map(|x| {
            dirs.iter()
                .filter(|y| metric.in_domain(x, y))
                .map(|y| einstein_scalar(metric, &TangentSample::new(x.clone(), y.clone())))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let spreads: Vec<f64> = lambdas
        .iter()
        .map(|ls| {
            let (lo, hi) = ls.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            if ls.is_empty() {
                f64::NAN
            } else {
                hi - lo
            }
        })
        .collect();
    let max_spread = spreads.iter().fold(0.0_f64, |m, &s| if s.is_nan() { f64::NAN } else { m.max(s) });
    Ok(EinsteinVerdict { verdict: max_spread < tolerance, tolerance, max_spread, spreads, lambdas })
}

/// Largest relative deviation from `F(x,ty) = tF`, `G(x,ty) = t^2 G`,
/// `R(x,ty) = t^2 R`, `lambda(x,ty) = lambda` over the given factors.
pub fn homogeneity_residual(metric: &dyn FinslerMetric, s: &TangentSample, factors: &[f64]) -> Result<f64> {
    let base = curvature_point(metric, s)?;
    let mut worst: f64 = 0.0;
    let rel = |a: f64, b: f64, scale: f64| (a - b).abs() / scale.max(f64::MIN_POSITIVE);
    let r_scale = linalg::max_abs(&base.riemann).max(1e-300);
    let g_scale = base.spray.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for &t in factors {
        let p = curvature_point(metric, &s.scaled(t))?;
        worst = worst.max(rel(p.f, t * base.f, t * base.f));
        for (a, b) in p.spray.iter().zip(&base.spray) {
            worst = worst.max(rel(*a, t * t * b, (t * t * g_scale).max(1e-12)));
        }
        for (ra, rb) in p.riemann.iter().flatten().zip(base.riemann.iter().flatten()) {
            worst = worst.max(rel(*ra, t * t * rb, (t * t * r_scale).max(1e-12)));
        }
        worst = worst.max(rel(p.einstein_scalar, base.einstein_scalar, base.einstein_scalar.abs().max(1.0)));
    }
    Ok(worst)
}
