//! Builders and checkers for p-power metrics `F = alpha (1 + beta/alpha)^p`.
//!
//! Covers the positivity criterion, the two-dimensional square-root family
//! parametrised by `(u, v, B)`, the Killing deformation of `beta`, and the
//! Einstein-condition residuals for Randers (`p = 1`) and square (`p = 2`)
//! metrics. Residuals of scalar equations are normalised by the larger of 1
//! and the largest term involved.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::alphabeta::{self, AbTensors, AlphaJets, AlphaSpec, BetaSpec, RiemannData};
use crate::error::{Error, Result};
use crate::expr::{self, num, Expr};
use crate::finsler::{self, FinslerMetric, TangentSample};
use crate::jets::{Jet, JetContext};
use crate::linalg;
use crate::sampling;

/// `sum |terms| = 0` residual, scaled by `max(1, |term|)`.
fn rel(terms: &[f64]) -> f64 {
    let sum: f64 = terms.iter().sum();
    let scale = terms.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
    sum.abs() / scale
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Data of a p-power metric.
#[derive(Debug, Clone)]
pub struct PPowerSpec {
    pub alpha: AlphaSpec,
    pub beta: BetaSpec,
    pub p: f64,
}

impl PPowerSpec {
    pub fn new(alpha: AlphaSpec, beta: BetaSpec, p: f64) -> Result<Self> {
        if p == 0.0 || !p.is_finite() {
            return Err(Error::Invalid(format!("exponent p must be finite and nonzero, got {p}")));
        }
        alphabeta::check_pair(&alpha, &beta)?;
        Ok(Self { alpha, beta, p })
    }

    pub fn dim(&self) -> usize {
        self.alpha.dim()
    }

    /// `(alpha(x, y), beta(x, y))`.
    pub fn alpha_beta(&self, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        let a = self.alpha.eval(x)?;
        let a2 = linalg::bilinear(&a, y, y);
        let b: Vec<f64> = self.beta.comps().iter().map(|e| e.eval(x)).collect::<Result<_, _>>()?;
        Ok((a2.max(0.0).sqrt(), dot(&b, y)))
    }

    /// `b^2 = a^ij b_i b_j`.
    pub fn b_sq(&self, x: &[f64]) -> Result<f64> {
        let a = self.alpha.eval(x)?;
        let a_inv = linalg::invert(&a, finsler::PIVOT_FLOOR)?;
        let b: Vec<f64> = self.beta.comps().iter().map(|e| e.eval(x)).collect::<Result<_, _>>()?;
        Ok(linalg::bilinear(&a_inv, &b, &b))
    }
}

/// `F = alpha (1 + beta/alpha)^p` on `alpha > 0`, `1 + beta/alpha > 0`.
#[derive(Debug, Clone)]
pub struct PPowerMetric {
    spec: PPowerSpec,
}

impl PPowerMetric {
    pub fn spec(&self) -> &PPowerSpec {
        &self.spec
    }
}

pub fn ppower_metric(spec: PPowerSpec) -> PPowerMetric {
    PPowerMetric { spec }
}

impl FinslerMetric for PPowerMetric {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn eval_jet(&self, x: &[Jet], y: &[Jet]) -> Result<Jet> {
        let alpha = self.spec.alpha.alpha_jet(x, y)?;
        let beta = self.spec.beta.beta_jet(x, y)?;
        let base = beta.div(&alpha)?.add_scalar(1.0);
        if !(base.value() > 0.0) {
            return Err(Error::Domain(format!("1 + beta/alpha = {} is not positive", base.value())));
        }
        Ok(&alpha * &base.pow_real(self.spec.p)?)
    }

    fn in_domain(&self, x: &[f64], y: &[f64]) -> bool {
        match self.spec.alpha_beta(x, y) {
            Ok((a, b)) => a > 0.0 && 1.0 + b / a > 0.0,
            Err(_) => false,
        }
    }
}

/// Closed-form positivity criterion for `phi(s) = (1 + s)^p`:
/// `b^2 < 1/(p-1)^2` for `p > 2` or `p < 0`, `b^2 < 1` for `1/2 <= p <= 2`,
/// and `b^2 < (2-p)^2 / (4 (1-p^2)^2)` for `0 < p < 1/2`.
pub fn positivity_check(p: f64, b_sq: f64) -> Result<bool> {
    if p == 0.0 || !p.is_finite() {
        return Err(Error::Invalid(format!("exponent p must be finite and nonzero, got {p}")));
    }
    if !(b_sq >= 0.0) {
        return Err(Error::Invalid(format!("b^2 must be nonnegative, got {b_sq}")));
    }
    let bound = if !(0.0..=2.0).contains(&p) {
        1.0 / ((p - 1.0) * (p - 1.0))
    } else if p >= 0.5 {
        1.0
    } else {
        (2.0 - p).powi(2) / (4.0 * (1.0 - p * p).powi(2))
    };
    Ok(b_sq < bound)
}

/// Result of sampling the three positivity inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PositivitySample {
    pub positive: bool,
    /// Smallest value of the sign-determining factors `1 + s`,
    /// `1 + (1-p) s` and `(1+s)(1+(1-p)s) + p(p-1)(b^2-s^2)` over the grid.
    pub worst_margin: f64,
    pub worst_s: f64,
}

/// Samples `phi > 0`, `phi - s phi' > 0` and
/// `phi - s phi' + (b^2 - s^2) phi'' > 0` on `grid_points` evenly spaced
/// values of `s` covering the closed interval `[-b, b]`.
///
/// For `phi = (1+s)^p` the three quantities are `(1+s)^k` times the factors
/// reported in [`PositivitySample::worst_margin`], so their signs agree.
pub fn positivity_inequalities(p: f64, b_sq: f64, grid_points: usize) -> Result<PositivitySample> {
    if p == 0.0 || !p.is_finite() {
        return Err(Error::Invalid(format!("exponent p must be finite and nonzero, got {p}")));
    }
    if !(b_sq >= 0.0) || grid_points < 2 {
        return Err(Error::Invalid("need b^2 >= 0 and at least two grid points".into()));
    }
    let b = b_sq.sqrt();
    let mut worst = PositivitySample { positive: true, worst_margin: f64::INFINITY, worst_s: 0.0 };
    for k in 0..grid_points {
        let s = -b + 2.0 * b * k as f64 / (grid_points - 1) as f64;
        let f1 = 1.0 + s;
        let f2 = 1.0 + (1.0 - p) * s;
        let f3 = f1 * f2 + p * (p - 1.0) * (b_sq - s * s);
        let m = f1.min(f2).min(f3);
        if m < worst.worst_margin {
            worst.worst_margin = m;
            worst.worst_s = s;
        }
    }
    worst.positive = worst.worst_margin > 0.0;
    Ok(worst)
}

/// Positivity of a concrete p-power metric at `x`, sampled over a grid.
pub fn positivity_sample(spec: &PPowerSpec, x: &[f64], grid_points: usize) -> Result<PositivitySample> {
    positivity_inequalities(spec.p, spec.b_sq(x)?, grid_points)
}

/// Scalar data `(u, v, B)` on a 2D chart.
#[derive(Debug, Clone, PartialEq)]
pub struct Sqrt2dFamilySpec {
    pub u: Expr,
    pub v: Expr,
    pub b: Expr,
}

impl Sqrt2dFamilySpec {
    pub fn new(u: Expr, v: Expr, b: Expr) -> Result<Self> {
        for e in [&u, &v, &b] {
            e.check_dim(2)?;
        }
        Ok(Self { u, v, b })
    }

    pub fn parse(u: &str, v: &str, b: &str) -> Result<Self> {
        Self::new(expr::parse(u)?, expr::parse(v)?, expr::parse(b)?)
    }

    /// `u = -x2`, `v = x1`, `B = x1^2 + x2^2`.
    pub fn rotation_example() -> Self {
        Self::parse("-x2", "x1", "x1^2 + x2^2").expect("literal parses")
    }

    fn jets(&self, x: &[f64], order: usize) -> Result<[Jet; 3]> {
        if x.len() != 2 {
            return Err(Error::Invalid(format!("the family lives on a 2D chart, got {} coordinates", x.len())));
        }
        let ctx = JetContext::new(2, order)?;
        Ok([
            expr::eval_jet(&self.u, &ctx, x)?,
            expr::eval_jet(&self.v, &ctx, x)?,
            expr::eval_jet(&self.b, &ctx, x)?,
        ])
    }

    /// Rejects points where `B` is outside `(0, 1)` or `u = v = 0`.
    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        let [u, v, b] = self.jets(x, 1)?;
        let (u, v, b) = (u.value(), v.value(), b.value());
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::Domain(format!("B = {b} is outside (0, 1)")));
        }
        if u * u + v * v == 0.0 {
            return Err(Error::Domain("u = v = 0".into()));
        }
        Ok(())
    }

    /// Residuals of `u_1 - v_2`, `u_2 + v_1`, `u B_1 + v B_2`.
    pub fn pde_residuals(&self, x: &[f64]) -> Result<[f64; 3]> {
        let [u, v, b] = self.jets(x, 1)?;
        let d = |j: &Jet, k: usize| j.partial_vars(&[k]);
        let (u1, u2, v1, v2) = (d(&u, 0)?, d(&u, 1)?, d(&v, 0)?, d(&v, 1)?);
        let (b1, b2) = (d(&b, 0)?, d(&b, 1)?);
        Ok([
            rel(&[u1, -v2]),
            rel(&[u2, v1]),
            rel(&[u.value() * b1, v.value() * b2]),
        ])
    }
}

/// `alpha`, `beta` of the square-root family with the data that built them.
#[derive(Debug, Clone)]
pub struct Sqrt2dFamily {
    pub spec: Sqrt2dFamilySpec,
    pub alpha: AlphaSpec,
    pub beta: BetaSpec,
}

impl Sqrt2dFamily {
    /// `F = sqrt(alpha (alpha + beta))`.
    pub fn metric(&self) -> PPowerMetric {
        ppower_metric(PPowerSpec { alpha: self.alpha.clone(), beta: self.beta.clone(), p: 0.5 })
    }
}

/// `alpha = sqrt(B)/(1-B)^(3/4) |y| / sqrt(u^2+v^2)` and
/// `beta = B/(1-B)^(3/4) (u y1 + v y2)/(u^2+v^2)`.
pub fn sqrt2d_family(spec: &Sqrt2dFamilySpec) -> Sqrt2dFamily {
    let w = spec.u.clone().pow(num(2.0)) + spec.v.clone().pow(num(2.0));
    let one_minus = num(1.0) - spec.b.clone();
    let conformal = spec.b.clone() / (one_minus.clone().pow(num(1.5)) * w.clone());
    let coef = spec.b.clone() / (one_minus.pow(num(0.75)) * w);
    let alpha = AlphaSpec::conformal(2, conformal);
    let beta = BetaSpec::new(vec![coef.clone() * spec.u.clone(), coef * spec.v.clone()])
        .expect("family components live on the 2D chart");
    Sqrt2dFamily { spec: spec.clone(), alpha, beta }
}

/// Closed-form isotropic flag curvature of the square-root family:
/// `K = -(u^2+v^2) sqrt(1-B)/(2B^2) (B_11 + B_22) - (u^2+v^2)^2 (3B-2)/(4 B^3 sqrt(1-B)) (B_1/v)^2`.
pub fn sqrt2d_flag_curvature(spec: &Sqrt2dFamilySpec, x: &[f64]) -> Result<f64> {
    spec.check_point(x)?;
    let [u, v, b] = spec.jets(x, 2)?;
    let (u, v, bv) = (u.value(), v.value(), b.value());
    if v.abs() < 1e-12 * u.abs().max(1.0) {
        return Err(Error::DegenerateValue(format!("v = {v} vanishes; the closed form divides by v")));
    }
    let w = u * u + v * v;
    let b1 = b.partial_vars(&[0])?;
    let lap = b.partial_vars(&[0, 0])? + b.partial_vars(&[1, 1])?;
    let root = (1.0 - bv).sqrt();
    Ok(-w * root / (2.0 * bv * bv) * lap - w * w * (3.0 * bv - 2.0) / (4.0 * bv.powi(3) * root) * (b1 / v).powi(2))
}

/// `s_m s^m = (B-4)^2 (u B_2 - v B_1)^2 / (64 B sqrt(1-B))` for the family.
pub fn sqrt2d_s_norm_formula(spec: &Sqrt2dFamilySpec, x: &[f64]) -> Result<f64> {
    spec.check_point(x)?;
    let [u, v, b] = spec.jets(x, 1)?;
    let bv = b.value();
    let cross = u.value() * b.partial_vars(&[1])? - v.value() * b.partial_vars(&[0])?;
    Ok((bv - 4.0).powi(2) * cross * cross / (64.0 * bv * (1.0 - bv).sqrt()))
}

/// Sectional curvature of the family's `alpha` in terms of `(u, v, B)`:
/// `lambda = -(u^2+v^2)/(4B^2) { (B+2) sqrt(1-B) (B_11+B_22) + (u^2+v^2)(B^2+4B-2) B_1^2 / (B v^2 sqrt(1-B)) }`.
pub fn sqrt2d_lambda_formula(spec: &Sqrt2dFamilySpec, x: &[f64]) -> Result<f64> {
    spec.check_point(x)?;
    let [u, v, b] = spec.jets(x, 2)?;
    let (u, v, bv) = (u.value(), v.value(), b.value());
    if v.abs() < 1e-12 * u.abs().max(1.0) {
        return Err(Error::DegenerateValue(format!("v = {v} vanishes; the closed form divides by v")));
    }
    let w = u * u + v * v;
    let b1 = b.partial_vars(&[0])?;
    let lap = b.partial_vars(&[0, 0])? + b.partial_vars(&[1, 1])?;
    let root = (1.0 - bv).sqrt();
    Ok(-w / (4.0 * bv * bv) * ((bv + 2.0) * root * lap + w * (bv * bv + 4.0 * bv - 2.0) * b1 * b1 / (bv * v * v * root)))
}

/// Max over `directions` unit vectors of the normalised residual of
/// `r00 = 6/(b^2-4) beta s0` for a 2D square-root metric.
pub fn sqrt2d_einstein_residual(alpha: &AlphaSpec, beta: &BetaSpec, x: &[f64], directions: usize) -> Result<f64> {
    let (rd, ab) = alphabeta::ab_tensors(alpha, beta, x)?;
    sqrt2d_einstein_residual_from(&rd, &ab, directions)
}

fn sqrt2d_einstein_residual_from(rd: &RiemannData, ab: &AbTensors, directions: usize) -> Result<f64> {
    if ab.dim() != 2 {
        return Err(Error::Invalid("the square-root Einstein condition is two-dimensional".into()));
    }
    let den = ab.b_sq - 4.0;
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateValue("b^2 = 4".into()));
    }
    let mut worst: f64 = 0.0;
    for y in sampling::unit_directions(2, directions) {
        // measure directions in an alpha-orthonormal frame scale
        let norm = linalg::bilinear(&rd.a, &y, &y).sqrt();
        let y: Vec<f64> = y.iter().map(|c| c / norm).collect();
        worst = worst.max(rel(&[ab.r00(&y), -6.0 * ab.beta(&y) * ab.s0(&y) / den]));
    }
    Ok(worst)
}

/// Flag curvature of a 2D Einstein square-root metric from the curvature of
/// `alpha`: `K = 2/(2+b^2) (lambda - 8 s_m s^m / (b^2 (b^2-4)))`.
///
/// Fails with [`Error::NotEinstein`] if the Einstein condition residual over
/// `directions` samples exceeds `tolerance`.
pub fn sqrt2d_k_from_lambda(
    alpha: &AlphaSpec,
    beta: &BetaSpec,
    x: &[f64],
    directions: usize,
    tolerance: f64,
) -> Result<f64> {
    let (rd, ab) = alphabeta::ab_tensors(alpha, beta, x)?;
    let residual = sqrt2d_einstein_residual_from(&rd, &ab, directions)?;
    if !(residual < tolerance) {
        return Err(Error::NotEinstein { residual, tolerance });
    }
    let b2 = ab.b_sq;
    if b2.abs() < 1e-12 {
        return Err(Error::DegenerateValue("b^2 = 0".into()));
    }
    let lambda = rd.sectional_curvature(&[1.0, 0.0], &[0.0, 1.0]);
    let s_norm = ab.s_norm_sq(&rd.a_inv);
    Ok(2.0 / (2.0 + b2) * (lambda - 8.0 * s_norm / (b2 * (b2 - 4.0))))
}

/// `beta~ = (1 - b^2)^(-3/4) beta` evaluated at one point.
#[derive(Debug, Clone, Serialize)]
pub struct KillingDeformation {
    pub x: Vec<f64>,
    pub b_sq: f64,
    pub b_tilde: Vec<f64>,
    /// `|beta~|^2_alpha`
    pub norm_sq: f64,
    /// `b^2 / (1 - b^2)^(3/2)`
    pub expected_norm_sq: f64,
    /// `max |r~_ij|`
    pub r_tilde_residual: f64,
}

pub fn killing_deformation(alpha: &AlphaSpec, beta: &BetaSpec, x: &[f64]) -> Result<KillingDeformation> {
    alphabeta::check_pair(alpha, beta)?;
    let aj = AlphaJets::new(alpha, x)?;
    let b = beta.eval_jets(aj.coords())?;
    let base = alphabeta::tensors_from_jets(&aj, &b);
    if !(base.b_sq < 1.0) {
        return Err(Error::Domain(format!("b^2 = {} is not below 1", base.b_sq)));
    }
    let factor = aj.norm_sq(&b).scale(-1.0).add_scalar(1.0).pow_real(-0.75)?;
    let b_tilde: Vec<Jet> = b.iter().map(|bi| bi * &factor).collect();
    let deformed = alphabeta::tensors_from_jets(&aj, &b_tilde);
    Ok(KillingDeformation {
        x: x.to_vec(),
        b_sq: base.b_sq,
        b_tilde: deformed.b.clone(),
        norm_sq: deformed.b_sq,
        expected_norm_sq: base.b_sq / (1.0 - base.b_sq).powf(1.5),
        r_tilde_residual: linalg::max_abs(&deformed.r),
    })
}

/// Per-sample data of an Einstein-condition check.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub scalars: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
}

/// Residuals of a family of structure equations over samples.
#[derive(Debug, Clone, Serialize)]
pub struct EinsteinConditionReport {
    pub condition: String,
    pub samples: Vec<ConditionSample>,
    /// Largest residual per equation over all samples.
    pub residuals: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub verdict: bool,
}

impl EinsteinConditionReport {
    fn assemble(condition: &str, samples: Vec<ConditionSample>, tolerance: f64) -> Self {
        let mut residuals: BTreeMap<String, f64> = BTreeMap::new();
        for s in &samples {
            for (k, v) in &s.residuals {
                let e = residuals.entry(k.clone()).or_insert(0.0);
                *e = if v.is_nan() || e.is_nan() { f64::NAN } else { e.max(*v) };
            }
        }
        let verdict = !residuals.is_empty() && residuals.values().all(|v| *v < tolerance);
        Self { condition: condition.to_string(), samples, residuals, tolerance, verdict }
    }
}

fn scalars<const N: usize>(pairs: [(&str, f64); N]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `c_i` of `c = r^k_k / D(b^2)` given `dD/d(b^2)`.
fn trace_ratio_grad(ab: &AbTensors, c: f64, d: f64, dd_dbsq: f64) -> Vec<f64> {
    ab.r_trace_grad.iter().zip(&ab.b_sq_grad).map(|(g, h)| (g - c * dd_dbsq * h) / d).collect()
}

fn alpha_of(rd: &RiemannData, y: &[f64]) -> Result<f64> {
    let a2 = linalg::bilinear(&rd.a, y, y);
    if !(a2 > 0.0) {
        return Err(Error::Domain("alpha(y) = 0".into()));
    }
    Ok(a2.sqrt())
}

/// Structure equations of an Einstein-reversible Randers metric:
///
/// * `r00 = -2 beta s0 + 2c (alpha^2 - beta^2)`
/// * `s^k_0|k = (n-1)/2 (2 sigma beta + 2 t0 + 4c s0 + c0)`
/// * `Ric_alpha = 2 t00 + t^k_k alpha^2 + (n-1) [sigma (alpha^2 + beta^2) - 4c^2 alpha^2 - s0|0 - s0^2 - c0 beta]`
/// * `Ric = (n-1)(sigma - c^2) F^2`, with `Ric` from the generic engine.
///
/// `c = r^k_k / (2 (n - b^2))`; `sigma` is the `b`-contraction of the second
/// equation, or the `a`-trace of the third when `b^2` is tiny.
pub fn randers_einstein_residuals(
    alpha: &AlphaSpec,
    beta: &BetaSpec,
    samples: &[TangentSample],
    tolerance: f64,
) -> Result<EinsteinConditionReport> {
    let metric = ppower_metric(PPowerSpec::new(alpha.clone(), beta.clone(), 1.0)?);
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let (rd, ab) = alphabeta::ab_tensors(alpha, beta, &s.x)?;
        let n = ab.dim() as f64;
        let y = &s.y;
        let (al, be) = (alpha_of(&rd, y)?, ab.beta(y));
        let d = 2.0 * (n - ab.b_sq);
        let c = ab.r_trace / d;
        let c_grad = trace_ratio_grad(&ab, c, d, -2.0);
        let c0 = dot(&c_grad, y);
        let cb = dot(&c_grad, &ab.b_up);
        let s_div = ab.s_div(&rd.a_inv);
        let s_norm = ab.s_norm_sq(&rd.a_inv);
        let sigma = if ab.b_sq > 1e-8 {
            (2.0 * dot(&ab.b_up, &s_div) / (n - 1.0) - 2.0 * dot(&ab.b_up, &ab.t_vec) - cb) / (2.0 * ab.b_sq)
        } else {
            let s_trace: f64 = (0..ab.dim())
                .map(|i| (0..ab.dim()).map(|j| rd.a_inv[i][j] * ab.s_vec_cov[i][j]).sum::<f64>())
                .sum();
            let ric_scalar = rd.scalar_curvature();
            ((ric_scalar - (2.0 + n) * ab.t_trace) / (n - 1.0) + 4.0 * c * c * n + s_trace + s_norm + cb)
                / (n + ab.b_sq)
        };
        let (s0, t0) = (ab.s0(y), ab.t0(y));
        let r8 = rel(&[ab.r00(y), 2.0 * be * s0, -2.0 * c * (al * al - be * be)]);
        let h = 0.5 * (n - 1.0);
        let r12 = rel(&[
            ab.s_div0(&rd.a_inv, y),
            -h * 2.0 * sigma * be,
            -h * 2.0 * t0,
            -h * 4.0 * c * s0,
            -h * c0,
        ]);
        let r13 = rel(&[
            rd.ricci_alpha(y),
            -2.0 * ab.t00(y),
            -ab.t_trace * al * al,
            -(n - 1.0) * sigma * (al * al + be * be),
            (n - 1.0) * 4.0 * c * c * al * al,
            (n - 1.0) * ab.s0_0(y),
            (n - 1.0) * s0 * s0,
            (n - 1.0) * c0 * be,
        ]);
        let cp = finsler::curvature_point(&metric, s)?;
        let target = (n - 1.0) * (sigma - c * c) * cp.f * cp.f;
        let r14 = rel(&[cp.ricci, -target]);
        out.push(ConditionSample {
            x: s.x.clone(),
            y: s.y.clone(),
            scalars: scalars([("c", c), ("sigma", sigma), ("sigma_minus_c_sq", sigma - c * c)]),
            residuals: scalars([("r00", r8), ("s_div", r12), ("ric_alpha", r13), ("ric_f", r14)]),
        });
    }
    Ok(EinsteinConditionReport::assemble("randers", out, tolerance))
}

/// Conditions for a square metric `(alpha + beta)^2/alpha` to be Ricci-flat:
///
/// * `b_i|j = c [(1 + 2b^2) a_ij - 3 b_i b_j]`
/// * `Ric_alpha = -c^2 {[2(2n-5) b^2 + 5(n-1)] alpha^2 - 6(n-2) beta^2}`
/// * `c_i = -2 c^2 b_i`
/// * `Ric_F = 0`, from the generic engine.
///
/// `c = r^k_k / (n (1 + 2b^2) - 3b^2)`.
pub fn square_einstein_residuals(
    alpha: &AlphaSpec,
    beta: &BetaSpec,
    samples: &[TangentSample],
    tolerance: f64,
) -> Result<EinsteinConditionReport> {
    let metric = ppower_metric(PPowerSpec::new(alpha.clone(), beta.clone(), 2.0)?);
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let (rd, ab) = alphabeta::ab_tensors(alpha, beta, &s.x)?;
        let nn = ab.dim();
        let n = nn as f64;
        let y = &s.y;
        let (al, be) = (alpha_of(&rd, y)?, ab.beta(y));
        let b2 = ab.b_sq;
        let d = n * (1.0 + 2.0 * b2) - 3.0 * b2;
        let c = ab.r_trace / d;
        let c_grad = trace_ratio_grad(&ab, c, d, 2.0 * n - 3.0);
        let mut closure: f64 = 0.0;
        for i in 0..nn {
            for j in 0..nn {
                let model = c * ((1.0 + 2.0 * b2) * rd.a[i][j] - 3.0 * ab.b[i] * ab.b[j]);
                closure = closure.max(rel(&[ab.bcov[i][j], -model]));
            }
        }
        let ric_model =
            -c * c * ((2.0 * (2.0 * n - 5.0) * b2 + 5.0 * (n - 1.0)) * al * al - 6.0 * (n - 2.0) * be * be);
        let r15 = rel(&[rd.ricci_alpha(y), -ric_model]);
        let r17 = (0..nn).map(|i| rel(&[c_grad[i], 2.0 * c * c * ab.b[i]])).fold(0.0, f64::max);
        let cp = finsler::curvature_point(&metric, s)?;
        let flat = cp.ricci.abs() / (cp.f * cp.f).max(1.0);
        out.push(ConditionSample {
            x: s.x.clone(),
            y: s.y.clone(),
            scalars: scalars([("c", c)]),
            residuals: scalars([("closure", closure), ("ric_alpha", r15), ("c_grad", r17), ("ric_f", flat)]),
        });
    }
    Ok(EinsteinConditionReport::assemble("square", out, tolerance))
}

/// `alpha` Ricci-flat and `beta` parallel, tested at samples.
#[derive(Debug, Clone, Serialize)]
pub struct RicciFlatParallel {
    pub max_bcov: f64,
    pub max_ric_alpha: f64,
    pub tolerance: f64,
    pub verdict: bool,
}

pub fn ricci_flat_parallel_check(
    alpha: &AlphaSpec,
    beta: &BetaSpec,
    samples: &[TangentSample],
    tolerance: f64,
) -> Result<RicciFlatParallel> {
    let mut max_bcov: f64 = 0.0;
    let mut max_ric: f64 = 0.0;
    for s in samples {
        let (rd, ab) = alphabeta::ab_tensors(alpha, beta, &s.x)?;
        max_bcov = max_bcov.max(linalg::max_abs(&ab.bcov));
        max_ric = max_ric.max(rd.ricci_alpha(&s.y).abs());
    }
    Ok(RicciFlatParallel {
        max_bcov,
        max_ric_alpha: max_ric,
        tolerance,
        verdict: max_bcov < tolerance && max_ric < tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat_const(p: f64, b: [&str; 2]) -> PPowerMetric {
        ppower_metric(PPowerSpec::new(AlphaSpec::euclidean(2), BetaSpec::parse(&b).unwrap(), p).unwrap())
    }

    #[test]
    fn ppower_values() {
        for (p, want) in [(1.0, 1.5), (2.0, 2.25), (0.5, 1.5_f64.sqrt())] {
            let m = flat_const(p, ["0.5", "0"]);
            assert_relative_eq!(m.value(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), want, epsilon = 1e-15);
        }
        assert!(PPowerSpec::new(AlphaSpec::euclidean(2), BetaSpec::zero(2), 0.0).is_err());
    }

    #[test]
    fn ppower_domain() {
        let m = flat_const(0.5, ["0.5", "0"]);
        assert!(m.in_domain(&[0.0, 0.0], &[1.0, 0.0]));
        let m = flat_const(0.5, ["2", "0"]);
        assert!(!m.in_domain(&[0.0, 0.0], &[-1.0, 0.0]));
    }

    #[test]
    fn closed_form_positivity() {
        assert!(positivity_check(3.0, 0.2).unwrap());
        assert!(!positivity_check(3.0, 0.3).unwrap());
        assert!(positivity_check(2.0, 0.99).unwrap());
        assert!(positivity_check(0.4, 0.8).unwrap());
        assert!(!positivity_check(0.4, 0.95).unwrap());
        assert!(positivity_check(0.0, 0.1).is_err());
    }

    #[test]
    fn sampled_positivity_cases_one_and_two() {
        assert!(positivity_inequalities(3.0, 0.2, 101).unwrap().positive);
        assert!(!positivity_inequalities(3.0, 0.3, 101).unwrap().positive);
        for b_sq in [0.1, 0.5, 0.99] {
            assert!(positivity_inequalities(1.0, b_sq, 101).unwrap().positive);
        }
    }

    #[test]
    fn sampled_positivity_small_p_margin() {
        // h(s) = (1-p^2) s^2 + (2-p) s + 1 - p(1-p) b^2 has its minimum
        // inside [-b, b] at p = 0.4, b^2 = 0.95, where it equals
        // 1 - 0.228 - 2.56/3.36.
        let r = positivity_inequalities(0.4, 0.95, 100_001).unwrap();
        assert_relative_eq!(r.worst_margin, 1.0 - 0.228 - 2.56 / 3.36, epsilon = 1e-9);
        assert!(r.positive);
    }

    #[test]
    fn rotation_example_values() {
        let fam = sqrt2d_family(&Sqrt2dFamilySpec::rotation_example());
        let m = fam.metric();
        let (a, b) = m.spec().alpha_beta(&[0.6, 0.0], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(a, 1.0 / 0.64_f64.powf(0.75), epsilon = 1e-14);
        assert_relative_eq!(a, 1.397542, epsilon = 1e-6);
        assert_eq!(b, 0.0);
        let (_, b) = m.spec().alpha_beta(&[0.6, 0.0], &[0.0, 1.0]).unwrap();
        assert_relative_eq!(b, 0.6 / 0.64_f64.powf(0.75), epsilon = 1e-14);
        assert_relative_eq!(b, 0.838525, epsilon = 1e-6);
        let pde = Sqrt2dFamilySpec::rotation_example().pde_residuals(&[0.3, 0.4]).unwrap();
        assert!(pde.iter().all(|r| *r == 0.0));
    }

    #[test]
    fn rotation_example_curvature_formula() {
        let spec = Sqrt2dFamilySpec::rotation_example();
        assert_relative_eq!(sqrt2d_flag_curvature(&spec, &[0.6, 0.0]).unwrap(), -1.25, epsilon = 1e-12);
        assert!(matches!(sqrt2d_flag_curvature(&spec, &[0.0, 0.6]), Err(Error::DegenerateValue(_))));
        assert!(matches!(sqrt2d_flag_curvature(&spec, &[1.0, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_data_is_trivial() {
        let spec = Sqrt2dFamilySpec::parse("1", "0", "0.3").unwrap();
        assert!(spec.pde_residuals(&[0.1, 0.2]).unwrap().iter().all(|r| *r == 0.0));
        let fam = sqrt2d_family(&spec);
        let (_, ab) = alphabeta::ab_tensors(&fam.alpha, &fam.beta, &[0.1, 0.2]).unwrap();
        assert!(ab.s.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn killing_deformation_of_constant_form() {
        let k = killing_deformation(&AlphaSpec::euclidean(2), &BetaSpec::parse(&["0.3", "0.4"]).unwrap(), &[1.0, 2.0])
            .unwrap();
        assert_eq!(k.r_tilde_residual, 0.0);
        assert_relative_eq!(k.norm_sq, k.expected_norm_sq, epsilon = 1e-14);
    }

    #[test]
    fn flat_parallel_conditions() {
        let samples = vec![TangentSample::new(vec![0.1, 0.2], vec![1.0, 0.3])];
        let beta = BetaSpec::parse(&["0.2", "0.1"]).unwrap();
        let alpha = AlphaSpec::euclidean(2);
        let r = randers_einstein_residuals(&alpha, &beta, &samples, 1e-9).unwrap();
        assert!(r.verdict, "{r:?}");
        assert_eq!(r.samples[0].scalars["c"], 0.0);
        assert_eq!(r.samples[0].scalars["sigma"], 0.0);
        let q = square_einstein_residuals(&alpha, &beta, &samples, 1e-9).unwrap();
        assert!(q.verdict, "{q:?}");
        assert!(ricci_flat_parallel_check(&alpha, &beta, &samples, 1e-12).unwrap().verdict);
    }
}
