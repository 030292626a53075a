//! Executes the checks of a manifest and assembles a report.
//!
//! Samples are evaluated in parallel; results are collected in manifest
//! order, so the report depends only on the manifest and the seed. Errors at
//! individual samples become `skipped` entries and never abort a run.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::alphabeta::{self, AlphaSpec, BetaSpec, IdentityConvention, KlijSign};
use crate::constructions::{self, PPowerSpec, Sqrt2dFamilySpec};
use crate::error::{Error, Result};
use crate::finsler::{self, CurvaturePoint, FinslerMetric, TangentSample};
use crate::jets::MAX_ORDER;
use crate::manifest::{CheckKind, Manifest, MetricSpec};
use crate::report;
use crate::sampling;

/// Grid size used by the positivity check.
pub const POSITIVITY_GRID: usize = 101;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
    /// Include wall-clock timings (makes the report non-reproducible).
    pub timings: bool,
    /// Negate the curvature terms of the Ricci identities.
    pub flip_convention: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Skipped {
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub y: Vec<f64>,
    pub f: f64,
    pub ricci: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PointSummary {
    pub x: Vec<f64>,
    pub b_sq: Option<f64>,
    /// `B(x)` for the square-root family.
    pub family_b: Option<f64>,
    pub lambda_mean: Option<f64>,
    pub lambda_spread: Option<f64>,
    /// Engine flag curvature of the plane spanned by the first two admissible directions.
    pub flag_curvature: Option<f64>,
    pub samples: Vec<SampleSummary>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Ok,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub tolerance: f64,
    /// Largest residual of each kind; the verdict is `all(residual < tolerance)`.
    pub residuals: BTreeMap<String, f64>,
    pub verdict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub rows: Vec<Value>,
    pub skipped: Vec<Skipped>,
}

impl CheckResult {
    fn not_applicable(kind: CheckKind, tolerance: f64, note: impl Into<String>) -> Self {
        Self {
            name: kind.name().into(),
            status: CheckStatus::NotApplicable,
            tolerance,
            residuals: BTreeMap::new(),
            verdict: false,
            note: Some(note.into()),
            rows: Vec::new(),
            skipped: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EngineInfo {
    pub version: String,
    pub jet_order: usize,
    pub klij_sign: KlijSign,
    pub curvature_flipped: bool,
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub manifest: Value,
    pub manifest_sha256: String,
    pub engine: EngineInfo,
    pub points: Vec<PointSummary>,
    pub checks: Vec<CheckResult>,
    pub verdict: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn to_json(&self) -> String {
        report::to_json(self).expect("reports always serialize")
    }

    /// Flat per-point table: coordinates, `b^2`, `B`, `lambda`, `K` and residuals.
    pub fn csv_table(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let n = self.points.first().map_or(0, |p| p.x.len());
        let mut header: Vec<String> = vec!["point".into()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(
            ["b_sq", "B", "lambda", "K", "lambda_spread", "K_closed_form", "K_closed_form_residual"]
                .iter()
                .map(|s| s.to_string()),
        );
        let closed: BTreeMap<usize, f64> = self
            .checks
            .iter()
            .filter(|c| c.name == CheckKind::FlagCurvature.name())
            .flat_map(|c| c.rows.iter())
            .filter_map(|r| Some((r.get("point")?.as_u64()? as usize, r.get("closed_form")?.as_f64()?)))
            .collect();
        let rows = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut row = vec![i as f64];
                row.extend(&p.x);
                let k = p.flag_curvature.unwrap_or(f64::NAN);
                let kc = closed.get(&i).copied().unwrap_or(f64::NAN);
                row.extend([
                    p.b_sq.unwrap_or(f64::NAN),
                    p.family_b.unwrap_or(f64::NAN),
                    p.lambda_mean.unwrap_or(f64::NAN),
                    k,
                    p.lambda_spread.unwrap_or(f64::NAN),
                    kc,
                    (k - kc).abs(),
                ]);
                row
            })
            .collect();
        (header, rows)
    }
}

/// Normalised difference `|a - b| / max(1, |a|, |b|)`.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1.0_f64.max(a.abs()).max(b.abs())
}

fn skip(x: &[f64], y: Option<&[f64]>, e: &Error) -> Skipped {
    Skipped { x: x.to_vec(), y: y.map(<[f64]>::to_vec), reason: e.to_string() }
}

struct Residuals(BTreeMap<String, f64>);

impl Residuals {
    fn new(keys: &[&str]) -> Self {
        Self(keys.iter().map(|k| (k.to_string(), 0.0)).collect())
    }
    fn push(&mut self, key: &str, v: f64) {
        let e = self.0.entry(key.to_string()).or_insert(0.0);
        *e = if v.is_nan() || e.is_nan() { f64::NAN } else { e.max(v) };
    }
}

fn finish(kind: CheckKind, tolerance: f64, res: Residuals, rows: Vec<Value>, skipped: Vec<Skipped>) -> CheckResult {
    let evidence = !rows.is_empty();
    let verdict = evidence && res.0.values().all(|v| *v < tolerance);
    CheckResult {
        name: kind.name().into(),
        status: CheckStatus::Ok,
        tolerance,
        residuals: res.0,
        verdict,
        note: if evidence { None } else { Some("no admissible samples".into()) },
        rows,
        skipped,
    }
}

fn row(pairs: Vec<(&str, Value)>) -> Value {
    Value::Object(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
}

fn fv(x: f64) -> Value {
    report::float(x)
}

fn vv(x: &[f64]) -> Value {
    Value::Array(x.iter().map(|v| fv(*v)).collect())
}

struct Context<'a> {
    manifest: &'a Manifest,
    metric: Box<dyn FinslerMetric>,
    alpha: AlphaSpec,
    beta: BetaSpec,
    p: f64,
    family: Option<&'a Sqrt2dFamilySpec>,
    points: Vec<Vec<f64>>,
    directions: Vec<Vec<f64>>,
    curvature: Vec<Vec<(Vec<f64>, Result<CurvaturePoint>)>>,
    tolerances: BTreeMap<String, f64>,
    convention: IdentityConvention,
}

/// Whether a randomly drawn point keeps `margin` away from the singular sets.
fn admissible(metric: &MetricSpec, x: &[f64], margin: f64) -> bool {
    let (alpha, beta, p) = metric.alpha_beta_p();
    let Ok(a) = alpha.eval(x) else { return false };
    if crate::linalg::cholesky(&a).is_err() {
        return false;
    }
    match metric {
        MetricSpec::Riemann { .. } => true,
        MetricSpec::PPower(spec) => match spec.b_sq(x) {
            Ok(b2) => {
                let _ = &beta;
                constructions::positivity_check(p, b2 + margin).unwrap_or(false)
            }
            Err(_) => false,
        },
        MetricSpec::Sqrt2dFamily(fam) => {
            let s = &fam.spec;
            let (Ok(u), Ok(v), Ok(b)) = (s.u.eval(x), s.v.eval(x), s.b.eval(x)) else { return false };
            b > margin && b < 1.0 - margin && v.abs() > margin && u * u + v * v > margin * margin
        }
    }
}

fn sample_points(manifest: &Manifest, seed: Option<u64>) -> Vec<Vec<f64>> {
    let s = &manifest.samples;
    let mut points = s.points.clone();
    if let (Some(r), Some(seed)) = (&s.random, seed) {
        points.extend(sampling::random_points(seed, &r.lower, &r.upper, r.count, |x| {
            admissible(&manifest.metric, x, s.margin)
        }));
    }
    points
}

/// Runs every check listed in the manifest.
pub fn run(manifest: &Manifest, opts: &RunOptions) -> Report {
    let started = Instant::now();
    let mut timings = BTreeMap::new();
    let seed = opts.seed.or(manifest.samples.seed);
    let mut tolerances = manifest.tolerances.clone();
    tolerances.extend(opts.tolerances.iter().map(|(k, v)| (k.clone(), *v)));
    let convention = {
        let c = IdentityConvention::calibrated();
        if opts.flip_convention {
            c.flipped()
        } else {
            c
        }
    };
    let (alpha, beta, p) = manifest.metric.alpha_beta_p();
    let metric = manifest.metric.finsler();
    let points = sample_points(manifest, seed);
    let directions = sampling::unit_directions(manifest.dimension, manifest.samples.directions);

    let t0 = Instant::now();
    let curvature: Vec<Vec<(Vec<f64>, Result<CurvaturePoint>)>> = points
        .par_iter()
        .map(|x| {
            directions
                .iter()
                .filter(|y| metric.in_domain(x, y))
                .map(|y| (y.clone(), finsler::curvature_point(&metric, &TangentSample::new(x.clone(), y.clone()))))
                .collect()
        })
        .collect();
    timings.insert("curvature".to_string(), t0.elapsed().as_secs_f64() * 1e3);

    let family = match &manifest.metric {
        MetricSpec::Sqrt2dFamily(f) => Some(&f.spec),
        _ => None,
    };
    let ctx = Context {
        manifest,
        metric,
        alpha,
        beta,
        p,
        family,
        points,
        directions,
        curvature,
        tolerances,
        convention,
    };
    let summaries = point_summaries(&ctx);

    let mut checks = Vec::with_capacity(manifest.checks.len());
    for &kind in &manifest.checks {
        let t = Instant::now();
        checks.push(run_check(&ctx, kind));
        timings.insert(kind.name().to_string(), t.elapsed().as_secs_f64() * 1e3);
    }
    timings.insert("total".to_string(), started.elapsed().as_secs_f64() * 1e3);
    let verdict = checks.iter().all(|c| c.verdict);
    Report {
        manifest: manifest.source.clone(),
        manifest_sha256: report::content_hash(&manifest.source),
        engine: EngineInfo {
            version: env!("CARGO_PKG_VERSION").to_string(),
            jet_order: MAX_ORDER,
            klij_sign: convention.klij,
            curvature_flipped: convention.flipped,
            seed,
            tolerances: ctx.tolerances.clone(),
        },
        points: summaries,
        checks,
        verdict,
        timings_ms: opts.timings.then_some(timings),
    }
}

fn point_summaries(ctx: &Context) -> Vec<PointSummary> {
    ctx.points
        .iter()
        .zip(&ctx.curvature)
        .map(|(x, cps)| {
            let mut samples = Vec::new();
            let mut skipped = Vec::new();
            let mut ok: Vec<&CurvaturePoint> = Vec::new();
            for (y, cp) in cps {
                match cp {
                    Ok(cp) => {
                        samples.push(SampleSummary {
                            y: y.clone(),
                            f: cp.f,
                            ricci: cp.ricci,
                            lambda: cp.einstein_scalar,
                        });
                        ok.push(cp);
                    }
                    Err(e) => skipped.push(skip(x, Some(y), e)),
                }
            }
            let lambdas: Vec<f64> = ok.iter().map(|c| c.einstein_scalar).collect();
            let (lambda_mean, lambda_spread) = if lambdas.is_empty() {
                (None, None)
            } else {
                let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (Some(lambdas.iter().sum::<f64>() / lambdas.len() as f64), Some(hi - lo))
            };
            let flag_curvature = ok.first().and_then(|c| {
                ok.iter().skip(1).find_map(|d| c.flag_curvature(&d.sample.y).ok())
            });
            let b_sq = PPowerSpec { alpha: ctx.alpha.clone(), beta: ctx.beta.clone(), p: ctx.p }.b_sq(x).ok();
            let family_b = ctx.family.and_then(|f| f.b.eval(x).ok());
            PointSummary { x: x.clone(), b_sq, family_b, lambda_mean, lambda_spread, flag_curvature, samples, skipped }
        })
        .collect()
}

fn tangent_samples(ctx: &Context, metric: &dyn FinslerMetric) -> Vec<TangentSample> {
    ctx.points
        .iter()
        .flat_map(|x| {
            ctx.directions
                .iter()
                .filter(|y| metric.in_domain(x, y))
                .map(move |y| TangentSample::new(x.clone(), y.clone()))
        })
        .collect()
}

fn run_check(ctx: &Context, kind: CheckKind) -> CheckResult {
    let tol = ctx.tolerances.get(kind.tolerance_key()).copied().unwrap_or(f64::NAN);
    let n = ctx.manifest.dimension;
    match kind {
        CheckKind::Einstein => {
            let mut res = Residuals::new(&["lambda_spread"]);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for (i, (x, cps)) in ctx.points.iter().zip(&ctx.curvature).enumerate() {
                let lambdas: Vec<f64> = cps.iter().filter_map(|(_, c)| c.as_ref().ok()).map(|c| c.einstein_scalar).collect();
                if lambdas.is_empty() {
                    skipped.push(Skipped { x: x.clone(), y: None, reason: "no admissible direction".into() });
                    continue;
                }
                let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                res.push("lambda_spread", hi - lo);
                rows.push(row(vec![
                    ("point", i.into()),
                    ("x", vv(x)),
                    ("lambda_min", fv(lo)),
                    ("lambda_max", fv(hi)),
                    ("spread", fv(hi - lo)),
                ]));
            }
            finish(kind, tol, res, rows, skipped)
        }
        CheckKind::Reversibility => {
            let mut res = Residuals::new(&["lambda_asymmetry"]);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for (x, cps) in ctx.points.iter().zip(&ctx.curvature) {
                for (y, cp) in cps {
                    let s = TangentSample::new(x.clone(), y.clone());
                    let r = cp.as_ref().map_err(Clone::clone).and_then(|cp| {
                        let rev = s.reversed();
                        if !ctx.metric.in_domain(&rev.x, &rev.y) {
                            return Err(Error::Domain("-y leaves the metric domain".into()));
                        }
                        let back = finsler::einstein_scalar(&ctx.metric, &rev)?;
                        Ok((cp.einstein_scalar, back))
                    });
                    match r {
                        Ok((a, b)) => {
                            let d = rel_diff(a, b);
                            res.push("lambda_asymmetry", d);
                            rows.push(row(vec![("x", vv(x)), ("y", vv(y)), ("lambda", fv(a)), ("lambda_reversed", fv(b)), ("residual", fv(d))]));
                        }
                        Err(e) => skipped.push(skip(x, Some(y), &e)),
                    }
                }
            }
            finish(kind, tol, res, rows, skipped)
        }
        CheckKind::FlagCurvature => flag_curvature_check(ctx, kind, tol),
        CheckKind::PdeResiduals => {
            let Some(fam) = ctx.family else {
                return CheckResult::not_applicable(kind, tol, "needs a sqrt2d_family metric");
            };
            let mut res = Residuals::new(&["cauchy_riemann_1", "cauchy_riemann_2", "level_sets"]);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for x in &ctx.points {
                match fam.pde_residuals(x) {
                    Ok(r) => {
                        res.push("cauchy_riemann_1", r[0]);
                        res.push("cauchy_riemann_2", r[1]);
                        res.push("level_sets", r[2]);
                        rows.push(row(vec![("x", vv(x)), ("residuals", vv(&r))]));
                    }
                    Err(e) => skipped.push(skip(x, None, &e)),
                }
            }
            finish(kind, tol, res, rows, skipped)
        }
        CheckKind::RicciIdentities => {
            let keys = ["identity_1", "identity_2", "identity_3", "identity_4"];
            let mut res = Residuals::new(&keys);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for x in &ctx.points {
                match alphabeta::ricci_identity_residuals(&ctx.alpha, &ctx.beta, x, ctx.convention) {
                    Ok(r) => {
                        for (k, v) in keys.iter().zip(r) {
                            res.push(k, v);
                        }
                        rows.push(row(vec![("x", vv(x)), ("residuals", vv(&r))]));
                    }
                    Err(e) => skipped.push(skip(x, None, &e)),
                }
            }
            finish(kind, tol, res, rows, skipped)
        }
        CheckKind::StructuralVsGeneric => {
            let mut res = Residuals::new(&["spray_difference"]);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for (x, cps) in ctx.points.iter().zip(&ctx.curvature) {
                for (y, cp) in cps {
                    let s = TangentSample::new(x.clone(), y.clone());
                    let r = cp
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|cp| Ok((cp.spray.clone(), alphabeta::structural_spray(&ctx.alpha, &ctx.beta, ctx.p, &s)?)));
                    match r {
                        Ok((g, h)) => {
                            let d = g.iter().zip(&h).map(|(a, b)| rel_diff(*a, *b)).fold(0.0, f64::max);
                            res.push("spray_difference", d);
                            rows.push(row(vec![("x", vv(x)), ("y", vv(y)), ("generic", vv(&g)), ("structural", vv(&h)), ("residual", fv(d))]));
                        }
                        Err(e) => skipped.push(skip(x, Some(y), &e)),
                    }
                }
            }
            finish(kind, tol, res, rows, skipped)
        }
        CheckKind::RandersConditions | CheckKind::SquareConditions => {
            let (p, label) = if kind == CheckKind::RandersConditions { (1.0, "randers") } else { (2.0, "square") };
            let Ok(spec) = PPowerSpec::new(ctx.alpha.clone(), ctx.beta.clone(), p) else {
                return CheckResult::not_applicable(kind, tol, "invalid alpha/beta pair");
            };
            let m = constructions::ppower_metric(spec);
            let mut res = Residuals(BTreeMap::new());
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for s in tangent_samples(ctx, &m) {
                let r = if p == 1.0 {
                    constructions::randers_einstein_residuals(&ctx.alpha, &ctx.beta, std::slice::from_ref(&s), tol)
                } else {
                    constructions::square_einstein_residuals(&ctx.alpha, &ctx.beta, std::slice::from_ref(&s), tol)
                };
                match r {
                    Ok(rep) => {
                        for (k, v) in &rep.residuals {
                            res.push(k, *v);
                        }
                        rows.push(serde_json::to_value(&rep.samples[0]).expect("sample serializes"));
                    }
                    Err(e) => skipped.push(skip(&s.x, Some(&s.y), &e)),
                }
            }
            let mut out = finish(kind, tol, res, rows, skipped);
            out.note = out.note.or(Some(format!("{label} structure equations of the (alpha, beta) pair")));
            out
        }
        CheckKind::Sqrt2dConditions => {
            if n != 2 {
                return CheckResult::not_applicable(kind, tol, "the square-root Einstein condition is two-dimensional");
            }
            let mut keys = vec!["r00_condition"];
            if ctx.family.is_some() {
                keys.extend(["s_norm_formula", "lambda_formula"]);
            }
            let mut res = Residuals::new(&keys);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for x in &ctx.points {
                let r = (|| -> Result<Vec<(&str, f64)>> {
                    let mut out = vec![(
                        "r00_condition",
                        constructions::sqrt2d_einstein_residual(&ctx.alpha, &ctx.beta, x, ctx.directions.len())?,
                    )];
                    if let Some(fam) = ctx.family {
                        let (rd, ab) = alphabeta::ab_tensors(&ctx.alpha, &ctx.beta, x)?;
                        let s_norm = ab.s_norm_sq(&rd.a_inv);
                        out.push(("s_norm_formula", rel_diff(s_norm, constructions::sqrt2d_s_norm_formula(fam, x)?)));
                        let lambda = rd.sectional_curvature(&[1.0, 0.0], &[0.0, 1.0]);
                        out.push(("lambda_formula", rel_diff(lambda, constructions::sqrt2d_lambda_formula(fam, x)?)));
                    }
                    Ok(out)
                })();
                match r {
                    Ok(vals) => {
                        let mut fields = vec![("x", vv(x))];
                        for (k, v) in &vals {
                            res.push(k, *v);
                            fields.push((k, fv(*v)));
                        }
                        rows.push(row(fields));
                    }
                    Err(e) => skipped.push(skip(x, None, &e)),
                }
            }
            finish(kind, tol, res, rows, skipped)
        }
        CheckKind::Positivity => {
            let mut res = Residuals::new(&["disagreements", "not_positive"]);
            let (mut disagree, mut negative) = (0.0, 0.0);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            let spec = PPowerSpec { alpha: ctx.alpha.clone(), beta: ctx.beta.clone(), p: ctx.p };
            for x in &ctx.points {
                let r = (|| -> Result<_> {
                    let b2 = spec.b_sq(x)?;
                    Ok((b2, constructions::positivity_check(ctx.p, b2)?, constructions::positivity_inequalities(ctx.p, b2, POSITIVITY_GRID)?))
                })();
                match r {
                    Ok((b2, closed, sampled)) => {
                        if closed != sampled.positive {
                            disagree += 1.0;
                        }
                        if !sampled.positive {
                            negative += 1.0;
                        }
                        rows.push(row(vec![
                            ("x", vv(x)),
                            ("b_sq", fv(b2)),
                            ("closed_form", closed.into()),
                            ("sampled", sampled.positive.into()),
                            ("worst_margin", fv(sampled.worst_margin)),
                        ]));
                    }
                    Err(e) => skipped.push(skip(x, None, &e)),
                }
            }
            res.push("disagreements", disagree);
            res.push("not_positive", negative);
            let mut out = finish(kind, tol, res, rows, skipped);
            out.note = Some("counts over sample points; closed-form criterion vs sampled inequalities".into());
            out
        }
        CheckKind::KillingDeformation => {
            let mut res = Residuals::new(&["r_tilde", "norm_identity"]);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for x in &ctx.points {
                match constructions::killing_deformation(&ctx.alpha, &ctx.beta, x) {
                    Ok(k) => {
                        res.push("r_tilde", k.r_tilde_residual);
                        res.push("norm_identity", rel_diff(k.norm_sq, k.expected_norm_sq));
                        rows.push(serde_json::to_value(&k).expect("deformation serializes"));
                    }
                    Err(e) => skipped.push(skip(x, None, &e)),
                }
            }
            finish(kind, tol, res, rows, skipped)
        }
        CheckKind::RicciFlatParallel => {
            let samples: Vec<TangentSample> = ctx
                .points
                .iter()
                .flat_map(|x| ctx.directions.iter().map(move |y| TangentSample::new(x.clone(), y.clone())))
                .collect();
            let mut res = Residuals::new(&["max_bcov", "max_ric_alpha"]);
            let mut rows = Vec::new();
            let mut skipped = Vec::new();
            for s in &samples {
                match constructions::ricci_flat_parallel_check(&ctx.alpha, &ctx.beta, std::slice::from_ref(s), tol) {
                    Ok(r) => {
                        res.push("max_bcov", r.max_bcov);
                        res.push("max_ric_alpha", r.max_ric_alpha);
                        rows.push(row(vec![("x", vv(&s.x)), ("y", vv(&s.y)), ("max_bcov", fv(r.max_bcov)), ("ric_alpha", fv(r.max_ric_alpha))]));
                    }
                    Err(e) => skipped.push(skip(&s.x, Some(&s.y), &e)),
                }
            }
            finish(kind, tol, res, rows, skipped)
        }
    }
}

fn flag_curvature_check(ctx: &Context, kind: CheckKind, tol: f64) -> CheckResult {
    let mut keys = vec!["isotropy"];
    if ctx.family.is_some() {
        keys.extend(["closed_form_vs_engine", "lambda_formula_vs_engine", "closed_form_vs_lambda_formula"]);
    }
    let mut res = Residuals::new(&keys);
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (i, (x, cps)) in ctx.points.iter().zip(&ctx.curvature).enumerate() {
        let ok: Vec<&CurvaturePoint> = cps.iter().filter_map(|(_, c)| c.as_ref().ok()).collect();
        // flag curvature over pairs of admissible directions
        let mut ks = Vec::new();
        for (a, cp) in ok.iter().enumerate() {
            for other in ok.iter().skip(a + 1).take(3) {
                if let Ok(k) = cp.flag_curvature(&other.sample.y) {
                    ks.push(k);
                }
            }
        }
        if ks.is_empty() {
            skipped.push(Skipped { x: x.clone(), y: None, reason: "no non-degenerate flag".into() });
            continue;
        }
        let lo = ks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let engine = ks.iter().sum::<f64>() / ks.len() as f64;
        res.push("isotropy", rel_diff(lo, hi));
        let mut fields = vec![("point", i.into()), ("x", vv(x)), ("engine", fv(engine)), ("spread", fv(hi - lo))];
        if let Some(fam) = ctx.family {
            let closed = constructions::sqrt2d_flag_curvature(fam, x);
            let from_lambda =
                constructions::sqrt2d_k_from_lambda(&ctx.alpha, &ctx.beta, x, ctx.directions.len(), ctx.tolerances["sqrt2d_conditions"]);
            match (closed, from_lambda) {
                (Ok(c), Ok(l)) => {
                    res.push("closed_form_vs_engine", rel_diff(c, engine));
                    res.push("lambda_formula_vs_engine", rel_diff(l, engine));
                    res.push("closed_form_vs_lambda_formula", rel_diff(c, l));
                    fields.push(("closed_form", fv(c)));
                    fields.push(("from_lambda", fv(l)));
                }
                (Err(e), _) | (_, Err(e)) => skipped.push(skip(x, None, &e)),
            }
        }
        rows.push(row(fields));
    }
    finish(kind, tol, res, rows, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::parse_manifest;

    fn manifest(text: &str) -> Manifest {
        parse_manifest(text).unwrap()
    }

    const ROTATION: &str = r#"{
        "dimension": 2,
        "metric": {"kind": "sqrt2d_family", "u": "-x2", "v": "x1", "B": "x1^2+x2^2"},
        "samples": {"points": [[0.6, 0.0], [0.3, 0.5]], "directions": 8},
        "checks": ["einstein", "flag_curvature", "pde_residuals", "killing_deformation", "sqrt2d_conditions"]
    }"#;

    #[test]
    fn rotation_example_passes() {
        let r = run(&manifest(ROTATION), &RunOptions::default());
        for c in &r.checks {
            assert!(c.verdict, "{c:?}");
        }
        let (_, rows) = r.csv_table();
        assert!((rows[0][5] - (-1.25)).abs() < 1e-9);
    }

    #[test]
    fn reports_are_reproducible() {
        let text = r#"{
            "dimension": 2,
            "metric": {"kind": "ppower", "a": [["1","0"],["0","1"]], "b": ["0.3*x2", "0"], "p": 1},
            "samples": {"random": {"count": 3, "lower": [-0.5, -0.5], "upper": [0.5, 0.5]}, "seed": 11, "directions": 4},
            "checks": ["reversibility", "randers_conditions"]
        }"#;
        let a = run(&manifest(text), &RunOptions::default()).to_json();
        let b = run(&manifest(text), &RunOptions::default()).to_json();
        assert_eq!(a, b);
        let r = run(&manifest(text), &RunOptions::default());
        assert!(!r.verdict);
        assert!(r.checks[0].residuals["lambda_asymmetry"] > 1e-3);
    }

    #[test]
    fn inapplicable_check_is_reported() {
        let text = r#"{"dimension": 2, "metric": {"kind": "riemann", "a": [["1","0"],["0","1"]]},
                       "samples": {"points": [[0,0]]}, "checks": ["pde_residuals"]}"#;
        let r = run(&manifest(text), &RunOptions::default());
        assert!(matches!(r.checks[0].status, CheckStatus::NotApplicable));
        assert!(!r.verdict);
    }

    #[test]
    fn singular_points_are_skipped() {
        let text = r#"{"dimension": 2, "metric": {"kind": "sqrt2d_family", "u": "-x2", "v": "x1", "B": "x1^2+x2^2"},
                       "samples": {"points": [[0.6, 0.0], [1.2, 0.0]], "directions": 4}, "checks": ["einstein"]}"#;
        let r = run(&manifest(text), &RunOptions::default());
        assert!(r.checks[0].verdict);
        assert_eq!(r.checks[0].rows.len(), 1);
        assert!(!r.points[1].skipped.is_empty() || !r.checks[0].skipped.is_empty());
    }
}
