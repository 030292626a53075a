//! Built-in reproduction scenarios.
//!
//! Each scenario measures a handful of quantities and compares them with
//! pinned limits. Rows are keyed by short descriptive anchors. A tolerance
//! override replaces every numerical residual limit; counts, lower bounds
//! and runtime limits are never overridden.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::alphabeta::{self, AlphaSpec, BetaSpec, IdentityConvention};
use crate::constructions::{self, PPowerSpec, Sqrt2dFamily, Sqrt2dFamilySpec};
use crate::error::{Error, Result};
use crate::finsler::{self, FinslerMetric, TangentSample};
use crate::manifest;
use crate::run::{self, rel_diff, RunOptions};
use crate::sampling;

pub const DEFAULT_SEED: u64 = 20_240_917;

/// Exponents exercised by the structural and flat-parallel scenarios.
pub const EXPONENTS: [f64; 5] = [1.0, 2.0, -1.0, 0.5, 3.0];

/// Grid points used when sampling the positivity inequalities.
pub const POSITIVITY_GRID: usize = run::POSITIVITY_GRID;

/// Finite-difference step for the jet soundness scenario.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Replaces every numerical residual limit.
    pub tolerance: Option<f64>,
    /// Negate the curvature terms of the Ricci identities.
    pub flip_convention: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: DEFAULT_SEED, tolerance: None, flip_convention: false }
    }
}

impl SuiteOptions {
    fn tol(&self, pinned: f64) -> f64 {
        self.tolerance.unwrap_or(pinned)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes iff `value < limit`.
    Below,
    /// Passes iff `value > limit`.
    Above,
}

#[derive(Debug, Clone, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
    pub pass: bool,
}

impl Measurement {
    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, bound: Bound::Below, limit, pass: value < limit }
    }

    pub fn above(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, bound: Bound::Above, limit, pass: value > limit }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub anchor: String,
    pub title: String,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub samples: usize,
    pub skipped: usize,
    pub elapsed_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Outcome {
    pub fn measurement(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.name == name)
    }
}

struct Measured {
    measurements: Vec<Measurement>,
    samples: usize,
    skipped: usize,
    note: Option<String>,
}

impl Measured {
    fn new(samples: usize, skipped: usize) -> Self {
        Self { measurements: Vec::new(), samples, skipped, note: None }
    }
    fn push(&mut self, m: Measurement) -> &mut Self {
        self.measurements.push(m);
        self
    }
}

pub struct Scenario {
    pub anchor: &'static str,
    pub title: &'static str,
    run: fn(&SuiteOptions) -> Result<Measured>,
}

impl Scenario {
    pub fn run(&self, opts: &SuiteOptions) -> Outcome {
        let t = Instant::now();
        let res = (self.run)(opts);
        let elapsed_s = t.elapsed().as_secs_f64();
        match res {
            Ok(m) => Outcome {
                anchor: self.anchor.into(),
                title: self.title.into(),
                passed: !m.measurements.is_empty() && m.measurements.iter().all(|x| x.pass),
                measurements: m.measurements,
                samples: m.samples,
                skipped: m.skipped,
                elapsed_s,
                note: m.note,
            },
            Err(e) => Outcome {
                anchor: self.anchor.into(),
                title: self.title.into(),
                passed: false,
                measurements: Vec::new(),
                samples: 0,
                skipped: 0,
                elapsed_s,
                note: Some(format!("error: {e}")),
            },
        }
    }
}

pub static SCENARIOS: [Scenario; 10] = [
    Scenario {
        anchor: "rotation-example",
        title: "rotation family: lambda is isotropic and equals -1/sqrt(1-B)",
        run: rotation_example,
    },
    Scenario {
        anchor: "family-curvature-formulas",
        title: "square-root family: closed-form, lambda-based and engine flag curvature agree",
        run: family_curvature_formulas,
    },
    Scenario {
        anchor: "structural-spray",
        title: "structural spray matches the generic spray for five exponents",
        run: structural_spray,
    },
    Scenario { anchor: "randers-ricci", title: "Randers Ricci formula matches the engine; Funk metric", run: randers_ricci },
    Scenario {
        anchor: "ricci-identities",
        title: "four Ricci identities hold under the calibrated convention and fail when flipped",
        run: ricci_identities,
    },
    Scenario {
        anchor: "positivity",
        title: "positivity: closed-form criterion agrees with inequality sampling",
        run: positivity,
    },
    Scenario {
        anchor: "flat-parallel",
        title: "flat alpha and parallel beta give Ricci-flat, Einstein-reversible metrics",
        run: flat_parallel,
    },
    Scenario {
        anchor: "negative-control",
        title: "a non-closed Randers form is rejected by reversibility and structure checks",
        run: negative_control,
    },
    Scenario {
        anchor: "killing-deformation",
        title: "rotation family: deformed form is Killing with the predicted norm",
        run: killing_deformation,
    },
    Scenario {
        anchor: "jet-soundness",
        title: "jet partials of F^2 and G^i match central finite differences",
        run: jet_soundness,
    },
];

/// Runs every scenario whose anchor contains `filter` (all when `None`).
pub fn verify(filter: Option<&str>, opts: &SuiteOptions) -> Vec<Outcome> {
    SCENARIOS.iter().filter(|s| filter.is_none_or(|f| s.anchor.contains(f))).map(|s| s.run(opts)).collect()
}

pub fn scenario(anchor: &str) -> Option<&'static Scenario> {
    SCENARIOS.iter().find(|s| s.anchor == anchor)
}

/// Plain-text table, one row per scenario plus one line per measurement.
pub fn format_table(outcomes: &[Outcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let _ = writeln!(
            out,
            "{:<28} {}  {:>7.2}s  {} samples, {} skipped  {}",
            o.anchor,
            if o.passed { "PASS" } else { "FAIL" },
            o.elapsed_s,
            o.samples,
            o.skipped,
            o.title
        );
        for m in &o.measurements {
            let op = match m.bound {
                Bound::Below => "<",
                Bound::Above => ">",
            };
            let _ = writeln!(
                out,
                "    {:<36} {:>12.4e} {op} {:<10.3e} {}",
                m.name,
                m.value,
                m.limit,
                if m.pass { "ok" } else { "FAIL" }
            );
        }
        if let Some(n) = &o.note {
            let _ = writeln!(out, "    note: {n}");
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let _ = writeln!(out, "{passed}/{} scenarios passed", outcomes.len());
    out
}

fn worst(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| if v.is_nan() || m.is_nan() { f64::NAN } else { m.max(v) })
}

/// Points where the square-root family is sampled: `B` in `(m, 1 - m)`,
/// `|v| > m`, away from `u = v = 0`.
pub fn family_points(spec: &Sqrt2dFamilySpec, seed: u64, count: usize, lo: [f64; 2], hi: [f64; 2]) -> Vec<Vec<f64>> {
    let m = 0.05;
    sampling::random_points(seed, &lo, &hi, count, |x| {
        let (Ok(u), Ok(v), Ok(b)) = (spec.u.eval(x), spec.v.eval(x), spec.b.eval(x)) else { return false };
        spec.check_point(x).is_ok() && b > m && b < 1.0 - m && v.abs() > m && u * u + v * v > m * m
    })
}

/// Second harmonic triple used beside the rotation example.
pub fn second_triple() -> Sqrt2dFamilySpec {
    Sqrt2dFamilySpec::parse("x1^2 - x2^2", "2*x1*x2", "x2/(x1^2 + x2^2)").expect("static expressions parse")
}

/// Fixed three-dimensional `(alpha, beta)` pair with non-constant coefficients.
pub fn curved_pair() -> (AlphaSpec, BetaSpec) {
    let alpha = AlphaSpec::parse(&[
        vec!["1 + 0.3*x1^2 + 0.1*x2", "0.2*x1*x2", "0.1*x3"],
        vec!["0.2*x1*x2", "2 + 0.2*x3^2", "0.05*x1"],
        vec!["0.1*x3", "0.05*x1", "1.5 + 0.1*x1*x2"],
    ])
    .expect("static expressions parse");
    let beta = BetaSpec::parse(&["0.1*x2^2 + 0.2*x3", "0.3*x1*x3", "0.1 - 0.2*x1^2*x2"]).expect("static expressions parse");
    (alpha, beta)
}

/// Random quadratic polynomial in `n` coordinates with coefficients in `[-scale, scale]`.
fn random_quadratic(rng: &mut impl Rng, n: usize, constant: f64, scale: f64) -> String {
    let mut s = format!("{constant:.6}");
    for i in 1..=n {
        let _ = write!(s, " {:+.6}*x{i}", rng.gen_range(-scale..scale));
        for j in i..=n {
            let _ = write!(s, " {:+.6}*x{i}*x{j}", rng.gen_range(-scale..scale));
        }
    }
    s
}

/// Random positive definite polynomial `alpha` and quadratic `beta` in dimension 3.
pub fn random_pair(rng: &mut impl Rng) -> Result<(AlphaSpec, BetaSpec)> {
    let n = 3;
    let mut rows = vec![vec![String::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let e = if i == j { random_quadratic(rng, n, 1.5, 0.1) } else { random_quadratic(rng, n, 0.0, 0.08) };
            rows[i][j] = e.clone();
            rows[j][i] = e;
        }
    }
    let alpha = AlphaSpec::parse(&rows)?;
    let comps: Vec<String> = (0..n).map(|_| random_quadratic(rng, n, 0.0, 0.15)).collect();
    Ok((alpha, BetaSpec::parse(&comps)?))
}

fn rotation_example(opts: &SuiteOptions) -> Result<Measured> {
    let t = Instant::now();
    let spec = Sqrt2dFamilySpec::rotation_example();
    let fam = constructions::sqrt2d_family(&spec);
    let metric = fam.metric();
    let points = family_points(&spec, opts.seed, 10, [-0.97, -0.97], [0.97, 0.97]);
    let dirs = sampling::unit_directions(2, 32);
    let per_point: Vec<Result<(f64, f64)>> = points
        .par_iter()
        .map(|x| {
            let k = -1.0 / (1.0 - spec.b.eval(x)?).sqrt();
            let mut lambdas = Vec::with_capacity(dirs.len());
            for y in dirs.iter().filter(|y| metric.in_domain(x, y)) {
                lambdas.push(finsler::einstein_scalar(&metric, &TangentSample::new(x.clone(), y.clone()))?);
            }
            if lambdas.is_empty() {
                return Err(Error::Domain("no admissible direction".into()));
            }
            let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok((hi - lo, worst(lambdas.iter().map(|l| (l - k).abs()))))
        })
        .collect();
    let ok: Vec<(f64, f64)> = per_point.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let mut m = Measured::new(ok.len(), per_point.len() - ok.len());
    m.push(Measurement::above("points", ok.len() as f64, 9.5))
        .push(Measurement::below("lambda_spread", worst(ok.iter().map(|r| r.0)), opts.tol(1e-7)))
        .push(Measurement::below("closed_form_deviation", worst(ok.iter().map(|r| r.1)), opts.tol(1e-7)))
        .push(Measurement::below("runtime_s", t.elapsed().as_secs_f64(), 10.0));
    Ok(m)
}

/// Engine flag curvature at `x`: first admissible direction and its normal.
fn engine_flag_curvature(metric: &dyn FinslerMetric, x: &[f64]) -> Result<f64> {
    for y in sampling::unit_directions(2, 8) {
        if metric.in_domain(x, &y) {
            let cp = finsler::curvature_point(metric, &TangentSample::new(x.to_vec(), y.clone()))?;
            return cp.flag_curvature(&[-y[1], y[0]]);
        }
    }
    Err(Error::Domain("no admissible direction".into()))
}

fn family_curvature_formulas(opts: &SuiteOptions) -> Result<Measured> {
    let t = Instant::now();
    let triples = [
        (Sqrt2dFamilySpec::rotation_example(), [-0.97, -0.97], [0.97, 0.97]),
        (second_triple(), [0.2, 0.3], [1.5, 2.0]),
    ];
    let mut rows: Vec<Result<[f64; 3]>> = Vec::new();
    for (k, (spec, lo, hi)) in triples.iter().enumerate() {
        let fam: Sqrt2dFamily = constructions::sqrt2d_family(spec);
        let metric = fam.metric();
        let points = family_points(spec, opts.seed.wrapping_add(k as u64 + 1), 20, *lo, *hi);
        if points.len() < 20 {
            return Err(Error::Invalid(format!("only {} admissible points for triple {}", points.len(), k + 1)));
        }
        rows.extend(points.par_iter().map(|x| {
            let closed = constructions::sqrt2d_flag_curvature(spec, x)?;
            let from_lambda = constructions::sqrt2d_k_from_lambda(&fam.alpha, &fam.beta, x, 16, 1e-8)?;
            let engine = engine_flag_curvature(&metric, x)?;
            Ok([closed, from_lambda, engine])
        }).collect::<Vec<_>>());
    }
    let ok: Vec<[f64; 3]> = rows.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let tol = opts.tol(1e-6);
    let mut m = Measured::new(ok.len(), rows.len() - ok.len());
    m.push(Measurement::above("points", ok.len() as f64, 39.5))
        .push(Measurement::below("closed_form_vs_lambda_formula", worst(ok.iter().map(|r| rel_diff(r[0], r[1]))), tol))
        .push(Measurement::below("closed_form_vs_engine", worst(ok.iter().map(|r| rel_diff(r[0], r[2]))), tol))
        .push(Measurement::below("lambda_formula_vs_engine", worst(ok.iter().map(|r| rel_diff(r[1], r[2]))), tol))
        .push(Measurement::below("runtime_s", t.elapsed().as_secs_f64(), 10.0));
    Ok(m)
}

/// Seeded tangent samples in a box where the `p`-power metric is admissible.
fn ppower_samples(
    spec: &PPowerSpec,
    seed: u64,
    count: usize,
    lo: f64,
    hi: f64,
) -> Vec<TangentSample> {
    let n = spec.dim();
    let metric = constructions::ppower_metric(spec.clone());
    let mut rng = sampling::rng(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count {
        tries += 1;
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
        let y = sampling::random_direction(&mut rng, n);
        let positive = spec.b_sq(&x).and_then(|b2| constructions::positivity_check(spec.p, b2)).unwrap_or(false);
        if positive && metric.in_domain(&x, &y) && metric.in_domain(&x, &y.iter().map(|v| -v).collect::<Vec<_>>()) {
            out.push(TangentSample::new(x, y));
        }
    }
    out
}

fn label(p: f64) -> String {
    format!("p={p}")
}

fn structural_spray(opts: &SuiteOptions) -> Result<Measured> {
    let t = Instant::now();
    let (alpha, beta) = curved_pair();
    let mut m = Measured::new(0, 0);
    for (k, p) in EXPONENTS.iter().enumerate() {
        let spec = PPowerSpec::new(alpha.clone(), beta.clone(), *p)?;
        let metric = constructions::ppower_metric(spec.clone());
        let samples = ppower_samples(&spec, opts.seed.wrapping_add(100 + k as u64), 100, -0.4, 0.4);
        let diffs: Vec<Result<f64>> = samples
            .par_iter()
            .map(|s| {
                let g = finsler::spray(&metric, s)?;
                let h = alphabeta::structural_spray(&alpha, &beta, *p, s)?;
                let scale = worst(g.iter().map(|v| v.abs())).max(1.0);
                Ok(worst(g.iter().zip(&h).map(|(a, b)| (a - b).abs() / scale)))
            })
            .collect();
        let ok: Vec<f64> = diffs.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        m.samples += ok.len();
        m.skipped += diffs.len() - ok.len();
        m.push(Measurement::above(format!("{} samples", label(*p)), ok.len() as f64, 99.5));
        m.push(Measurement::below(format!("{} spray_difference", label(*p)), worst(ok), opts.tol(1e-9)));
    }
    m.push(Measurement::below("runtime_s", t.elapsed().as_secs_f64(), 30.0));
    Ok(m)
}

/// The Funk metric of the unit disk as an `(alpha, beta)` pair.
pub fn funk_pair() -> (AlphaSpec, BetaSpec) {
    let d = "(1 - x1^2 - x2^2)";
    let alpha = AlphaSpec::parse(&[
        vec![format!("({d} + x1^2)/{d}^2"), format!("x1*x2/{d}^2")],
        vec![format!("x1*x2/{d}^2"), format!("({d} + x2^2)/{d}^2")],
    ])
    .expect("static expressions parse");
    let beta = BetaSpec::parse(&[format!("x1/{d}"), format!("x2/{d}")]).expect("static expressions parse");
    (alpha, beta)
}

fn randers_ricci(opts: &SuiteOptions) -> Result<Measured> {
    let mut rng = sampling::rng(opts.seed.wrapping_add(200));
    let n = 3;
    let mut flat = Vec::new();
    let mut skipped = 0;
    let mut tries = 0;
    while flat.len() < 50 && tries < 500 {
        tries += 1;
        let comps: Vec<String> = (0..n)
            .map(|_| {
                let c0 = rng.gen_range(-0.3..0.3);
                random_quadratic(&mut rng, n, c0, 0.2)
            })
            .collect();
        let beta = BetaSpec::parse(&comps)?;
        let alpha = AlphaSpec::euclidean(n);
        let spec = PPowerSpec::new(alpha.clone(), beta.clone(), 1.0)?;
        let mut found = ppower_samples(&spec, rng.gen(), 1, -0.5, 0.5);
        let Some(s) = found.pop() else {
            skipped += 1;
            continue;
        };
        let metric = constructions::ppower_metric(spec);
        match (finsler::ricci(&metric, &s), alphabeta::randers_ricci(&alpha, &beta, &s)) {
            (Ok(a), Ok(b)) => flat.push(rel_diff(a, b)),
            _ => skipped += 1,
        }
    }
    let (fa, fb) = funk_pair();
    let spec = PPowerSpec::new(fa.clone(), fb.clone(), 1.0)?;
    let metric = constructions::ppower_metric(spec.clone());
    let funk: Vec<(f64, f64)> = ppower_samples(&spec, opts.seed.wrapping_add(201), 10, -0.55, 0.55)
        .iter()
        .map(|s| {
            let cp = finsler::curvature_point(&metric, s)?;
            let formula = alphabeta::randers_ricci(&fa, &fb, s)?;
            Ok((rel_diff(cp.ricci, formula), (cp.einstein_scalar + 0.25).abs()))
        })
        .collect::<Result<_>>()?;
    let mut m = Measured::new(flat.len() + funk.len(), skipped);
    m.push(Measurement::above("flat_samples", flat.len() as f64, 49.5))
        .push(Measurement::below("flat_randers_formula", worst(flat), opts.tol(1e-7)))
        .push(Measurement::above("funk_samples", funk.len() as f64, 0.5))
        .push(Measurement::below("funk_formula", worst(funk.iter().map(|r| r.0)), opts.tol(1e-7)))
        .push(Measurement::below("funk_lambda_deviation", worst(funk.iter().map(|r| r.1)), opts.tol(1e-6)));
    Ok(m)
}

fn ricci_identities(opts: &SuiteOptions) -> Result<Measured> {
    let calibrated = IdentityConvention::calibrated();
    let (primary, contrast) =
        if opts.flip_convention { (calibrated.flipped(), calibrated) } else { (calibrated, calibrated.flipped()) };
    let mut rng = sampling::rng(opts.seed.wrapping_add(300));
    let mut prim = [0.0f64; 4];
    let mut cont: f64 = 0.0;
    let mut count = 0;
    let mut skipped = 0;
    while count < 20 && skipped < 200 {
        let (alpha, beta) = random_pair(&mut rng)?;
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let r = alphabeta::ricci_identity_residuals(&alpha, &beta, &x, primary)
            .and_then(|a| Ok((a, alphabeta::ricci_identity_residuals(&alpha, &beta, &x, contrast)?)));
        match r {
            Ok((a, b)) => {
                for i in 0..4 {
                    prim[i] = worst([prim[i], a[i]]);
                }
                cont = worst([cont, worst(b)]);
                count += 1;
            }
            Err(_) => skipped += 1,
        }
    }
    let tol = opts.tol(1e-7);
    let mut m = Measured::new(count, skipped);
    m.push(Measurement::above("instances", count as f64, 19.5));
    for (i, v) in prim.iter().enumerate() {
        m.push(Measurement::below(format!("identity_{}", i + 1), *v, tol));
    }
    m.push(Measurement::above("contrast_convention_residual", cont, tol));
    m.note = Some(format!(
        "primary convention: klij {:?}, flipped {}; the contrast convention must fail",
        primary.klij, primary.flipped
    ));
    Ok(m)
}

/// Case boundary of the closed-form positivity criterion.
pub fn positivity_bound(p: f64) -> f64 {
    if !(0.0..=2.0).contains(&p) {
        1.0 / ((p - 1.0) * (p - 1.0))
    } else if p >= 0.5 {
        1.0
    } else {
        (2.0 - p).powi(2) / (4.0 * (1.0 - p * p).powi(2))
    }
}

/// 60 `(p, b^2)` pairs: five example pairs plus 55 pairs placed at
/// multiples of the case boundary for exponents on both sides of each case.
pub fn positivity_pairs() -> Vec<(f64, f64)> {
    let mut pairs = vec![(3.0, 0.2), (3.0, 0.3), (2.0, 0.99), (0.4, 0.8), (0.4, 0.95)];
    for p in [-1.0, -0.5, 2.05, 2.5, 3.0, 0.5, 1.0, 2.0, 0.1, 0.25, 0.45] {
        let bound = positivity_bound(p);
        for f in [0.5, 0.9, 0.99, 1.01, 1.1] {
            pairs.push((p, f * bound));
        }
    }
    pairs
}

fn positivity(_opts: &SuiteOptions) -> Result<Measured> {
    let pairs = positivity_pairs();
    let mut disagree = Vec::new();
    for &(p, b2) in &pairs {
        let closed = constructions::positivity_check(p, b2)?;
        let sampled = constructions::positivity_inequalities(p, b2, POSITIVITY_GRID)?;
        if closed != sampled.positive {
            disagree.push(format!("(p={p}, b^2={b2:.6}: closed {closed}, sampled {})", sampled.positive));
        }
    }
    let mut m = Measured::new(pairs.len(), 0);
    m.push(Measurement::above("pairs", pairs.len() as f64, 59.5))
        .push(Measurement::below("disagreements", disagree.len() as f64, 0.5));
    if !disagree.is_empty() {
        m.note = Some(disagree.join(" "));
    }
    Ok(m)
}

/// Euclidean plane in polar coordinates with a constant Cartesian covector.
pub fn polar_parallel_pair() -> (AlphaSpec, BetaSpec) {
    let alpha = AlphaSpec::parse(&[vec!["1", "0"], vec!["0", "x1^2"]]).expect("static expressions parse");
    let beta = BetaSpec::parse(&["0.2*cos(x2) + 0.1*sin(x2)", "x1*(0.1*cos(x2) - 0.2*sin(x2))"])
        .expect("static expressions parse");
    (alpha, beta)
}

fn flat_parallel(opts: &SuiteOptions) -> Result<Measured> {
    let (alpha, beta) = polar_parallel_pair();
    let tol = opts.tol(1e-9);
    let mut m = Measured::new(0, 0);
    for (k, p) in EXPONENTS.iter().enumerate() {
        let spec = PPowerSpec::new(alpha.clone(), beta.clone(), *p)?;
        let metric = constructions::ppower_metric(spec.clone());
        let mut rng = sampling::rng(opts.seed.wrapping_add(400 + k as u64));
        let samples: Vec<TangentSample> = (0..50)
            .map(|_| {
                let x = vec![rng.gen_range(0.5..2.0), rng.gen_range(-3.0..3.0)];
                TangentSample::new(x, sampling::random_direction(&mut rng, 2))
            })
            .collect();
        let premise = constructions::ricci_flat_parallel_check(&alpha, &beta, &samples, tol)?;
        let rows: Vec<Result<(f64, f64)>> = samples
            .par_iter()
            .map(|s| {
                let cp = finsler::curvature_point(&metric, s)?;
                Ok((cp.ricci.abs(), finsler::reversibility_residual(&metric, s)?))
            })
            .collect();
        let ok: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        m.samples += ok.len();
        m.skipped += rows.len() - ok.len();
        let l = label(*p);
        m.push(Measurement::above(format!("{l} samples"), ok.len() as f64, 49.5))
            .push(Measurement::below(format!("{l} premise"), premise.max_bcov.max(premise.max_ric_alpha), tol))
            .push(Measurement::below(format!("{l} ricci"), worst(ok.iter().map(|r| r.0)), tol))
            .push(Measurement::below(format!("{l} reversibility"), worst(ok.iter().map(|r| r.1)), tol));
    }
    Ok(m)
}

/// Manifest of the non-closed Randers control.
pub const NEGATIVE_CONTROL_MANIFEST: &str = r#"{
  "dimension": 2,
  "metric": {"kind": "ppower", "a": [["1", "0"], ["0", "1"]], "b": ["0.3*x2", "0"], "p": 1},
  "samples": {"random": {"count": 10, "lower": [-0.5, -0.5], "upper": [0.5, 0.5]}, "seed": 5, "directions": 8},
  "checks": ["reversibility", "randers_conditions", "square_conditions"]
}"#;

fn negative_control(opts: &SuiteOptions) -> Result<Measured> {
    let manifest = manifest::parse_manifest(NEGATIVE_CONTROL_MANIFEST).map_err(|e| Error::Invalid(e.to_string()))?;
    let report = run::run(&manifest, &RunOptions { seed: Some(opts.seed), ..RunOptions::default() });
    let samples = report.checks.iter().map(|c| c.rows.len()).sum();
    let skipped = report.checks.iter().map(|c| c.skipped.len()).sum();
    let mut m = Measured::new(samples, skipped);
    for c in &report.checks {
        let value = worst(c.residuals.values().copied());
        let limit = if c.name == "reversibility" { 1e-3 } else { c.tolerance };
        m.push(Measurement::above(format!("{} max_residual", c.name), value, limit));
    }
    Ok(m)
}

fn killing_deformation(opts: &SuiteOptions) -> Result<Measured> {
    let spec = Sqrt2dFamilySpec::rotation_example();
    let fam = constructions::sqrt2d_family(&spec);
    let points = family_points(&spec, opts.seed.wrapping_add(500), 10, [-0.97, -0.97], [0.97, 0.97]);
    let rows: Vec<Result<(f64, f64)>> = points
        .iter()
        .map(|x| {
            let k = constructions::killing_deformation(&fam.alpha, &fam.beta, x)?;
            let b = spec.b.eval(x)?;
            Ok((k.r_tilde_residual, rel_diff(k.norm_sq, b / (1.0 - b).powf(1.5))))
        })
        .collect();
    let ok: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let mut m = Measured::new(ok.len(), rows.len() - ok.len());
    m.push(Measurement::above("points", ok.len() as f64, 9.5))
        .push(Measurement::below("r_tilde", worst(ok.iter().map(|r| r.0)), opts.tol(1e-7)))
        .push(Measurement::below("norm_identity", worst(ok.iter().map(|r| r.1)), opts.tol(1e-9)));
    Ok(m)
}

fn jet_soundness(opts: &SuiteOptions) -> Result<Measured> {
    let (alpha, beta) = curved_pair();
    let mut samples: Vec<(Box<dyn FinslerMetric>, TangentSample)> = Vec::new();
    for (k, p) in EXPONENTS.iter().enumerate() {
        let spec = PPowerSpec::new(alpha.clone(), beta.clone(), *p)?;
        for s in ppower_samples(&spec, opts.seed.wrapping_add(600 + k as u64), 16, -0.4, 0.4) {
            samples.push((Box::new(constructions::ppower_metric(spec.clone())), s));
        }
    }
    let spec = Sqrt2dFamilySpec::rotation_example();
    let fam = constructions::sqrt2d_family(&spec);
    let mut rng = sampling::rng(opts.seed.wrapping_add(610));
    for x in family_points(&spec, opts.seed.wrapping_add(611), 20, [-0.97, -0.97], [0.97, 0.97]) {
        let y = sampling::random_direction(&mut rng, 2);
        let metric = fam.metric();
        if metric.in_domain(&x, &y) {
            samples.push((Box::new(metric), TangentSample::new(x, y)));
        }
    }
    let rows: Vec<Result<f64>> = samples.par_iter().map(|(m, s)| finsler::fd_soundness(m, s, FD_STEP)).collect();
    let ok: Vec<f64> = rows.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let mut m = Measured::new(ok.len(), rows.len() - ok.len());
    m.push(Measurement::above("samples", ok.len() as f64, 99.5))
        .push(Measurement::below("max_relative_deviation", worst(ok), opts.tol(1e-5)));
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_are_unique() {
        let mut a: Vec<&str> = SCENARIOS.iter().map(|s| s.anchor).collect();
        a.sort_unstable();
        a.dedup();
        assert_eq!(a.len(), SCENARIOS.len());
    }

    #[test]
    fn positivity_pairs_cover_boundaries() {
        let pairs = positivity_pairs();
        assert_eq!(pairs.len(), 60);
        for ex in [(3.0, 0.2), (3.0, 0.3), (2.0, 0.99), (0.4, 0.8), (0.4, 0.95)] {
            assert!(pairs.contains(&ex));
        }
        assert!((positivity_bound(0.4) - 2.56 / 2.8224).abs() < 1e-12);
        assert_eq!(positivity_bound(3.0), 0.25);
    }

    #[test]
    fn filter_selects_by_anchor() {
        let out = verify(Some("killing"), &SuiteOptions::default());
        assert_eq!(out.len(), 1);
        assert!(out[0].passed, "{}", format_table(&out));
    }

    #[test]
    fn tiny_tolerance_fails_numerical_rows() {
        let opts = SuiteOptions { tolerance: Some(1e-300), ..SuiteOptions::default() };
        let out = scenario("killing-deformation").unwrap().run(&opts);
        assert!(!out.passed);
    }
}
