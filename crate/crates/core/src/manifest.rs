//! JSON manifests describing a metric, its sample points and the checks to run.
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "metric": { "kind": "sqrt2d_family", "u": "-x2", "v": "x1", "B": "x1^2 + x2^2" },
//!   "samples": { "points": [[0.6, 0.0]], "random": { "count": 10, "lower": [-0.9, -0.9], "upper": [0.9, 0.9] },
//!                "seed": 7, "directions": 32, "margin": 0.05 },
//!   "checks": ["einstein", "flag_curvature"],
//!   "tolerances": { "einstein": 1e-7 }
//! }
//! ```
//!
//! Validation errors carry the JSON pointer of the offending value.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

use crate::alphabeta::{AlphaSpec, BetaSpec};
use crate::constructions::{self, PPowerSpec, Sqrt2dFamily, Sqrt2dFamilySpec};
use crate::expr::{self, MAX_COORDS};
use crate::finsler::FinslerMetric;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{pointer}: {source}")]
    Expression { pointer: String, source: expr::ExprError },
}

impl ManifestError {
    /// JSON pointer of the offending value, when there is one.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            ManifestError::Schema { pointer, .. } | ManifestError::Expression { pointer, .. } => Some(pointer),
            _ => None,
        }
    }
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> ManifestError {
    ManifestError::Schema { pointer: pointer.into(), message: message.into() }
}

/// Checks a manifest can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckKind {
    Reversibility,
    Einstein,
    FlagCurvature,
    PdeResiduals,
    RicciIdentities,
    StructuralVsGeneric,
    RandersConditions,
    SquareConditions,
    Sqrt2dConditions,
    Positivity,
    KillingDeformation,
    RicciFlatParallel,
}

impl CheckKind {
    pub const ALL: [CheckKind; 12] = [
        CheckKind::Reversibility,
        CheckKind::Einstein,
        CheckKind::FlagCurvature,
        CheckKind::PdeResiduals,
        CheckKind::RicciIdentities,
        CheckKind::StructuralVsGeneric,
        CheckKind::RandersConditions,
        CheckKind::SquareConditions,
        CheckKind::Sqrt2dConditions,
        CheckKind::Positivity,
        CheckKind::KillingDeformation,
        CheckKind::RicciFlatParallel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Reversibility => "reversibility",
            CheckKind::Einstein => "einstein",
            CheckKind::FlagCurvature => "flag_curvature",
            CheckKind::PdeResiduals => "pde_residuals",
            CheckKind::RicciIdentities => "ricci_identities",
            CheckKind::StructuralVsGeneric => "structural_vs_generic",
            CheckKind::RandersConditions => "randers_conditions",
            CheckKind::SquareConditions => "square_conditions",
            CheckKind::Sqrt2dConditions => "sqrt2d_conditions",
            CheckKind::Positivity => "positivity",
            CheckKind::KillingDeformation => "killing_deformation",
            CheckKind::RicciFlatParallel => "ricci_flat_parallel",
        }
    }

    /// Name of the tolerance this check compares against.
    pub fn tolerance_key(self) -> &'static str {
        self.name()
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        CheckKind::ALL.iter().copied().find(|c| c.name() == s).ok_or_else(|| format!("unknown check {s:?}"))
    }
}

/// Default tolerance per check. Einstein spreads use 1e-7, algebraic
/// identities 1e-9, cross-formula comparisons 1e-6. Positivity counts
/// disagreements, so any count below 1 passes.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        (CheckKind::Reversibility, 1e-9),
        (CheckKind::Einstein, 1e-7),
        (CheckKind::FlagCurvature, 1e-6),
        (CheckKind::PdeResiduals, 1e-10),
        (CheckKind::RicciIdentities, 1e-7),
        (CheckKind::StructuralVsGeneric, 1e-9),
        (CheckKind::RandersConditions, 1e-6),
        (CheckKind::SquareConditions, 1e-6),
        (CheckKind::Sqrt2dConditions, 1e-8),
        (CheckKind::Positivity, 1.0),
        (CheckKind::KillingDeformation, 1e-7),
        (CheckKind::RicciFlatParallel, 1e-9),
    ]
    .into_iter()
    .map(|(k, v)| (k.tolerance_key().to_string(), v))
    .collect()
}

/// The metric block of a manifest.
#[derive(Debug, Clone)]
pub enum MetricSpec {
    Riemann { alpha: AlphaSpec },
    PPower(PPowerSpec),
    Sqrt2dFamily(Sqrt2dFamily),
}

impl MetricSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MetricSpec::Riemann { .. } => "riemann",
            MetricSpec::PPower(_) => "ppower",
            MetricSpec::Sqrt2dFamily(_) => "sqrt2d_family",
        }
    }

    /// The `(alpha, beta, p)` view; a Riemannian metric has `beta = 0`, `p = 1`.
    pub fn alpha_beta_p(&self) -> (AlphaSpec, BetaSpec, f64) {
        match self {
            MetricSpec::Riemann { alpha } => (alpha.clone(), BetaSpec::zero(alpha.dim()), 1.0),
            MetricSpec::PPower(s) => (s.alpha.clone(), s.beta.clone(), s.p),
            MetricSpec::Sqrt2dFamily(f) => (f.alpha.clone(), f.beta.clone(), 0.5),
        }
    }

    pub fn finsler(&self) -> Box<dyn FinslerMetric> {
        let (alpha, beta, p) = self.alpha_beta_p();
        Box::new(constructions::ppower_metric(PPowerSpec { alpha, beta, p }))
    }
}

/// Seeded uniform sampling in a box.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomPoints {
    pub count: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub points: Vec<Vec<f64>>,
    pub random: Option<RandomPoints>,
    pub seed: Option<u64>,
    pub directions: usize,
    /// Distance kept from the singular sets of the metric formulas.
    pub margin: f64,
}

#[derive(Debug, Clone)]
pub struct Manifest {
    /// The manifest as parsed, for echoing into reports.
    pub source: Value,
    pub dimension: usize,
    pub metric: MetricSpec,
    pub samples: Samples,
    pub checks: Vec<CheckKind>,
    pub tolerances: BTreeMap<String, f64>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ManifestError::Io { path: path.display().to_string(), source })?;
    parse_manifest(&text)
}

pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let source: Value = serde_json::from_str(text)?;
    from_value(source)
}

fn field<'a>(obj: &'a Value, ptr: &str, key: &str) -> Result<&'a Value, ManifestError> {
    obj.get(key).ok_or_else(|| schema(format!("{ptr}/{key}"), "missing required field"))
}

fn as_object<'a>(v: &'a Value, ptr: &str) -> Result<&'a serde_json::Map<String, Value>, ManifestError> {
    v.as_object().ok_or_else(|| schema(ptr, "expected an object"))
}

fn as_array<'a>(v: &'a Value, ptr: &str) -> Result<&'a Vec<Value>, ManifestError> {
    v.as_array().ok_or_else(|| schema(ptr, "expected an array"))
}

fn as_f64(v: &Value, ptr: &str) -> Result<f64, ManifestError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| schema(ptr, "expected a finite number"))
}

fn as_usize(v: &Value, ptr: &str) -> Result<usize, ManifestError> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| schema(ptr, "expected a nonnegative integer"))
}

fn as_expr(v: &Value, ptr: &str, dim: usize) -> Result<expr::Expr, ManifestError> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        _ => return Err(schema(ptr, "expected an expression string")),
    };
    let e = expr::parse(&text).map_err(|source| ManifestError::Expression { pointer: ptr.into(), source })?;
    e.check_dim(dim).map_err(|source| ManifestError::Expression { pointer: ptr.into(), source })?;
    Ok(e)
}

fn as_vector(v: &Value, ptr: &str, dim: usize) -> Result<Vec<f64>, ManifestError> {
    let arr = as_array(v, ptr)?;
    if arr.len() != dim {
        return Err(schema(ptr, format!("expected {dim} coordinates, got {}", arr.len())));
    }
    arr.iter().enumerate().map(|(i, x)| as_f64(x, &format!("{ptr}/{i}"))).collect()
}

fn reject_unknown(obj: &serde_json::Map<String, Value>, ptr: &str, allowed: &[&str]) -> Result<(), ManifestError> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(schema(format!("{ptr}/{k}"), "unknown field")),
        None => Ok(()),
    }
}

fn from_value(source: Value) -> Result<Manifest, ManifestError> {
    let root = as_object(&source, "")?;
    reject_unknown(root, "", &["dimension", "metric", "samples", "checks", "tolerances", "description"])?;
    let dimension = as_usize(field(&source, "", "dimension")?, "/dimension")?;
    if !(2..=MAX_COORDS).contains(&dimension) {
        return Err(schema("/dimension", format!("dimension must be in 2..={MAX_COORDS}, got {dimension}")));
    }
    let metric = parse_metric(field(&source, "", "metric")?, dimension)?;
    let samples = parse_samples(field(&source, "", "samples")?, dimension)?;

    let checks_v = as_array(field(&source, "", "checks")?, "/checks")?;
    let mut checks = Vec::with_capacity(checks_v.len());
    for (i, c) in checks_v.iter().enumerate() {
        let ptr = format!("/checks/{i}");
        let name = c.as_str().ok_or_else(|| schema(&ptr, "expected a check name"))?;
        let kind = name.parse::<CheckKind>().map_err(|m| schema(&ptr, m))?;
        if !checks.contains(&kind) {
            checks.push(kind);
        }
    }

    let mut tolerances = default_tolerances();
    if let Some(t) = source.get("tolerances") {
        for (k, v) in as_object(t, "/tolerances")? {
            let ptr = format!("/tolerances/{k}");
            if !tolerances.contains_key(k) {
                return Err(schema(ptr, "unknown tolerance name"));
            }
            let x = as_f64(v, &ptr)?;
            if !(x > 0.0) {
                return Err(schema(ptr, "tolerance must be positive"));
            }
            tolerances.insert(k.clone(), x);
        }
    }
    Ok(Manifest { source, dimension, metric, samples, checks, tolerances })
}

fn parse_alpha(v: &Value, ptr: &str, dim: usize) -> Result<AlphaSpec, ManifestError> {
    let rows = as_array(v, ptr)?;
    if rows.len() != dim {
        return Err(schema(ptr, format!("expected {dim} rows, got {}", rows.len())));
    }
    let mut entries = Vec::with_capacity(dim);
    for (i, row) in rows.iter().enumerate() {
        let rptr = format!("{ptr}/{i}");
        let cols = as_array(row, &rptr)?;
        if cols.len() != dim {
            return Err(schema(&rptr, format!("expected {dim} entries, got {}", cols.len())));
        }
        entries.push(
            cols.iter().enumerate().map(|(j, e)| as_expr(e, &format!("{rptr}/{j}"), dim)).collect::<Result<Vec<_>, _>>()?,
        );
    }
    AlphaSpec::new(entries).map_err(|e| schema(ptr, e.to_string()))
}

fn parse_metric(v: &Value, dim: usize) -> Result<MetricSpec, ManifestError> {
    let obj = as_object(v, "/metric")?;
    let kind = field(v, "/metric", "kind")?.as_str().ok_or_else(|| schema("/metric/kind", "expected a string"))?;
    match kind {
        "riemann" => {
            reject_unknown(obj, "/metric", &["kind", "a"])?;
            Ok(MetricSpec::Riemann { alpha: parse_alpha(field(v, "/metric", "a")?, "/metric/a", dim)? })
        }
        "ppower" => {
            reject_unknown(obj, "/metric", &["kind", "a", "b", "p"])?;
            let alpha = parse_alpha(field(v, "/metric", "a")?, "/metric/a", dim)?;
            let b = as_array(field(v, "/metric", "b")?, "/metric/b")?;
            if b.len() != dim {
                return Err(schema("/metric/b", format!("expected {dim} components, got {}", b.len())));
            }
            let comps =
                b.iter().enumerate().map(|(i, e)| as_expr(e, &format!("/metric/b/{i}"), dim)).collect::<Result<_, _>>()?;
            let beta = BetaSpec::new(comps).map_err(|e| schema("/metric/b", e.to_string()))?;
            let p = as_f64(field(v, "/metric", "p")?, "/metric/p")?;
            let spec = PPowerSpec::new(alpha, beta, p).map_err(|e| schema("/metric/p", e.to_string()))?;
            Ok(MetricSpec::PPower(spec))
        }
        "sqrt2d_family" => {
            reject_unknown(obj, "/metric", &["kind", "u", "v", "B"])?;
            if dim != 2 {
                return Err(schema("/dimension", "sqrt2d_family requires dimension 2"));
            }
            let u = as_expr(field(v, "/metric", "u")?, "/metric/u", 2)?;
            let vv = as_expr(field(v, "/metric", "v")?, "/metric/v", 2)?;
            let b = as_expr(field(v, "/metric", "B")?, "/metric/B", 2)?;
            let spec = Sqrt2dFamilySpec::new(u, vv, b).map_err(|e| schema("/metric", e.to_string()))?;
            Ok(MetricSpec::Sqrt2dFamily(constructions::sqrt2d_family(&spec)))
        }
        other => Err(schema("/metric/kind", format!("unknown metric kind {other:?}"))),
    }
}

fn parse_samples(v: &Value, dim: usize) -> Result<Samples, ManifestError> {
    let obj = as_object(v, "/samples")?;
    reject_unknown(obj, "/samples", &["points", "random", "seed", "directions", "margin"])?;
    let points = match v.get("points") {
        Some(p) => as_array(p, "/samples/points")?
            .iter()
            .enumerate()
            .map(|(i, x)| as_vector(x, &format!("/samples/points/{i}"), dim))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let random = match v.get("random") {
        Some(r) => {
            let robj = as_object(r, "/samples/random")?;
            reject_unknown(robj, "/samples/random", &["count", "lower", "upper"])?;
            let count = as_usize(field(r, "/samples/random", "count")?, "/samples/random/count")?;
            let lower = as_vector(field(r, "/samples/random", "lower")?, "/samples/random/lower", dim)?;
            let upper = as_vector(field(r, "/samples/random", "upper")?, "/samples/random/upper", dim)?;
            if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
                return Err(schema("/samples/random/upper", "each upper bound must exceed its lower bound"));
            }
            Some(RandomPoints { count, lower, upper })
        }
        None => None,
    };
    let seed = match v.get("seed") {
        Some(s) => Some(s.as_u64().ok_or_else(|| schema("/samples/seed", "expected a nonnegative integer"))?),
        None => None,
    };
    if random.is_some() && seed.is_none() {
        return Err(schema("/samples/seed", "a seed is required when random points are requested"));
    }
    if points.is_empty() && random.as_ref().is_none_or(|r| r.count == 0) {
        return Err(schema("/samples", "no sample points: give points or a nonzero random count"));
    }
    let directions = match v.get("directions") {
        Some(d) => as_usize(d, "/samples/directions")?,
        None => 16,
    };
    if directions == 0 {
        return Err(schema("/samples/directions", "need at least one direction"));
    }
    let margin = match v.get("margin") {
        Some(m) => as_f64(m, "/samples/margin")?,
        None => 0.05,
    };
    if !(0.0..0.5).contains(&margin) {
        return Err(schema("/samples/margin", "margin must be in [0, 0.5)"));
    }
    Ok(Samples { points, random, seed, directions, margin })
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROTATION: &str = r#"{
        "dimension": 2,
        "metric": {"kind": "sqrt2d_family", "u": "-x2", "v": "x1", "B": "x1^2+x2^2"},
        "samples": {"points": [[0.6, 0.0]], "directions": 8},
        "checks": ["einstein", "flag_curvature"]
    }"#;

    fn pointer_of(text: &str) -> String {
        parse_manifest(text).unwrap_err().pointer().unwrap_or("").to_string()
    }

    #[test]
    fn rotation_manifest_is_valid() {
        let m = parse_manifest(ROTATION).unwrap();
        assert_eq!(m.metric.kind(), "sqrt2d_family");
        assert_eq!(m.checks, vec![CheckKind::Einstein, CheckKind::FlagCurvature]);
        assert_eq!(m.tolerances["einstein"], 1e-7);
    }

    #[test]
    fn missing_p_is_reported() {
        let text = r#"{"dimension": 2, "metric": {"kind": "ppower", "a": [["1","0"],["0","1"]], "b": ["0.1","0"]},
                       "samples": {"points": [[0,0]]}, "checks": []}"#;
        assert_eq!(pointer_of(text), "/metric/p");
    }

    #[test]
    fn dimension_nine_is_rejected() {
        let text = r#"{"dimension": 9, "metric": {"kind": "riemann", "a": []}, "samples": {"points": []}, "checks": []}"#;
        assert_eq!(pointer_of(text), "/dimension");
    }

    #[test]
    fn random_points_need_a_seed() {
        let text = r#"{"dimension": 2, "metric": {"kind": "riemann", "a": [["1","0"],["0","1"]]},
                       "samples": {"random": {"count": 3, "lower": [0,0], "upper": [1,1]}}, "checks": []}"#;
        assert_eq!(pointer_of(text), "/samples/seed");
    }

    #[test]
    fn expression_errors_carry_location() {
        let text = r#"{"dimension": 2, "metric": {"kind": "riemann", "a": [["1","0"],["0","1 + *"]]},
                       "samples": {"points": [[0,0]]}, "checks": []}"#;
        let err = parse_manifest(text).unwrap_err();
        assert_eq!(err.pointer(), Some("/metric/a/1/1"));
        assert!(err.to_string().contains("byte"), "{err}");
    }

    #[test]
    fn unknown_check_and_tolerance() {
        let bad_check = ROTATION.replace("\"einstein\", ", "\"bogus\", ");
        assert_eq!(pointer_of(&bad_check), "/checks/0");
        let bad_tol = ROTATION.replace("\"checks\"", "\"tolerances\": {\"nope\": 1}, \"checks\"");
        assert_eq!(pointer_of(&bad_tol), "/tolerances/nope");
    }
}
