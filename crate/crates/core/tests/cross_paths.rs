//! The generic engine and the `(alpha, beta)` path agree on shared quantities.

use approx::assert_abs_diff_eq;

use finslerlab::alphabeta::{self, AlphaSpec, BetaSpec, IdentityConvention, RiemannianMetric};
use finslerlab::constructions::{self, PPowerSpec, Sqrt2dFamilySpec};
use finslerlab::finsler::{self, FinslerMetric, TangentSample};
use finslerlab::suite;

#[test]
fn rotation_family_coefficients() {
    // At x = (0.6, 0): B = 0.36, u = 0, v = 0.6, (1 - B)^(3/4) = 0.64^0.75.
    let fam = constructions::sqrt2d_family(&Sqrt2dFamilySpec::rotation_example());
    let spec = PPowerSpec::new(fam.alpha.clone(), fam.beta.clone(), 0.5).unwrap();
    let q = 0.64_f64.powf(0.75);
    let (a, b) = spec.alpha_beta(&[0.6, 0.0], &[1.0, 0.0]).unwrap();
    assert_abs_diff_eq!(a, 0.6 / q / 0.6, epsilon = 1e-14);
    assert_abs_diff_eq!(a, 1.397542, epsilon = 1e-6);
    assert_abs_diff_eq!(b, 0.0, epsilon = 1e-15);
    let (_, b) = spec.alpha_beta(&[0.6, 0.0], &[0.0, 1.0]).unwrap();
    assert_abs_diff_eq!(b, 0.36 * 0.6 / 0.36 / q, epsilon = 1e-14);
    assert_abs_diff_eq!(b, 0.838525, epsilon = 1e-6);
}

#[test]
fn riemannian_paths_agree_on_the_round_sphere() {
    // Stereographic chart of the unit sphere: K = 1 everywhere.
    let alpha = AlphaSpec::conformal(2, finslerlab::expr::parse("4/(1 + x1^2 + x2^2)^2").unwrap());
    let x = [0.3, -0.7];
    let engine = finsler::einstein_scalar(&RiemannianMetric { alpha: alpha.clone() }, &TangentSample::new(x.to_vec(), vec![0.4, 1.0]))
        .unwrap();
    let rd = alphabeta::riemann_data(&alpha, &x).unwrap();
    assert_abs_diff_eq!(engine, 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(rd.sectional_curvature(&[1.0, 0.0], &[0.0, 1.0]), 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(alphabeta::conformal_gauss_curvature(&alpha, &x).unwrap(), 1.0, epsilon = 1e-10);
    let s = rd.spray(&[0.4, 1.0]);
    let g = finsler::spray(&RiemannianMetric { alpha }, &TangentSample::new(x.to_vec(), vec![0.4, 1.0])).unwrap();
    for (a, b) in s.iter().zip(&g) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn randers_ricci_on_a_curved_chart() {
    let (alpha, beta) = suite::curved_pair();
    let m = constructions::ppower_metric(PPowerSpec::new(alpha.clone(), beta.clone(), 1.0).unwrap());
    for (x, y) in [([0.3, -0.2, 0.5], [0.4, 1.0, -0.7]), ([-0.1, 0.2, 0.0], [1.0, 0.0, 0.3])] {
        let s = TangentSample::new(x.to_vec(), y.to_vec());
        let generic = finsler::ricci(&m, &s).unwrap();
        let formula = alphabeta::randers_ricci(&alpha, &beta, &s).unwrap();
        assert!((generic - formula).abs() < 1e-10 * generic.abs().max(1.0), "{generic} vs {formula}");
    }
}

#[test]
fn funk_metric_structure_equations() {
    let (a, b) = suite::funk_pair();
    let samples = [
        TangentSample::new(vec![0.3, 0.2], vec![0.5, -1.0]),
        TangentSample::new(vec![-0.4, 0.1], vec![1.0, 0.3]),
    ];
    let rep = constructions::randers_einstein_residuals(&a, &b, &samples, 1e-6).unwrap();
    assert!(rep.verdict, "{:?}", rep.residuals);
    for s in &rep.samples {
        // lambda = sigma - c^2 = -1/4 with c = 1/2
        assert_abs_diff_eq!(s.scalars["c"], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(s.scalars["sigma_minus_c_sq"], -0.25, epsilon = 1e-10);
    }
    let ids = alphabeta::ricci_identity_residuals(&a, &b, &[0.2, -0.3], IdentityConvention::calibrated()).unwrap();
    assert!(ids.iter().all(|r| *r < 1e-9), "{ids:?}");
}

#[test]
fn second_triple_is_einstein_with_matching_curvatures() {
    let spec = suite::second_triple();
    let fam = constructions::sqrt2d_family(&spec);
    let m = fam.metric();
    for x in [[0.5, 1.2], [0.9, 1.8]] {
        let closed = constructions::sqrt2d_flag_curvature(&spec, &x).unwrap();
        let from_lambda = constructions::sqrt2d_k_from_lambda(&fam.alpha, &fam.beta, &x, 16, 1e-8).unwrap();
        let v = finsler::einstein_check(&m, &[x.to_vec()], 12, 1e-8).unwrap();
        assert!(v.verdict, "spread {}", v.max_spread);
        let engine = v.lambdas[0][0];
        assert!((closed - from_lambda).abs() < 1e-9 * closed.abs().max(1.0));
        assert!((closed - engine).abs() < 1e-9 * closed.abs().max(1.0));
    }
}

#[test]
fn square_metric_with_nonparallel_form_fails_its_conditions() {
    let alpha = AlphaSpec::euclidean(2);
    let beta = BetaSpec::parse(&["0.2*x1", "0.1*x2"]).unwrap();
    let s = TangentSample::new(vec![0.3, 0.4], vec![1.0, 0.5]);
    let rep = constructions::square_einstein_residuals(&alpha, &beta, &[s], 1e-6).unwrap();
    assert!(!rep.verdict);
}

#[test]
fn metric_domain_rejects_singular_sets() {
    let fam = constructions::sqrt2d_family(&Sqrt2dFamilySpec::rotation_example());
    let m = fam.metric();
    assert!(m.in_domain(&[0.5, 0.1], &[1.0, 0.0]));
    let err = finsler::einstein_scalar(&m, &TangentSample::new(vec![1.1, 0.0], vec![1.0, 0.0])).unwrap_err();
    assert!(err.is_sample_local(), "{err}");
    let err = finsler::einstein_scalar(&m, &TangentSample::new(vec![0.5, 0.1], vec![0.0, 0.0])).unwrap_err();
    assert!(err.is_sample_local(), "{err}");
}
