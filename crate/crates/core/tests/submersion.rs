use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use lk_core::blocklin::{det, is_positive_definite, Mat};
use lk_core::metricfield::MetricSource;
use lk_core::quadrature::QuadratureOptions;
use lk_core::rng::Rng;
use lk_core::submersion::{
    collapse_sweep, fiber_euler, horizontal_lift, scale_metric, scale_metric_naive, sectional_sweep, validate,
    volume_scaling_check, PlaneClass, SubmersionChart,
};
use lk_core::zoo::{self, ZooEntry, ZooObject};

fn submersions() -> Vec<ZooEntry> {
    zoo::CATALOGUE
        .iter()
        .map(|n| zoo::make(n, &BTreeMap::new()).unwrap())
        .filter(|e| matches!(e.object, ZooObject::Submersion(_)))
        .collect()
}

fn random_point(rng: &mut Rng, sc: &SubmersionChart) -> Vec<f64> {
    sc.total().domain().iter().map(|[a, b]| rng.range(*a, *b)).collect()
}

#[test]
fn horizontal_lifts_are_orthogonal_everywhere() {
    let mut rng = Rng::new(1);
    for e in submersions() {
        let sc = e.submersion().unwrap();
        for _ in 0..100 {
            let x = random_point(&mut rng, sc);
            let lift = horizontal_lift(sc, &x).unwrap();
            assert!(lift.orthogonality <= 1e-12, "{}: {}", e.name, lift.orthogonality);
        }
    }
}

#[test]
fn scaled_metrics_stay_positive_definite() {
    let mut rng = Rng::new(2);
    for e in submersions() {
        let sc = e.submersion().unwrap();
        let n = sc.total().dim();
        for _ in 0..20 {
            let x = random_point(&mut rng, sc);
            for eps in [1.0, 0.5, 1e-2, 1e-4] {
                let g = scale_metric(sc, &x, eps).unwrap().g_matrix();
                assert!(is_positive_definite(&g, n), "{} at eps {eps}", e.name);
            }
        }
    }
}

#[test]
fn volume_form_scales_with_fiber_dimension() {
    let e = zoo::make("product_s2_s1", &BTreeMap::new()).unwrap();
    let sc = e.submersion().unwrap();
    let x = [1.0, 2.0, 3.0];
    let d0 = det(&Mat::from_rows(3, 3, sc.total().metric_matrix(&x).unwrap()));
    let d = det(&Mat::from_rows(3, 3, scale_metric(sc, &x, 0.25).unwrap().g_matrix()));
    // N = 2, so dvol scales by ε^{N/2} = 0.25
    assert!(((d / d0).sqrt() - 0.25).abs() < 1e-15);
    for eps in [0.5, 0.1, 0.01] {
        assert!(volume_scaling_check(sc, eps, 16).unwrap().max_relative_deviation <= 1e-10);
    }
}

/// The coupled entry separates the intrinsic g(ε) from the literal display.
#[test]
fn coupled_entry_intrinsic_versus_naive() {
    let c = 0.1;
    let e = zoo::make("coupled_t2_over_s1", &BTreeMap::from([("c".into(), c)])).unwrap();
    let sc = e.submersion().unwrap();
    let report = validate(sc, 32);
    assert!(report.pass);
    // g_αi g̃^ij g_jβ = c²
    assert!((report.naive_gap - c * c).abs() < 1e-15, "{}", report.naive_gap);
    let x = [0.4, 1.9];
    for eps in [0.5, 0.1, 0.01] {
        let good = scale_metric(sc, &x, eps).unwrap().g_matrix();
        let naive = scale_metric_naive(sc, &x, eps).unwrap().g_matrix();
        assert!((good[3] - (1.0 + c * c - (1.0 - eps) * c * c)).abs() < 1e-15);
        assert_eq!(naive[3], 1.0 + c * c);
        assert_eq!(good[1], naive[1]);
        // only the intrinsic metric has det g(ε) = ε^N det g
        let d0 = 1.0 + c * c - c * c;
        let dg = good[0] * good[3] - good[1] * good[2];
        let dn = naive[0] * naive[3] - naive[1] * naive[2];
        assert!((dg / (eps * d0) - 1.0).abs() < 1e-12);
        assert!((dn / (eps * d0) - 1.0).abs() > 1e-3);
    }
    let product = zoo::make("product_s2_s1", &BTreeMap::new()).unwrap();
    assert_eq!(validate(product.submersion().unwrap(), 16).naive_gap, 0.0);
}

fn log_slope(eps: &[f64], values: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = eps.iter().zip(values).map(|(e, v)| (e.ln(), v.abs().ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[test]
fn sweep_targets_hold_for_every_zoo_submersion() {
    let opts = QuadratureOptions::default();
    let schedule: Vec<f64> = (2..=6).map(|k| 2f64.powi(-k)).collect();
    for e in submersions() {
        let sc = e.submersion().unwrap();
        let n = sc.total().dim();
        for i in 0..=n {
            let r = collapse_sweep(sc, i, &schedule, &opts, None).unwrap();
            assert!(r.complete);
            let b = sc.base_dim();
            if i <= b {
                assert!(r.pass(), "{} i={i}: {r:?}", e.name);
            } else if r.values.iter().any(|v| *v != 0.0) {
                // above the base dimension the target is 0 and V_i decays like ε^{(i-b)/2}
                assert_eq!(r.target, 0.0);
                let order = log_slope(&r.eps_list, &r.values);
                assert!(order >= (i - b) as f64 / 2.0 - 0.05, "{} i={i}: order {order}", e.name);
            }
            if (n - i) % 2 == 1 {
                assert!(r.values.iter().all(|v| *v == 0.0), "{} i={i}", e.name);
            }
            if sc.fiber_dim() % 2 == 1 {
                assert_eq!(r.target, 0.0);
            }
        }
    }
}

#[test]
fn fiber_euler_characteristics() {
    let opts = QuadratureOptions::default();
    let cases = [("product_s2_s1", 2), ("warped_s2_over_s1", 2), ("torus_fiber_bundle", 0), ("flat_t2_over_s1", 0)];
    for (name, chi) in cases {
        let e = zoo::make(name, &BTreeMap::new()).unwrap();
        let sc = e.submersion().unwrap();
        let x: Vec<f64> = sc.total().domain().iter().map(|[a, b]| 0.3 * a + 0.7 * b).collect();
        assert_eq!(fiber_euler(sc, &x, &opts).unwrap(), chi, "{name}");
        assert_eq!(e.reference("fiber_chi"), Some(chi as f64));
    }
}

#[test]
fn mixed_class_curvature_stays_bounded() {
    let e = zoo::make("warped_s2_over_s1", &BTreeMap::new()).unwrap();
    let schedule: Vec<f64> = (2..=9).map(|k| 2f64.powi(-k)).collect();
    let r = sectional_sweep(e.submersion().unwrap(), &schedule, 64, 3).unwrap();
    let mixed = r.classes.iter().find(|c| c.class == PlaneClass::BaseFiber).unwrap();
    let (lo, hi) = mixed
        .min_k
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    assert!(lo.is_finite() && hi - lo < 0.1, "{lo}..{hi}");
    // −f″/f with f = 1 + 0.3 sin b is at least −0.3/0.7
    assert!(lo >= -0.3 / 0.7 - 1e-9);
}

#[test]
fn submersion_json_round_trip() {
    let e = zoo::make("warped_s2_over_s1", &BTreeMap::new()).unwrap();
    let sc = e.submersion().unwrap();
    let text = serde_json::to_string(&sc.to_file()).unwrap();
    let back = SubmersionChart::from_json(&text).unwrap();
    assert_eq!(&back, sc);
    let opts = QuadratureOptions::default();
    let v = collapse_sweep(&back, 1, &[0.5, 0.25, 0.125, 0.0625], &opts, None).unwrap();
    // V₁(M(ε)) = 4π + 2πa²ε for the warped bundle
    for (eps, val) in v.eps_list.iter().zip(&v.values) {
        let want = 4.0 * PI + TAU * 0.09 * eps;
        assert!((val - want).abs() < 1e-8, "{eps}: {val} vs {want}");
    }
}
