use lk_core::blocklin::Mat;
use lk_core::metricfield::{parse_expr, BinOp, Expr, Func, Jet2, MetricJet};
use lk_core::tensorcore::{i4, CurvatureBundle};
use lk_core::weylsum::{gb_density_pfaffian, lk_integrand, LkSpec};
use proptest::prelude::*;

const DIM: usize = 3;

/// Expressions that are smooth and bounded on [-1, 1]^3.
fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(Expr::num),
        (0..DIM).prop_map(Expr::var),
        Just(Expr::Pi),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Add, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Sub, a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(BinOp::Mul, a, b)),
            // denominators and radicands bounded away from zero
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::binary(
                BinOp::Div,
                a,
                Expr::binary(BinOp::Add, Expr::num(2.0), Expr::call(Func::Sin, b))
            )),
            inner.clone().prop_map(|a| Expr::call(
                Func::Sqrt,
                Expr::binary(BinOp::Add, Expr::num(1.5), Expr::call(Func::Cos, a))
            )),
            inner.clone().prop_map(|a| Expr::call(Func::Sin, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Cos, a)),
            inner.clone().prop_map(|a| Expr::call(Func::Exp, Expr::call(Func::Sin, a))),
            inner.clone().prop_map(|a| Expr::call(
                Func::Log,
                Expr::binary(BinOp::Add, Expr::num(3.0), Expr::call(Func::Cos, a))
            )),
            (inner.clone(), 0u32..4).prop_map(|(a, k)| Expr::binary(BinOp::Pow, a, Expr::num(k as f64))),
            inner.prop_map(Expr::neg),
        ]
    })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, DIM)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(e in smooth_expr(), x in point()) {
        let text = e.to_string();
        let back = parse_expr(&text, DIM).unwrap();
        prop_assert_eq!(back.to_string(), text.clone());
        let (a, b) = (e.eval(&x).unwrap(), back.eval(&x).unwrap());
        prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{} -> {} vs {}", text, a, b);
    }

    #[test]
    fn jets_match_finite_differences(e in smooth_expr(), x in point()) {
        let j = e.eval_jet2(&x).unwrap();
        let f = |y: &[f64]| e.eval(y).unwrap();
        let scale = 1.0 + j.value().abs();
        prop_assert!((j.value() - f(&x)).abs() <= 1e-12 * scale);
        let h = 1e-5;
        for a in 0..DIM {
            let mut p = x.clone();
            let mut m = x.clone();
            p[a] += h;
            m[a] -= h;
            let fd = (f(&p) - f(&m)) / (2.0 * h);
            let tol = 1e-5 * (1.0 + j.grad(a).abs() + scale);
            prop_assert!((fd - j.grad(a)).abs() <= tol, "d{} {}: {} vs {}", a, e, fd, j.grad(a));
        }
        let h = 1e-4;
        for a in 0..DIM {
            for b in 0..DIM {
                let shifted = |da: f64, db: f64| {
                    let mut y = x.clone();
                    y[a] += da;
                    y[b] += db;
                    f(&y)
                };
                let fd = (shifted(h, h) - shifted(h, -h) - shifted(-h, h) + shifted(-h, -h)) / (4.0 * h * h);
                let tol = 1e-3 * (1.0 + j.hess(a, b).abs() + scale);
                prop_assert!((fd - j.hess(a, b)).abs() <= tol, "d{}d{} {}: {} vs {}", a, b, e, fd, j.hess(a, b));
            }
        }
    }
}

/// Random metric 2-jet: positive-definite value, arbitrary symmetric
/// first and second derivatives.
fn random_metric_jet(n: usize) -> impl Strategy<Value = MetricJet> {
    let tri = n * (n + 1) / 2;
    (
        prop::collection::vec(-1.0f64..1.0, n * n),
        prop::collection::vec(-1.0f64..1.0, tri * n),
        prop::collection::vec(-1.0f64..1.0, tri * tri),
    )
        .prop_map(move |(a, d1, d2)| {
            let k = |q: usize, r: usize| {
                let (q, r) = if q <= r { (q, r) } else { (r, q) };
                r * (r + 1) / 2 + q
            };
            MetricJet::from_components(n, |q, r| {
                let value: f64 = (0..n).map(|m| a[q * n + m] * a[r * n + m]).sum::<f64>()
                    + if q == r { 1.0 } else { 0.0 };
                let grad: Vec<f64> = (0..n).map(|p| d1[k(q, r) * n + p]).collect();
                Jet2::from_parts(value, &grad, |s, p| d2[k(q, r) * tri + k(s, p)])
            })
        })
}

fn gauss_bonnet_pair(mj: &MetricJet) -> (f64, f64) {
    let n = mj.dim();
    let bundle = CurvatureBundle::new(mj).unwrap();
    let spec = LkSpec::for_volume(n, 0).unwrap().unwrap();
    let coupling = lk_integrand(&bundle, &spec).unwrap() * spec.normalization;
    let g = Mat::from_rows(n, n, mj.g_matrix());
    (coupling, gb_density_pfaffian(&bundle, &g).unwrap())
}

fn assert_close(a: f64, b: f64, rel: f64) -> Result<(), TestCaseError> {
    let scale = a.abs().max(b.abs()).max(1e-300);
    prop_assert!((a - b).abs() <= rel * scale, "{} vs {}", a, b);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn coupling_sum_equals_pfaffian_dim2(mj in random_metric_jet(2)) {
        let (c, p) = gauss_bonnet_pair(&mj);
        assert_close(c, p, 1e-8)?;
    }

    #[test]
    fn coupling_sum_equals_pfaffian_dim4(mj in random_metric_jet(4)) {
        let (c, p) = gauss_bonnet_pair(&mj);
        assert_close(c, p, 1e-8)?;
    }

    #[test]
    fn riemann_symmetries(mj in random_metric_jet(4)) {
        let n = 4;
        let b = CurvatureBundle::new(&mj).unwrap();
        let r = |p, q, s, t| b.riemann_lower[i4(n, p, q, s, t)];
        let scale = b.riemann_lower.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for p in 0..n { for q in 0..n { for s in 0..n { for t in 0..n {
            let v = r(p, q, s, t);
            prop_assert!((v + r(q, p, s, t)).abs() <= 1e-12 * scale);
            prop_assert!((v - r(s, t, p, q)).abs() <= 1e-10 * scale);
            let bianchi = v + r(p, s, t, q) + r(p, t, q, s);
            prop_assert!(bianchi.abs() <= 1e-10 * scale);
        }}}}
    }

    /// Relabelling coordinates permutes R and leaves every integrand alone.
    #[test]
    fn integrands_are_relabelling_invariant(mj in random_metric_jet(4), perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle()) {
        let b0 = CurvatureBundle::new(&mj).unwrap();
        let b1 = CurvatureBundle::new(&mj.permuted(&perm)).unwrap();
        for e in [2, 4] {
            let spec = LkSpec::new(4, e).unwrap();
            assert_close(lk_integrand(&b0, &spec).unwrap(), lk_integrand(&b1, &spec).unwrap(), 1e-9)?;
        }
    }

    /// g ↦ c·g multiplies each R^{..}_{..} by 1/c, so a degree-e integrand by c^{-e/2}.
    #[test]
    fn integrands_scale_homogeneously(mj in random_metric_jet(4), c in 0.2f64..5.0) {
        let b0 = CurvatureBundle::new(&mj).unwrap();
        let b1 = CurvatureBundle::new(&mj.scaled(c)).unwrap();
        for e in [2, 4] {
            let spec = LkSpec::new(4, e).unwrap();
            let want = lk_integrand(&b0, &spec).unwrap() * c.powi(-(e as i32) / 2);
            assert_close(lk_integrand(&b1, &spec).unwrap(), want, 1e-9)?;
        }
    }
}
