use super::*;
use crate::splinefourier::Family;
use crate::testing::{composite, rng, uniform};
use proptest::prelude::*;
use rand::Rng;

fn opts() -> PredictionOptions {
    PredictionOptions::default()
}

fn fejer(s: f64) -> TestFunction {
    TestFunction::fejer(s)
}

fn req(phis: &[TestFunction]) -> MomentRequest {
    MomentRequest::new(phis.to_vec()).unwrap()
}

fn unit_box() -> TestFunction {
    TestFunction::new(PiecewisePoly::indicator(-0.5, 0.5, 1.0).unwrap(), "box").unwrap()
}

fn random_family(r: &mut impl Rng) -> Family {
    [Family::Fejer, Family::QuadraticBspline, Family::CubicBspline][r.gen_range(0..3)]
}

/// `∫_lo^∞ t^k f(t+a) g(t+b) dt` by composite Gauss–Legendre over the joint breakpoints.
fn product_moment_oracle(f: &PiecewisePoly, a: f64, g: &PiecewisePoly, b: f64, k: i32, lo: f64) -> f64 {
    let mut cuts: Vec<f64> = f.breakpoints().iter().map(|x| x - a).collect();
    cuts.extend(g.breakpoints().iter().map(|x| x - b));
    let hi = cuts.iter().cloned().fold(lo, f64::max);
    composite(|t| t.powi(k) * f.eval(t + a) * g.eval(t + b), lo, hi, &cuts, 2)
}

#[test]
fn shifted_product_moment_matches_quadrature() {
    let mut r = rng(11);
    for _ in 0..40 {
        let f = TestFunction::builtin(random_family(&mut r), uniform(&mut r, 0.3, 2.0)).unwrap();
        let g = TestFunction::builtin(random_family(&mut r), uniform(&mut r, 0.3, 2.0)).unwrap();
        let (a, b) = (uniform(&mut r, -1.0, 2.0), uniform(&mut r, -1.0, 2.0));
        let lo = uniform(&mut r, -0.5, 0.5);
        for k in 0..3 {
            let got = f.fhat().shifted_product_moment(a, g.fhat(), b, k, lo);
            let want = product_moment_oracle(f.fhat(), a, g.fhat(), b, k as i32, lo);
            assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        }
    }
}

#[test]
fn i2_examples() {
    assert!((i2(&fejer(1.0), &fejer(1.0)) - 1.0 / 3.0).abs() < 1e-15);
    assert!((i2(&unit_box(), &unit_box()) - 0.5).abs() < 1e-15);
    assert_eq!(i2(&TestFunction::zero(), &fejer(1.3)), 0.0);
}

#[test]
fn iscr_examples() {
    assert_eq!(iscr(&fejer(0.8), &fejer(1.0), 0.0, 0.3), 0.0);
    assert!((iscr(&fejer(2.0), &fejer(2.0), 0.0, 0.0) + 1.0 / 48.0).abs() < 1e-15);
    assert!((iscr(&fejer(1.5), &fejer(1.5), 0.0, 0.0) + 1.0 / 432.0).abs() < 1e-15);
}

#[test]
fn iscr_matches_quadrature_oracle() {
    let mut r = rng(12);
    for _ in 0..30 {
        let f = TestFunction::builtin(random_family(&mut r), uniform(&mut r, 1.0, 3.0)).unwrap();
        let g = TestFunction::builtin(random_family(&mut r), uniform(&mut r, 1.0, 3.0)).unwrap();
        let (u1, u2) = (uniform(&mut r, 0.0, 1.0), uniform(&mut r, 0.0, 1.0));
        let c1: Vec<f64> = f.fhat().breakpoints().iter().map(|x| x - 1.0 - u1).collect();
        let c2: Vec<f64> = g.fhat().breakpoints().iter().map(|x| x - 1.0 - u2).collect();
        let a1 = composite(|t| f.eval_fhat(t + 1.0 + u1), 0.0, 3.0, &c1, 4);
        let a2 = composite(|t| g.eval_fhat(t + 1.0 + u2), 0.0, 3.0, &c2, 4);
        let b = product_moment_oracle(f.fhat(), 1.0 + u1, g.fhat(), 1.0 + u2, 1, 0.0);
        let got = iscr(&f, &g, u1, u2);
        assert!((got - (a1 * a2 - 4.0 * b)).abs() < 1e-9, "{got}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn i2_and_iscr_are_symmetric(
        fa in 0usize..3, fb in 0usize..3,
        sa in 0.2f64..2.5, sb in 0.2f64..2.5,
        u1 in 0.0f64..1.0, u2 in 0.0f64..1.0,
    ) {
        let fams = [Family::Fejer, Family::QuadraticBspline, Family::Box];
        let f = TestFunction::builtin(fams[fa], sa).unwrap();
        let g = TestFunction::builtin(fams[fb], sb).unwrap();
        prop_assert!((i2(&f, &g) - i2(&g, &f)).abs() < 1e-14);
        prop_assert!((iscr(&f, &g, u1, u2) - iscr(&g, &f, u2, u1)).abs() < 1e-14);
    }

    #[test]
    fn gaussian_c_total_scales_with_dilation(s in 0.2f64..0.9, lambda in 0.3f64..1.1) {
        let f = TestFunction::builtin(Family::QuadraticBspline, s).unwrap();
        let g = crate::splinefourier::dilate(&f, lambda).unwrap();
        let base = c_total(&req(&[f.clone(), f.clone()]), &opts()).unwrap().value;
        let scaled = c_total(&req(&[g.clone(), g.clone()]), &opts()).unwrap().value;
        prop_assert!((sigma_sq(&g) - lambda * lambda * sigma_sq(&f)).abs() < 1e-12);
        prop_assert!((scaled - lambda * lambda * base).abs() < 1e-12);
    }
}

#[test]
fn v_pair_examples() {
    let spec = QuadSpec::for_box();
    let small = req(&[fejer(0.9), fejer(1.0)]);
    assert_eq!(v_pair(0, 1, &[], &small, &spec).unwrap().value, 0.0);
    let r = req(&[fejer(1.5), fejer(1.5)]);
    let v = v_pair(0, 1, &[], &r, &spec).unwrap();
    assert!((v.value + 1.0 / 432.0).abs() < 1e-15);
    // Every argument support stays at or below 1 after any shift or product.
    let tiny = req(&[fejer(0.4), fejer(0.5), fejer(0.5)]);
    assert_eq!(v_pair(0, 1, &[2], &tiny, &spec).unwrap().value, 0.0);
    assert!(v_pair(1, 0, &[], &r, &spec).is_err());
    assert!(v_pair(0, 1, &[1], &r, &spec).is_err());
}

/// `𝓥({k1,k2},{j})` assembled by hand from its four placements of `j`.
fn v_pair_single_oracle(k1: usize, k2: usize, j: usize, phis: &[TestFunction]) -> f64 {
    let (a, b, c) = (&phis[k1], &phis[k2], &phis[j]);
    let cuts: Vec<f64> = c.fhat().breakpoints().to_vec();
    let shifted = |first: bool| {
        let mut kinks = cuts.clone();
        for &x in a.fhat().breakpoints().iter().chain(b.fhat().breakpoints()) {
            kinks.push(x - 1.0);
            for &y in a.fhat().breakpoints().iter().chain(b.fhat().breakpoints()) {
                kinks.push(x - y);
                kinks.push(y - x);
            }
        }
        composite(
            |u| {
                let v = if first { iscr(a, b, u, 0.0) } else { iscr(a, b, 0.0, u) };
                v * c.eval_fhat(u)
            },
            0.0,
            c.sigma(),
            &kinks,
            8,
        )
    };
    let mut total = 4.0 * shifted(true) + 4.0 * shifted(false);
    if j > k1 {
        let p = product_test_function(k1, &[j], phis).unwrap();
        total -= 2.0 * iscr(&p, b, 0.0, 0.0);
    }
    if j > k2 {
        let p = product_test_function(k2, &[j], phis).unwrap();
        total -= 2.0 * iscr(a, &p, 0.0, 0.0);
    }
    total
}

#[test]
fn v_pair_single_extra_index_matches_oracle() {
    let mut r = rng(13);
    for case in 0..12 {
        let phis: Vec<TestFunction> = (0..3)
            .map(|_| TestFunction::builtin(random_family(&mut r), uniform(&mut r, 0.6, 1.3)).unwrap())
            .collect();
        let (k1, k2, j) = [(0, 1, 2), (0, 2, 1), (1, 2, 0)][case % 3];
        let got = v_pair(k1, k2, &[j], &req(&phis), &QuadSpec::for_box()).unwrap();
        let want = v_pair_single_oracle(k1, k2, j, &phis);
        assert!((got.value - want).abs() < 1e-9, "case {case}: {} vs {want}", got.value);
        assert!(got.error < 1e-6);
    }
}

/// Exact `𝓥({k}, K″)`: the integral over `(−∞, −1)` of `Φ̂_k` convolved with every bracket
/// transform `4 Φ̂_ℓ 1_{t ≥ 0} − 2·[k < ℓ] Φ̂_ℓ`.
fn v_single_oracle(k: usize, kpp: &[usize], phis: &[TestFunction]) -> f64 {
    let mut f = phis[k].fhat().clone();
    for &l in kpp {
        let h = phis[l].fhat();
        let mut bracket = h.restrict(0.0, f64::INFINITY).scale(4.0);
        if k < l {
            bracket = bracket.add(&h.scale(-2.0));
        }
        f = f.convolve(&bracket);
    }
    f.moment(0, f64::NEG_INFINITY, -1.0)
}

#[test]
fn v_contour_examples() {
    let o = ContourOptions::default();
    let r = req(&[fejer(1.5), fejer(1.5), fejer(0.5)]);
    assert_eq!(v_contour(&[], &[], &r, &o).unwrap().value, 1.0);
    assert_eq!(v_contour(&[], &[1], &r, &o).unwrap().value, 0.0);
    let v = v_contour(&[0], &[], &r, &o).unwrap();
    assert!((v.value - 1.0 / 12.0).abs() < 1e-9, "{}", v.value);
    assert!(matches!(
        v_contour(&[0, 1, 2, 3], &[], &req(&vec![fejer(0.5); 4]), &o),
        Err(Error::OutOfTruncation(4))
    ));
    assert!(v_contour(&[0], &[0], &r, &o).is_err());
    // Small supports vanish exactly.
    assert_eq!(v_contour(&[2], &[], &r, &o).unwrap().value, 0.0);
}

#[test]
fn v_contour_single_matches_exact_transform() {
    let mut r = rng(14);
    let o = ContourOptions::default();
    for case in 0..8 {
        let phis: Vec<TestFunction> = (0..3)
            .map(|_| TestFunction::builtin(random_family(&mut r), uniform(&mut r, 0.4, 1.3)).unwrap())
            .collect();
        let k = case % 3;
        let kpp: Vec<usize> = (0..3).filter(|&i| i != k && (case / 3 + i) % 2 == 0).collect();
        let got = v_contour(&[k], &kpp, &req(&phis), &o).unwrap();
        let want = v_single_oracle(k, &kpp, &phis);
        assert!((got.value - want).abs() < 1e-8, "case {case}: {} vs {want}", got.value);
    }
}

#[test]
fn v_contour_single_is_independent_of_the_abscissa() {
    let phis = [fejer(1.4), fejer(0.9)];
    let mut o = ContourOptions::default();
    let a = v_contour(&[0], &[1], &req(&phis), &o).unwrap().value;
    o.line_delta = 0.8;
    let b = v_contour(&[0], &[1], &req(&phis), &o).unwrap().value;
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
}

#[test]
fn v_contour_pair_matches_v_pair() {
    let o = ContourOptions::default();
    let r = req(&[fejer(1.5), fejer(1.5)]);
    let v = v_contour(&[0, 1], &[], &r, &o).unwrap();
    assert!((v.value + 1.0 / 432.0).abs() < 1e-6, "{}", v.value);

    let mut g = rng(15);
    for case in 0..4 {
        let phis: Vec<TestFunction> = (0..3)
            .map(|_| TestFunction::builtin(random_family(&mut g), uniform(&mut g, 0.7, 1.3)).unwrap())
            .collect();
        let r = req(&phis);
        let (k1, k2, j) = [(0, 1, 2), (0, 2, 1), (1, 2, 0), (0, 1, 2)][case];
        let via_box = v_pair(k1, k2, &[j], &r, &QuadSpec::for_box()).unwrap().value;
        let via_contour = v_contour(&[k1, k2], &[j], &r, &o).unwrap();
        assert!(
            (via_box - via_contour.value).abs() < 1e-6,
            "case {case}: {via_box} vs {}",
            via_contour.value
        );
    }
}

#[test]
fn v_contour_triple_is_stable_under_moving_lines() {
    let phis = [fejer(1.3), fejer(1.2), fejer(1.1)];
    let r = req(&phis);
    let mut o = ContourOptions::default();
    let a = v_contour(&[0, 1, 2], &[], &r, &o).unwrap();
    o.triple_deltas = [0.3, 0.55, 0.7];
    let b = v_contour(&[0, 1, 2], &[], &r, &o).unwrap();
    assert!(a.value.abs() > 1e-8);
    assert!((a.value - b.value).abs() < 1e-10, "{} vs {}", a.value, b.value);
}

#[test]
fn c0_examples() {
    assert_eq!(c0(&req(&vec![fejer(0.5); 3])).unwrap(), 0.0);
    let pair = [fejer(0.7), TestFunction::builtin(Family::CubicBspline, 0.9).unwrap()];
    assert_eq!(c0(&req(&pair)).unwrap(), i2(&pair[0], &pair[1]));
    assert!((c0(&req(&vec![fejer(1.0); 4])).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(matches!(
        c2(&req(&[fejer(2.0), fejer(2.0)]), &opts()),
        Err(Error::SupportCondition(_))
    ));
}

#[test]
fn c2_examples() {
    for n in 2..=4 {
        let s = 1.9 / n as f64;
        let v = c2(&req(&vec![fejer(s); n]), &opts()).unwrap();
        assert!(v.value.abs() <= 1e-8, "n = {n}: {}", v.value);
    }
    let v = c2(&req(&[fejer(1.5), fejer(1.5)]), &opts()).unwrap();
    assert!((v.value + 1.0 / 432.0).abs() < 1e-12);
    let v = c2(&req(&[fejer(0.6), fejer(0.6), fejer(0.6)]), &opts()).unwrap();
    assert_eq!(v.value, 0.0);
}

#[test]
fn c_total_examples() {
    let r = c_total(&req(&[fejer(0.9), fejer(0.9)]), &opts()).unwrap();
    assert!((r.value - 0.27).abs() < 1e-12);
    assert_eq!(r.method, Method::ClosedForm);
    let r = c_total(&req(&[fejer(1.5), fejer(1.5)]), &opts()).unwrap();
    assert!((r.value - (0.75 - 1.0 / 432.0)).abs() < 1e-10);
    assert_eq!(r.method, Method::ClosedFormQuadrature);
    assert!(r.accuracy > 0.0);
    let r = c_total(&req(&vec![fejer(0.6); 3]), &opts()).unwrap();
    assert_eq!(r.value, 0.0);
    assert!(c_total(&req(&[fejer(2.0), fejer(2.5)]), &opts()).is_err());
}

#[test]
fn c_even_odd_examples() {
    let eo = c_even_odd(&req(&[fejer(1.5)]), &opts()).unwrap();
    assert!((eo.even.value + 1.0 / 12.0).abs() < 1e-9);
    assert!((eo.odd.value - 1.0 / 12.0).abs() < 1e-9);
    let eo = c_even_odd(&req(&[fejer(0.8)]), &opts()).unwrap();
    assert_eq!((eo.even.value, eo.odd.value), (0.0, 0.0));
    let eo = c_even_odd(&req(&[fejer(0.9), fejer(0.9)]), &opts()).unwrap();
    assert!((0.5 * (eo.even.value + eo.odd.value) - 0.27).abs() < 1e-6);
}

#[test]
fn even_odd_average_matches_c_total() {
    let mut g = rng(16);
    for case in 0..4 {
        let n = 2 + case % 2;
        let phis: Vec<TestFunction> = (0..n)
            .map(|_| TestFunction::builtin(random_family(&mut g), uniform(&mut g, 0.5, 3.6 / n as f64)).unwrap())
            .collect();
        let r = req(&phis);
        let eo = c_even_odd(&r, &opts()).unwrap();
        let c = c_total(&r, &opts()).unwrap();
        let mean = 0.5 * (eo.even.value + eo.odd.value);
        assert!((mean - c.value).abs() < 1e-6, "case {case}: {mean} vs {}", c.value);
    }
}

#[test]
fn gaussian_limit_examples() {
    let v = gaussian_limit(&req(&vec![fejer(0.45); 4]), &opts()).unwrap();
    assert!((v.value - 3.0 * (0.45f64.powi(2) / 3.0).powi(2)).abs() < 1e-14);
    assert!((v.value - 0.0136687).abs() < 1e-7);
    assert_eq!(gaussian_limit(&req(&vec![fejer(0.6); 3]), &opts()).unwrap().value, 0.0);
    let v = gaussian_limit(&req(&vec![fejer(1.5); 2]), &opts()).unwrap();
    assert!((v.value - 0.7476852).abs() < 1e-7);
    let c = c_total(&req(&vec![fejer(1.5); 2]), &opts()).unwrap();
    assert!((v.value - c.value).abs() < 1e-12);
    assert!(matches!(
        gaussian_limit(&req(&[fejer(0.5), fejer(0.6)]), &opts()),
        Err(Error::InvalidRequest(_))
    ));
}

#[test]
fn one_level_examples() {
    assert!((one_level_integral(&fejer(1.0), Symmetry::O).unwrap() - 1.5).abs() < 1e-15);
    for s in [Symmetry::O, Symmetry::SoEven, Symmetry::USp] {
        assert_eq!(one_level_integral(&TestFunction::zero(), s).unwrap(), 0.0);
    }
    assert!((one_level_integral(&fejer(0.5), Symmetry::USp).unwrap() - 0.75).abs() < 1e-15);
    assert!(matches!(
        one_level_integral(&fejer(1.2), Symmetry::USp),
        Err(Error::UnsupportedRange(_))
    ));
}

#[test]
fn reports_round_trip_and_hash_is_stable() {
    let r = req(&[fejer(1.5), fejer(1.5)]);
    let report = predict(Quantity::C, &r, &opts()).unwrap();
    let text = serde_json::to_string(&report).unwrap();
    let back: MomentReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(r.request_hash(), req(&[fejer(1.5), fejer(1.5)]).request_hash());
    assert_ne!(r.request_hash(), req(&[fejer(1.5), fejer(1.4)]).request_hash());
    assert_eq!("C_even".parse::<Quantity>().unwrap(), Quantity::CEven);
    assert!("D".parse::<Quantity>().is_err());
}
