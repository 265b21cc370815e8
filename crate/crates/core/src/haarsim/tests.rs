use super::*;
use crate::splinefourier::TestFunction;
use crate::testing::composite;

fn req(phis: &[TestFunction]) -> MomentRequest {
    MomentRequest::new(phis.to_vec()).unwrap()
}

fn phases(kind: EnsembleKind, sampler: Sampler, draws: usize, seed: u64) -> Vec<EigenphaseSample> {
    let mut rng = chunk_rng(seed, 0);
    (0..draws)
        .map(|_| sample_eigenphases(kind, sampler, &mut rng).unwrap())
        .collect()
}

#[test]
fn group_constraints_hold_on_every_draw() {
    let mut rng = chunk_rng(3, 0);
    for _ in 0..50 {
        let x = haar_special_orthogonal(8, &mut rng);
        assert!((x.determinant() - 1.0).abs() < 1e-8);
        let y = haar_orthogonal_minus(8, &mut rng);
        assert!((y.determinant() + 1.0).abs() < 1e-8);
        let u = haar_unitary_symplectic(3, &mut rng);
        let m = 6;
        let mut j = DMatrix::<Complex64>::zeros(m, m);
        for i in 0..3 {
            j[(i, i + 3)] = Complex64::new(1.0, 0.0);
            j[(i + 3, i)] = Complex64::new(-1.0, 0.0);
        }
        assert!((u.transpose() * &j * &u - &j).camax() < 1e-12);
        assert!((u.adjoint() * &u - DMatrix::identity(m, m)).camax() < 1e-12);
    }
}

#[test]
fn eigenphases_match_a_general_eigensolver() {
    let mut rng = chunk_rng(4, 0);
    let x = haar_special_orthogonal(6, &mut rng);
    let s = eigenphases_special_orthogonal(&x).unwrap();
    let eig = x.complex_eigenvalues();
    let mut want: Vec<f64> = eig.iter().map(|z| z.im.atan2(z.re)).filter(|t| *t > 0.0).collect();
    want.sort_by(f64::total_cmp);
    assert_eq!(s.thetas.len(), 3);
    for (a, b) in s.thetas.iter().zip(&want) {
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }
    let y = haar_orthogonal_minus(6, &mut rng);
    let s = eigenphases_orthogonal_minus(&y).unwrap();
    assert_eq!(s.thetas.len(), 2);
    assert!(s.forced_zero && s.forced_pi);
    let eig = y.complex_eigenvalues();
    let mut want: Vec<f64> = eig
        .iter()
        .map(|z| z.im.atan2(z.re))
        .filter(|t| *t > 1e-6 && *t < PI - 1e-6)
        .collect();
    want.sort_by(f64::total_cmp);
    for (a, b) in s.thetas.iter().zip(&want) {
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }
}

#[test]
fn draws_are_conjugation_closed_and_in_range() {
    for kind in [
        EnsembleKind::so_even(5),
        EnsembleKind::o_minus(5),
        EnsembleKind::usp(5),
        EnsembleKind::o_full(5),
    ] {
        for s in phases(kind, Sampler::Matrix, 200, 5) {
            assert_eq!(s.thetas.len(), 5);
            assert!(s.thetas.iter().all(|t| (0.0..=PI).contains(t)));
            assert!(s.thetas.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.residuals.max() <= RESIDUAL_TOL);
            assert_eq!(s.forced_zero, s.forced_pi);
            if kind.group != Group::OFull {
                assert_eq!(s.forced_zero, kind.group == Group::OMinus);
            }
        }
    }
}

#[test]
fn rank_one_marginals_follow_weyl_densities() {
    let d = validate_sampler(EnsembleKind::so_even(1), 100_000, 3, Sampler::Matrix);
    let m = d.marginal.unwrap();
    assert_eq!(m.test, GofTest::KolmogorovSmirnov);
    assert!(m.passed, "{m:?}");
    assert!(d.max_determinant <= 1e-8 && d.max_unitarity <= 1e-8);
    for kind in [EnsembleKind::o_minus(1), EnsembleKind::usp(1)] {
        let d = validate_sampler(kind, 100_000, 3, Sampler::Matrix);
        let m = d.marginal.unwrap();
        assert_eq!(m.test, GofTest::ChiSquare);
        assert!(m.passed, "{kind}: {m:?}");
        assert!(d.max_determinant <= 1e-8 && d.max_unitarity <= 1e-8);
        assert!(d.max_pairing <= 1e-8 && d.max_symplectic <= 1e-8);
        assert_eq!(d.failures, 0);
    }
}

#[test]
fn goodness_of_fit_rejects_wrong_laws() {
    let mut rng = chunk_rng(9, 0);
    let uniform: Vec<f64> = (0..20_000).map(|_| rng.gen_range(0.0..PI)).collect();
    assert!(ks_test(&uniform, |t| t / PI).passed);
    assert!(!chi_square_test(&uniform, 0.0, PI, 50, sin_squared_cdf).passed);
    assert!(!ks_test(&uniform, |t| sin_squared_cdf(t)).passed);
}

#[test]
fn tridiagonal_model_matches_matrix_model() {
    for kind in [EnsembleKind::so_even(3), EnsembleKind::usp(3), EnsembleKind::o_minus(2)] {
        let a = phases(kind, Sampler::Matrix, 20_000, 10);
        let b = phases(kind, Sampler::Tridiagonal, 20_000, 11);
        for idx in 0..kind.n {
            let xa: Vec<f64> = a.iter().map(|s| s.thetas[idx]).collect();
            let xb: Vec<f64> = b.iter().map(|s| s.thetas[idx]).collect();
            let t = ks_two_sample(&xa, &xb);
            assert!(t.passed, "{kind} phase {idx}: {t:?}");
        }
        assert!(b.iter().all(|s| s.forced_zero == (kind.group == Group::OMinus)));
    }
    // Rank one: the tridiagonal law is the Weyl density itself.
    let b = phases(EnsembleKind::usp(1), Sampler::Tridiagonal, 50_000, 12);
    let x: Vec<f64> = b.iter().map(|s| s.thetas[0]).collect();
    assert!(ks_test(&x, sin_squared_cdf).passed);
    let b = phases(EnsembleKind::so_even(1), Sampler::Tridiagonal, 50_000, 13);
    let x: Vec<f64> = b.iter().map(|s| s.thetas[0]).collect();
    assert!(ks_test(&x, |t| t / PI).passed);
}

#[test]
fn centered_product_examples() {
    let sample = EigenphaseSample {
        thetas: vec![PI / 4.0, PI / 2.0],
        forced_zero: false,
        forced_pi: false,
        residuals: Residuals::default(),
    };
    let unit = TestFunction::fejer(1.0);
    let v = centered_product(&sample, &req(&[unit.clone()]), EnsembleKind::so_even(2));
    // Φ(x) = (sin πx / πx)², so Φ(1/2) = 4/π² and Φ(1) = 0.
    let want = 2.0 * (4.0 / (PI * PI) + 0.0) - 1.5;
    assert!((v - want).abs() < 1e-14, "{v}");
    assert!((v + 0.6894).abs() < 1e-4);

    let zero = TestFunction::zero();
    assert_eq!(centered_product(&sample, &req(&[zero.clone(), zero]), EnsembleKind::so_even(2)), 0.0);

    let f = TestFunction::fejer(0.7);
    let coset = EigenphaseSample { forced_zero: true, forced_pi: true, ..sample.clone() };
    let r = req(&[f.clone()]);
    let gap = centered_product(&coset, &r, EnsembleKind::o_minus(2))
        - centered_product(&sample, &r, EnsembleKind::so_even(2));
    assert!((gap - f.phi_at_zero()).abs() < 1e-15);
}

#[test]
fn moments_merge_matches_two_pass() {
    let mut rng = chunk_rng(14, 0);
    let xs: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>() * 3.0 - 1.0).collect();
    let mut parts = Vec::new();
    for c in xs.chunks(77) {
        let mut m = Moments::default();
        c.iter().for_each(|&x| m.push(x));
        parts.push(m);
    }
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let m2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    assert!((total.mean - mean).abs() < 1e-14);
    assert!((total.m2 - m2).abs() < 1e-10);
}

#[test]
fn monte_carlo_is_deterministic_across_thread_counts() {
    let r = req(&[TestFunction::fejer(1.2), TestFunction::fejer(0.8)]);
    let kind = EnsembleKind::o_full(6);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mc_moment(kind, &r, 3000, 42, Sampler::Matrix).unwrap())
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
    let c = mc_moment(kind, &r, 3000, 43, Sampler::Matrix).unwrap();
    assert_ne!(a.mean, c.mean);
    assert!(mc_moment(kind, &r, 50, 1, Sampler::Matrix).is_err());
}

/// `E Σ_{0<|j|≤N} Φ(Nθ_j/π)` from the exact finite-`N` eigenphase density
/// `(2N ∓ 1 ± sin((2N ∓ 1)θ)/sin θ) / 2π` of `SO(2N)` (upper signs) and `USp(2N)`.
fn one_level_oracle(f: &TestFunction, n: usize, orthogonal: bool) -> f64 {
    let k = if orthogonal { 2 * n - 1 } else { 2 * n + 1 } as f64;
    let sign = if orthogonal { 1.0 } else { -1.0 };
    composite(
        |t: f64| {
            let density = (k + sign * (k * t).sin() / t.sin()) / (2.0 * PI);
            2.0 * f.eval_phi_real(n as f64 * t / PI) * density
        },
        0.0,
        PI,
        &[],
        400,
    )
}

#[test]
fn one_level_means_match_finite_n_densities() {
    let f = TestFunction::fejer(0.8);
    let n = 10;
    let sum = |kind: EnsembleKind, seed| {
        mc_statistic(kind, Sampler::Matrix, 20_000, seed, |s| {
            2.0 * s.thetas.iter().map(|t| f.eval_phi_real(n as f64 * t / PI)).sum::<f64>()
        })
        .unwrap()
    };
    let so = sum(EnsembleKind::so_even(n), 20);
    let want = one_level_oracle(&f, n, true);
    assert!((so.mean - want).abs() < 4.0 * so.stderr, "{so:?} vs {want}");
    let usp = sum(EnsembleKind::usp(n), 21);
    let want = one_level_oracle(&f, n, false);
    assert!((usp.mean - want).abs() < 4.0 * usp.stderr, "{usp:?} vs {want}");
    // The limits Φ̂(0) ± Φ(0)/2 are reached at rate 1/N.
    for (orth, sign) in [(true, 1.0), (false, -1.0)] {
        let limit = f.fhat_at_zero() + sign * 0.5 * f.phi_at_zero();
        let gaps: Vec<f64> = [20, 40, 80]
            .iter()
            .map(|&m| (one_level_oracle(&f, m, orth) - limit).abs())
            .collect();
        assert!(gaps[1] < 0.6 * gaps[0] && gaps[2] < 0.6 * gaps[1], "{gaps:?}");
    }
    // The two cosets' biases cancel in the full orthogonal group.
    let centered = mc_moment(EnsembleKind::o_full(n), &req(&[f]), 20_000, 22, Sampler::Matrix).unwrap();
    assert!(centered.mean.abs() < 4.0 * centered.stderr, "{centered:?}");
}

#[test]
fn full_orthogonal_is_the_branch_average() {
    let r = req(&[TestFunction::fejer(1.3), TestFunction::fejer(1.3)]);
    let n = 8;
    let full = mc_moment(EnsembleKind::o_full(n), &r, 20_000, 30, Sampler::Tridiagonal).unwrap();
    let even = mc_moment(EnsembleKind::so_even(n), &r, 20_000, 31, Sampler::Tridiagonal).unwrap();
    let odd = mc_moment(EnsembleKind::o_minus(n), &r, 20_000, 32, Sampler::Tridiagonal).unwrap();
    let avg = 0.5 * (even.mean + odd.mean);
    let err = (full.stderr.powi(2) + 0.25 * (even.stderr.powi(2) + odd.stderr.powi(2))).sqrt();
    assert!((full.mean - avg).abs() < 4.0 * err, "{} vs {avg}", full.mean);
}

#[test]
fn ensemble_names_round_trip() {
    for g in [Group::SoEven, Group::OMinus, Group::USp, Group::OFull] {
        assert_eq!(g.name().parse::<Group>().unwrap(), g);
        let kind = EnsembleKind::new(g, 4).unwrap();
        let text = serde_json::to_string(&kind).unwrap();
        assert_eq!(serde_json::from_str::<EnsembleKind>(&text).unwrap(), kind);
    }
    assert!(EnsembleKind::new(Group::USp, 0).is_err());
    assert_eq!(EnsembleKind::o_minus(3).dimension(), 8);
}

