use nalgebra::{DMatrix, DVector, SymmetricEigen};
use patholab_core::asymptotics::{
    exponent_integral_closed, exponent_integral_quadrature, kappa_comparison, angular_kernel, angular_kernel_closed_form,
    monte_carlo_sphere_area, profile_match, log_spaced, surface_area_unit_sphere,
};
use patholab_core::coefficients::{assemble_a, dini_growth_fit, ellipticity_bounds, fit_modulus_model};
use patholab_core::families::{choose_r0, FamilyKind, FamilyParams, Profile};
use patholab_core::math::quad::GaussLegendre;
use patholab_core::math::sampling::{log_uniform_point, norm, seeded};
use patholab_core::nonuniqueness::{solve_bounded_branch, RadialBvp};
use patholab_core::norms::{annulus_functional, annulus_table, monte_carlo_annulus, Functional, ReducedRule};
use patholab_core::weak_form::{annulus_check, TestFunction, WeakFormRule};

fn log_families(n: usize) -> Vec<FamilyParams> {
    vec![
        FamilyParams::w11(n, 1.5).unwrap(),
        FamilyParams::w11(n, 2.0).unwrap(),
        FamilyParams::lipschitz_log(n).unwrap(),
        FamilyParams::bmo_logsq(n).unwrap(),
    ]
}

fn all_families(n: usize) -> Vec<FamilyParams> {
    let mut out = log_families(n);
    out.push(FamilyParams::power(n, 0.5).unwrap());
    out.push(FamilyParams::power(n, -0.5).unwrap());
    out
}

/// `v`, `v'`, `v''` written out by hand.
fn hand_profile(p: &FamilyParams, r: f64) -> (f64, f64, f64) {
    let n = p.n as f64;
    let l = p.r0.ln() - r.ln();
    match p.kind {
        FamilyKind::Power => (r.powf(p.a), p.a * r.powf(p.a - 1.0), p.a * (p.a - 1.0) * r.powf(p.a - 2.0)),
        FamilyKind::W11LogPow => {
            let b = p.beta;
            let v = r.powf(-n) * l.powf(-b);
            let dv = -n * r.powf(-n - 1.0) * l.powf(-b) + b * r.powf(-n - 1.0) * l.powf(-b - 1.0);
            let ddv = n * (n + 1.0) * r.powf(-n - 2.0) * l.powf(-b)
                - (2.0 * n + 1.0) * b * r.powf(-n - 2.0) * l.powf(-b - 1.0)
                + b * (b + 1.0) * r.powf(-n - 2.0) * l.powf(-b - 2.0);
            (v, dv, ddv)
        }
        FamilyKind::LipschitzLog => (l, -1.0 / r, 1.0 / (r * r)),
        FamilyKind::BmoLogSq => (l * l, -2.0 * l / r, (2.0 * l + 2.0) / (r * r)),
    }
}

#[test]
fn profiles_match_hand_derivatives_and_balance_relation() {
    for n in [2, 3] {
        for p in all_families(n) {
            for &r in &[1e-6, 1e-3, 0.05, 0.3, 0.9] {
                let got = p.profile_unchecked(r);
                let (v, dv, ddv) = hand_profile(&p, r);
                assert!((got.v - v).abs() <= 1e-12 * v.abs(), "{:?} v at {r}", p.kind);
                assert!((got.dv - dv).abs() <= 1e-12 * dv.abs().max(v.abs() / r), "{:?} v' at {r}", p.kind);
                assert!((got.ddv - ddv).abs() <= 1e-11 * ddv.abs().max(v.abs() / (r * r)), "{:?} v'' at {r}", p.kind);
                let alpha = (r * r * ddv + (n as f64 + 1.0) * r * dv) / ((n as f64 - 1.0) * v);
                assert!((p.alpha_closed(r) - alpha).abs() <= 1e-10 * (1.0 + alpha.abs()), "{:?} α at {r}", p.kind);
            }
        }
    }
}

#[test]
fn profile_derivatives_converge_at_second_order() {
    let p = FamilyParams::w11(2, 2.0).unwrap();
    let r = 0.2;
    let exact = p.derivative(r);
    let err = |h: f64| ((p.value(r + h) - p.value(r - h)) / (2.0 * h) - exact).abs();
    let order = (err(1e-3) / err(5e-4)).log2();
    assert!((order - 2.0).abs() < 0.1, "order {order}");
}

#[test]
fn r0_thresholds_match_closed_forms() {
    let e4 = 4f64.exp();
    let lip2 = choose_r0(FamilyKind::LipschitzLog, 2, 0.0, 0.5).unwrap();
    assert!((lip2 - e4).abs() <= 1e-6 * e4);
    // n=3: -3s/2 ≥ -1/2 at s = 1/3.
    let lip3 = choose_r0(FamilyKind::LipschitzLog, 3, 0.0, 0.5).unwrap();
    assert!((lip3.ln() - 3.0).abs() < 1e-9);
    // n=2: -4s + 2s² = -1/2 at s = 1 - √3/2, i.e. log r0 = 4 + 2√3.
    let bmo2 = choose_r0(FamilyKind::BmoLogSq, 2, 0.0, 0.5).unwrap();
    assert!((bmo2.ln() - (4.0 + 2.0 * 3f64.sqrt())).abs() < 1e-9);
}

#[test]
fn ellipticity_on_an_independent_grid() {
    for n in [2, 3] {
        for p in log_families(n) {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for k in 0..=100_000 {
                let r = (-30.0 * k as f64 / 100_000.0).exp().min(1.0 - 1e-12);
                let a = p.alpha_closed(r);
                lo = lo.min(1.0 + a);
                hi = hi.max(1.0 + a);
            }
            assert!(lo >= 0.5 - 1e-12 && hi <= 2.0, "{:?} n={n}: [{lo}, {hi}]", p.kind);
            let b = ellipticity_bounds(&p, 1e-13, 1.0).unwrap();
            assert!(b.lambda >= 0.5 - 1e-12 && b.upper <= 2.0);
            assert!(b.lambda <= lo + 1e-9);
        }
    }
}

#[test]
fn coefficient_eigenvalues_agree_with_nalgebra() {
    let mut rng = seeded(11);
    for n in [2, 3, 5] {
        for k in 0..20 {
            let x = log_uniform_point(&mut rng, n, 1e-4, 0.9);
            let alpha = -0.4 + 0.07 * k as f64;
            let a = assemble_a(&x, alpha).unwrap();
            let m = DMatrix::from_fn(n, n, |i, j| a.entries.get(i, j));
            let mut eig: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
            eig.sort_by(f64::total_cmp);
            let mut expected = vec![1.0 + alpha; n - 1];
            expected.push(1.0);
            expected.sort_by(f64::total_cmp);
            for (g, e) in eig.iter().zip(&expected) {
                assert!((g - e).abs() < 1e-12);
            }
            let xv = DVector::from_column_slice(&x);
            assert!(((&m * &xv) - &xv).norm() < 1e-13);
        }
    }
}

#[test]
fn sphere_area_matches_monte_carlo() {
    for n in [2, 3, 4] {
        let exact = surface_area_unit_sphere(n).unwrap();
        let mc = monte_carlo_sphere_area(n, 200_000, 5 + n as u64);
        assert!((mc.estimate - exact).abs() <= 3.0 * mc.std_error, "n={n}: {mc:?} vs {exact}");
    }
}

/// `R` from the printed formula with `A(0) = I`, evaluated through nalgebra.
fn kernel_via_nalgebra(x: &[f64], alpha: f64) -> f64 {
    let n = x.len();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let diff = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            alpha * x.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, v)| v * v).sum::<f64>() / r2
        } else {
            -alpha * x[i] * x[j] / r2
        }
    });
    let a0 = DMatrix::<f64>::identity(n, n);
    let inv = a0.clone().try_inverse().unwrap();
    let xv = DVector::from_column_slice(x);
    let quad = xv.dot(&(&inv * &xv));
    let num = diff[(0, 0)] * quad - n as f64 * (&diff * (&inv * &xv))[0] * x[0];
    num / (surface_area_unit_sphere(n).unwrap() * a0.determinant().abs().sqrt() * quad.powf(n as f64 / 2.0 + 1.0))
}

#[test]
fn kernel_matches_closed_form_at_random_points() {
    for n in [2, 3] {
        let p = FamilyParams::w11(n, 2.0).unwrap();
        let mut rng = seeded(3 + n as u64);
        for _ in 0..1000 {
            let x = log_uniform_point(&mut rng, n, 1e-6, 0.9);
            let direct = angular_kernel(&p, &x).unwrap();
            let alpha = p.alpha_closed(norm(&x));
            let closed = angular_kernel_closed_form(alpha, &x);
            assert!((direct - closed).abs() <= 1e-10 * direct.abs(), "{x:?} {direct:e} {closed:e}");
            let oracle = kernel_via_nalgebra(&x, alpha);
            assert!((direct - oracle).abs() <= 1e-10 * direct.abs());
        }
    }
}

#[test]
fn kappa_report_carries_both_values() {
    let c = kappa_comparison(0.3, &[0.2, 0.1]).unwrap();
    assert!(c.direct.is_finite() && c.printed.is_finite());
    assert!((c.ratio - c.radius_squared).abs() < 1e-12);
}

#[test]
fn exponent_integral_closed_form_matches_quadrature() {
    for n in [2, 3] {
        for p in all_families(n) {
            for &r in &[1e-6, 1e-2, 0.5] {
                let closed = exponent_integral_closed(&p, r, false).unwrap();
                let quad = exponent_integral_quadrature(&p, n, r).unwrap();
                assert!((closed - quad).abs() <= 1e-12 * (1.0 + closed.abs()), "{:?} r={r}", p.kind);
            }
        }
    }
}

#[test]
fn w11_profile_ratio_is_constant() {
    for (n, beta) in [(2, 2.0), (3, 1.5)] {
        let p = FamilyParams::w11(n, beta).unwrap();
        let m = profile_match(&p, &log_spaced(1e-6, 0.5, 60)).unwrap();
        assert!(m.max_deviation <= 1e-8);
        assert!((m.reference - p.log_r0().powf(-beta)).abs() <= 1e-12);
    }
}

#[test]
fn reduced_quadrature_matches_monte_carlo() {
    let rule = ReducedRule::default();
    for n in [2, 3] {
        for p in all_families(n) {
            for (k, j) in [1u32, 3, 6, 10, 15].into_iter().enumerate() {
                let f = Functional::Lp(1.5);
                let reduced = annulus_functional(&p, f, j, &rule);
                let mc = monte_carlo_annulus(&p, f, j, 20_000, 100 + k as u64).unwrap();
                assert!(
                    (reduced - mc.mean).abs() <= 3.0 * mc.std_error,
                    "{:?} n={n} j={j}: {reduced} vs {} ± {}",
                    p.kind,
                    mc.mean,
                    mc.std_error
                );
            }
        }
    }
}

#[test]
fn power_annulus_ratio_matches_homogeneity() {
    for n in [2, 3] {
        for a in [0.5, -0.5, 2.0] {
            let p = FamilyParams::power(n, a).unwrap();
            for q in [1.0, 2.0] {
                let t = annulus_table(&p, Functional::Lp(q), 12, 0.0, &ReducedRule::default());
                let expected = 2f64.powf(-(n as f64 + a * q));
                for w in t.rows.windows(2) {
                    assert!((w[1].partial / w[0].partial / expected - 1.0).abs() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn weak_form_sides_agree() {
    for n in [2, 3] {
        let p = FamilyParams::w11(n, 2.0).unwrap();
        let phi = TestFunction::default_for(n);
        let rule = WeakFormRule::default_for(n);
        for rho in [1.0 / 16.0, 1.0 / 1024.0] {
            let c = annulus_check(&phi, &p, &p, rho, &rule).unwrap();
            assert!(c.agrees(1e-6), "{c:?}");
        }
    }
}

#[test]
fn dini_partials_grow_like_log_log() {
    let scales: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
    let deltas: Vec<f64> = (8..=24).map(|k| 10f64.powf(-(k as f64) / 4.0)).collect();
    for n in [2, 3] {
        for p in log_families(n) {
            let model = fit_modulus_model(&p, n, &scales, 200, 7).unwrap();
            let g = dini_growth_fit(&p, &model, &deltas).unwrap();
            assert!(g.diverges(0.99), "{:?}: {:?}", p.kind, g.fit);
        }
    }
}

/// Reduction of order: `w₂ = v ∫₀^r s^{n-1} L(s)^{2β} ds` solves the same equation.
fn second_solution(p: &FamilyParams, r: f64) -> f64 {
    let gl = GaussLegendre::new(30);
    let n = p.n as i32;
    let mut acc = 0.0;
    let mut b = r.ln();
    let floor = b - 120.0;
    while b > floor {
        let a = b - 1.0;
        acc += gl.integrate(a, b, |y| {
            let s = y.exp();
            s.powi(n) * (p.r0.ln() - y).powf(2.0 * p.beta)
        });
        b = a;
    }
    p.value(r) * acc
}

#[test]
fn bounded_branch_matches_reduction_of_order() {
    for (n, beta) in [(2, 2.0), (3, 1.5)] {
        let p = FamilyParams::w11(n, beta).unwrap();
        let sol = solve_bounded_branch(&RadialBvp::for_family(&p).unwrap()).unwrap();
        let scale = p.boundary_value() / second_solution(&p, 1.0 - 1e-15);
        for &r in &[1e-8, 1e-6, 1e-3, 0.1, 0.5, 0.9] {
            let oracle = scale * second_solution(&p, r);
            assert!((sol.value(r) - oracle).abs() <= 1e-9 * oracle.abs(), "n={n} r={r}: {} vs {oracle}", sol.value(r));
        }
    }
}
