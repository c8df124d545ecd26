use patholab_core::asymptotics::{kappa_comparison, reflection_defect};
use patholab_core::coefficients::{apply_a, assemble_a};
use patholab_core::families::{alpha_from_profile, FamilyParams};
use patholab_core::identity::{div_a_grad_analytic, AlphaChoice, HarmonicPolynomial, IdentityProblem};
use patholab_core::nonuniqueness::{scaling_defect, RadialBvp};
use patholab_core::norms::{annulus_table, Functional, ReducedRule};
use patholab_core::weak_form::TestFunction;
use proptest::prelude::*;

fn family() -> impl Strategy<Value = FamilyParams> {
    prop_oneof![
        (2usize..=3, 1.1f64..3.0).prop_map(|(n, b)| FamilyParams::w11(n, b).unwrap()),
        (2usize..=3).prop_map(|n| FamilyParams::lipschitz_log(n).unwrap()),
        (2usize..=3).prop_map(|n| FamilyParams::bmo_logsq(n).unwrap()),
        (2usize..=3, -0.9f64..3.0).prop_map(|(n, a)| FamilyParams::power(n, a).unwrap()),
    ]
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    (proptest::collection::vec(-1.0f64..1.0, n), -12.0f64..-0.2).prop_filter_map("nonzero direction", |(d, lr)| {
        let s = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        (s > 1e-3).then(|| d.iter().map(|v| v / s * lr.exp()).collect())
    })
}

fn family_and_point() -> impl Strategy<Value = (FamilyParams, Vec<f64>)> {
    family().prop_flat_map(|p| (Just(p), point(p.n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn balance_relation_recovers_alpha((p, x) in family_and_point()) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let q = p.profile_unchecked(r);
        let a = alpha_from_profile(p.n, r, q.v, q.dv, q.ddv).unwrap();
        prop_assert!((a - p.alpha_closed(r)).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn coefficient_matrix_is_symmetric_and_fixes_the_radial_direction((p, x) in family_and_point()) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let alpha = p.alpha_closed(r);
        let a = assemble_a(&x, alpha).unwrap();
        prop_assert!(a.entries.is_symmetric());
        let ax = a.entries.mul_vec(&x);
        for (u, v) in ax.iter().zip(&x) {
            prop_assert!((u - v).abs() <= 1e-14 * r);
        }
        let w: Vec<f64> = (0..p.n).map(|i| 0.3 - 0.2 * i as f64).collect();
        let direct = a.entries.mul_vec(&w);
        for (u, v) in direct.iter().zip(apply_a(&x, alpha, &w)) {
            prop_assert!((u - v).abs() <= 1e-14);
        }
    }

    #[test]
    fn coefficient_is_reflection_symmetric((p, x) in family_and_point()) {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(reflection_defect(p.alpha_closed(r), &x).unwrap() <= 1e-15);
    }

    #[test]
    fn family_alpha_annihilates_x1_times_profile((p, x) in family_and_point()) {
        let prob = IdentityProblem::new(&p, HarmonicPolynomial::x1(p.n), AlphaChoice::Family).unwrap();
        let terms = prob.analytic_terms(&x).unwrap();
        prop_assert!(terms.bracket.abs() <= 1e-9 * terms.bracket_scale);
        prop_assert!(div_a_grad_analytic(&prob, &x).unwrap().abs() <= 1e-9 * terms.flux_scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn kappa_ratio_is_radius_squared(kappa in -0.5f64..1.0, x in point(3)) {
        prop_assume!(kappa.abs() > 1e-3);
        let n = 3.0;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        prop_assume!((r2 - n * x[0] * x[0]).abs() > 1e-3 * r2);
        let c = kappa_comparison(kappa, &x).unwrap();
        prop_assert!((c.ratio / c.radius_squared - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn bump_difference_is_consistent(x in point(2), cx in -0.1f64..0.1, radius in 0.3f64..0.7) {
        let phi = TestFunction::new(vec![cx, 0.1], radius).unwrap();
        let direct = phi.value(&x) - phi.value(&[0.0, 0.0]);
        prop_assert!((phi.difference_from_origin(&x) - direct).abs() <= 1e-14);
        prop_assert!(direct.abs() <= phi.lipschitz() * x.iter().map(|v| v * v).sum::<f64>().sqrt() + 1e-15);
    }

    #[test]
    fn annulus_partial_sums_are_nondecreasing(p in family(), q in 1.0f64..4.0) {
        let t = annulus_table(&p, Functional::Lp(q), 20, p.log_r0(), &ReducedRule::default());
        prop_assert!(t.rows.iter().all(|r| r.partial > 0.0 && r.partial.is_finite()));
        let sums = t.log_partial_sums();
        prop_assert!(sums.windows(2).all(|w| w[1] >= w[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bounded_branch_is_linear_in_boundary_data(n in 2usize..=3, beta in 1.1f64..3.0, factor in 0.1f64..10.0) {
        let p = FamilyParams::w11(n, beta).unwrap();
        let bvp = RadialBvp::for_family(&p).unwrap();
        prop_assert!(scaling_defect(&bvp, factor).unwrap() <= 1e-10);
    }
}
