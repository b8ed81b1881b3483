use nuclab::bounds::{brace_factor, delta_config, spatial_configuration, InequalityReport};
use nuclab::content::*;
use nuclab::C64;
use proptest::prelude::*;

fn sample(points: &[(f64, f64)]) -> FiniteMapSample {
    FiniteMapSample::from_outputs(points.iter().map(|&(a, b)| vec![vec![C64::new(a, 0.0)], vec![C64::new(0.0, b)]]).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_content_is_bounded_and_monotone(
        pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40),
        eps in 0.01f64..1.0,
    ) {
        let s = sample(&pts);
        let a = epsilon_content_bruteforce(&s, eps).unwrap();
        let b = epsilon_content_bruteforce(&s, 2.0 * eps).unwrap();
        prop_assert!(a >= 1 && a <= pts.len());
        prop_assert!(b <= a);
        // Anything beyond the sup norm collapses to one centre.
        let wide = epsilon_content_bruteforce(&s, 2.0 * s.norm_2 + 1e-9).unwrap();
        prop_assert_eq!(wide, 1);
    }

    #[test]
    fn lattice_count_grows_with_radius_and_dimension(d in 1usize..5, m in 0u32..8) {
        let c = lattice_count(d, m);
        prop_assert!(c >= 1 + 2 * d as u64 * u64::from(m >= 1));
        prop_assert!(lattice_count(d, m + 1) >= c);
        prop_assert!(lattice_count(d + 1, m) >= c);
    }

    #[test]
    fn additivity_count_recursion(n in 1usize..7, c in 0u32..5) {
        // Compositions of at most c into n parts split on the last part.
        let total: u64 = (0..=c).map(|k| if n == 1 { 1 } else { additivity_count(n - 1, c - k) }).sum();
        prop_assert_eq!(additivity_count(n, c), total);
    }

    #[test]
    fn key_lemma_log_bound_scales(norm in 0.01f64..5.0, eps in 0.05f64..1.0, n in 1usize..6) {
        let a = key_lemma_bound(norm, eps, n).unwrap();
        let b = key_lemma_bound(norm, 2.0 * eps, n).unwrap();
        prop_assert!(a.log_value >= b.log_value);
        prop_assert!(a.log_value >= 0.0);
    }

    #[test]
    fn spatial_configuration_has_requested_separation(n in 2usize..8, delta in 0.1f64..30.0, r in 0.1f64..2.0) {
        let xs = spatial_configuration(n, delta, r);
        prop_assert!((delta_config(&xs, r) - delta).abs() < 1e-9 * (1.0 + delta));
    }

    #[test]
    fn brace_factor_decreases_with_separation(n in 1usize..10, delta in 0.0f64..20.0) {
        let a = brace_factor(n, 2.0, 1.0, 0.5, delta);
        let b = brace_factor(n, 2.0, 1.0, 0.5, delta + 1.0);
        prop_assert!(a >= b && b >= 1.0);
        prop_assert_eq!(brace_factor(1, 2.0, 1.0, 0.5, delta), 1.0);
    }

    #[test]
    fn report_pass_matches_tolerance(lhs in -10.0f64..10.0, rhs in -10.0f64..10.0, tol in 0.0f64..1.0) {
        let r = InequalityReport::new("p", lhs, rhs, tol, 0.0);
        prop_assert_eq!(r.pass, lhs <= rhs + tol);
        prop_assert_eq!(r.margin, rhs - lhs);
    }
}
