use std::sync::OnceLock;

use nuclab::bounds::spatial_configuration;
use nuclab::config::RunConfig;
use nuclab::content::*;
use nuclab::expansion::{functional_net, local_weyl_arguments};
use nuclab::fock::{ModeVector, StateFunctional};
use nuclab::lab::Lab;
use nuclab::C64;
use rand::Rng;

struct Fixture {
    lab: Lab,
    net: Vec<StateFunctional>,
    obs: Vec<ModeVector>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let lab = Lab::build(&RunConfig::default()).unwrap();
        let mut rng = lab.rng(41);
        let net = functional_net(&lab.space, &mut rng, 30);
        let obs = local_weyl_arguments(&lab.grid, &lab.family, &mut rng, 8).iter().map(|f| lab.space.mode_vector(f)).collect();
        Fixture { lab, net, obs }
    })
}

fn scalar_sample(points: &[(f64, f64)]) -> FiniteMapSample {
    FiniteMapSample::from_outputs(points.iter().map(|&(a, b)| vec![vec![C64::new(a, 0.0), C64::new(b, 0.0)]]).collect()).unwrap()
}

#[test]
fn greedy_packing_examples() {
    let zero = scalar_sample(&[(0.0, 0.0); 5]);
    assert_eq!(epsilon_content_bruteforce(&zero, 0.1).unwrap(), 1);
    let two = scalar_sample(&[(0.0, 0.0), (0.3, 0.0)]);
    assert_eq!(epsilon_content_bruteforce(&two, 0.1).unwrap(), 2);
    assert!(epsilon_content_bruteforce(&two, 0.0).is_err());
    assert!(epsilon_content_bruteforce(&scalar_sample(&[]), 0.1).is_err());
}

#[test]
fn greedy_count_is_monotone_in_epsilon() {
    let mut rng = fixture().lab.rng(42);
    let pts: Vec<(f64, f64)> = (0..150).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let sample = scalar_sample(&pts);
    let counts: Vec<usize> = (1..=20).map(|i| epsilon_content_bruteforce(&sample, 0.05 * i as f64).unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    assert!(counts[0] > counts[19]);
}

#[test]
fn key_lemma_examples() {
    let z = key_lemma_bound(0.0, 0.5, 4).unwrap();
    assert_eq!(z.log_value, 0.0);
    assert_eq!(z.value, Some(1.0));
    let a = key_lemma_bound(0.3, 0.2, 3).unwrap();
    let b = key_lemma_bound(0.3, 0.4, 3).unwrap();
    assert!((a.log_value / b.log_value - 4.0).abs() < 1e-12);
    let big = key_lemma_bound(10.0, 0.01, 8).unwrap();
    assert!(big.value.is_none() && big.log_value.is_finite());
}

/// Counts by scanning the cube `[-k, k]^d` digit by digit.
fn cube_scan(d: usize, m: i64) -> u64 {
    let k = (m as f64).sqrt() as i64;
    let side = (2 * k + 1) as u64;
    let mut count = 0;
    for code in 0..side.pow(d as u32) {
        let mut c = code;
        let mut s = 0;
        for _ in 0..d {
            let n = (c % side) as i64 - k;
            c /= side;
            s += n * n;
        }
        if s <= m {
            count += 1;
        }
    }
    count
}

#[test]
fn lattice_counts() {
    assert_eq!(lattice_count(2, 1), 5);
    assert_eq!(lattice_count(4, 0), 1);
    // r₂(0..2) = 1 + 4 + 4.
    assert_eq!(lattice_count(2, 2), 9);
    for n in 1..=3 {
        for m in 0..=4u32.min(2 * n as u32) {
            assert_eq!(lattice_count(2 * n, m), cube_scan(2 * n, m as i64), "M={m} N={n}");
            let r = lattice_count_check(m, n).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
    assert!(lattice_count_check(3, 1).is_err());
    assert!(lattice_count_check(7, 4).is_err());
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
}

#[test]
fn additivity_counts() {
    assert_eq!(additivity_count(2, 0), 1);
    assert_eq!(additivity_count(2, 1), 3);
    assert!(additivity_count(3, 2) <= 16);
    for n in 1..=6 {
        for c in 0..=4 {
            // Compositions: C(N + cE, N).
            assert_eq!(additivity_count(n, c), binomial((n as u64) + c as u64, n as u64));
            let r = additivity_count_check(n, c).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
    for c in [0, 1] {
        let r = additivity_count_check(2, c).unwrap();
        assert_eq!(r.lhs, r.rhs);
    }
}

#[test]
fn series_bracket_and_theorem_bound() {
    let z = zeta_bracket(4.0 / 3.0, 2_000_000).unwrap();
    assert!(z.upper - z.lower < 1e-8, "{z:?}");
    let zeta_43 = 3.600_937_750_458_86;
    assert!(z.lower <= zeta_43 + 1e-12 && zeta_43 <= z.upper + 1e-12, "{z:?}");
    let two = zeta_bracket(2.0, 1000).unwrap();
    let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
    assert!(two.lower <= pi2_6 && pi2_6 <= two.upper);

    assert!(theorem1_bound(2.0 / 3.0, 1.0, 0.5, 2).is_err());
    assert!(theorem1_bound(1.0, 1.0, 0.5, 2).is_err());
    let zero = theorem1_bound(0.5, 0.0, 0.5, 4).unwrap();
    assert_eq!(zero.bound.value, Some(1.0));
    let b = theorem1_bound(0.5, 0.7, 0.5, 4).unwrap();
    assert!(b.epsilon_sum_range.0 <= 1.0 && b.epsilon_sum_range.1 == 1.0);
    let b2 = theorem1_bound(0.5, 0.7, 0.5, 8).unwrap();
    let per_log = 2048.0 * std::f64::consts::PI * 0.49 * b.zeta.upper.powi(3) / 0.25;
    assert!(((b2.bound.log_value - b.bound.log_value) / (per_log * 2f64.ln()) - 1.0).abs() < 1e-12);
    let growth = log_growth_check(0.5, 0.7, 0.5, &[2, 4, 8]).unwrap();
    assert!(growth.pass, "{growth:?}");
}

#[test]
fn theta_single_region_is_the_map() {
    let f = fixture();
    let space = &f.lab.space;
    let s = build_theta(space, &f.net, &f.obs, &[(0.0, 0.0)]).unwrap();
    for (i, phi) in f.net.iter().enumerate() {
        assert!((s.output_norm(i) - single_block_norm(space, &f.obs, phi)).abs() < 1e-15);
    }
    assert!((s.norm_2 - (0..s.len()).map(|i| s.output_norm(i)).fold(0.0, f64::max)).abs() < 1e-15);
    assert!(build_theta(space, &f.net, &f.obs, &[]).is_err());
}

#[test]
fn theta_sup_norm_ignores_region_order() {
    let f = fixture();
    let space = &f.lab.space;
    let xs = spatial_configuration(3, 5.0, 1.0);
    let rev: Vec<_> = xs.iter().rev().copied().collect();
    let a = build_theta(space, &f.net, &f.obs, &xs).unwrap();
    let b = build_theta(space, &f.net, &f.obs, &rev).unwrap();
    for i in 0..a.len() {
        assert!((a.output_norm(i) - b.output_norm(i)).abs() < 1e-15);
        let l2 = a.block_norms[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(l2 <= a.norm_2 + 1e-15);
    }
    assert!((a.norm_2 - b.norm_2).abs() < 1e-14);
}

#[test]
fn greedy_content_below_both_bounds() {
    let f = fixture();
    let space = &f.lab.space;
    for n in [1, 2, 4] {
        let xs = spatial_configuration(n, 20.0, 1.0);
        let s = build_theta(space, &f.net, &f.obs, &xs).unwrap();
        for eps in [0.05, 0.2, 0.5] {
            let r = content_chain_check(&s, eps, n, 0.5, 10.0 * s.norm_2 + 1.0).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}
