use nuclab::grid::{apply_conjugation, build_local_subspaces, build_test_family, bump, make_grid};
use nuclab::{CMat, CVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
}

#[test]
fn weights_sum_to_box_length() {
    let g = make_grid(1, 10.0, 256, 1.0).unwrap();
    assert_eq!(g.len(), 256);
    assert!((g.weight_sum() - 20.0).abs() < 1e-9);
    assert!(g.omega.iter().all(|&w| w >= 1.0));
}

#[test]
fn refinement_preserves_momentum_mass() {
    let coarse = make_grid(1, 10.0, 256, 1.0).unwrap();
    let fine = make_grid(1, 10.0, 512, 1.0).unwrap();
    let a = build_test_family(&coarse, 1.0, 1).unwrap().members[0].norm_squared();
    let b = build_test_family(&fine, 1.0, 1).unwrap().members[0].norm_squared();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
}

#[test]
fn momentum_mass_matches_configuration_integral() {
    // Plancherel: the x-space integral of bump² against the grid sum.
    let g = make_grid(1, 40.0, 1024, 1.0).unwrap();
    let fam = build_test_family(&g, 1.0, 1).unwrap();
    let x_side = simpson(|x| bump(x, 1.0).powi(2), -1.0, 1.0, 20_000);
    let p_side = fam.members[0].norm_squared();
    assert!((x_side - p_side).abs() < 1e-6 * x_side, "{x_side} vs {p_side}");
}

#[test]
fn single_even_member_has_real_even_transform() {
    let g = make_grid(1, 20.0, 512, 1.0).unwrap();
    let fam = build_test_family(&g, 1.0, 1).unwrap();
    let v = &fam.members[0];
    for k in 0..g.len() {
        assert!(v[k].im.abs() < 1e-12);
        assert!((v[k] - v[g.mirror_index(k)]).norm() < 1e-14);
    }
}

#[test]
fn default_family_is_independent_and_leakage_shrinks_with_cutoff() {
    let g10 = make_grid(1, 10.0, 256, 1.0).unwrap();
    let g20 = make_grid(1, 20.0, 512, 1.0).unwrap();
    let f10 = build_test_family(&g10, 1.0, 8).unwrap();
    let f20 = build_test_family(&g20, 1.0, 8).unwrap();
    assert_eq!(f20.members.len(), 8);
    assert!(f20.gram_condition.is_finite() && f20.gram_condition < 1e12);
    let worst10 = f10.leakage.iter().copied().fold(0.0, f64::max);
    let worst20 = f20.leakage.iter().copied().fold(0.0, f64::max);
    assert!(worst20 < worst10, "{worst20} vs {worst10}");
    assert!(worst20 < 1e-2, "{worst20}");
}

#[test]
fn local_subspaces_are_orthonormal_and_j_invariant() {
    let g = make_grid(1, 20.0, 512, 1.0).unwrap();
    let fam = build_test_family(&g, 1.0, 8).unwrap();
    let (lp, lm) = build_local_subspaces(&g, &fam).unwrap();
    for sub in [&lp, &lm] {
        assert_eq!(sub.rank(), 8);
        let gram = sub.columns.adjoint() * &sub.columns;
        let dev = (gram - CMat::identity(8, 8)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
        assert!(sub.j_defect < 1e-8, "{}", sub.j_defect);
        let p = sub.projector();
        let idem = (&p * &p - &p).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(idem < 1e-10);
    }
}

#[test]
fn single_member_subspace_has_rank_one() {
    let g = make_grid(1, 10.0, 64, 1.0).unwrap();
    let fam = build_test_family(&g, 1.0, 1).unwrap();
    let (lp, _) = build_local_subspaces(&g, &fam).unwrap();
    assert_eq!(lp.rank(), 1);
    assert!((lp.columns.column(0).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn conjugation_is_an_antiunitary_involution() {
    let g = make_grid(1, 10.0, 64, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let u = random_vec(&mut rng, g.len());
        let v = random_vec(&mut rng, g.len());
        let (ju, jv) = (apply_conjugation(&g, &u), apply_conjugation(&g, &v));
        assert!((ju.dotc(&jv) - u.dotc(&v).conj()).norm() < 1e-12);
        assert_eq!(apply_conjugation(&g, &ju), u);
    }
    let even = g.sample(|p| C64::new((-p[0] * p[0]).exp(), 0.0));
    assert_eq!(apply_conjugation(&g, &even), even);
}
