use nuclab::grid::{apply_conjugation, build_local_subspaces, build_test_family, make_grid, MomentumGrid, SubspaceBasis};
use nuclab::linalg::{min_eigenvalue, psd_power, trace};
use nuclab::lub::{build_damped_restrictions, j_real_eigenbasis, lub_iterate, schatten_norm, spectral_join, t_power, CompactOperator, LubMethod};
use nuclab::{CMat, CVec, C64};

fn setup() -> (MomentumGrid, SubspaceBasis, SubspaceBasis) {
    let g = make_grid(1, 20.0, 512, 1.0).unwrap();
    let fam = build_test_family(&g, 1.0, 8).unwrap();
    let (lp, lm) = build_local_subspaces(&g, &fam).unwrap();
    (g, lp, lm)
}

#[test]
fn energy_below_mass_kills_the_sharp_restrictions() {
    let (g, lp, lm) = setup();
    let s = build_damped_restrictions(&g, &lp, &lm, 0.9, 0.2).unwrap();
    assert_eq!(s[0].matrix.iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
    assert_eq!(s[1].matrix.iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
}

#[test]
fn vanishing_damping_recovers_the_projection() {
    let (g, lp, lm) = setup();
    let s = build_damped_restrictions(&g, &lp, &lm, 2.5, 1e-9).unwrap();
    let dev = (&s[2].matrix - lp.projector()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(dev < 1e-12, "{dev}");
}

#[test]
fn restrictions_are_contractions_and_t_dominates_them() {
    let (g, lp, lm) = setup();
    let s = build_damped_restrictions(&g, &lp, &lm, 2.5, 0.2).unwrap();
    for op in &s {
        assert!(op.norm() <= 1.0 + 1e-12, "{} {}", op.label, op.norm());
    }
    let res = lub_iterate(&g, &s, 1e-10, 30).unwrap();
    assert!(res.t[0] <= 1.0 + 1e-10);
    assert!(res.t.iter().all(|&t| t >= -1e-12));
    for n in [1.0, 2.0, 4.0] {
        let tn = t_power(&res, n);
        for op in &s {
            let gap = &tn - op.abs_power(n);
            assert!(min_eigenvalue(&gap) >= -1e-8, "n={n} {}", op.label);
        }
    }
    for p in [0.5, 1.0] {
        let lhs = schatten_norm(&CompactOperator::new(t_power(&res, p), "Tp"), 1.0);
        let rhs: f64 = s.iter().map(|op| schatten_norm(op, p).powf(p)).sum();
        assert!(lhs <= rhs + 1e-10, "p={p}: {lhs} > {rhs}");
    }
    let tr = trace(&res.t_op.matrix).re;
    assert!((res.t.iter().sum::<f64>() - tr).abs() < 1e-10);
    assert!(res.j_defect < 1e-8);
}

#[test]
fn power_means_approach_the_join() {
    let (g, lp, lm) = setup();
    let s = build_damped_restrictions(&g, &lp, &lm, 2.5, 0.2).unwrap();
    let res = lub_iterate(&g, &s, 1e-10, 30).unwrap();
    // The early iterates move monotonically toward the spectral join.
    let d = &res.join_distance;
    for w in d[..5].windows(2) {
        assert!(w[1] < w[0], "{d:?}");
    }
    assert_eq!(res.method, LubMethod::SpectralJoin);
}

#[test]
fn identical_inputs_are_a_fixed_point() {
    let (g, lp, _) = setup();
    let half = CompactOperator::new(lp.projector() * C64::new(0.5, 0.0), "S");
    let ops = vec![half.clone(), half.clone(), half.clone(), half.clone()];
    let res = lub_iterate(&g, &ops, 1e-10, 30).unwrap();
    assert_eq!(res.method, LubMethod::PowerMean);
    let dev = (&res.t_op.matrix - &half.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(dev < 1e-10, "{dev}");
    let j = spectral_join(&ops);
    assert!((&j - &half.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
}

#[test]
fn degenerate_pair_gets_a_j_real_basis() {
    let g = make_grid(1, 4.0, 16, 1.0).unwrap();
    // v is not J-real; span{v, Jv} is a J-invariant eigenspace.
    let v = g.sample(|p| C64::new(0.0, p[0]).exp() * (-(p[0] - 0.7).powi(2)).exp());
    let v = &v / C64::new(v.norm(), 0.0);
    let jv = apply_conjugation(&g, &v);
    let (q, _, _) = nuclab::linalg::orthonormal_range(&CMat::from_columns(&[v.clone(), jv]), 1e-10);
    let t = CompactOperator::new(&q * q.adjoint() * C64::new(0.4, 0.0), "T");
    let (vals, e, defect) = j_real_eigenbasis(&g, &t).unwrap();
    assert!((vals[0] - 0.4).abs() < 1e-12 && (vals[1] - 0.4).abs() < 1e-12);
    assert!(defect < 1e-8);
    let top = e.columns(0, 2).into_owned();
    let gram = top.adjoint() * &top;
    assert!((gram - CMat::identity(2, 2)).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    for k in 0..2 {
        let col: CVec = top.column(k).into_owned();
        assert!((apply_conjugation(&g, &col) - &col).norm() < 1e-12);
    }
    // Same span as the input eigenspace.
    let back = &q * (q.adjoint() * &top);
    assert!((back - top).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
}

#[test]
fn abs_power_matches_dense_root() {
    let (g, lp, lm) = setup();
    let s = build_damped_restrictions(&g, &lp, &lm, 2.5, 0.2).unwrap();
    let dense = psd_power(&(s[2].matrix.adjoint() * &s[2].matrix), 0.5, 1e-24);
    let dev = (&dense - s[2].abs_power(1.0)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(dev < 1e-8, "{dev}");
}
