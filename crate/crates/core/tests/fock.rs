use nuclab::fock::*;
use nuclab::grid::{make_grid, MomentumGrid};
use nuclab::linalg::{op_norm, orthonormal_range};
use nuclab::{CMat, CVec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
}

/// Smooth orthonormal modes: Gaussians times low polynomials.
fn smooth_modes(g: &MomentumGrid, k: usize) -> CMat {
    let cols: Vec<CVec> = (0..k).map(|j| g.sample(|p| C64::new(p[0].powi(j as i32) * (-p[0] * p[0] / 2.0).exp(), 0.0))).collect();
    orthonormal_range(&CMat::from_columns(&cols), 1e-12).0
}

#[test]
fn annihilators_kill_the_vacuum_and_satisfy_ccr_below_cutoff() {
    let g = make_grid(1, 8.0, 64, 1.0).unwrap();
    let modes = smooth_modes(&g, 3);
    let s = build_fock(&g, &modes, 4, None, 1000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = &modes * CVec::from_iterator(3, (0..3).map(|_| C64::new(rng.gen(), rng.gen())));
    let (a, leak) = ladder(&s, &f, Ladder::Annihilate, false).unwrap();
    assert!(leak < 1e-12);
    assert!((a.matrix.clone() * s.vacuum()).norm() < 1e-15);
    let (ad, _) = ladder(&s, &f, Ladder::Create, false).unwrap();
    assert!(max_abs(&(ad.matrix.clone() - a.matrix.adjoint())) == 0.0);
    let low: Vec<usize> = (0..s.dim()).filter(|&b| s.particles[b] < 4).collect();
    for i in 0..3 {
        for j in 0..3 {
            let ei = modes.column(i).into_owned();
            let ej = modes.column(j).into_owned();
            let ai = ladder(&s, &ei, Ladder::Annihilate, false).unwrap().0.matrix;
            let aj_dag = ladder(&s, &ej, Ladder::Create, false).unwrap().0.matrix;
            let comm = &ai * &aj_dag - &aj_dag * &ai;
            for &b in &low {
                for &c in &low {
                    let want = if b == c && i == j { 1.0 } else { 0.0 };
                    assert!((comm[(b, c)] - C64::new(want, 0.0)).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn leakage_outside_modes_is_rejected_unless_waived() {
    let g = make_grid(1, 8.0, 64, 1.0).unwrap();
    let s = build_fock(&g, &smooth_modes(&g, 2), 2, None, 100).unwrap();
    let f = g.sample(|p| C64::new((-(p[0] - 3.0).powi(2)).exp(), 0.0));
    assert!(ladder(&s, &f, Ladder::Annihilate, false).is_err());
    let (_, leak) = ladder(&s, &f, Ladder::Annihilate, true).unwrap();
    assert!(leak > 1e-6);
}

#[test]
fn energy_bounds_in_the_node_space() {
    let g = make_grid(1, 20.0, 512, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for energy in [1.5, 2.5, 4.0] {
        let s = node_space(&g, energy, 20_000).unwrap();
        let mask = s.energy_mask(energy);
        for n in 1..=3 {
            let fs: Vec<CVec> = (0..n).map(|_| random_vec(&mut rng, g.len()) * C64::new(0.1, 0.0)).collect();
            let coeffs: Vec<Vec<C64>> = fs.iter().map(|f| s.mode_vector(f).coeffs).collect();
            let start = random_vec(&mut rng, s.dim());
            let (lhs, resid) = lowering_product_norm(&s, &coeffs, &mask, &start);
            let rhs = (energy / g.m).powf(n as f64 / 2.0) * fs.iter().map(|f| f.norm()).product::<f64>();
            assert!(lhs <= rhs + 1e-8, "E={energy} n={n}: {lhs} > {rhs}");
            if s.dim() < 500 {
                let mut prod = CMat::identity(s.dim(), s.dim());
                for c in &coeffs {
                    prod = s.ladder_matrix(c, Ladder::Annihilate) * prod;
                }
                let cols: Vec<usize> = (0..s.dim()).filter(|&b| mask[b]).collect();
                let dense = op_norm(&CMat::from_fn(s.dim(), cols.len(), |r, c| prod[(r, cols[c])]));
                assert!((dense - lhs).abs() < 1e-9 * dense.max(1.0), "{dense} vs {lhs} (resid {resid})");
            }
        }
    }
}

#[test]
fn second_quantization_examples() {
    let g = make_grid(1, 20.0, 512, 1.0).unwrap();
    let s = node_space(&g, 2.5, 20_000).unwrap();
    let h = second_quantize(&s, &g.multiplier(|k| g.omega[k]));
    for b in 0..s.dim() {
        assert!((h.matrix[(b, b)].re - s.energies[b]).abs() < 1e-12);
    }
    assert!(max_abs(&(h.matrix.clone() - s.hamiltonian())) < 1e-12);
    let number = second_quantize(&s, &CMat::identity(g.len(), g.len()));
    for b in 0..s.dim() {
        assert!((number.matrix[(b, b)].re - s.particles[b] as f64).abs() < 1e-12);
    }
    assert_eq!(max_abs(&second_quantize(&s, &CMat::zeros(g.len(), g.len())).matrix), 0.0);
    // e^G P_E ≤ e^{(βE)²/2} with g = (β|p|)²/2.
    let beta = 0.2;
    let gq = second_quantize(&s, &g.multiplier(|k| 0.5 * (beta * g.nodes[k][0]).powi(2)));
    let top = (0..s.dim()).map(|b| gq.matrix[(b, b)].re.exp()).fold(0.0, f64::max);
    assert!(top <= (0.5 * (beta * 2.5f64).powi(2)).exp() + 1e-12);
}

#[test]
fn weyl_operators_basic_identities() {
    let g = make_grid(1, 8.0, 64, 1.0).unwrap();
    let modes = smooth_modes(&g, 2);
    let s = build_fock(&g, &modes, 14, None, 1000).unwrap();
    let f = &modes * CVec::from_vec(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.05)]);
    let (w0, _) = weyl(&s, &CVec::zeros(g.len()), 1e-6).unwrap();
    assert!(max_abs(&(w0.matrix - CMat::identity(s.dim(), s.dim()))) < 1e-14);
    let (w, defect) = weyl(&s, &f, 1e-6).unwrap();
    assert!(defect < 1e-6);
    let vac = s.vacuum();
    let expect = vac.dotc(&(&w.matrix * &vac));
    assert!((expect.re - (-0.5 * f.norm_squared()).exp()).abs() < 1e-10 && expect.im.abs() < 1e-10);
    let (wm, _) = weyl(&s, &(-&f), 1e-6).unwrap();
    assert!(max_abs(&(w.matrix.adjoint() - wm.matrix)) < 1e-10);
    let c = s.mode_vector(&f).coeffs;
    assert!(weyl_truncation_defect(&s, &c) < 1e-10);
}

#[test]
fn weyl_composition_law_on_the_low_sector() {
    let g = make_grid(1, 8.0, 64, 1.0).unwrap();
    let modes = smooth_modes(&g, 2);
    let s = build_fock(&g, &modes, 16, None, 1000).unwrap();
    let f = &modes * CVec::from_vec(vec![C64::new(0.25, 0.0), C64::new(0.0, 0.15)]);
    let h = &modes * CVec::from_vec(vec![C64::new(-0.1, 0.2), C64::new(0.2, 0.0)]);
    let wf = weyl(&s, &f, 1e-6).unwrap().0.matrix;
    let wh = weyl(&s, &h, 1e-6).unwrap().0.matrix;
    let wfh = weyl(&s, &(&f + &h), 1e-6).unwrap().0.matrix;
    let phase = C64::from_polar(1.0, -f.dotc(&h).im);
    let low: Vec<usize> = (0..s.dim()).filter(|&b| s.particles[b] <= 4).collect();
    let lhs = &wf * &wh;
    for &r in &low {
        for &c in &low {
            assert!((lhs[(r, c)] - phase * wfh[(r, c)]).norm() < 1e-8);
        }
    }
}

#[test]
fn normal_ordered_weyl_matches_expm_in_the_node_space() {
    // Node space with energy cap: P_E W(f) P_E from the normal-ordered form
    // against expm on a larger uncapped particle-number space.
    let g = make_grid(1, 4.0, 8, 1.0).unwrap();
    let capped = node_space(&g, 2.5, 10_000).unwrap();
    let idx: Vec<usize> = (0..g.len()).filter(|&k| g.omega[k] <= 2.5).collect();
    let mut modes = CMat::zeros(g.len(), idx.len());
    for (c, &k) in idx.iter().enumerate() {
        modes[(k, c)] = C64::new(1.0, 0.0);
    }
    let big = build_fock(&g, &modes, 10, None, 50_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coeffs: Vec<C64> = (0..idx.len()).map(|_| C64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))).collect();
    let mut f = CVec::zeros(g.len());
    for (c, &k) in idx.iter().enumerate() {
        f[k] = coeffs[c];
    }
    let exact = weyl_normal_ordered(&capped, &capped.mode_vector(&f));
    let w = weyl_expm(&big, &coeffs);
    let mask = capped.energy_mask(2.5);
    for (r, occ_r) in capped.basis.iter().enumerate() {
        for (c, occ_c) in capped.basis.iter().enumerate() {
            if !(mask[r] && mask[c]) {
                continue;
            }
            let (br, bc) = (big.index_of(occ_r).unwrap(), big.index_of(occ_c).unwrap());
            assert!((exact[(r, c)] - w[(br, bc)]).norm() < 1e-9, "{r},{c}");
        }
    }
}

#[test]
fn translations_in_the_node_space_are_exact() {
    let g = make_grid(1, 20.0, 512, 1.0).unwrap();
    let s = node_space(&g, 2.5, 20_000).unwrap();
    let (u0, _) = translate_op(&s, 0.0, 0.0);
    assert!(max_abs(&(u0.matrix - CMat::identity(s.dim(), s.dim()))) < 1e-15);
    for x in [0.3, 1.0, 2.0] {
        let (u, leak) = translate_op(&s, 0.4 * x, x);
        let (um, _) = translate_op(&s, -0.4 * x, -x);
        assert_eq!(leak, 0.0);
        assert!(max_abs(&(&u.matrix * &um.matrix - CMat::identity(s.dim(), s.dim()))) < 1e-12);
        assert!((&u.matrix * s.vacuum() - s.vacuum()).norm() < 1e-15);
        let pe = spectral_project(&s, Region::EnergyCap(2.0)).matrix;
        assert!(max_abs(&(&u.matrix * &pe - &pe * &u.matrix)) < 1e-8);
    }
}

#[test]
fn translations_of_smooth_modes_report_leakage() {
    let g = make_grid(1, 8.0, 64, 1.0).unwrap();
    let modes = smooth_modes(&g, 3);
    let s = build_fock(&g, &modes, 3, None, 1000).unwrap();
    let (u, leak) = translate_op(&s, 0.0, 1.0);
    assert!(leak > 1e-3);
    // Γ restricted to a non-invariant span is a contraction, not a unitary.
    assert!(u.norm() <= 1.0 + 1e-12);
}

#[test]
fn gamma_of_a_unitary_mixing_matrix_is_unitary_without_cutoff_loss() {
    let g = make_grid(1, 8.0, 64, 1.0).unwrap();
    let s = build_fock(&g, &smooth_modes(&g, 3), 3, None, 1000).unwrap();
    let th: f64 = 0.7;
    let u = CMat::from_row_slice(
        3,
        3,
        &[
            C64::new(th.cos(), 0.0),
            C64::new(-th.sin(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(th.sin(), 0.0),
            C64::new(th.cos(), 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 1.0),
        ],
    );
    let gu = s.gamma(&u);
    assert!(max_abs(&(gu.adjoint() * &gu - CMat::identity(s.dim(), s.dim()))) < 1e-12);
}

#[test]
fn spectral_projections() {
    let g = make_grid(1, 20.0, 512, 1.0).unwrap();
    let s = node_space(&g, 2.5, 20_000).unwrap();
    let p_low = spectral_project(&s, Region::EnergyCap(0.9)).matrix;
    assert_eq!(p_low[(0, 0)], C64::new(1.0, 0.0));
    assert_eq!((0..s.dim()).filter(|&b| p_low[(b, b)].re > 0.5).count(), 1);
    let pa = spectral_project(&s, Region::EnergyCap(1.8)).matrix;
    let pb = spectral_project(&s, Region::EnergyCap(2.3)).matrix;
    assert_eq!(&pa * &pb, pa);
    let ball = spectral_project(&s, Region::Ball { p0: 0.0, p1: 0.0, radius: 0.9 }).matrix;
    assert_eq!((0..s.dim()).filter(|&b| ball[(b, b)].re > 0.5).count(), 1);
    let below = node_space(&g, 0.9, 100).unwrap();
    assert_eq!(below.energy_mask(0.9).iter().filter(|&&m| m).count(), 1);
}

#[test]
fn jordan_decomposition_reassembles() {
    let n = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rho = CMat::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let phi = StateFunctional::from_density(&rho);
    let parts = jordan_decompose(&phi, n);
    let i = C64::new(0.0, 1.0);
    let back = parts[0].density(n) - parts[1].density(n) + (parts[2].density(n) - parts[3].density(n)) * i;
    let err = nuclab::linalg::trace_norm(&(back - &rho));
    assert!(err < 1e-12, "{err}");
    for p in &parts {
        assert!(nuclab::linalg::min_eigenvalue(&p.density(n)) > -1e-12);
    }
    let cross = parts[0].density(n) * parts[1].density(n);
    assert!(max_abs(&cross) < 1e-12);
    let pos = StateFunctional::pure(&random_vec(&mut rng, n));
    let split = jordan_decompose(&pos, n);
    assert!(split[1].terms.iter().all(|t| t.0.norm() < 1e-12));
}

#[test]
fn vacuum_subtraction_and_trace_norm() {
    let g = make_grid(1, 20.0, 512, 1.0).unwrap();
    let s = node_space(&g, 2.5, 20_000).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let psi = random_vec(&mut rng, s.dim());
    let psi = &psi / C64::new(psi.norm(), 0.0);
    let phi = StateFunctional::pure(&psi).vacuum_subtract(&s);
    assert!(phi.identity_value().norm() < 1e-12);
    let dense = nuclab::linalg::trace_norm(&phi.density(s.dim()));
    // The dense value also sums ~dim round-off singular values of size 1e-12.
    assert!((phi.trace_norm() - dense).abs() < 1e-8, "{} vs {dense}", phi.trace_norm());
    let json = matrix_json(&CMat::identity(2, 2));
    assert_eq!(json["re"][1][1], 1.0);
}
