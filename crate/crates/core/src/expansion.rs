//! Rank-one expansion of the energy-damped map over multi-indices.
//!
//! A multi-index `μ̄ = (μ⁺, μ⁻)` labels the product
//! `B_μ̄ = a(L⁺e)^{μ⁺} a(L⁻e)^{μ⁻}` of annihilators along the leading
//! `T`-eigenvectors `e_j`. The functionals `S_μ̄ν̄(φ) = φ(B_μ̄^* B_ν̄)` and the
//! closed-form `τ_μ̄ν̄` on Weyl operators recombine into `φ(W(f))`.
//!
//! For `f = Σ_j c⁺_j L⁺e_j + i c⁻_j L⁻e_j` with real coefficients,
//! `τ_μ̄ν̄(W(f)) = i^{|μ⁺|+|ν⁺|+2|μ⁻|}/(μ̄!ν̄!) e^{-‖f‖²/2} c^{μ̄+ν̄}`.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fock::{factorial, translate_functional, weyl_expectation, FockOperator, ModeVector, StateFunctional, TruncatedFockSpace};
use crate::grid::{MomentumGrid, SubspaceBasis, TestFunctionFamily};
use crate::lub::LubResult;
use crate::{CMat, CVec, C64};

/// `μ̄ = (μ⁺, μ⁻)` over `K` retained modes.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct MultiIndexPair {
    pub mu_plus: Vec<u8>,
    pub mu_minus: Vec<u8>,
}

impl MultiIndexPair {
    pub fn zero(k: usize) -> Self {
        MultiIndexPair { mu_plus: vec![0; k], mu_minus: vec![0; k] }
    }

    pub fn modes(&self) -> usize {
        self.mu_plus.len()
    }

    /// `|μ̄| = |μ⁺| + |μ⁻|`.
    pub fn order(&self) -> usize {
        self.slots().map(|n| n as usize).sum()
    }

    pub fn plus_order(&self) -> usize {
        self.mu_plus.iter().map(|&n| n as usize).sum()
    }

    pub fn minus_order(&self) -> usize {
        self.mu_minus.iter().map(|&n| n as usize).sum()
    }

    /// Entries with `L⁺` slots first.
    pub fn slots(&self) -> impl Iterator<Item = u8> + '_ {
        self.mu_plus.iter().chain(&self.mu_minus).copied()
    }

    /// `μ̄! = μ⁺! μ⁻!`.
    pub fn factorial(&self) -> f64 {
        self.slots().map(|n| factorial(n as usize)).product()
    }

    /// `t^μ̄ = t^{μ⁺} t^{μ⁻}`.
    pub fn t_power(&self, t: &[f64]) -> f64 {
        self.mu_plus.iter().zip(&self.mu_minus).zip(t).map(|((&a, &b), &tj)| tj.powi(a as i32 + b as i32)).product()
    }

    pub fn add(&self, other: &Self) -> Self {
        let sum = |a: &[u8], b: &[u8]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        MultiIndexPair { mu_plus: sum(&self.mu_plus, &other.mu_plus), mu_minus: sum(&self.mu_minus, &other.mu_minus) }
    }

    /// Compact label such as `+10-00`.
    pub fn label(&self) -> String {
        let digits = |v: &[u8]| v.iter().map(|n| n.to_string()).collect::<String>();
        format!("+{}-{}", digits(&self.mu_plus), digits(&self.mu_minus))
    }

    fn from_slots(slots: &[u8]) -> Self {
        let k = slots.len() / 2;
        MultiIndexPair { mu_plus: slots[..k].to_vec(), mu_minus: slots[k..].to_vec() }
    }
}

fn max_order(m_e: f64) -> usize {
    if m_e.is_finite() && m_e > 0.0 {
        (m_e * (1.0 + 1e-12)).floor() as usize
    } else {
        0
    }
}

/// All `μ̄` with `|μ̄| ≤ M_E` over `2K` slots, graded by order and
/// descending-lexicographic within each order.
pub fn enumerate_multi_indices(k: usize, m_e: f64) -> Vec<MultiIndexPair> {
    let slots = 2 * k;
    let mut out = Vec::new();
    for n in 0..=max_order(m_e) {
        let mut cur = vec![0u8; slots];
        compositions(&mut cur, 0, n, &mut out);
    }
    out
}

fn compositions(cur: &mut Vec<u8>, i: usize, left: usize, out: &mut Vec<MultiIndexPair>) {
    if i + 1 >= cur.len() {
        if let Some(last) = cur.last_mut() {
            *last = left as u8;
        }
        if !cur.is_empty() || left == 0 {
            out.push(MultiIndexPair::from_slots(cur));
        }
        return;
    }
    for take in (0..=left).rev() {
        cur[i] = take as u8;
        compositions(cur, i + 1, left - take, out);
    }
    cur[i] = 0;
}

/// All pairs `(μ̄, ν̄)` with both orders at most `M_E`.
pub fn enumerate_index_pairs(k: usize, m_e: f64) -> Vec<(MultiIndexPair, MultiIndexPair)> {
    let idx = enumerate_multi_indices(k, m_e);
    idx.iter().flat_map(|mu| idx.iter().map(move |nu| (mu.clone(), nu.clone()))).collect()
}

/// The vectors `L^± e_j` for the leading eigenvectors of `T`, with their
/// coefficients on the modes of a Fock space.
pub struct ExpansionModes {
    pub k: usize,
    pub m_e: f64,
    pub t: Vec<f64>,
    pub plus: Vec<CVec>,
    pub minus: Vec<CVec>,
    /// Slot coefficients on the space modes, `L⁺` slots first.
    coeffs: Vec<Vec<C64>>,
}

impl ExpansionModes {
    pub fn new(space: &TruncatedFockSpace, lp: &SubspaceBasis, lm: &SubspaceBasis, lub: &LubResult, k: usize, m_e: f64) -> Result<Self> {
        if k == 0 || k > lub.e.ncols() {
            return invalid(format!("need 1 <= K <= {}, got {k}", lub.e.ncols()));
        }
        let mut plus = Vec::with_capacity(k);
        let mut minus = Vec::with_capacity(k);
        for j in 0..k {
            let e: CVec = lub.e.column(j).into_owned();
            plus.push(lp.project(&e));
            minus.push(lm.project(&e));
        }
        let coeffs = plus.iter().chain(&minus).map(|v| space.mode_vector(v).coeffs).collect();
        Ok(ExpansionModes { k, m_e, t: lub.t[..k].to_vec(), plus, minus, coeffs })
    }

    pub fn indices(&self) -> Vec<MultiIndexPair> {
        enumerate_multi_indices(self.k, self.m_e)
    }

    fn slot(&self, s: usize) -> &[C64] {
        &self.coeffs[s]
    }
}

/// `B_μ̄ v`. Factors act in a fixed order: `L⁻` slots from the highest
/// mode down, then `L⁺` slots.
pub fn apply_b(modes: &ExpansionModes, space: &TruncatedFockSpace, mu: &MultiIndexPair, v: &CVec) -> CVec {
    let counts: Vec<u8> = mu.slots().collect();
    let mut w = v.clone();
    for s in (0..counts.len()).rev() {
        for _ in 0..counts[s] {
            w = space.apply_annihilator(modes.slot(s), &w);
        }
    }
    w
}

pub fn build_b(modes: &ExpansionModes, space: &TruncatedFockSpace, mu: &MultiIndexPair) -> FockOperator {
    let dim = space.dim();
    let mut m = CMat::zeros(dim, dim);
    for b in 0..dim {
        let mut e = CVec::zeros(dim);
        e[b] = C64::new(1.0, 0.0);
        m.set_column(b, &apply_b(modes, space, mu, &e));
    }
    FockOperator::new(m)
}

/// `S_μ̄ν̄(φ) = φ(B_μ̄^* B_ν̄)`.
pub fn eval_s(modes: &ExpansionModes, space: &TruncatedFockSpace, mu: &MultiIndexPair, nu: &MultiIndexPair, phi: &StateFunctional) -> C64 {
    phi.eval_with(|y| apply_b(modes, space, mu, y), |x| apply_b(modes, space, nu, x))
}

/// `B_μ̄ x` for every index of a graded list closed under lowering, each
/// obtained from its parent by one annihilator.
pub fn lowered_vectors(modes: &ExpansionModes, space: &TruncatedFockSpace, indices: &[MultiIndexPair], x: &CVec) -> Result<Vec<CVec>> {
    let pos: HashMap<&MultiIndexPair, usize> = indices.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let mut out: Vec<CVec> = Vec::with_capacity(indices.len());
    for mu in indices {
        let slots: Vec<u8> = mu.slots().collect();
        let Some(s) = slots.iter().rposition(|&n| n > 0) else {
            out.push(x.clone());
            continue;
        };
        let mut parent = slots.clone();
        parent[s] -= 1;
        let parent = MultiIndexPair::from_slots(&parent);
        let &p = pos.get(&parent).filter(|&&p| p < out.len()).ok_or_else(|| Error::InvalidParameter(format!("index list not closed under lowering at {}", mu.label())))?;
        out.push(space.apply_annihilator(modes.slot(s), &out[p]));
    }
    Ok(out)
}

/// Matrix of `S_μ̄ν̄(φ)` over `indices × indices`.
pub fn s_matrix(modes: &ExpansionModes, space: &TruncatedFockSpace, indices: &[MultiIndexPair], phi: &StateFunctional) -> Result<CMat> {
    let n = indices.len();
    let mut s = CMat::zeros(n, n);
    let vacuum_slot = indices.iter().position(|m| m.order() == 0);
    for (c, x, y) in &phi.terms {
        // Only B_0 = 1 survives on the vacuum.
        if let (Some(z), true) = (vacuum_slot, x == y && is_vacuum(x)) {
            s[(z, z)] += c * x[0].norm_sqr();
            continue;
        }
        let bx = CMat::from_columns(&lowered_vectors(modes, space, indices, x)?);
        let by = if x == y { bx.clone() } else { CMat::from_columns(&lowered_vectors(modes, space, indices, y)?) };
        s += by.adjoint() * bx * *c;
    }
    Ok(s)
}

fn is_vacuum(x: &CVec) -> bool {
    x.iter().skip(1).all(|z| *z == C64::new(0.0, 0.0))
}

/// A Weyl argument `f` with real coordinates `f = Σ c⁺_j L⁺e_j + i c⁻_j L⁻e_j`.
#[derive(Clone, Debug)]
pub struct WeylArgument {
    pub f: CVec,
    pub c_plus: Vec<f64>,
    pub c_minus: Vec<f64>,
    /// `‖f - Σ …‖ / ‖f‖` of the real least-squares fit.
    pub residual: f64,
    pub norm_sqr: f64,
}

impl WeylArgument {
    pub fn from_coeffs(modes: &ExpansionModes, c_plus: &[f64], c_minus: &[f64]) -> Self {
        let n = modes.plus[0].len();
        let mut f = CVec::zeros(n);
        for j in 0..modes.k {
            f += &modes.plus[j] * C64::new(c_plus[j], 0.0);
            f += &modes.minus[j] * C64::new(0.0, c_minus[j]);
        }
        let norm_sqr = f.norm_squared();
        WeylArgument { f, c_plus: c_plus.to_vec(), c_minus: c_minus.to_vec(), residual: 0.0, norm_sqr }
    }

    /// Real least-squares coordinates of an arbitrary `f`.
    pub fn decompose(modes: &ExpansionModes, f: &CVec) -> Self {
        let n = f.len();
        let k = modes.k;
        let cols: Vec<CVec> = modes.plus.iter().cloned().chain(modes.minus.iter().map(|v| v * C64::new(0.0, 1.0))).collect();
        let a = DMatrix::<f64>::from_fn(2 * n, 2 * k, |r, c| if r < n { cols[c][r].re } else { cols[c][r - n].im });
        let b = DVector::<f64>::from_fn(2 * n, |r, _| if r < n { f[r].re } else { f[r - n].im });
        let svd = a.clone().svd(true, true);
        let top = svd.singular_values.max();
        let c = svd.solve(&b, 1e-12 * top.max(1e-300)).unwrap_or_else(|_| DVector::zeros(2 * k));
        let fit = &a * &c;
        let fnorm = b.norm();
        let residual = if fnorm > 0.0 { (b - fit).norm() / fnorm } else { 0.0 };
        WeylArgument { f: f.clone(), c_plus: c.as_slice()[..k].to_vec(), c_minus: c.as_slice()[k..].to_vec(), residual, norm_sqr: f.norm_squared() }
    }

    pub fn mode_vector(&self, space: &TruncatedFockSpace) -> ModeVector {
        space.mode_vector(&self.f)
    }

    pub fn scaled(&self, s: f64) -> Self {
        WeylArgument {
            f: &self.f * C64::new(s, 0.0),
            c_plus: self.c_plus.iter().map(|c| c * s).collect(),
            c_minus: self.c_minus.iter().map(|c| c * s).collect(),
            residual: self.residual,
            norm_sqr: self.norm_sqr * s * s,
        }
    }
}

/// `φ_κ(W(f)) = e^{-‖f‖²/2} (c⁺)^{κ⁺} (c⁻)^{κ⁻}`.
pub fn phi_on_weyl(kappa: &MultiIndexPair, arg: &WeylArgument) -> f64 {
    let mono: f64 = kappa
        .mu_plus
        .iter()
        .zip(&arg.c_plus)
        .chain(kappa.mu_minus.iter().zip(&arg.c_minus))
        .map(|(&n, &c)| c.powi(n as i32))
        .product();
    (-0.5 * arg.norm_sqr).exp() * mono
}

fn i_power(n: usize) -> C64 {
    [C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.0, -1.0)][n % 4]
}

pub fn eval_tau_on_weyl(mu: &MultiIndexPair, nu: &MultiIndexPair, arg: &WeylArgument) -> C64 {
    let phase = i_power(mu.plus_order() + nu.plus_order() + 2 * mu.minus_order());
    phase * (phi_on_weyl(&mu.add(nu), arg) / (mu.factorial() * nu.factorial()))
}

/// `4^{|μ̄|+|ν̄|} (μ̄!ν̄!)^{-1/2} ((μ̄+ν̄)!/(μ̄!ν̄!))^{1/2}`.
pub fn tau_norm_bound(mu: &MultiIndexPair, nu: &MultiIndexPair) -> f64 {
    let f = mu.factorial() * nu.factorial();
    4f64.powi((mu.order() + nu.order()) as i32) / f.sqrt() * (mu.add(nu).factorial() / f).sqrt()
}

/// `M_E^{(|μ̄|+|ν̄|)/2} t^μ̄ t^ν̄`.
pub fn s_norm_bound(mu: &MultiIndexPair, nu: &MultiIndexPair, t: &[f64], m_e: f64) -> f64 {
    m_e.powf(0.5 * (mu.order() + nu.order()) as f64) * mu.t_power(t) * nu.t_power(t)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExpansionCheck {
    pub exact_re: f64,
    pub exact_im: f64,
    pub expanded_re: f64,
    pub expanded_im: f64,
    pub residual: f64,
}

/// `|φ(W(f)) - Σ τ_μ̄ν̄(W(f)) S_μ̄ν̄(φ)|`, both sides evaluated on the space.
pub fn expansion_residual(modes: &ExpansionModes, space: &TruncatedFockSpace, phi: &StateFunctional, arg: &WeylArgument) -> Result<ExpansionCheck> {
    let exact = if phi.terms.is_empty() { C64::new(0.0, 0.0) } else { weyl_expectation(space, phi, &arg.mode_vector(space)) };
    let idx = modes.indices();
    let mut expanded = C64::new(0.0, 0.0);
    if !phi.terms.is_empty() {
        let s = s_matrix(modes, space, &idx, phi)?;
        for (a, mu) in idx.iter().enumerate() {
            for (b, nu) in idx.iter().enumerate() {
                expanded += eval_tau_on_weyl(mu, nu, arg) * s[(a, b)];
            }
        }
    }
    Ok(ExpansionCheck {
        exact_re: exact.re,
        exact_im: exact.im,
        expanded_re: expanded.re,
        expanded_im: expanded.im,
        residual: (exact - expanded).norm(),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct PnormSum {
    pub direct: f64,
    pub bound: f64,
}

/// Direct sum `Σ_{μ̄,ν̄} (M_E^{(|μ̄|+|ν̄|)/2} t^μ̄ t^ν̄)^p` over all `t` given,
/// leaving out the `(0,0)` pair since `S_{0,0}` vanishes on vacuum-subtracted
/// functionals, and the closed bound `M_E^{p M_E} (Σ_{k ≤ [M_E]} ‖T^p‖₁^k)^4`.
pub fn pnorm_sum(p: f64, t: &[f64], m_e: f64) -> Result<PnormSum> {
    if !(p > 0.0 && p <= 1.0) {
        return invalid(format!("p must lie in (0, 1], got {p}"));
    }
    let one: f64 = enumerate_multi_indices(t.len(), m_e)
        .iter()
        .map(|mu| (m_e.powf(0.5 * mu.order() as f64) * mu.t_power(t)).powf(p))
        .sum();
    let trace: f64 = t.iter().map(|x| x.powf(p)).sum();
    let geo: f64 = (0..=max_order(m_e)).map(|k| trace.powi(k as i32)).sum();
    Ok(PnormSum { direct: one * one - 1.0, bound: m_e.powf(p * m_e) * geo.powi(4) })
}

/// `sup_φ (Σ_k ‖Π(α*_{x_k} φ)‖²)^{1/2}` over a sampled net, for a map given by
/// the norm of its image. A lower bound on the true N-point norm.
pub fn npoint_norm<F>(space: &TruncatedFockSpace, net: &[StateFunctional], translations: &[(f64, f64)], map_norm: F) -> Result<f64>
where
    F: Fn(&StateFunctional) -> f64 + Sync,
{
    if net.is_empty() {
        return Err(Error::Empty("functional net".into()));
    }
    let vals: Result<Vec<f64>> = net
        .par_iter()
        .map(|phi| {
            let mut acc = 0.0;
            for &(x0, x1) in translations {
                acc += map_norm(&translate_functional(space, phi, x0, x1)?).powi(2);
            }
            Ok(acc.sqrt())
        })
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

/// Sampled `‖Π_E(φ)‖`: the largest `|φ(W(f))|` over a family of Weyl operators.
pub fn weyl_sup(space: &TruncatedFockSpace, observables: &[ModeVector], phi: &StateFunctional) -> f64 {
    observables.iter().map(|mv| weyl_expectation(space, phi, mv).norm()).fold(0.0, f64::max)
}

fn normal_c64(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Random elements `Σ a_i ω^{-1/2} f̃_i + i b_i ω^{1/2} f̃_i` of the local
/// one-particle space with norms drawn from `[0.5, 1.5]`, followed by the
/// sums of consecutive pairs (products of two Weyl operators up to a phase).
pub fn local_weyl_arguments(grid: &MomentumGrid, family: &TestFunctionFamily, rng: &mut impl Rng, count: usize) -> Vec<CVec> {
    let n = grid.len();
    let mut singles = Vec::with_capacity(count);
    for _ in 0..count {
        let mut f = CVec::zeros(n);
        for m in &family.members {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            for k in 0..n {
                let w = grid.omega[k];
                f[k] += m[k] * C64::new(a / w.sqrt(), b * w.sqrt());
            }
        }
        let target = rng.gen_range(0.5..1.5);
        let norm = f.norm();
        singles.push(if norm > 0.0 { f * C64::new(target / norm, 0.0) } else { f });
    }
    let pairs: Vec<CVec> = singles.chunks_exact(2).map(|p| &p[0] + &p[1]).collect();
    singles.extend(pairs);
    singles
}

fn unit_functional(space: &TruncatedFockSpace, phi: StateFunctional) -> Option<StateFunctional> {
    let phi = phi.vacuum_subtract(space);
    let tn = phi.trace_norm();
    (tn > 1e-12).then(|| {
        let mut out = phi.scale(1.0 / tn);
        out.energy_support = space.e_cap;
        out
    })
}

fn random_state(space: &TruncatedFockSpace, rng: &mut impl Rng, max_particles: usize) -> CVec {
    let dim = space.dim();
    let mut v = CVec::from_fn(dim, |b, _| if space.particles[b] <= max_particles { normal_c64(rng) } else { C64::new(0.0, 0.0) });
    let n = v.norm();
    v /= C64::new(n, 0.0);
    v
}

/// Unit-trace-norm, vacuum-subtracted functionals under `P_E`: random pure
/// states (one third restricted to at most one particle), and normalized
/// midpoints of pairs of them.
pub fn functional_net(space: &TruncatedFockSpace, rng: &mut impl Rng, size: usize) -> Vec<StateFunctional> {
    let mut net = Vec::with_capacity(size);
    let pure_count = size - size / 3;
    let mut pure = Vec::new();
    while pure.len() < pure_count {
        let cap = if pure.len() % 3 == 0 { 1 } else { space.n_max };
        let psi = random_state(space, rng, cap);
        if let Some(phi) = unit_functional(space, StateFunctional::pure(&psi)) {
            pure.push((psi, phi));
        }
        if pure.is_empty() && space.dim() <= 1 {
            break;
        }
    }
    net.extend(pure.iter().map(|(_, phi)| phi.clone()));
    let mut k = 0;
    while net.len() < size && pure.len() >= 2 {
        let a = &pure[k % pure.len()].0;
        let b = &pure[(k * 7 + 3) % pure.len()].0;
        k += 1;
        let mut mix = StateFunctional::pure(a).scale(0.5);
        mix.terms.extend(StateFunctional::pure(b).scale(0.5).terms);
        if let Some(phi) = unit_functional(space, mix) {
            net.push(phi);
        }
        if k > 4 * size {
            break;
        }
    }
    net
}

/// One row of the exportable expansion table.
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionRow {
    pub mu: String,
    pub nu: String,
    pub s_sampled: f64,
    pub s_bound: f64,
    pub tau_bound: f64,
}

/// Sampled `sup_φ |S_μ̄ν̄(φ)|` over the net for every retained pair.
pub fn expansion_table(modes: &ExpansionModes, space: &TruncatedFockSpace, net: &[StateFunctional]) -> Result<Vec<ExpansionRow>> {
    let idx = modes.indices();
    let n = idx.len();
    let mats: Result<Vec<CMat>> = net.par_iter().map(|phi| s_matrix(modes, space, &idx, phi)).collect();
    let mut sup = DMatrix::<f64>::zeros(n, n);
    for m in mats? {
        sup.zip_apply(&m, |a, z| *a = a.max(z.norm()));
    }
    let mut rows = Vec::with_capacity(n * n);
    for (a, mu) in idx.iter().enumerate() {
        for (b, nu) in idx.iter().enumerate() {
            rows.push(ExpansionRow {
                mu: mu.label(),
                nu: nu.label(),
                s_sampled: sup[(a, b)],
                s_bound: s_norm_bound(mu, nu, &modes.t, modes.m_e),
                tau_bound: tau_norm_bound(mu, nu),
            });
        }
    }
    Ok(rows)
}

pub fn expansion_csv(rows: &[ExpansionRow]) -> String {
    let mut out = String::from("mu,nu,s_sampled,s_bound,tau_bound\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{:.12e},{:.12e},{:.12e}", r.mu, r.nu, r.s_sampled, r.s_bound, r.tau_bound);
    }
    out
}
