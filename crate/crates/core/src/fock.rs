//! Truncated bosonic Fock space over a finite orthonormal set of
//! single-particle modes.
//!
//! Two kinds of spaces are used. Over a handful of smooth modes (the leading
//! T-eigenvectors) the space is a plain particle-number truncation. Over the
//! grid nodes with `ω ≤ E`, capped at total energy `E`, the space contains
//! every discretized state of energy at most `E`, so `P_E`, translations and
//! `P_E W(f) P_E` are represented without truncation error.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::MomentumGrid;
use crate::linalg::{self, expm, herm_eigen, orthonormal_range};
use crate::{CMat, CVec, C64};

type Occupation = Vec<u8>;

#[derive(Clone, Debug)]
pub struct TruncatedFockSpace {
    /// Single-particle modes as columns on the grid.
    pub modes: CMat,
    /// `⟨e_j|ω|e_j⟩`.
    pub omega: Vec<f64>,
    /// `⟨e_j|p|e_j⟩` (first momentum component).
    pub momentum: Vec<f64>,
    pub n_max: usize,
    pub e_cap: Option<f64>,
    pub basis: Vec<Occupation>,
    pub energies: Vec<f64>,
    pub momenta: Vec<f64>,
    pub particles: Vec<usize>,
    /// Largest off-diagonal entry of `ω` in mode coordinates.
    pub omega_leakage: f64,
    /// Modes are grid nodes, so `ω` and `p` are exactly diagonal.
    pub node_modes: bool,
    index: HashMap<Occupation, usize>,
    lower: Vec<Vec<Option<(usize, f64)>>>,
    raise: Vec<Vec<Option<(usize, f64)>>>,
    grid_omega: Vec<f64>,
    grid_p: Vec<f64>,
}

pub const DEFAULT_DIM_LIMIT: usize = 20_000;

/// Occupation-number space over `modes` with `Σn ≤ n_max` and, if given,
/// `Σ n_j ω_j ≤ e_cap`.
pub fn build_fock(grid: &MomentumGrid, modes: &CMat, n_max: usize, e_cap: Option<f64>, dim_limit: usize) -> Result<TruncatedFockSpace> {
    if modes.ncols() == 0 || n_max == 0 {
        return invalid("need at least one mode and N_max ≥ 1");
    }
    if modes.nrows() != grid.len() {
        return invalid("modes do not live on the grid");
    }
    let gram = modes.adjoint() * modes;
    let ortho = (gram - CMat::identity(modes.ncols(), modes.ncols())).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if ortho > 1e-8 {
        return Err(Error::Tolerance { what: "mode orthonormality".into(), value: ortho, limit: 1e-8 });
    }
    let grid_p: Vec<f64> = grid.nodes.iter().map(|p| p[0]).collect();
    let w_modes = diag_sandwich(modes, &grid.omega);
    let p_modes = diag_sandwich(modes, &grid_p);
    let k = modes.ncols();
    let omega: Vec<f64> = (0..k).map(|j| w_modes[(j, j)].re).collect();
    let momentum: Vec<f64> = (0..k).map(|j| p_modes[(j, j)].re).collect();
    let mut omega_leakage: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                omega_leakage = omega_leakage.max(w_modes[(i, j)].norm());
            }
        }
    }
    let node_modes = (0..k).all(|j| modes.column(j).iter().filter(|z| z.norm() > 0.0).count() == 1);
    let basis = enumerate_occupations(&omega, n_max, e_cap, dim_limit)?;
    Ok(assemble(modes.clone(), omega, momentum, n_max, e_cap, basis, omega_leakage, node_modes, grid.omega.clone(), grid_p))
}

/// Fock space over the grid nodes with `ω ≤ E`, capped at energy `E`.
pub fn node_space(grid: &MomentumGrid, energy: f64, dim_limit: usize) -> Result<TruncatedFockSpace> {
    let nodes: Vec<usize> = (0..grid.len()).filter(|&k| grid.omega[k] <= energy).collect();
    let n_max = (energy / grid.m).floor() as usize;
    if nodes.is_empty() || n_max == 0 {
        // Only the vacuum lies below the mass gap; keep one dormant mode so
        // the space is well formed.
        let k0 = (0..grid.len()).min_by(|&a, &b| grid.omega[a].total_cmp(&grid.omega[b])).unwrap_or(0);
        let mut modes = CMat::zeros(grid.len(), 1);
        modes[(k0, 0)] = C64::new(1.0, 0.0);
        return build_fock(grid, &modes, 1, Some(energy), dim_limit);
    }
    let mut modes = CMat::zeros(grid.len(), nodes.len());
    for (c, &k) in nodes.iter().enumerate() {
        modes[(k, c)] = C64::new(1.0, 0.0);
    }
    build_fock(grid, &modes, n_max, Some(energy), dim_limit)
}

fn diag_sandwich(modes: &CMat, diag: &[f64]) -> CMat {
    let mut scaled = modes.clone();
    for (r, &d) in diag.iter().enumerate() {
        scaled.row_mut(r).scale_mut(d);
    }
    modes.adjoint() * scaled
}

fn enumerate_occupations(omega: &[f64], n_max: usize, e_cap: Option<f64>, dim_limit: usize) -> Result<Vec<Occupation>> {
    let k = omega.len();
    let mut out = Vec::new();
    let cap = e_cap.map(|e| e * (1.0 + 1e-12));
    for n in 0..=n_max {
        let mut cur = vec![0u8; k];
        fill(&mut cur, 0, n, 0.0, omega, cap, &mut out, dim_limit)?;
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn fill(cur: &mut Occupation, j: usize, left: usize, energy: f64, omega: &[f64], cap: Option<f64>, out: &mut Vec<Occupation>, limit: usize) -> Result<()> {
    if let Some(c) = cap {
        if energy > c {
            return Ok(());
        }
    }
    if j + 1 == cur.len() {
        let e = energy + left as f64 * omega[j];
        if cap.is_none_or(|c| e <= c) {
            cur[j] = left as u8;
            out.push(cur.clone());
            cur[j] = 0;
            if out.len() > limit {
                return Err(Error::TooLarge { dim: out.len(), limit });
            }
        }
        return Ok(());
    }
    // Descending occupation of mode j gives lexicographically decreasing order.
    for nj in (0..=left).rev() {
        cur[j] = nj as u8;
        fill(cur, j + 1, left - nj, energy + nj as f64 * omega[j], omega, cap, out, limit)?;
    }
    cur[j] = 0;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    modes: CMat,
    omega: Vec<f64>,
    momentum: Vec<f64>,
    n_max: usize,
    e_cap: Option<f64>,
    basis: Vec<Occupation>,
    omega_leakage: f64,
    node_modes: bool,
    grid_omega: Vec<f64>,
    grid_p: Vec<f64>,
) -> TruncatedFockSpace {
    let index: HashMap<Occupation, usize> = basis.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
    let k = omega.len();
    let energies = basis.iter().map(|b| b.iter().zip(&omega).map(|(&n, w)| n as f64 * w).sum()).collect();
    let momenta = basis.iter().map(|b| b.iter().zip(&momentum).map(|(&n, p)| n as f64 * p).sum()).collect();
    let particles = basis.iter().map(|b| b.iter().map(|&n| n as usize).sum()).collect();
    let mut lower = vec![vec![None; basis.len()]; k];
    let mut raise = vec![vec![None; basis.len()]; k];
    for (i, b) in basis.iter().enumerate() {
        for j in 0..k {
            let mut t = b.clone();
            if b[j] > 0 {
                t[j] -= 1;
                lower[j][i] = index.get(&t).map(|&target| (target, (b[j] as f64).sqrt()));
                t[j] += 1;
            }
            t[j] += 1;
            raise[j][i] = index.get(&t).map(|&target| (target, ((b[j] + 1) as f64).sqrt()));
        }
    }
    TruncatedFockSpace { modes, omega, momentum, n_max, e_cap, basis, energies, momenta, particles, omega_leakage, node_modes, index, lower, raise, grid_omega, grid_p }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Create,
    Annihilate,
}

/// Mode coefficients `⟨e_j|f⟩` of a single-particle vector together with
/// the relative norm of the part of `f` outside the mode span.
#[derive(Clone, Debug)]
pub struct ModeVector {
    pub coeffs: Vec<C64>,
    pub leakage: f64,
    /// `‖f‖²` of the full single-particle vector.
    pub norm_sqr: f64,
}

impl TruncatedFockSpace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn mode_count(&self) -> usize {
        self.omega.len()
    }

    pub fn index_of(&self, occ: &[u8]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn vacuum(&self) -> CVec {
        let mut v = CVec::zeros(self.dim());
        v[0] = C64::new(1.0, 0.0);
        v
    }

    pub fn mode_vector(&self, f: &CVec) -> ModeVector {
        let c = self.modes.adjoint() * f;
        let norm_sqr = f.norm_squared();
        let inside = c.norm_squared();
        let leakage = if norm_sqr > 0.0 { ((norm_sqr - inside).max(0.0) / norm_sqr).sqrt() } else { 0.0 };
        ModeVector { coeffs: c.iter().copied().collect(), leakage, norm_sqr }
    }

    /// `a(f) v` for `f = Σ c_j e_j`.
    pub fn apply_annihilator(&self, c: &[C64], v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for (j, cj) in c.iter().enumerate() {
            if cj.norm() == 0.0 {
                continue;
            }
            let w = cj.conj();
            for (i, entry) in self.lower[j].iter().enumerate() {
                if let Some((t, amp)) = entry {
                    out[*t] += w * *amp * v[i];
                }
            }
        }
        out
    }

    /// `a*(f) v`, dropping components outside the truncated space.
    pub fn apply_creator(&self, c: &[C64], v: &CVec) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for (j, cj) in c.iter().enumerate() {
            if cj.norm() == 0.0 {
                continue;
            }
            for (i, entry) in self.raise[j].iter().enumerate() {
                if let Some((t, amp)) = entry {
                    out[*t] += cj * *amp * v[i];
                }
            }
        }
        out
    }

    pub fn ladder_matrix(&self, c: &[C64], kind: Ladder) -> CMat {
        let mut m = CMat::zeros(self.dim(), self.dim());
        for (j, cj) in c.iter().enumerate() {
            for (i, entry) in self.lower[j].iter().enumerate() {
                if let Some((t, amp)) = entry {
                    match kind {
                        Ladder::Annihilate => m[(*t, i)] += cj.conj() * *amp,
                        Ladder::Create => m[(i, *t)] += cj * *amp,
                    }
                }
            }
        }
        m
    }

    /// `P dΓ(g) P` for `g` given in mode coordinates.
    pub fn second_quantize_modes(&self, g: &CMat) -> CMat {
        let k = self.mode_count();
        let mut m = CMat::zeros(self.dim(), self.dim());
        for (b, occ) in self.basis.iter().enumerate() {
            for j in 0..k {
                let Some((mid, amp_j)) = self.lower[j][b] else { continue };
                for i in 0..k {
                    let gij = g[(i, j)];
                    if gij.norm() == 0.0 {
                        continue;
                    }
                    if let Some((t, amp_i)) = self.raise[i][mid] {
                        m[(t, b)] += gij * amp_i * amp_j;
                    }
                }
            }
            let _ = occ;
        }
        m
    }

    /// Diagonal of the total energy operator `H = dΓ(ω)` in mode coordinates.
    pub fn hamiltonian(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(self.dim(), self.energies.iter().map(|&e| C64::new(e, 0.0))))
    }

    /// Multiplication by `e^{i(ω x⁰ - p x¹)}` in mode coordinates, plus the
    /// largest norm of a mode's image outside the mode span.
    pub fn one_particle_translation(&self, x0: f64, x1: f64) -> (CMat, f64) {
        let phases: Vec<C64> = self.grid_omega.iter().zip(&self.grid_p).map(|(w, p)| C64::from_polar(1.0, w * x0 - p * x1)).collect();
        let mut image = self.modes.clone();
        for (r, ph) in phases.iter().enumerate() {
            for z in image.row_mut(r).iter_mut() {
                *z *= *ph;
            }
        }
        let u = self.modes.adjoint() * &image;
        let leak = (0..self.mode_count())
            .map(|j| {
                let col = image.column(j).into_owned();
                let proj = &self.modes * (self.modes.adjoint() * &col);
                (col - proj).norm()
            })
            .fold(0.0, f64::max);
        (u, leak)
    }

    /// `Γ(u)` restricted to the space, for `u` in mode coordinates.
    pub fn gamma(&self, u: &CMat) -> CMat {
        let dim = self.dim();
        let k = self.mode_count();
        let diagonal = (0..k).all(|i| (0..k).all(|j| i == j || u[(i, j)].norm() == 0.0));
        let mut m = CMat::zeros(dim, dim);
        if diagonal {
            for (b, occ) in self.basis.iter().enumerate() {
                let mut ph = C64::new(1.0, 0.0);
                for (j, &n) in occ.iter().enumerate() {
                    ph *= u[(j, j)].powu(n as u32);
                }
                m[(b, b)] = ph;
            }
            return m;
        }
        for (b, occ) in self.basis.iter().enumerate() {
            let mut v = self.vacuum();
            let mut norm = 1.0;
            for (j, &n) in occ.iter().enumerate() {
                let col: Vec<C64> = u.column(j).iter().copied().collect();
                for _ in 0..n {
                    v = self.apply_creator(&col, &v);
                }
                norm *= factorial(n as usize);
            }
            m.set_column(b, &(v / C64::new(norm.sqrt(), 0.0)));
        }
        m
    }

    /// Basis states of energy at most `e`, as a 0/1 mask.
    pub fn energy_mask(&self, e: f64) -> Vec<bool> {
        self.energies.iter().map(|&x| x <= e * (1.0 + 1e-12)).collect()
    }

    /// Basis states with at most `n` particles.
    pub fn low_mask(&self, n: usize) -> Vec<bool> {
        self.particles.iter().map(|&p| p <= n).collect()
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Dense operator on the occupation basis.
#[derive(Clone, Debug)]
pub struct FockOperator {
    pub matrix: CMat,
    pub hermitian: bool,
}

impl FockOperator {
    pub fn new(matrix: CMat) -> Self {
        let hermitian = linalg::frobenius(&(&matrix - matrix.adjoint())) <= 1e-10 * linalg::frobenius(&matrix).max(1.0);
        FockOperator { matrix, hermitian }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn norm(&self) -> f64 {
        if self.hermitian {
            linalg::herm_norm(&self.matrix)
        } else {
            linalg::op_norm(&self.matrix)
        }
    }

    pub fn adjoint(&self) -> FockOperator {
        FockOperator { matrix: self.matrix.adjoint(), hermitian: self.hermitian }
    }
}

const LADDER_LEAK: f64 = 1e-6;

/// `a*(f)` or `a(f)`. Components of `f` outside the mode span are an error
/// above 1e-6 of `‖f‖` unless `waive_leakage` is set; the leakage is returned.
pub fn ladder(space: &TruncatedFockSpace, f: &CVec, kind: Ladder, waive_leakage: bool) -> Result<(FockOperator, f64)> {
    let mv = space.mode_vector(f);
    if mv.leakage > LADDER_LEAK && !waive_leakage {
        return Err(Error::Tolerance { what: "single-particle leakage outside retained modes".into(), value: mv.leakage, limit: LADDER_LEAK });
    }
    Ok((FockOperator::new(space.ladder_matrix(&mv.coeffs, kind)), mv.leakage))
}

/// `dΓ(g)` for a Hermitian `g` on the grid.
pub fn second_quantize(space: &TruncatedFockSpace, g: &CMat) -> FockOperator {
    let gm = space.modes.adjoint() * g * &space.modes;
    FockOperator::new(space.second_quantize_modes(&gm))
}

/// `W(f) = exp(i(a*(f) + a(f)))` by the matrix exponential, with the
/// unitarity defect `‖W*W - 1‖`.
pub fn weyl(space: &TruncatedFockSpace, f: &CVec, defect_cap: f64) -> Result<(FockOperator, f64)> {
    let mv = space.mode_vector(f);
    if mv.leakage > LADDER_LEAK {
        return Err(Error::Tolerance { what: "Weyl argument outside retained modes".into(), value: mv.leakage, limit: LADDER_LEAK });
    }
    let w = weyl_expm(space, &mv.coeffs);
    let defect = linalg::op_norm(&(w.adjoint() * &w - CMat::identity(space.dim(), space.dim())));
    if defect > defect_cap {
        return Err(Error::Tolerance { what: "Weyl unitarity defect".into(), value: defect, limit: defect_cap });
    }
    Ok((FockOperator::new(w), defect))
}

pub fn weyl_expm(space: &TruncatedFockSpace, c: &[C64]) -> CMat {
    let a = space.ladder_matrix(c, Ladder::Annihilate);
    let gen = (a.adjoint() + a) * C64::new(0.0, 1.0);
    expm(&gen)
}

/// `e^{s a(f)}` on the space as a finite series; `a(f)` is nilpotent here.
pub fn exp_annihilator(space: &TruncatedFockSpace, c: &[C64], s: C64) -> CMat {
    let a = space.ladder_matrix(c, Ladder::Annihilate) * s;
    let dim = space.dim();
    let mut term = CMat::identity(dim, dim);
    let mut out = term.clone();
    for n in 1..=space.n_max {
        term = &a * term / C64::new(n as f64, 0.0);
        out += &term;
    }
    out
}

/// `P W(f) P` from the normal-ordered form
/// `e^{-‖f‖²/2} (e^{-i a(f)})^* e^{i a(f)}`.
///
/// This is exact whenever the space contains every state reachable by
/// annihilators from its basis, which holds for the energy-capped node space
/// and for particle-number truncations restricted to their lowest half.
pub fn weyl_normal_ordered(space: &TruncatedFockSpace, mv: &ModeVector) -> CMat {
    let i = C64::new(0.0, 1.0);
    let plus = exp_annihilator(space, &mv.coeffs, i);
    let minus = exp_annihilator(space, &mv.coeffs, -i);
    minus.adjoint() * plus * C64::new((-0.5 * mv.norm_sqr).exp(), 0.0)
}

/// `‖P_low (W_expm - W_exact) P_low‖` over states with at most `N_max/2`
/// particles, where the normal-ordered form is exact.
pub fn weyl_truncation_defect(space: &TruncatedFockSpace, c: &[C64]) -> f64 {
    let mv = ModeVector { coeffs: c.to_vec(), leakage: 0.0, norm_sqr: c.iter().map(|z| z.norm_sqr()).sum() };
    let exact = weyl_normal_ordered(space, &mv);
    let w = weyl_expm(space, c);
    let low: Vec<usize> = (0..space.dim()).filter(|&b| space.particles[b] <= space.n_max / 2).collect();
    let diff = CMat::from_fn(low.len(), low.len(), |r, col| w[(low[r], low[col])] - exact[(low[r], low[col])]);
    linalg::op_norm(&diff)
}

/// `U(x) = Γ(e^{i(ωx⁰ - p x¹)})` restricted to the modes, with the
/// translation leakage of the mode span.
pub fn translate_op(space: &TruncatedFockSpace, x0: f64, x1: f64) -> (FockOperator, f64) {
    let (u, leak) = space.one_particle_translation(x0, x1);
    (FockOperator::new(space.gamma(&u)), leak)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Region {
    /// Energy at most `E`.
    EnergyCap(f64),
    /// Energy-momentum within `radius` of `(p0, p1)`.
    Ball { p0: f64, p1: f64, radius: f64 },
}

pub fn region_mask(space: &TruncatedFockSpace, region: Region) -> Vec<bool> {
    match region {
        Region::EnergyCap(e) => space.energy_mask(e),
        Region::Ball { p0, p1, radius } => (0..space.dim())
            .map(|b| ((space.energies[b] - p0).powi(2) + (space.momenta[b] - p1).powi(2)).sqrt() <= radius * (1.0 + 1e-12))
            .collect(),
    }
}

/// Orthogonal projection onto the occupation states in `region`.
pub fn spectral_project(space: &TruncatedFockSpace, region: Region) -> FockOperator {
    let mask = region_mask(space, region);
    FockOperator::new(CMat::from_diagonal(&CVec::from_iterator(space.dim(), mask.iter().map(|&m| C64::new(if m { 1.0 } else { 0.0 }, 0.0)))))
}

/// Normal functional `φ(A) = tr(ρA)` with `ρ = Σ c |a⟩⟨b|`.
#[derive(Clone, Debug)]
pub struct StateFunctional {
    pub terms: Vec<(C64, CVec, CVec)>,
    pub energy_support: Option<f64>,
    pub vacuum_subtracted: bool,
}

impl StateFunctional {
    pub fn pure(psi: &CVec) -> Self {
        StateFunctional { terms: vec![(C64::new(1.0, 0.0), psi.clone(), psi.clone())], energy_support: None, vacuum_subtracted: false }
    }

    pub fn from_density(rho: &CMat) -> Self {
        let (vals, vecs) = herm_eigen(&linalg::hermitian_part(rho));
        let anti = (rho - rho.adjoint()) * C64::new(0.0, -0.5);
        let (ivals, ivecs) = herm_eigen(&anti);
        let mut terms = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            if v.abs() > 0.0 {
                let col = vecs.column(k).into_owned();
                terms.push((C64::new(v, 0.0), col.clone(), col));
            }
        }
        for (k, &v) in ivals.iter().enumerate() {
            if v.abs() > 1e-300 {
                let col = ivecs.column(k).into_owned();
                terms.push((C64::new(0.0, v), col.clone(), col));
            }
        }
        StateFunctional { terms, energy_support: None, vacuum_subtracted: false }
    }

    pub fn zero() -> Self {
        StateFunctional { terms: Vec::new(), energy_support: None, vacuum_subtracted: false }
    }

    pub fn dim(&self) -> usize {
        self.terms.first().map(|t| t.1.len()).unwrap_or(0)
    }

    pub fn density(&self, dim: usize) -> CMat {
        let mut rho = CMat::zeros(dim, dim);
        for (c, a, b) in &self.terms {
            rho += a * b.adjoint() * *c;
        }
        rho
    }

    /// `tr(ρA)`.
    pub fn eval(&self, a: &CMat) -> C64 {
        self.terms.iter().map(|(c, x, y)| c * y.dotc(&(a * x))).sum()
    }

    /// `tr(ρ B^* C)` evaluated through `B x` and `C x` for each term.
    pub fn eval_with(&self, mut apply_b: impl FnMut(&CVec) -> CVec, mut apply_c: impl FnMut(&CVec) -> CVec) -> C64 {
        self.terms.iter().map(|(c, x, y)| c * apply_b(y).dotc(&apply_c(x))).sum()
    }

    pub fn identity_value(&self) -> C64 {
        self.terms.iter().map(|(c, x, y)| c * y.dotc(x)).sum()
    }

    /// `φ - φ(1) ω₀`.
    pub fn vacuum_subtract(&self, space: &TruncatedFockSpace) -> Self {
        let mut out = self.clone();
        let omega = space.vacuum();
        out.terms.push((-self.identity_value(), omega.clone(), omega));
        out.vacuum_subtracted = true;
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.0 *= s;
        }
        out
    }

    /// `φ ∘ Ad(U^*)`, i.e. `ρ ↦ U ρ U^*`.
    pub fn conjugate_by(&self, u: &CMat) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.1 = u * &t.1;
            t.2 = u * &t.2;
        }
        out
    }

    /// Trace norm computed on the span of the term vectors.
    pub fn trace_norm(&self) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let vecs: Vec<CVec> = self.terms.iter().flat_map(|t| [t.1.clone(), t.2.clone()]).collect();
        let (q, _, _) = orthonormal_range(&CMat::from_columns(&vecs), 1e-13);
        let r = q.ncols();
        let mut small = CMat::zeros(r, r);
        for (c, a, b) in &self.terms {
            small += (q.adjoint() * a) * (q.adjoint() * b).adjoint() * *c;
        }
        linalg::trace_norm(&small)
    }
}

/// Splits `φ = φ_Re⁺ - φ_Re⁻ + i(φ_Im⁺ - φ_Im⁻)` into positive parts with
/// orthogonal supports within each pair.
pub fn jordan_decompose(phi: &StateFunctional, dim: usize) -> [StateFunctional; 4] {
    let rho = phi.density(dim);
    let re = linalg::hermitian_part(&rho);
    let im = (&rho - rho.adjoint()) * C64::new(0.0, -0.5);
    let split = |h: &CMat| {
        let (vals, vecs) = herm_eigen(h);
        let mut pos = StateFunctional::zero();
        let mut neg = StateFunctional::zero();
        for (k, &v) in vals.iter().enumerate() {
            let col = vecs.column(k).into_owned();
            if v > 0.0 {
                pos.terms.push((C64::new(v, 0.0), col.clone(), col));
            } else if v < 0.0 {
                neg.terms.push((C64::new(-v, 0.0), col.clone(), col));
            }
        }
        (pos, neg)
    };
    let (rp, rn) = split(&re);
    let (ip, in_) = split(&im);
    [rp, rn, ip, in_]
}

/// Matrix dump with explicit real and imaginary parts.
pub fn matrix_json(m: &CMat) -> serde_json::Value {
    let rows = |f: fn(&C64) -> f64| (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| f(&m[(r, c)])).collect::<Vec<f64>>()).collect::<Vec<_>>();
    serde_json::json!({ "rows": m.nrows(), "cols": m.ncols(), "re": rows(|z| z.re), "im": rows(|z| z.im) })
}


/// `‖A P‖` for `A = a(f_n)…a(f_1)` and `P` the projection onto the masked
/// basis states, without forming matrices. Returns the norm and the Lanczos
/// residual of the top eigenvalue of `P A^* A P`.
pub fn lowering_product_norm(space: &TruncatedFockSpace, factors: &[Vec<C64>], mask: &[bool], seed_vec: &CVec) -> (f64, f64) {
    let project = |v: &CVec| CVec::from_iterator(v.len(), v.iter().zip(mask).map(|(z, &m)| if m { *z } else { C64::new(0.0, 0.0) }));
    let apply = |v: &CVec| {
        let mut w = project(v);
        for c in factors {
            w = space.apply_annihilator(c, &w);
        }
        for c in factors.iter().rev() {
            w = space.apply_creator(c, &w);
        }
        project(&w)
    };
    let (top, resid) = linalg::lanczos_top(apply, &project(seed_vec), 120);
    (top.max(0.0).sqrt(), resid)
}

/// `e^{s a(f)} v` as a finite series.
pub fn apply_exp_annihilator(space: &TruncatedFockSpace, c: &[C64], s: C64, v: &CVec) -> CVec {
    let mut term = v.clone();
    let mut out = v.clone();
    for n in 1..=space.n_max {
        term = space.apply_annihilator(c, &term) * (s / C64::new(n as f64, 0.0));
        out += &term;
    }
    out
}

/// `φ(P W(f) P)` through `⟨e^{-i a(f)} y | e^{i a(f)} x⟩` per term, without
/// forming matrices. Exact on the node space.
pub fn weyl_expectation(space: &TruncatedFockSpace, phi: &StateFunctional, mv: &ModeVector) -> C64 {
    let i = C64::new(0.0, 1.0);
    let pre = (-0.5 * mv.norm_sqr).exp();
    phi.eval_with(|y| apply_exp_annihilator(space, &mv.coeffs, -i, y), |x| apply_exp_annihilator(space, &mv.coeffs, i, x)) * pre
}

/// Diagonal of `U(x)` on the basis: `e^{i(E_b x⁰ - P_b x¹)}`. Only exact on
/// spaces built over grid nodes.
pub fn translation_phases(space: &TruncatedFockSpace, x0: f64, x1: f64) -> Vec<C64> {
    space.energies.iter().zip(&space.momenta).map(|(e, p)| C64::from_polar(1.0, e * x0 - p * x1)).collect()
}

/// `α*_x φ = φ(U(x) · U(x)^*)` on a node space.
pub fn translate_functional(space: &TruncatedFockSpace, phi: &StateFunctional, x0: f64, x1: f64) -> Result<StateFunctional> {
    if !space.node_modes {
        return invalid("functional translations need a node space");
    }
    let ph = translation_phases(space, x0, x1);
    let mut out = phi.clone();
    for t in &mut out.terms {
        for (k, z) in ph.iter().enumerate() {
            t.1[k] *= z.conj();
            t.2[k] *= z.conj();
        }
    }
    Ok(out)
}
