//! Damped restrictions of the local subspaces and their least upper bound `T`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{apply_conjugation, MomentumGrid, SubspaceBasis};
use crate::linalg::{self, from_spectrum, herm_eigen, orthonormal_range, thin_svd};
use crate::{CMat, CVec, C64};

/// Dense operator on the single-particle grid. When it is known to factor
/// as `A B^*` with orthonormal `B`, the factors are kept so that singular
/// values come from a thin decomposition.
#[derive(Clone, Debug)]
pub struct CompactOperator {
    pub matrix: CMat,
    pub label: String,
    factors: Option<(CMat, CMat)>,
}

/// Singular triplets `A = U diag(σ) V^*`, descending.
#[derive(Clone, Debug)]
pub struct SvdParts {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

const SV_FLOOR: f64 = 1e-12;

impl CompactOperator {
    pub fn new(matrix: CMat, label: impl Into<String>) -> Self {
        CompactOperator { matrix, label: label.into(), factors: None }
    }

    /// `left * right^*` where `right` has orthonormal columns.
    pub fn factored(left: CMat, right: CMat, label: impl Into<String>) -> Self {
        CompactOperator { matrix: &left * right.adjoint(), label: label.into(), factors: Some((left, right)) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Nonzero singular triplets (σ above 1e-12 times the largest).
    pub fn svd(&self) -> SvdParts {
        let (u, sigma, v) = match &self.factors {
            Some((left, right)) => {
                let (u, s, w) = thin_svd(left, 0.0);
                (u, s, right * w)
            }
            None => thin_svd(&self.matrix, 0.0),
        };
        let top = sigma.first().copied().unwrap_or(0.0);
        let keep = sigma.iter().take_while(|&&s| s > SV_FLOOR * top && s > 0.0).count();
        SvdParts { u: u.columns(0, keep).into_owned(), sigma: sigma[..keep].to_vec(), v: v.columns(0, keep).into_owned() }
    }

    pub fn norm(&self) -> f64 {
        self.svd().sigma.first().copied().unwrap_or(0.0)
    }

    /// `|A|^p = V diag(σ^p) V^*`.
    pub fn abs_power(&self, p: f64) -> CMat {
        let parts = self.svd();
        let vals: Vec<f64> = parts.sigma.iter().map(|s| s.powf(p)).collect();
        scaled_outer(&parts.v, &vals)
    }
}

fn scaled_outer(v: &CMat, vals: &[f64]) -> CMat {
    let mut scaled = v.clone();
    for (c, &x) in vals.iter().enumerate() {
        scaled.column_mut(c).scale_mut(x);
    }
    &scaled * v.adjoint()
}

/// `(Σ σ^p)^{1/p}`; a quasi-norm for `p < 1`.
pub fn schatten_norm(a: &CompactOperator, p: f64) -> f64 {
    assert!(p > 0.0, "Schatten exponent must be positive");
    linalg::schatten(&a.svd().sigma, p)
}

/// `Q_E L±` and `e^{-(β|p|)²/2} L±` in the order `[S_E+, S_E-, S_β+, S_β-]`.
pub fn build_damped_restrictions(
    grid: &MomentumGrid,
    lp: &SubspaceBasis,
    lm: &SubspaceBasis,
    energy: f64,
    beta: f64,
) -> Result<[CompactOperator; 4]> {
    if !(energy > 0.0) || !(beta > 0.0) {
        return invalid(format!("need E > 0 and beta > 0, got E={energy}, beta={beta}"));
    }
    let q_e: Vec<f64> = grid.omega.iter().map(|&w| if w <= energy { 1.0 } else { 0.0 }).collect();
    let gauss: Vec<f64> = (0..grid.len()).map(|k| (-0.5 * (beta * grid.momentum_norm(k)).powi(2)).exp()).collect();
    let damp = |diag: &[f64], sub: &SubspaceBasis, label: &str| {
        let mut left = sub.columns.clone();
        for (r, &d) in diag.iter().enumerate() {
            left.row_mut(r).scale_mut(d);
        }
        CompactOperator::factored(left, sub.columns.clone(), label)
    };
    Ok([
        damp(&q_e, lp, "S_E+"),
        damp(&q_e, lm, "S_E-"),
        damp(&gauss, lp, "S_beta+"),
        damp(&gauss, lm, "S_beta-"),
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LubMethod {
    /// The power mean met the tolerance.
    PowerMean,
    /// The power mean stalled; `T` is the spectral-order supremum it approaches.
    SpectralJoin,
}

#[derive(Clone, Debug)]
pub struct LubResult {
    pub t_op: CompactOperator,
    pub t: Vec<f64>,
    pub e: CMat,
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    /// Operator-norm distance of each power mean to the spectral join.
    pub join_distance: Vec<f64>,
    pub method: LubMethod,
    pub j_defect: f64,
}

const JOIN_RESIDUAL: f64 = 1e-9;

/// The supremum of the `|S_i|` in the spectral order: for every λ its
/// spectral projection onto `(λ, ∞)` is the join of those of the `|S_i|`.
/// This is the limit of the `2^n`-power means.
pub fn spectral_join(ops: &[CompactOperator]) -> CMat {
    let n = ops.first().map(|o| o.dim()).unwrap_or(0);
    let mut pairs: Vec<(f64, CVec)> = Vec::new();
    for op in ops {
        let parts = op.svd();
        for (k, &s) in parts.sigma.iter().enumerate() {
            pairs.push((s, parts.v.column(k).into_owned()));
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let top = pairs.first().map(|p| p.0).unwrap_or(0.0);
    let mut basis: Vec<CVec> = Vec::new();
    let mut vals = Vec::new();
    for (s, v) in pairs {
        if s < SV_FLOOR * top {
            continue;
        }
        let mut r = v;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&r);
                r -= q * c;
            }
        }
        let nr = r.norm();
        if nr > JOIN_RESIDUAL {
            basis.push(r / C64::new(nr, 0.0));
            vals.push(s);
        }
    }
    if basis.is_empty() {
        return CMat::zeros(n, n);
    }
    scaled_outer(&CMat::from_columns(&basis), &vals)
}

const EIG_FLOOR: f64 = 1e-12;

/// Runs `A_n = (¼ Σ |S_i|^{2^n})^{2^{-n}}` on the joint range of the inputs.
///
/// In double precision the iteration stalls once the ratio of retained
/// singular values raised to `2^n` falls below machine epsilon, well before
/// `‖A_{n+1} - A_n‖` reaches typical tolerances, because the error decays
/// only like `2^{-n}`. When that happens the spectral join, which is the
/// exact limit, is returned and the residual history documents the stall.
pub fn lub_iterate(grid: &MomentumGrid, ops: &[CompactOperator], tol: f64, n_max: usize) -> Result<LubResult> {
    if ops.is_empty() {
        return Err(Error::Empty("operator list".into()));
    }
    if !(tol > 0.0) {
        return invalid("tol must be positive");
    }
    let n = ops[0].dim();
    if ops.iter().any(|o| o.dim() != n) || grid.len() != n {
        return invalid("operators live on different grids");
    }
    let parts: Vec<SvdParts> = ops.iter().map(|o| o.svd()).collect();
    let all_v: Vec<CVec> = parts.iter().flat_map(|p| (0..p.v.ncols()).map(move |k| p.v.column(k).into_owned())).collect();
    let join = spectral_join(ops);
    if all_v.is_empty() {
        return finish(grid, join, 0, 0.0, Vec::new(), Vec::new(), LubMethod::SpectralJoin);
    }
    let (z, _, _) = orthonormal_range(&CMat::from_columns(&all_v), 1e-12);
    let d = z.ncols();
    // Each |S_i| in the joint range coordinates, as (eigenvalues, eigenvectors).
    let compressed: Vec<(Vec<f64>, CMat)> = parts.iter().map(|p| (p.sigma.clone(), z.adjoint() * &p.v)).collect();
    let join_c = z.adjoint() * &join * &z;
    let weight = 1.0 / ops.len() as f64;
    // Work with σ/c so the largest powered eigenvalue stays O(1).
    let c = compressed.iter().flat_map(|(s, _)| s.iter().copied()).fold(0.0, f64::max);
    let mut prev: Option<CMat> = None;
    let mut history: Vec<f64> = Vec::new();
    let mut distance = Vec::new();
    let mut best: Option<(CMat, usize, f64)> = None;
    for it in 0..=n_max {
        let k = 2f64.powi(it as i32);
        let mut mean = CMat::zeros(d, d);
        for (sig, v) in &compressed {
            let vals: Vec<f64> = sig.iter().map(|s| weight * (s / c).powf(k)).collect();
            mean += scaled_outer(v, &vals);
        }
        let cur = linalg::psd_power(&mean, 1.0 / k, 0.0) * C64::new(c, 0.0);
        let dist = linalg::herm_norm(&(&cur - &join_c));
        // Moving away from the exact limit means round-off has taken over.
        let stalled = distance.last().is_some_and(|&d| dist > d);
        distance.push(dist);
        if let Some(p) = &prev {
            let res = linalg::herm_norm(&(&cur - p));
            history.push(res);
            if stalled {
                break;
            }
            if res < tol {
                best = Some((cur.clone(), it, res));
                break;
            }
        }
        prev = Some(cur);
    }
    match best {
        Some((c, it, res)) => finish(grid, &z * c * z.adjoint(), it, res, history, distance, LubMethod::PowerMean),
        None => {
            let res = history.last().copied().unwrap_or(0.0);
            let it = history.len();
            finish(grid, join, it, res, history, distance, LubMethod::SpectralJoin)
        }
    }
}

fn finish(
    grid: &MomentumGrid,
    t_mat: CMat,
    iterations: usize,
    residual: f64,
    residual_history: Vec<f64>,
    join_distance: Vec<f64>,
    method: LubMethod,
) -> Result<LubResult> {
    let t_op = CompactOperator::new(t_mat, "T");
    let (t, e, j_defect) = j_real_eigenbasis(grid, &t_op)?;
    Ok(LubResult { t_op, t, e, iterations, residual, residual_history, join_distance, method, j_defect })
}

const J_TOL: f64 = 1e-8;
const DEGENERACY: f64 = 1e-9;

/// Eigenvalues (descending) and an orthonormal eigenbasis with `J e_j = e_j`.
/// Returns the largest `‖J e_j - e_j‖` as the third component.
pub fn j_real_eigenbasis(grid: &MomentumGrid, t: &CompactOperator) -> Result<(Vec<f64>, CMat, f64)> {
    let (vals, vecs) = herm_eigen(&t.matrix);
    let n = vals.len();
    let mut out: Vec<CVec> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[end] - vals[end - 1]).abs() <= DEGENERACY * vals[start].abs().max(1.0) {
            end += 1;
        }
        let block: Vec<CVec> = (start..end).map(|k| vecs.column(k).into_owned()).collect();
        out.extend(j_real_block(grid, &block)?);
        start = end;
    }
    let e = CMat::from_columns(&out);
    let defect = (0..n).map(|k| (apply_conjugation(grid, &out[k]) - &out[k]).norm()).fold(0.0, f64::max);
    if defect > J_TOL {
        return Err(Error::Tolerance { what: "J-reality of the eigenbasis".into(), value: defect, limit: J_TOL });
    }
    Ok((vals, e, defect))
}

/// J-real orthonormal basis of a J-invariant eigenspace.
fn j_real_block(grid: &MomentumGrid, block: &[CVec]) -> Result<Vec<CVec>> {
    let dim = block.len();
    let mut out: Vec<CVec> = Vec::with_capacity(dim);
    let i = C64::new(0.0, 1.0);
    let mut candidates = Vec::with_capacity(2 * dim);
    for v in block {
        let jv = apply_conjugation(grid, v);
        candidates.push(v + &jv);
        candidates.push((v - &jv) * i);
    }
    candidates.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    for c in candidates {
        if out.len() == dim {
            break;
        }
        let mut r = c;
        for _ in 0..2 {
            for q in &out {
                // Inner products of J-real vectors are real; dropping the
                // imaginary round-off keeps the result J-real.
                let coef = C64::new(q.dotc(&r).re, 0.0);
                r -= q * coef;
            }
        }
        let nr = r.norm();
        if nr > 1e-6 {
            let mut q = r / C64::new(nr, 0.0);
            // Symmetrize away round-off.
            q = (&q + apply_conjugation(grid, &q)) * C64::new(0.5, 0.0);
            let nq = q.norm();
            out.push(q / C64::new(nq, 0.0));
        }
    }
    if out.len() < dim {
        return Err(Error::Tolerance {
            what: "eigenspace without a J-real basis (missing directions)".into(),
            value: (dim - out.len()) as f64,
            limit: 0.0,
        });
    }
    Ok(out)
}

/// CSV rows `j,t_j` of a spectrum.
pub fn spectrum_csv(t: &[f64]) -> String {
    let mut s = String::from("j,t_j\n");
    for (j, v) in t.iter().enumerate() {
        s.push_str(&format!("{},{:.17e}\n", j + 1, v));
    }
    s
}

/// `from_spectrum` with eigenvectors `e`, re-exported for callers building `T^p`.
pub fn t_power(res: &LubResult, p: f64) -> CMat {
    let vals: Vec<f64> = res.t.iter().map(|&v| if v < EIG_FLOOR { 0.0 } else { v.powf(p) }).collect();
    from_spectrum(&vals, &res.e)
}
