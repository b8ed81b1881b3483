//! Dense helpers on top of nalgebra: Hermitian spectra, PSD powers, norms
//! and the matrix exponential.

use crate::{CMat, CVec, C64};
use nalgebra::{SymmetricEigen, SVD};

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. The input is symmetrized first.
pub fn herm_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = hermitian_part(a);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue(a: &CMat) -> f64 {
    herm_eigen(a).0.last().copied().unwrap_or(0.0)
}

/// Hermitian `f(A)` from the spectral decomposition.
pub fn herm_apply(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = herm_eigen(a);
    from_spectrum(&vals.iter().map(|&v| f(v)).collect::<Vec<_>>(), &vecs)
}

pub fn from_spectrum(vals: &[f64], vecs: &CMat) -> CMat {
    let mut scaled = vecs.clone();
    for (c, &v) in vals.iter().enumerate() {
        scaled.column_mut(c).scale_mut(v);
    }
    &scaled * vecs.adjoint()
}

/// `A^p` for a positive semidefinite `A`; eigenvalues below `floor` are set to zero.
pub fn psd_power(a: &CMat, p: f64, floor: f64) -> CMat {
    herm_apply(a, |v| if v < floor { 0.0 } else { v.powf(p) })
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(a.clone(), false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn op_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Operator norm of a Hermitian matrix via its spectrum.
pub fn herm_norm(a: &CMat) -> f64 {
    let (vals, _) = herm_eigen(a);
    vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Orthonormal basis of the column space. Directions with singular value
/// below `rel_tol` times the largest one are dropped and returned separately.
pub fn orthonormal_range(a: &CMat, rel_tol: f64) -> (CMat, Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    if a.ncols() == 0 {
        return (CMat::zeros(n, 0), Vec::new(), Vec::new());
    }
    let svd = SVD::new(a.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let top = order.first().map(|&i| svd.singular_values[i]).unwrap_or(0.0);
    let (mut kept, mut dropped, mut cols) = (Vec::new(), Vec::new(), Vec::new());
    for &i in &order {
        let s = svd.singular_values[i];
        if top > 0.0 && s > rel_tol * top {
            kept.push(s);
            cols.push(u.column(i).into_owned());
        } else {
            dropped.push(s);
        }
    }
    let basis = if cols.is_empty() { CMat::zeros(n, 0) } else { CMat::from_columns(&cols) };
    (basis, kept, dropped)
}

/// Thin SVD `A = U diag(s) V^*` with singular values in descending order,
/// keeping only values above `abs_tol`.
pub fn thin_svd(a: &CMat, abs_tol: f64) -> (CMat, Vec<f64>, CMat) {
    let (n, m) = a.shape();
    if n == 0 || m == 0 {
        return (CMat::zeros(n, 0), Vec::new(), CMat::zeros(m, 0));
    }
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    order.retain(|&i| svd.singular_values[i] > abs_tol);
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let uc: Vec<CVec> = order.iter().map(|&i| u.column(i).into_owned()).collect();
    let vc: Vec<CVec> = order.iter().map(|&i| v_t.row(i).adjoint()).collect();
    let mk = |cols: &[CVec], rows: usize| if cols.is_empty() { CMat::zeros(rows, 0) } else { CMat::from_columns(cols) };
    (mk(&uc, n), s, mk(&vc, m))
}

/// Schatten quasi-norm `(Σ σ^p)^{1/p}` from singular values.
pub fn schatten(sv: &[f64], p: f64) -> f64 {
    sv.iter().map(|s| s.powf(p)).sum::<f64>().powf(1.0 / p)
}

pub fn trace_norm(a: &CMat) -> f64 {
    singular_values(a).iter().sum()
}

pub fn trace(a: &CMat) -> C64 {
    a.diagonal().iter().sum()
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn one_norm(a: &CMat) -> f64 {
    (0..a.ncols()).map(|c| a.column(c).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé
/// approximant.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let eye = CMat::identity(n, n);
    if n == 0 {
        return eye;
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * C64::new(0.5_f64.powi(s), 0.0);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |k: usize| C64::new(PADE13[k], 0.0);
    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9)) + &a6 * c(7) + &a4 * c(5) + &a2 * c(3) + &eye * c(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8)) + &a6 * c(6) + &a4 * c(4) + &a2 * c(2) + &eye * c(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).expect("Padé denominator is invertible for scaled input");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 7.3;
        let a = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-t, 0.0), c(t, 0.0), c(0.0, 0.0)]);
        let e = expm(&a);
        assert!((e[(0, 0)].re - t.cos()).abs() < 1e-12);
        assert!((e[(1, 0)].re - t.sin()).abs() < 1e-12);
    }

    #[test]
    fn expm_diagonal_phase() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![c(0.0, 2.0), c(-1.0, 0.0)]));
        let e = expm(&a);
        assert!((e[(0, 0)] - c(0.0, 2.0).exp()).norm() < 1e-13);
        assert!((e[(1, 1)].re - (-1.0f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn psd_square_root_squares_back() {
        let b = CMat::from_row_slice(2, 2, &[c(2.0, 0.0), c(0.5, 0.5), c(0.5, -0.5), c(1.0, 0.0)]);
        let r = psd_power(&b, 0.5, 1e-12);
        assert!(frobenius(&(&r * &r - &b)) < 1e-12);
    }

    #[test]
    fn schatten_examples() {
        assert!((schatten(&[3.0, 4.0], 2.0) - 5.0).abs() < 1e-14);
        assert!((schatten(&[0.5, 0.25], 1.0) - 0.75).abs() < 1e-14);
    }
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator given
/// only by its action, via Lanczos with full reorthogonalization. Returns
/// the Ritz value and its residual norm.
pub fn lanczos_top(apply: impl Fn(&CVec) -> CVec, start: &CVec, max_steps: usize) -> (f64, f64) {
    let n = start.len();
    let s0 = start.norm();
    if n == 0 || s0 == 0.0 {
        return (0.0, 0.0);
    }
    let steps = max_steps.min(n).max(1);
    let mut qs: Vec<CVec> = vec![start / C64::new(s0, 0.0)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for k in 0..steps {
        let mut w = apply(&qs[k]);
        alpha.push(qs[k].dotc(&w).re);
        for _ in 0..2 {
            for q in &qs {
                let c = q.dotc(&w);
                w -= q * c;
            }
        }
        let b = w.norm();
        if b < 1e-13 || k + 1 == steps {
            break;
        }
        beta.push(b);
        qs.push(w / C64::new(b, 0.0));
    }
    let m = alpha.len();
    let tri = CMat::from_fn(m, m, |r, c| {
        if r == c {
            C64::new(alpha[r], 0.0)
        } else if r + 1 == c {
            C64::new(beta[r], 0.0)
        } else if c + 1 == r {
            C64::new(beta[c], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let (vals, vecs) = herm_eigen(&tri);
    let mut ritz = CVec::zeros(n);
    for (k, q) in qs.iter().take(m).enumerate() {
        ritz += q * vecs[(k, 0)];
    }
    let resid = (apply(&ritz) - &ritz * C64::new(vals[0], 0.0)).norm();
    (vals[0], resid)
}
