//! Discretized single-particle momentum space, compactly supported test
//! functions, the local subspaces `L±` and the conjugation `J`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::{herm_eigen, orthonormal_range};
use crate::{CMat, CVec, C64};

/// Symmetric midpoint grid on the box `[-P_max, P_max]^s`.
///
/// Nodes sit at cell centres so that `p ↦ -p` permutes them exactly; with
/// uniform cells the midpoint and trapezoid weights coincide.
#[derive(Clone, Debug, Serialize)]
pub struct MomentumGrid {
    pub s: usize,
    pub m: f64,
    pub p_max: f64,
    pub per_axis: usize,
    pub axis: Vec<f64>,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub omega: Vec<f64>,
    #[serde(skip)]
    mirror: Vec<usize>,
}

pub fn make_grid(s: usize, p_max: f64, n_nodes: usize, m: f64) -> Result<MomentumGrid> {
    if s == 0 {
        return invalid("spatial dimension must be positive");
    }
    if !(m > 0.0) {
        return invalid(format!("mass must be positive, got {m}"));
    }
    if n_nodes < 8 || n_nodes % 2 == 1 {
        return invalid(format!("n_nodes must be even and at least 8, got {n_nodes}"));
    }
    if p_max < 4.0 * m {
        return invalid(format!("P_max = {p_max} is below 4m"));
    }
    let h = 2.0 * p_max / n_nodes as f64;
    let axis: Vec<f64> = (0..n_nodes).map(|k| -p_max + (k as f64 + 0.5) * h).collect();
    let total = n_nodes.pow(s as u32);
    let mut nodes = Vec::with_capacity(total);
    let mut mirror = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut p = vec![0.0; s];
        let mut mirrored = 0;
        let mut stride = 1;
        for d in 0..s {
            let k = rest % n_nodes;
            rest /= n_nodes;
            p[d] = axis[k];
            mirrored += (n_nodes - 1 - k) * stride;
            stride *= n_nodes;
        }
        nodes.push(p);
        mirror.push(mirrored);
    }
    let omega = nodes.iter().map(|p| (p.iter().map(|x| x * x).sum::<f64>() + m * m).sqrt()).collect();
    Ok(MomentumGrid { s, m, p_max, per_axis: n_nodes, axis, nodes, weights: vec![h.powi(s as i32); total], omega, mirror })
}

impl MomentumGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.p_max / self.per_axis as f64
    }

    pub fn mirror_index(&self, k: usize) -> usize {
        self.mirror[k]
    }

    pub fn momentum_norm(&self, k: usize) -> f64 {
        self.nodes[k].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Samples `f` at the nodes in weight-scaled coordinates.
    pub fn sample(&self, f: impl Fn(&[f64]) -> C64) -> CVec {
        CVec::from_iterator(self.len(), self.nodes.iter().zip(&self.weights).map(|(p, w)| f(p) * w.sqrt()))
    }

    /// Function values at the nodes of a weight-scaled vector.
    pub fn values(&self, v: &CVec) -> Vec<C64> {
        v.iter().zip(&self.weights).map(|(z, w)| z / w.sqrt()).collect()
    }

    /// Diagonal multiplication operator by a real function of the node index.
    pub fn multiplier(&self, f: impl Fn(usize) -> f64) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(self.len(), (0..self.len()).map(|k| C64::new(f(k), 0.0))))
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_omega(&self) -> f64 {
        self.omega.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `(Jv)(p) = conj(v(-p))`, complex conjugation in configuration space.
pub fn apply_conjugation(grid: &MomentumGrid, v: &CVec) -> CVec {
    assert_eq!(v.len(), grid.len(), "vector does not live on this grid");
    CVec::from_iterator(v.len(), (0..v.len()).map(|k| v[grid.mirror_index(k)].conj()))
}

/// `J` applied column by column.
pub fn conjugate_columns(grid: &MomentumGrid, a: &CMat) -> CMat {
    let cols: Vec<CVec> = (0..a.ncols()).map(|c| apply_conjugation(grid, &a.column(c).into_owned())).collect();
    if cols.is_empty() {
        CMat::zeros(a.nrows(), 0)
    } else {
        CMat::from_columns(&cols)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Modulation {
    Cos(u32),
    Sin(u32),
}

impl Modulation {
    /// The `i`-th modulation: 1, sin(k), cos(k), sin(k+1), ... in units of π/(2r).
    pub fn nth(i: usize) -> Self {
        if i == 0 {
            Modulation::Cos(0)
        } else if i % 2 == 1 {
            Modulation::Sin(i.div_ceil(2) as u32)
        } else {
            Modulation::Cos((i / 2) as u32)
        }
    }

    pub fn label(&self) -> String {
        match self {
            Modulation::Cos(k) => format!("cos{k}"),
            Modulation::Sin(k) => format!("sin{k}"),
        }
    }
}

/// Test functions `bump(x)·modulation(x)` supported in `[-r, r]`, stored by
/// their momentum transforms `(2π)^{-1/2} ∫ f(x) e^{-ipx} dx`.
#[derive(Clone, Debug, Serialize)]
pub struct TestFunctionFamily {
    pub r: f64,
    #[serde(skip)]
    pub members: Vec<CVec>,
    pub labels: Vec<String>,
    pub modulations: Vec<Modulation>,
    pub gram_condition: f64,
    pub leakage: Vec<f64>,
}

const X_NODES: usize = 2048;
const GRAM_LIMIT: f64 = 1e12;

pub fn bump(x: f64, r: f64) -> f64 {
    if x.abs() >= r {
        0.0
    } else {
        (-(r * r) / (r * r - x * x)).exp()
    }
}

impl TestFunctionFamily {
    /// Configuration-space value of member `i`.
    pub fn eval_x(&self, i: usize, x: f64) -> f64 {
        profile(self.modulations[i], self.r, x)
    }
}

fn profile(m: Modulation, r: f64, x: f64) -> f64 {
    let b = bump(x, r);
    match m {
        Modulation::Cos(k) => b * (k as f64 * PI * x / (2.0 * r)).cos(),
        Modulation::Sin(k) => b * (k as f64 * PI * x / (2.0 * r)).sin(),
    }
}

/// Transform of a real profile on `[-r, r]` at momentum `p` by the midpoint rule.
fn transform_1d(f: &[f64], xs: &[f64], dx: f64, p: f64) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (fx, x) in f.iter().zip(xs) {
        let (s, c) = (p * x).sin_cos();
        acc += C64::new(fx * c, -fx * s);
    }
    acc * (dx / (2.0 * PI).sqrt())
}

pub fn build_test_family(grid: &MomentumGrid, r: f64, count: usize) -> Result<TestFunctionFamily> {
    if grid.s != 1 {
        return invalid("test families are implemented for s = 1");
    }
    if !(r > 0.0) || count == 0 {
        return invalid(format!("need r > 0 and count ≥ 1, got r={r}, count={count}"));
    }
    let dx = 2.0 * r / X_NODES as f64;
    let xs: Vec<f64> = (0..X_NODES).map(|i| -r + (i as f64 + 0.5) * dx).collect();
    let n = grid.len();
    let mut members = Vec::with_capacity(count);
    let modulations: Vec<Modulation> = (0..count).map(Modulation::nth).collect();
    for &m in &modulations {
        let fx: Vec<f64> = xs.iter().map(|&x| profile(m, r, x)).collect();
        let mut v = CVec::zeros(n);
        // f real gives f̃(-p) = conj f̃(p); fill the negative half by mirroring.
        for k in n / 2..n {
            let val = transform_1d(&fx, &xs, dx, grid.nodes[k][0]) * grid.weights[k].sqrt();
            v[k] = val;
            v[grid.mirror_index(k)] = val.conj();
        }
        members.push(v);
    }
    let gram = CMat::from_fn(count, count, |i, j| members[i].dotc(&members[j]));
    let (ev, _) = herm_eigen(&gram);
    let lo = ev.last().copied().unwrap_or(0.0);
    let gram_condition = if lo > 0.0 { ev[0] / lo } else { f64::INFINITY };
    if gram_condition > GRAM_LIMIT {
        return Err(Error::Singular(format!("test family Gram condition number {gram_condition:.3e}")));
    }
    let leakage = members.iter().map(|v| configuration_leakage(grid, v, 1.05 * r)).collect();
    Ok(TestFunctionFamily { r, members, labels: modulations.iter().map(Modulation::label).collect(), modulations, gram_condition, leakage })
}

/// Fraction of the reconstructed configuration-space mass outside `|x| > cut`,
/// over one period `2π/h` of the grid's band-limited reconstruction.
pub fn configuration_leakage(grid: &MomentumGrid, v: &CVec, cut: f64) -> f64 {
    let half = PI / grid.spacing();
    let nx = 4096;
    let dx = 2.0 * half / nx as f64;
    let vals = grid.values(v);
    let (mut inside, mut outside) = (0.0, 0.0);
    for i in 0..nx {
        let x = -half + (i as f64 + 0.5) * dx;
        let mut acc = C64::new(0.0, 0.0);
        for (k, val) in vals.iter().enumerate() {
            acc += val * C64::from_polar(grid.weights[k], grid.nodes[k][0] * x);
        }
        let mass = acc.norm_sqr() * dx;
        if x.abs() > cut {
            outside += mass;
        } else {
            inside += mass;
        }
    }
    outside / (inside + outside)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn label(&self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// Orthonormal basis of `L+ = [ω^{-1/2} f̃]` or `L- = [ω^{1/2} f̃]`.
#[derive(Clone, Debug, Serialize)]
pub struct SubspaceBasis {
    pub kind: Sign,
    #[serde(skip)]
    pub columns: CMat,
    pub singular_values: Vec<f64>,
    pub discarded: Vec<f64>,
    pub j_defect: f64,
}

const RANK_TOL: f64 = 1e-10;

impl SubspaceBasis {
    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn projector(&self) -> CMat {
        &self.columns * self.columns.adjoint()
    }

    pub fn project(&self, v: &CVec) -> CVec {
        &self.columns * (self.columns.adjoint() * v)
    }
}

fn local_subspace(grid: &MomentumGrid, family: &TestFunctionFamily, kind: Sign) -> SubspaceBasis {
    let exponent = match kind {
        Sign::Plus => -0.5,
        Sign::Minus => 0.5,
    };
    let cols: Vec<CVec> = family
        .members
        .iter()
        .map(|f| CVec::from_iterator(f.len(), f.iter().zip(&grid.omega).map(|(z, w)| z * w.powf(exponent))))
        .collect();
    let (columns, singular_values, discarded) = orthonormal_range(&CMat::from_columns(&cols), RANK_TOL);
    let mut sub = SubspaceBasis { kind, columns, singular_values, discarded, j_defect: 0.0 };
    sub.j_defect = (0..sub.rank())
        .map(|c| {
            let jv = apply_conjugation(grid, &sub.columns.column(c).into_owned());
            (&jv - sub.project(&jv)).norm()
        })
        .fold(0.0, f64::max);
    sub
}

pub fn build_local_subspaces(grid: &MomentumGrid, family: &TestFunctionFamily) -> Result<(SubspaceBasis, SubspaceBasis)> {
    if family.members.is_empty() {
        return Err(Error::Empty("test family".into()));
    }
    Ok((local_subspace(grid, family, Sign::Plus), local_subspace(grid, family, Sign::Minus)))
}
