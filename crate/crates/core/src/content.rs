//! ε-content estimates: greedy packing of sampled images, the lattice
//! rounding bound, lattice-point and additivity counts, and the N-region
//! bound built from the nuclear p-norm.

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{InequalityReport, Point};
use crate::error::{invalid, Error, Result};
use crate::expansion::weyl_sup;
use crate::fock::{translate_functional, weyl_expectation, ModeVector, StateFunctional, TruncatedFockSpace};
use crate::C64;

/// Images of a finite net under a map into `C^N_sup`-valued blocks.
///
/// `outputs[i][k]` is block `k` of the image of net element `i`, sampled on
/// a fixed observable family, so the block norm is the largest modulus.
#[derive(Clone, Debug, Serialize)]
pub struct FiniteMapSample {
    #[serde(skip)]
    pub outputs: Vec<Vec<Vec<C64>>>,
    pub block_norms: Vec<Vec<f64>>,
    /// `sup_i (Σ_k ‖block_k‖²)^{1/2}`.
    pub norm_2: f64,
}

fn sup_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

impl FiniteMapSample {
    pub fn from_outputs(outputs: Vec<Vec<Vec<C64>>>) -> Result<Self> {
        if outputs.iter().flatten().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("map sample has non-finite entries");
        }
        let block_norms: Vec<Vec<f64>> = outputs.iter().map(|o| o.iter().map(|b| sup_abs(b)).collect()).collect();
        let norm_2 = block_norms.iter().map(|b| b.iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max);
        Ok(FiniteMapSample { outputs, block_norms, norm_2 })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    /// Sup-block norm of one image.
    pub fn output_norm(&self, i: usize) -> f64 {
        self.block_norms[i].iter().copied().fold(0.0, f64::max)
    }

    /// Sup-block distance between two images.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let mut d = 0.0f64;
        for (a, b) in self.outputs[i].iter().zip(&self.outputs[j]) {
            for (x, y) in a.iter().zip(b) {
                d = d.max((x - y).norm());
            }
        }
        d
    }
}

/// `Θ(φ) = (Π(α*_{x_1}φ), …, Π(α*_{x_N}φ))` with `Π(φ)` sampled as
/// `(φ(W(f_l)))_l` over the observable family.
pub fn build_theta(space: &TruncatedFockSpace, net: &[StateFunctional], observables: &[ModeVector], xs: &[Point]) -> Result<FiniteMapSample> {
    if xs.is_empty() {
        return Err(Error::Empty("translation list".into()));
    }
    let outputs: Result<Vec<Vec<Vec<C64>>>> = net
        .par_iter()
        .map(|phi| {
            xs.iter()
                .map(|&(x0, x1)| {
                    let moved = translate_functional(space, phi, x0, x1)?;
                    Ok(observables.iter().map(|mv| weyl_expectation(space, &moved, mv)).collect())
                })
                .collect()
        })
        .collect();
    FiniteMapSample::from_outputs(outputs?)
}

/// Sampled `‖Π‖` of a single functional, matching a one-block `Θ`.
pub fn single_block_norm(space: &TruncatedFockSpace, observables: &[ModeVector], phi: &StateFunctional) -> f64 {
    weyl_sup(space, observables, phi)
}

/// First-fit packing by net order: a lower bound on the ε-content of the map
/// restricted to the net.
pub fn epsilon_content_bruteforce(sample: &FiniteMapSample, epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    if sample.is_empty() {
        return Err(Error::Empty("functional net".into()));
    }
    let mut centers: Vec<usize> = Vec::new();
    for i in 0..sample.len() {
        if centers.iter().all(|&c| sample.distance(i, c) > epsilon) {
            centers.push(i);
        }
    }
    Ok(centers.len())
}

/// `(4eN)^{2⁷π‖Θ‖₂²/ε²}` as its logarithm, with the value when it fits.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LogBound {
    pub exponent: f64,
    pub log_value: f64,
    pub value: Option<f64>,
}

impl LogBound {
    fn from_exponent(exponent: f64, n: usize) -> Self {
        let log_value = if exponent == 0.0 { 0.0 } else { exponent * (4.0 * std::f64::consts::E * n as f64).ln() };
        let v = log_value.exp();
        LogBound { exponent, log_value, value: v.is_finite().then_some(v) }
    }
}

pub fn key_lemma_bound(norm_2: f64, epsilon: f64, n: usize) -> Result<LogBound> {
    if !(epsilon > 0.0) || n == 0 || !(norm_2 >= 0.0) {
        return invalid(format!("key lemma bound needs norm ≥ 0, ε > 0, N ≥ 1; got {norm_2}, {epsilon}, {n}"));
    }
    let exponent = 128.0 * std::f64::consts::PI * norm_2 * norm_2 / (epsilon * epsilon);
    Ok(LogBound::from_exponent(exponent, n))
}

fn count_ball(dims: usize, budget: i64) -> u64 {
    if dims == 0 {
        return 1;
    }
    let mut total = 0;
    let mut n = 0i64;
    while n * n <= budget {
        let mult = if n == 0 { 1 } else { 2 };
        total += mult * count_ball(dims - 1, budget - n * n);
        n += 1;
    }
    total
}

/// Number of `n ∈ ℤ^d` with `Σ n_i² ≤ M`.
pub fn lattice_count(dims: usize, m: u32) -> u64 {
    count_ball(dims, m as i64)
}

fn ln_binomial(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

/// `ln V_M(R)` for the volume of the M-dimensional ball.
pub fn ln_ball_volume(m: u32, radius: f64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let d = m as f64;
    0.5 * d * std::f64::consts::PI.ln() + d * radius.ln() - statrs::function::gamma::ln_gamma(0.5 * d + 1.0)
}

/// Counts the lattice points of the rounding set in `ℤ^{2N}` and compares
/// with `C(2N,M) 2^M V_M(2√M)`, which must itself stay below `(4Ne)^{8πM}`.
pub fn lattice_count_check(m: u32, n: usize) -> Result<InequalityReport> {
    let dims = 2 * n;
    if n == 0 || m as usize > dims {
        return invalid(format!("lattice count needs 0 ≤ M ≤ 2N, got M={m}, N={n}"));
    }
    if dims > 8 || m > 6 {
        return Err(Error::TooLarge { dim: dims.max(m as usize), limit: 8 });
    }
    let count = lattice_count(dims, m);
    let middle = ln_binomial(dims as u64, m as u64) + m as f64 * 2f64.ln() + ln_ball_volume(m, 2.0 * (m as f64).sqrt());
    let outer = 8.0 * std::f64::consts::PI * m as f64 * (4.0 * n as f64 * std::f64::consts::E).ln();
    let lhs = (count as f64).ln();
    let rep = InequalityReport::new(format!("lattice_count[M={m},N={n}]"), lhs, middle, 1e-12, 0.0)
        .with("M", m)
        .with("N", n)
        .with("count", count)
        .with("ln_outer_bound", outer);
    let pass = rep.pass && middle <= outer + 1e-12;
    let mut rep = rep.noted("lhs and rhs are natural logarithms; the outer bound must dominate rhs");
    rep.pass = pass;
    Ok(rep)
}

fn count_compositions(slots: usize, budget: u64) -> u64 {
    if slots == 0 {
        return 1;
    }
    // Every remaining slot needs at least 1.
    let mut total = 0;
    let mut v = 1;
    while v + (slots as u64 - 1) <= budget {
        total += count_compositions(slots - 1, budget - v);
        v += 1;
    }
    total
}

/// `#{n ∈ ℕ*^N : Σ n_i ≤ N + cE}`.
pub fn additivity_count(n: usize, c_e: u32) -> u64 {
    count_compositions(n, n as u64 + c_e as u64)
}

pub fn additivity_count_check(n: usize, c_e: u32) -> Result<InequalityReport> {
    if n == 0 || n > 8 || c_e > 6 {
        return invalid(format!("additivity count needs 1 ≤ N ≤ 8, cE ≤ 6; got N={n}, cE={c_e}"));
    }
    let count = additivity_count(n, c_e);
    let bound = (n as u64 + 1).pow(c_e);
    Ok(InequalityReport::new(format!("additivity_count[N={n},cE={c_e}]"), count as f64, bound as f64, 0.0, 0.0)
        .with("N", n)
        .with("cE", c_e)
        .with("count", count)
        .with("bound", bound))
}

/// Bracket `lower ≤ Σ_{n≥1} n^{-s} ≤ upper` from a partial sum and the
/// integral test.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ZetaBracket {
    pub lower: f64,
    pub upper: f64,
    pub terms: u64,
}

pub fn zeta_bracket(s: f64, terms: u64) -> Result<ZetaBracket> {
    if !(s > 1.0) {
        return invalid(format!("Σ n^-s diverges for s = {s} ≤ 1"));
    }
    let partial: f64 = (1..=terms).rev().map(|n| (n as f64).powf(-s)).sum();
    let tail = |a: f64| a.powf(1.0 - s) / (s - 1.0);
    Ok(ZetaBracket { lower: partial + tail(terms as f64 + 1.0), upper: partial + tail(terms as f64), terms })
}

#[derive(Clone, Debug, Serialize)]
pub struct Theorem1Bound {
    pub p: f64,
    pub pnorm: f64,
    pub epsilon: f64,
    pub n: usize,
    pub zeta: ZetaBracket,
    /// Range of `Σ ε_n / (ε/4)` implied by the bracket; the top is 1.
    pub epsilon_sum_range: (f64, f64),
    pub bound: LogBound,
}

/// `(4eN)^{2¹¹π‖Π‖²_{p,x}(Σ n^{-2/(3p)})³/ε²}` with the series bracketed from
/// above. Needs `p < 2/3`.
pub fn theorem1_bound(p: f64, pnorm: f64, epsilon: f64, n: usize) -> Result<Theorem1Bound> {
    if !(p > 0.0 && p < 2.0 / 3.0) {
        return invalid(format!("p = {p}: Σ n^(-2/(3p)) diverges unless 0 < p < 2/3"));
    }
    if !(epsilon > 0.0) || n == 0 || !(pnorm >= 0.0) {
        return invalid(format!("bound needs ‖Π‖ ≥ 0, ε > 0, N ≥ 1; got {pnorm}, {epsilon}, {n}"));
    }
    let zeta = zeta_bracket(2.0 / (3.0 * p), 2_000_000)?;
    // ε_n = (ε/4) n^{-s} / Z with Z = zeta.upper, so Σ ε_n = (ε/4) Z_true / Z.
    let epsilon_sum_range = (zeta.lower / zeta.upper, 1.0);
    let exponent = 2048.0 * std::f64::consts::PI * pnorm * pnorm * zeta.upper.powi(3) / (epsilon * epsilon);
    Ok(Theorem1Bound { p, pnorm, epsilon, n, zeta, epsilon_sum_range, bound: LogBound::from_exponent(exponent, n) })
}

/// `L(N)/ln(4eN)` must agree across the supplied `N`.
pub fn log_growth_check(p: f64, pnorm: f64, epsilon: f64, ns: &[usize]) -> Result<InequalityReport> {
    let ratios: Result<Vec<f64>> = ns
        .iter()
        .map(|&n| theorem1_bound(p, pnorm, epsilon, n).map(|b| b.bound.log_value / (4.0 * std::f64::consts::E * n as f64).ln()))
        .collect();
    let ratios = ratios?;
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let spread = if hi > 0.0 { (hi - lo) / hi } else { 0.0 };
    Ok(InequalityReport::new("theorem1_log_growth", spread, 0.0, 1e-12, 0.0)
        .with("p", p)
        .with("pnorm", pnorm)
        .with("epsilon", epsilon)
        .with("N", ns.to_vec())
        .with("ratios", ratios)
        .noted("relative spread of log-bound / ln(4eN)"))
}

/// Greedy count ≤ rounding bound at the sampled `‖Θ‖₂` ≤ product bound at an
/// upper estimate of the p-norm.
pub fn content_chain_check(sample: &FiniteMapSample, epsilon: f64, n: usize, p: f64, pnorm_bound: f64) -> Result<InequalityReport> {
    let greedy = epsilon_content_bruteforce(sample, epsilon)?;
    let key = key_lemma_bound(sample.norm_2, epsilon, n)?;
    let thm = theorem1_bound(p, pnorm_bound, epsilon, n)?;
    let lhs = (greedy as f64).ln();
    let rep = InequalityReport::new(format!("epsilon_content[N={n},eps={epsilon}]"), lhs, key.log_value, 1e-12, 0.0)
        .with("N", n)
        .with("epsilon", epsilon)
        .with("greedy", greedy)
        .with("norm_2", sample.norm_2)
        .with("net_size", sample.len())
        .with("p", p)
        .with("pnorm_bound", pnorm_bound)
        .with("ln_theorem_bound", thm.bound.log_value);
    let pass = rep.pass && key.log_value <= thm.bound.log_value + 1e-12;
    let mut rep = rep.noted("logarithms; greedy count from a sampled net, norm_2 sampled on the observable family");
    rep.pass = pass;
    Ok(rep)
}
