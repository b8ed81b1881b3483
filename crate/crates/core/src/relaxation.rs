//! Relaxation toward the vacuum: timelike scans of translated expectation
//! values, the translation-deviation estimate for functionals with small
//! spectral support, and the decay of the local norm as that support shrinks.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bounds::{InequalityReport, Point};
use crate::content::{build_theta, epsilon_content_bruteforce, FiniteMapSample};
use crate::error::{invalid, Error, Result};
use crate::fock::{node_space, region_mask, translate_functional, weyl_expectation, ModeVector, Region, StateFunctional, TruncatedFockSpace};
use crate::grid::MomentumGrid;
use crate::linalg::herm_eigen;
use crate::{CMat, CVec, C64};

/// Values of a scan over `t` or `r`, with deviations from a reference value.
#[derive(Clone, Debug, Serialize)]
pub struct ScanResult {
    pub name: String,
    /// `"t"` or `"r"`.
    pub parameter: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub reference: f64,
    pub deviations: Vec<f64>,
    /// Proof-side upper bound per grid point, when one applies.
    pub bounds: Option<Vec<f64>>,
    pub description: String,
    pub checks: Vec<InequalityReport>,
    pub warnings: Vec<String>,
}

impl ScanResult {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Columns `param,value,deviation[,bound]`.
    pub fn csv(&self) -> String {
        let mut out = String::new();
        match &self.bounds {
            Some(_) => out.push_str(&format!("{},value,deviation,bound\n", self.parameter)),
            None => out.push_str(&format!("{},value,deviation\n", self.parameter)),
        }
        for i in 0..self.grid.len() {
            out.push_str(&format!("{:e},{:e},{:e}", self.grid[i], self.values[i], self.deviations[i]));
            if let Some(b) = &self.bounds {
                out.push_str(&format!(",{:e}", b[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Deviation at the grid point closest to `t`.
    pub fn deviation_at(&self, t: f64) -> Option<f64> {
        let i = (0..self.grid.len()).min_by(|&a, &b| (self.grid[a] - t).abs().total_cmp(&(self.grid[b] - t).abs()))?;
        Some(self.deviations[i])
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

/// Largest `t` for which translated node states still resolve the
/// continuum: half the revival period `2π/Δp` of the grid.
pub fn translation_validity(grid: &MomentumGrid) -> f64 {
    std::f64::consts::PI / grid.spacing()
}

/// `φ(A(tê))` for `A = P_E W(f) P_E`, against `ω₀(A) = e^{-‖f‖²/2}`.
///
/// Records the largest deviation over the last quarter of the grid against
/// the first quarter and, if `threshold` is given, the last deviation against
/// it.
pub fn timelike_scan(grid: &MomentumGrid, space: &TruncatedFockSpace, phi: &StateFunctional, a: &ModeVector, e_hat: Point, t_grid: &[f64], threshold: Option<f64>) -> Result<ScanResult> {
    if !strictly_increasing(t_grid) || t_grid.is_empty() {
        return invalid("t grid must be nonempty and strictly increasing");
    }
    let (e0, e1) = e_hat;
    if !(e0 > 0.0) || ((e0 * e0 - e1 * e1) - 1.0).abs() > 1e-12 {
        return invalid(format!("ê = ({e0}, {e1}) is not a future timelike unit vector"));
    }
    let limit = translation_validity(grid);
    let mut warnings = Vec::new();
    let ts: Vec<f64> = t_grid.iter().copied().filter(|t| t.abs() * e0.max(e1.abs()) <= limit).collect();
    if ts.len() < t_grid.len() {
        warnings.push(format!("trimmed {} grid points beyond |t| = {limit:.3}", t_grid.len() - ts.len()));
    }
    if ts.is_empty() {
        return Err(Error::Empty("t grid after trimming".into()));
    }
    let reference = (-0.5 * a.norm_sqr).exp();
    let mut values = Vec::with_capacity(ts.len());
    let mut deviations = Vec::with_capacity(ts.len());
    for &t in &ts {
        let v = weyl_expectation(space, &translate_functional(space, phi, t * e0, t * e1)?, a);
        values.push(v.re);
        deviations.push((v - reference * phi.identity_value()).norm());
    }
    let q = (ts.len() / 4).max(1);
    let head = deviations[..q].iter().copied().fold(0.0, f64::max);
    let tail = deviations[ts.len() - q..].iter().copied().fold(0.0, f64::max);
    let mut checks = vec![InequalityReport::new("timelike_trend", tail, head, 1e-14, 0.0)
        .with("quarter", q)
        .noted("largest deviation in the last quarter of the grid vs the first")];
    if let Some(th) = threshold {
        checks.push(InequalityReport::new("timelike_threshold", *deviations.last().unwrap(), th, 0.0, 0.0).with("t", *ts.last().unwrap()));
    }
    Ok(ScanResult {
        name: "timelike".into(),
        parameter: "t".into(),
        grid: ts,
        values,
        reference,
        deviations,
        bounds: None,
        description: format!("translations along ê = ({e0}, {e1}); a single Weyl observable from the local family"),
        checks,
        warnings,
    })
}

/// Deviation at `late` below `fraction` of the deviation at `early`.
pub fn decay_ratio_check(scan: &ScanResult, early: f64, late: f64, fraction: f64) -> Result<InequalityReport> {
    let (Some(a), Some(b)) = (scan.deviation_at(early), scan.deviation_at(late)) else {
        return Err(Error::Empty("scan grid".into()));
    };
    Ok(InequalityReport::new(format!("timelike_decay[{early}->{late}]"), b, fraction * a, 0.0, 0.0)
        .with("early", early)
        .with("late", late)
        .with("fraction", fraction))
}

/// Orthonormal basis (as occupation indices) of the states with
/// energy-momentum in the ball.
pub fn ball_states(space: &TruncatedFockSpace, center: Point, radius: f64) -> Vec<usize> {
    let mask = region_mask(space, Region::Ball { p0: center.0, p1: center.1, radius });
    (0..space.dim()).filter(|&b| mask[b]).collect()
}

fn unit(space: &TruncatedFockSpace, b: usize) -> CVec {
    let mut v = CVec::zeros(space.dim());
    v[b] = C64::new(1.0, 0.0);
    v
}

fn normal(rng: &mut impl Rng) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Random functional `Σ_i c_i |a_i⟩⟨b_i|` with vectors inside the ball and
/// unit trace norm.
pub fn random_ball_functional(space: &TruncatedFockSpace, states: &[usize], rng: &mut impl Rng, rank: usize) -> Option<StateFunctional> {
    if states.is_empty() {
        return None;
    }
    let draw = |rng: &mut _| {
        let mut v = CVec::zeros(space.dim());
        for &b in states {
            v[b] = normal(rng);
        }
        let n = v.norm();
        v / C64::new(n, 0.0)
    };
    let terms = (0..rank).map(|_| (normal(rng), draw(rng), draw(rng))).collect();
    let phi = StateFunctional { terms, energy_support: space.e_cap, vacuum_subtracted: false };
    let tn = phi.trace_norm();
    (tn > 1e-12).then(|| phi.scale(1.0 / tn))
}

fn euclid(x: Point) -> f64 {
    (x.0 * x.0 + x.1 * x.1).sqrt()
}

/// `|φ(A) - α*_xφ(A)| ≤ 2‖φ‖‖A‖|x|r` for `φ` with spectral support in a
/// ball of radius `r` and `A = P_E W(f) P_E`, `‖A‖ ≤ 1`.
pub fn translation_deviation_check(space: &TruncatedFockSpace, phi: &StateFunctional, a: &ModeVector, x: Point, radius: f64) -> Result<InequalityReport> {
    let before = weyl_expectation(space, phi, a);
    let after = weyl_expectation(space, &translate_functional(space, phi, x.0, x.1)?, a);
    let norm = phi.trace_norm();
    let rhs = 2.0 * norm * euclid(x) * radius;
    Ok(InequalityReport::new("translation_deviation", (before - after).norm(), rhs, 1e-10, 0.0)
        .with("x0", x.0)
        .with("x1", x.1)
        .with("r", radius)
        .with("phi_norm", norm))
}

/// Matrix of `P W(f) P` on the ball states.
fn compressed_weyl(space: &TruncatedFockSpace, states: &[usize], a: &ModeVector) -> CMat {
    let n = states.len();
    let mut m = CMat::zeros(n, n);
    for (j, &bj) in states.iter().enumerate() {
        for (i, &bi) in states.iter().enumerate() {
            let phi = StateFunctional { terms: vec![(C64::new(1.0, 0.0), unit(space, bj), unit(space, bi))], energy_support: None, vacuum_subtracted: false };
            m[(i, j)] = weyl_expectation(space, &phi, a);
        }
    }
    m
}

/// `sup |φ(A)|` over traceless unit-trace-norm `φ` supported on the ball,
/// for the Hermitian parts of each `W(f)`, with a maximizing functional.
/// For Hermitian `H` the supremum is `(λ_max - λ_min)/2`.
pub fn restricted_norm(space: &TruncatedFockSpace, states: &[usize], observables: &[ModeVector]) -> (f64, Vec<StateFunctional>) {
    if states.len() < 2 {
        return (0.0, Vec::new());
    }
    let mut best = 0.0f64;
    let mut maximizers = Vec::new();
    let lift = |v: nalgebra::DVectorView<C64>| {
        let mut out = CVec::zeros(space.dim());
        for (k, &b) in states.iter().enumerate() {
            out[b] = v[k];
        }
        out
    };
    for a in observables {
        let w = compressed_weyl(space, states, a);
        let re = (&w + w.adjoint()) * C64::new(0.5, 0.0);
        let im = (&w - w.adjoint()) * C64::new(0.0, -0.5);
        for h in [re, im] {
            let (vals, vecs) = herm_eigen(&h);
            let (lo, hi) = vals.iter().enumerate().fold((0, 0), |(lo, hi), (k, &v)| {
                (if v < vals[lo] { k } else { lo }, if v > vals[hi] { k } else { hi })
            });
            let spread = 0.5 * (vals[hi] - vals[lo]);
            best = best.max(spread);
            if lo == hi || spread <= 0.0 {
                continue;
            }
            let top = lift(vecs.column(hi));
            let bottom = lift(vecs.column(lo));
            maximizers.push(StateFunctional {
                terms: vec![(C64::new(0.5, 0.0), top.clone(), top), (C64::new(-0.5, 0.0), bottom.clone(), bottom)],
                energy_support: space.e_cap,
                vacuum_subtracted: true,
            });
        }
    }
    (best, maximizers)
}

/// Restricted local norm on shrinking balls around `center`, with the
/// averaging bound `N^{-1/2} ‖Π‖_{x_1..x_N} + 2r sup|x_k|`.
///
/// The N-point norm is sampled over the maximizing functionals of every
/// radius, so the bound and the sample use the same observable family.
pub fn shrinking_norm_scan(space: &TruncatedFockSpace, observables: &[ModeVector], center: Point, r_grid: &[f64], xs: &[Point]) -> Result<ScanResult> {
    if r_grid.is_empty() || !r_grid.windows(2).all(|w| w[0] > w[1]) {
        return invalid("r grid must be nonempty and strictly decreasing");
    }
    if xs.is_empty() {
        return Err(Error::Empty("translation list".into()));
    }
    let n = xs.len() as f64;
    let sup_x = xs.iter().map(|&x| euclid(x)).fold(0.0, f64::max);
    let mut values = Vec::new();
    let mut bounds = Vec::new();
    let mut checks = Vec::new();
    for &r in r_grid {
        let states = ball_states(space, center, r);
        let (norm, maximizers) = restricted_norm(space, &states, observables);
        let npoint = if maximizers.is_empty() {
            0.0
        } else {
            let theta: FiniteMapSample = build_theta(space, &maximizers, observables, xs)?;
            theta.norm_2
        };
        let bound = npoint / n.sqrt() + 2.0 * r * sup_x;
        checks.push(InequalityReport::new(format!("shrinking_bound[r={r}]"), norm, bound, 1e-12, 0.0).with("r", r).with("ball_states", states.len()).with("npoint", npoint));
        values.push(norm);
        bounds.push(bound);
    }
    for (i, w) in values.windows(2).enumerate() {
        checks.push(InequalityReport::new(format!("shrinking_monotone[r={}]", r_grid[i + 1]), w[1], w[0], 1e-8, 0.0));
    }
    // Ascending grid for output.
    let grid: Vec<f64> = r_grid.iter().rev().copied().collect();
    values.reverse();
    bounds.reverse();
    Ok(ScanResult {
        name: "shrinking_norm".into(),
        parameter: "r".into(),
        grid,
        deviations: values.clone(),
        values,
        reference: 0.0,
        bounds: Some(bounds),
        description: format!("balls around ({}, {}); N = {} regions, sup|x_k| = {sup_x}", center.0, center.1, xs.len()),
        checks,
        warnings: Vec::new(),
    })
}

/// Sampled ε-content of `Π_E` on a net below the mass gap: the vacuum is the
/// only state, so every vacuum-subtracted functional vanishes.
pub fn low_energy_content(grid: &MomentumGrid, energy: f64, local_args: &[CVec], rng: &mut impl Rng, net_size: usize, epsilon: f64) -> Result<InequalityReport> {
    let space = node_space(grid, energy, 100)?;
    let observables: Vec<ModeVector> = local_args.iter().map(|f| space.mode_vector(f)).collect();
    let net: Vec<StateFunctional> = (0..net_size.max(1))
        .map(|_| {
            let v = CVec::from_fn(space.dim(), |_, _| normal(rng));
            let v = &v / C64::new(v.norm(), 0.0);
            StateFunctional::pure(&v).vacuum_subtract(&space)
        })
        .collect();
    let sample = build_theta(&space, &net, &observables, &[(0.0, 0.0)])?;
    let count = epsilon_content_bruteforce(&sample, epsilon)?;
    let mut rep = InequalityReport::new("low_energy_content", count as f64, 1.0, 0.0, 0.0)
        .with("energy", energy)
        .with("dim", space.dim())
        .with("epsilon", epsilon)
        .with("net_size", net.len());
    rep.pass = count == 1;
    Ok(rep)
}
