//! The check suites run by the command-line driver. Each stage turns a
//! [`Lab`] into named inequality reports, scans and CSV side tables.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::*;
use crate::config::RunConfig;
use crate::content::{additivity_count_check, build_theta, content_chain_check, lattice_count_check, log_growth_check};
use crate::error::Result;
use crate::expansion::{
    enumerate_multi_indices, eval_tau_on_weyl, expansion_csv, expansion_residual, expansion_table, functional_net, local_weyl_arguments, tau_norm_bound, ExpansionModes,
    WeylArgument,
};
use crate::fock::{lowering_product_norm, ModeVector, StateFunctional};
use crate::lab::Lab;
use crate::lub::{schatten_norm, spectrum_csv, t_power, CompactOperator};
use crate::linalg::min_eigenvalue;
use crate::relaxation::{
    ball_states, decay_ratio_check, low_energy_content, random_ball_functional, shrinking_norm_scan, timelike_scan, translation_deviation_check, ScanResult,
};
use crate::{CVec, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Build,
    Spectrum,
    Inequalities,
    Content,
    Relaxation,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Build, Stage::Spectrum, Stage::Inequalities, Stage::Content, Stage::Relaxation];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Build => "build",
            Stage::Spectrum => "spectrum",
            Stage::Inequalities => "inequalities",
            Stage::Content => "content",
            Stage::Relaxation => "relaxation",
        }
    }
}

/// A CSV side file produced by a stage.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub file: String,
    #[serde(skip)]
    pub csv: String,
    pub rows: usize,
}

impl Table {
    pub fn new(file: impl Into<String>, csv: String) -> Self {
        let rows = csv.lines().count().saturating_sub(1);
        Table { file: file.into(), csv, rows }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageResult {
    pub stage: Stage,
    pub info: BTreeMap<String, Value>,
    pub reports: Vec<InequalityReport>,
    pub scans: Vec<ScanResult>,
    pub tables: Vec<Table>,
}

impl StageResult {
    pub fn new(stage: Stage) -> Self {
        StageResult { stage, info: BTreeMap::new(), reports: Vec::new(), scans: Vec::new(), tables: Vec::new() }
    }

    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass) && self.scans.iter().all(|s| s.pass())
    }

    /// Every report, including those attached to scans.
    pub fn all_reports(&self) -> impl Iterator<Item = &InequalityReport> {
        self.reports.iter().chain(self.scans.iter().flat_map(|s| s.checks.iter()))
    }

    fn info(&mut self, key: &str, v: impl Into<Value>) {
        self.info.insert(key.to_string(), v.into());
    }

    /// Scales tolerances and sorts reports by name.
    fn finish(mut self, tol_scale: f64) -> Self {
        for r in &mut self.reports {
            rescale(r, tol_scale);
        }
        for s in &mut self.scans {
            for r in &mut s.checks {
                rescale(r, tol_scale);
            }
        }
        self.reports.sort_by(|a, b| a.name.cmp(&b.name));
        self
    }
}

fn holds(r: &InequalityReport, tol: f64) -> bool {
    r.lhs.is_finite() && r.rhs.is_finite() && r.lhs <= r.rhs + tol + r.truncation_defect
}

/// Multiplies the tolerance, keeping any extra condition a report carries.
fn rescale(r: &mut InequalityReport, s: f64) {
    if s == 1.0 {
        return;
    }
    let extra_ok = r.pass || !holds(r, r.tolerance);
    r.tolerance *= s;
    r.pass = extra_ok && holds(r, r.tolerance);
}

/// Stages a suite name expands to.
pub fn stages_for(suite: &str) -> Option<Vec<Stage>> {
    Some(match suite {
        "all" => Stage::ALL.to_vec(),
        "build" => vec![Stage::Build],
        "spectrum" => vec![Stage::Spectrum],
        "inequalities" => vec![Stage::Inequalities],
        "content" => vec![Stage::Content],
        "relaxation" => vec![Stage::Relaxation],
        _ => return None,
    })
}

/// Shared inputs of the stages after the lab is built.
pub struct Context {
    pub lab: Lab,
    pub modes: ExpansionModes,
    pub net: Vec<StateFunctional>,
    pub local_args: Vec<CVec>,
    pub observables: Vec<ModeVector>,
    pub params: BoundParams,
}

// Stream numbers for the seeded generators.
const NET_STREAM: u64 = 1;
const OBS_STREAM: u64 = 2;
const ENERGY_STREAM: u64 = 3;
const EXPANSION_STREAM: u64 = 4;
const RELAX_STREAM: u64 = 5;

impl Context {
    pub fn build(config: &RunConfig) -> Result<Context> {
        let lab = Lab::build(config)?;
        let modes = ExpansionModes::new(&lab.space, &lab.l_plus, &lab.l_minus, &lab.lub, config.modes, lab.m_e())?;
        let net = functional_net(&lab.space, &mut lab.rng(NET_STREAM), config.net_size);
        let local_args = local_weyl_arguments(&lab.grid, &lab.family, &mut lab.rng(OBS_STREAM), config.observable_count);
        let observables = local_args.iter().map(|f| lab.space.mode_vector(f)).collect();
        let c = c_eps_beta(config.m, config.epsilon, config.beta)?.value;
        let params = BoundParams { m: config.m, energy: config.energy, beta: config.beta, epsilon: config.epsilon, c_eps_beta: c };
        Ok(Context { lab, modes, net, local_args, observables, params })
    }

    pub fn run(&self, stage: Stage) -> Result<StageResult> {
        let out = match stage {
            Stage::Build => self.build_stage()?,
            Stage::Spectrum => self.spectrum_stage()?,
            Stage::Inequalities => self.inequality_stage()?,
            Stage::Content => self.content_stage()?,
            Stage::Relaxation => self.relaxation_stage()?,
        };
        Ok(out.finish(self.lab.config.tol_scale))
    }

    fn cfg(&self) -> &RunConfig {
        &self.lab.config
    }

    fn build_stage(&self) -> Result<StageResult> {
        let lab = &self.lab;
        let mut out = StageResult::new(Stage::Build);
        out.info("grid_nodes", lab.grid.len());
        out.info("grid_spacing", lab.grid.spacing());
        out.info("rank_plus", lab.l_plus.rank());
        out.info("rank_minus", lab.l_minus.rank());
        out.info("lub_method", format!("{:?}", lab.lub.method));
        out.info("lub_iterations", lab.lub.iterations);
        out.info("lub_residual", lab.lub.residual);
        out.info("node_space_dim", lab.space.dim());
        out.info("node_space_modes", lab.space.mode_count());
        out.info("mode_space_dim", lab.mode_space.dim());

        let t_norm = lab.lub.t_op.norm();
        out.reports.push(InequalityReport::new("lub/norm", t_norm, 1.0, 1e-10, 0.0));
        for n in [1.0, 2.0, 4.0] {
            let tn = t_power(&lab.lub, n);
            for op in &lab.restrictions {
                let gap = &tn - op.abs_power(n);
                let lo = min_eigenvalue(&gap);
                out.reports.push(InequalityReport::new(format!("lub/dominance/n{n}/{}", op.label), -lo, 0.0, 1e-8, 0.0).noted("minus the least eigenvalue of T^n - |S|^n"));
            }
        }
        for p in [0.5, 1.0] {
            let lhs = schatten_norm(&CompactOperator::new(t_power(&lab.lub, p), "Tp"), 1.0);
            let rhs: f64 = lab.restrictions.iter().map(|op| schatten_norm(op, p).powf(p)).sum();
            out.reports.push(InequalityReport::new(format!("lub/trace/p{p}"), lhs, rhs, 1e-10, 0.0).with("p", p));
        }

        // ‖a(f_n)…a(f_1) P_E‖ ≤ (E/m)^{n/2} Π‖f_i‖.
        let space = &lab.space;
        let mut rng = lab.rng(ENERGY_STREAM);
        let mask = space.energy_mask(self.cfg().energy);
        for trial in 0..50 {
            let n = 1 + trial % 3;
            let fs: Vec<CVec> = (0..n)
                .map(|_| {
                    let v = CVec::from_fn(lab.grid.len(), |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
                    let scale = rng.gen_range(0.2..1.0) / v.norm();
                    v * C64::new(scale, 0.0)
                })
                .collect();
            let coeffs: Vec<Vec<C64>> = fs.iter().map(|f| space.mode_vector(f).coeffs).collect();
            let start = CVec::from_fn(space.dim(), |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
            let (lhs, resid) = lowering_product_norm(space, &coeffs, &mask, &start);
            let rhs = self.cfg().m_e().powf(0.5 * n as f64) * fs.iter().map(|f| f.norm()).product::<f64>();
            out.reports.push(InequalityReport::new(format!("energy_bound/{trial:02}"), lhs, rhs, 1e-8, 0.0).with("n", n).with("lanczos_residual", resid));
        }
        Ok(out)
    }

    fn spectrum_stage(&self) -> Result<StageResult> {
        let lab = &self.lab;
        let space = &lab.space;
        let modes = &self.modes;
        let mut out = StageResult::new(Stage::Spectrum);
        let indices = enumerate_multi_indices(modes.k, modes.m_e);
        out.info("t_leading", lab.lub.t.iter().take(12).copied().collect::<Vec<f64>>());
        out.info("p_e_rank", space.dim());
        out.info("retained_multi_indices", indices.len());
        out.info("expansion_pairs", indices.len() * indices.len());
        out.tables.push(Table::new("spectrum.csv", spectrum_csv(&lab.lub.t)));

        // Expansion against exact Weyl expectations.
        let mut rng = lab.rng(EXPANSION_STREAM);
        let k = modes.k;
        out.info("net_size", self.net.len());
        // Below the mass gap every vacuum-subtracted functional vanishes and the net is empty.
        let trials = if self.net.is_empty() { 0 } else { 50 };
        for trial in 0..trials {
            let phi = &self.net[trial % self.net.len()];
            let mut draw = || (0..k).map(|_| rng.gen_range(-0.8..0.8)).collect::<Vec<f64>>();
            let (cp, cm) = (draw(), draw());
            let arg = WeylArgument::from_coeffs(modes, &cp, &cm);
            let r = expansion_residual(modes, space, phi, &arg)?;
            out.reports.push(InequalityReport::new(format!("expansion/residual/{trial:02}"), r.residual, 1e-6, 0.0, 0.0).with("exact_re", r.exact_re).with("exact_im", r.exact_im));
        }

        let table_net: Vec<StateFunctional> = self.net.iter().take(self.cfg().net_size.min(40)).cloned().collect();
        let rows = expansion_table(modes, space, &table_net)?;
        let (worst, worst_row) = rows.iter().fold((0.0f64, None), |(w, wr), r| {
            let q = if r.s_bound > 0.0 { r.s_sampled / r.s_bound } else if r.s_sampled > 0.0 { f64::INFINITY } else { 0.0 };
            if q > w {
                (q, Some(r))
            } else {
                (w, wr)
            }
        });
        let failing = rows.iter().filter(|r| r.s_sampled > r.s_bound + 1e-10).count();
        let mut rep = InequalityReport::new("expansion/s_bound", worst, 1.0, 0.0, 0.0)
            .with("pairs", rows.len())
            .with("failing", failing)
            .with("net_size", table_net.len())
            .noted("largest sampled ‖S‖ / M_E^{(|μ|+|ν|)/2} t^μ t^ν over all retained pairs");
        if let Some(r) = worst_row {
            rep = rep.with("worst_pair", format!("{} {}", r.mu, r.nu));
        }
        rep.pass = rep.pass && failing == 0;
        out.reports.push(rep);
        out.tables.push(Table::new("expansion_table.csv", expansion_csv(&rows)));

        let cap = 2f64.powf(5.0 * modes.m_e);
        let args: Vec<WeylArgument> = (0..20)
            .map(|_| {
                let mut draw = || (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
                let (cp, cm) = (draw(), draw());
                let a = WeylArgument::from_coeffs(modes, &cp, &cm);
                a.scaled(1.0 / a.norm_sqr.sqrt())
            })
            .collect();
        let mut tau_max = 0.0f64;
        let mut tau_bound_max = 0.0f64;
        for mu in &indices {
            for nu in &indices {
                tau_bound_max = tau_bound_max.max(tau_norm_bound(mu, nu));
                for a in &args {
                    tau_max = tau_max.max(eval_tau_on_weyl(mu, nu, a).norm());
                }
            }
        }
        out.reports.push(InequalityReport::new("expansion/tau_evaluations", tau_max, cap, 0.0, 0.0).with("arguments", args.len()));
        out.reports.push(InequalityReport::new("expansion/tau_norm_bound", tau_bound_max, cap, 0.0, 0.0));
        Ok(out)
    }

    fn inequality_stage(&self) -> Result<StageResult> {
        let lab = &self.lab;
        let cfg = self.cfg();
        let grid = &lab.grid;
        let space = &lab.space;
        let bp = &self.params;
        let mut out = StageResult::new(Stage::Inequalities);
        out.info("c_eps_beta", bp.c_eps_beta);
        let eig = |j: usize| -> CVec { lab.lub.e.column(j).into_owned() };
        let top = 4.min(lab.lub.e.ncols());

        // Clustering of the two-point functions.
        let deltas: Vec<f64> = (1..=10).map(|i| 0.5 * i as f64 / cfg.m).collect();
        for j in 0..top {
            let e = eig(j);
            for (sign, v) in [("+", lab.l_plus.project(&e)), ("-", lab.l_minus.project(&e))] {
                let label = format!("e{j}{sign}");
                let mut damped_vals = Vec::new();
                for &d in &deltas {
                    let x = (0.0, d + 2.0 * cfg.r);
                    let (und, damped) = clustering_correlator(grid, &v, &format!("{label}/d{d}"), x, cfg.r, cfg.beta, cfg.epsilon, bp.c_eps_beta);
                    damped_vals.push(damped.lhs);
                    out.reports.extend(und);
                    out.reports.push(damped);
                }
                let rates = decay_rates(&deltas, &damped_vals);
                let slowest = rates.iter().copied().fold(f64::INFINITY, f64::min);
                let target = cfg.m * (1.0 - cfg.epsilon);
                out.reports.push(
                    InequalityReport::new(format!("clustering/rate/{label}"), 0.9 * target, slowest, 0.0, 0.0)
                        .with("rates", rates)
                        .noted("slowest consecutive decay rate of the damped correlator vs 0.9 m(1-ε)"),
                );
            }
        }

        // Harmonic bounds.
        for j in 0..top {
            let e = eig(j);
            out.reports.push(harmonic_bound_check(grid, space, &e, &format!("e{j}"), &[(0.0, 0.0)], cfg.energy)?);
            for sep in [2.0, 5.0, 10.0] {
                for n in 2..=3 {
                    let xs: Vec<Point> = (0..n).map(|k| (0.0, k as f64 * sep * 2.0 * cfg.r)).collect();
                    let r = harmonic_bound_check(grid, space, &e, &format!("e{j}/sep{sep}"), &xs, cfg.energy)?;
                    out.reports.push(r);
                }
            }
            out.reports.push(harmonic_integral_check(grid, space, &e, &format!("e{j}"), 64, 1.0 / 80.0, cfg.energy)?);
        }

        // N-point bounds on S and the p-norm chain.
        out.reports.push(InequalityReport::new("semibound/brace_N1", (brace_factor(1, bp.c_eps_beta, bp.m, bp.epsilon, 0.0) - 1.0).abs(), 0.0, 0.0, 0.0));
        for &n in &cfg.n_points {
            for &d in &cfg.separations {
                let xs = spatial_configuration(n, d / cfg.m, cfg.r);
                let sq = npoint_s_squared(&self.modes, space, &self.net, &xs)?;
                let reps = semibound_reports(&self.modes, &sq, &xs, cfg.r, bp);
                out.tables.push(Table::new(format!("semibound_N{n}_d{d}.csv"), semibound_csv(&reps)));
                out.reports.push(summarize(&format!("semibound/N{n}/d{d}"), &reps).with("N", n).with("delta", d));
                for &p in &cfg.p_list {
                    for mut r in pnorm_bound_chain(p, &self.modes, &sq, &lab.lub.t, &xs, cfg.r, bp)? {
                        r.name = format!("{}/d{d}", r.name);
                        out.reports.push(r);
                    }
                }
            }
        }
        let far = cfg.separations.iter().copied().fold(0.0, f64::max);
        if cfg.n_points.len() >= 2 && far > 0.0 {
            let d = far;
            let n_a = *cfg.n_points.iter().min().unwrap();
            let n_b = *cfg.n_points.iter().max().unwrap();
            for &p in &cfg.p_list {
                out.reports.push(chain_uniformity(p, &lab.lub.t, n_a, n_b, d / cfg.m, bp, 0.01));
            }
        }

        // Square integrability of translated expectations.
        let packet = one_particle_profile(lab);
        let psi = space.apply_creator(&space.mode_vector(&packet).coeffs, &space.vacuum());
        let f: CVec = lab.l_plus.columns.column(0).into_owned() * C64::new(0.8, 0.0);
        let mv = space.mode_vector(&f);
        let mixed = smooth_superposition(lab);
        for (label, phi) in [("one_particle", StateFunctional::pure(&psi)), ("superposition", StateFunctional::pure(&mixed).vacuum_subtract(space))] {
            let res = plancherel_check(space, &phi, &mv, &[8.0, 16.0, 32.0], 1.0 / 16.0, 1e-4)?;
            for mut r in res.reports {
                r.name = format!("{}/{label}", r.name);
                out.reports.push(r);
            }
        }
        Ok(out)
    }

    fn content_stage(&self) -> Result<StageResult> {
        let cfg = self.cfg();
        let lab = &self.lab;
        let bp = &self.params;
        let mut out = StageResult::new(Stage::Content);
        for n in 1..=3usize {
            for m in 0..=(2 * n as u32).min(4) {
                out.reports.push(lattice_count_check(m, n)?);
            }
        }
        for n in 1..=6usize {
            for c in 0..=4u32 {
                out.reports.push(additivity_count_check(n, c)?);
            }
        }
        for c in [0, 1] {
            let r = additivity_count_check(2, c)?;
            out.reports.push(InequalityReport::new(format!("additivity_equality[N=2,cE={c}]"), (r.lhs - r.rhs).abs(), 0.0, 0.0, 0.0));
        }

        let p = 0.5;
        let d = cfg.separations.iter().copied().fold(0.0, f64::max) / cfg.m;
        let mut ns: Vec<usize> = std::iter::once(1).chain(cfg.n_points.iter().copied()).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut rows = String::from("N,epsilon,greedy,ln_key_bound,ln_theorem_bound,pass\n");
        for &n in &ns {
            let xs = spatial_configuration(n, d, cfg.r);
            let theta = build_theta(&lab.space, &self.net, &self.observables, &xs)?;
            let pnorm = chain_final_bound(p, &lab.lub.t, n, d, bp);
            for eps in [0.05, 0.1, 0.25, 0.5] {
                let r = content_chain_check(&theta, eps, n, p, pnorm)?;
                let key = r.rhs;
                rows.push_str(&format!("{n},{eps},{},{key:e},{:e},{}\n", r.parameters["greedy"], r.parameters["ln_theorem_bound"].as_f64().unwrap_or(f64::NAN), r.pass));
                out.reports.push(r);
            }
        }
        out.tables.push(Table::new("content.csv", rows));
        let pnorm = chain_final_bound(p, &lab.lub.t, 2, d, bp);
        out.reports.push(log_growth_check(p, pnorm, cfg.epsilon, &[2, 4, 8])?);
        Ok(out)
    }

    fn relaxation_stage(&self) -> Result<StageResult> {
        let cfg = self.cfg();
        let lab = &self.lab;
        let space = &lab.space;
        let m = cfg.m;
        let mut out = StageResult::new(Stage::Relaxation);
        let mut rng = lab.rng(RELAX_STREAM);

        let center = (m, 0.0);
        let radius = 0.2 * m;
        let states = ball_states(space, center, radius);
        out.info("ball_states_r0.2", states.len());
        for i in 0..100 {
            let Some(phi) = random_ball_functional(space, &states, &mut rng, 1 + i % 3) else { break };
            let x = (rng.gen_range(-2.0..2.0) / m, rng.gen_range(-2.0..2.0) / m);
            let mut r = translation_deviation_check(space, &phi, &self.observables[i % self.observables.len()], x, radius)?;
            r.name = format!("translation_deviation/{i:03}");
            out.reports.push(r);
        }

        let xs = spatial_configuration(16, 5.0 / m, cfg.r);
        let rs: Vec<f64> = [0.8, 0.4, 0.2, 0.1].iter().map(|r| r * m).collect();
        out.scans.push(shrinking_norm_scan(space, &self.observables, center, &rs, &xs)?);

        let packet = one_particle_profile(lab);
        let psi = space.apply_creator(&space.mode_vector(&packet).coeffs, &space.vacuum());
        let phi = StateFunctional::pure(&psi);
        let ts: Vec<f64> = (1..=40).map(|i| 0.5 * i as f64 / m).collect();
        for (j, a) in self.observables.iter().take(4).enumerate() {
            let mut scan = timelike_scan(&lab.grid, space, &phi, a, (1.0, 0.0), &ts, Some(cfg.timelike_threshold))?;
            scan.name = format!("timelike_one_particle_{j}");
            let mut r = decay_ratio_check(&scan, 2.0 / m, 20.0 / m, 0.5)?;
            r.name = format!("timelike_decay/{j}");
            out.reports.push(r);
            out.scans.push(scan);
        }
        let vac = StateFunctional::pure(&space.vacuum());
        let mut scan = timelike_scan(&lab.grid, space, &vac, &self.observables[0], (1.0, 0.0), &ts, None)?;
        scan.name = "timelike_vacuum".into();
        let worst = scan.deviations.iter().copied().fold(0.0, f64::max);
        out.reports.push(InequalityReport::new("timelike_vacuum_fixed", worst, 0.0, 1e-14, 0.0));
        out.scans.push(scan);

        for mut scan in std::mem::take(&mut out.scans) {
            let file = format!("{}.csv", scan.name);
            out.tables.push(Table::new(file, scan.csv()));
            scan.checks.iter_mut().for_each(|c| c.name = format!("{}/{}", c.name, scan.name));
            out.scans.push(scan);
        }

        out.reports.push(low_energy_content(&lab.grid, 0.9 * m, &self.local_args, &mut rng, 40, cfg.epsilon)?);
        Ok(out)
    }
}

/// Normalized Gaussian momentum profile supported below `E`.
fn one_particle_profile(lab: &Lab) -> CVec {
    let e = lab.config.energy;
    let m = lab.config.m;
    let h = lab.grid.sample(|p| {
        let w = (m * m + p[0] * p[0]).sqrt();
        C64::new(if w <= e { (-0.5 * p[0] * p[0] / (m * m)).exp() } else { 0.0 }, 0.0)
    });
    let n = h.norm();
    &h / C64::new(n, 0.0)
}

/// `Ω + a*(g)Ω + a*(h)²Ω`, normalized, with narrow Gaussian profiles. Their
/// tails are negligible at the energy cutoff, so the state stays localized on
/// the periodic grid.
fn smooth_superposition(lab: &Lab) -> CVec {
    let space = &lab.space;
    let m = lab.config.m;
    let profile = |width: f64| {
        let v = lab.grid.sample(|p| C64::new((-width * p[0] * p[0] / (m * m)).exp(), 0.0));
        let n = v.norm();
        space.mode_vector(&(v / C64::new(n, 0.0))).coeffs
    };
    let (cg, ch) = (profile(2.0), profile(10.0));
    let one = space.apply_creator(&cg, &space.vacuum());
    let two = space.apply_creator(&ch, &space.apply_creator(&ch, &space.vacuum()));
    let v = space.vacuum() + one + two;
    let n = v.norm();
    v / C64::new(n, 0.0)
}

fn semibound_csv(reps: &[InequalityReport]) -> String {
    let mut s = String::from("name,lhs,rhs,margin,pass\n");
    for r in reps {
        s.push_str(&format!("{},{:e},{:e},{:e},{}\n", r.name, r.lhs, r.rhs, r.margin, r.pass));
    }
    s
}

/// One report standing for many: the largest `lhs / (rhs + tol)`.
fn summarize(name: &str, reps: &[InequalityReport]) -> InequalityReport {
    let failing = reps.iter().filter(|r| !r.pass).count();
    let mut worst = 0.0f64;
    let mut worst_name = String::new();
    for r in reps {
        let q = r.lhs / (r.rhs + r.tolerance + r.truncation_defect);
        if q > worst {
            worst = q;
            worst_name = r.name.clone();
        }
    }
    let mut rep = InequalityReport::new(name, worst, 1.0, 0.0, 0.0)
        .with("pairs", reps.len())
        .with("failing", failing)
        .with("worst", worst_name)
        .noted("largest lhs/(rhs + tolerance) over all retained pairs; per-pair values in the side table");
    rep.pass = failing == 0;
    rep
}

/// Run every requested stage.
pub fn run_stages(ctx: &Context, stages: &[Stage]) -> Result<Vec<StageResult>> {
    let results: Vec<Result<StageResult>> = {
        use rayon::prelude::*;
        stages.par_iter().map(|&s| ctx.run(s)).collect()
    };
    results.into_iter().collect()
}

/// Metadata block of the JSON report.
pub fn metadata(config: &RunConfig) -> Value {
    json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "seed": config.seed,
        "config": config,
    })
}
