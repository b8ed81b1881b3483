//! One PASS/FAIL line per acceptance criterion at the default configuration.
//! Runs without the libtest harness so the lines are never captured.

use std::process::ExitCode;
use std::time::Instant;

use nuclab::bounds::InequalityReport;
use nuclab::config::RunConfig;
use nuclab::report::report_json;
use nuclab::suite::{run_stages, Context, Stage, StageResult};

struct Criterion {
    id: &'static str,
    title: &'static str,
    stage: Stage,
    prefixes: &'static [&'static str],
    /// Minimum number of matching checks.
    min_checks: usize,
}

const CRITERIA: &[Criterion] = &[
    Criterion { id: "AC1", title: "LUB norm, dominance and trace bounds", stage: Stage::Build, prefixes: &["lub/"], min_checks: 15 },
    Criterion { id: "AC2", title: "energy bounds on 50 random tuples", stage: Stage::Build, prefixes: &["energy_bound/"], min_checks: 50 },
    Criterion { id: "AC3", title: "expansion residuals, S and tau bounds", stage: Stage::Spectrum, prefixes: &["expansion/"], min_checks: 53 },
    Criterion { id: "AC4", title: "undamped and damped clustering, decay rate", stage: Stage::Inequalities, prefixes: &["clustering/"], min_checks: 40 },
    Criterion { id: "AC5", title: "harmonic bounds (a) and (b)", stage: Stage::Inequalities, prefixes: &["harmonic/"], min_checks: 28 },
    Criterion { id: "AC6", title: "N-point bound and brace factor", stage: Stage::Inequalities, prefixes: &["semibound/"], min_checks: 5 },
    Criterion { id: "AC7", title: "p-norm chain links and N-uniformity", stage: Stage::Inequalities, prefixes: &["chain/"], min_checks: 10 },
    Criterion {
        id: "AC8",
        title: "lattice, additivity, greedy content and log growth",
        stage: Stage::Content,
        prefixes: &["lattice_count", "additivity_", "epsilon_content", "theorem1_log_growth"],
        min_checks: 13 + 30 + 2 + 4 + 1,
    },
    Criterion {
        id: "AC9",
        title: "translation deviation, shrinking norm, timelike decay, content below the gap",
        stage: Stage::Relaxation,
        prefixes: &["translation_deviation/", "shrinking_", "timelike_", "low_energy_content"],
        min_checks: 100 + 3 + 1 + 1,
    },
    Criterion { id: "AC10", title: "Plancherel agreement and box doubling", stage: Stage::Inequalities, prefixes: &["plancherel/"], min_checks: 4 },
];

fn matching<'a>(results: &'a [StageResult], c: &Criterion) -> Vec<&'a InequalityReport> {
    results
        .iter()
        .filter(|s| s.stage == c.stage)
        .flat_map(|s| s.all_reports())
        .filter(|r| c.prefixes.iter().any(|p| r.name.starts_with(p)))
        .collect()
}

fn line(id: &str, pass: bool, title: &str, detail: &str) {
    println!("{id:<5} {}  {title}: {detail}", if pass { "PASS" } else { "FAIL" });
}

fn main() -> ExitCode {
    let cfg = RunConfig::default();
    let t0 = Instant::now();
    let ctx = match Context::build(&cfg) {
        Ok(c) => c,
        Err(e) => {
            println!("acceptance: context build failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let results = match run_stages(&ctx, &Stage::ALL) {
        Ok(r) => r,
        Err(e) => {
            println!("acceptance: suite failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("acceptance: default configuration, seed {}, {:.1} s", cfg.seed, t0.elapsed().as_secs_f64());

    let mut failed = 0;
    for c in CRITERIA {
        let reps = matching(&results, c);
        let bad: Vec<&str> = reps.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        let worst = reps.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        let pass = reps.len() >= c.min_checks && bad.is_empty();
        let mut detail = format!("{} checks (need {}), smallest margin {worst:.3e}", reps.len(), c.min_checks);
        if !bad.is_empty() {
            detail += &format!(", failing: {}", bad.join(" "));
        }
        line(c.id, pass, c.title, &detail);
        failed += usize::from(!pass);
    }

    // Identical config and seed must give identical numeric content.
    let again = Context::build(&cfg).and_then(|ctx2| run_stages(&ctx2, &[Stage::Spectrum, Stage::Content]));
    let (pass, detail) = match again {
        Ok(r2) => {
            let r1: Vec<StageResult> = results.iter().filter(|s| matches!(s.stage, Stage::Content | Stage::Spectrum)).cloned().collect();
            let a = report_json(&cfg, &r1).to_string();
            let b = report_json(&cfg, &r2).to_string();
            (a == b, format!("spectrum and content reports from a fresh context, {} bytes, identical: {}", a.len(), a == b))
        }
        Err(e) => (false, format!("rerun failed: {e}")),
    };
    line("AC11", pass, "determinism", &detail);
    failed += usize::from(!pass);

    println!("acceptance: {} criteria, {failed} failed", CRITERIA.len() + 1);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
