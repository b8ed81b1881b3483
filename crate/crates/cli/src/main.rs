use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nuclab::config::RunConfig;
use nuclab::report::{emit_report, totals};
use nuclab::suite::{run_stages, stages_for, Context};

#[derive(Parser)]
#[command(name = "nuclab", version, about = "Phase-space checks for the free massive scalar field on a momentum grid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file with configuration overrides.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for report.json, summary.txt and CSV tables.
    #[arg(long, global = true, default_value = "nuclab-out")]
    out: PathBuf,
    /// Multiplies every comparison tolerance.
    #[arg(long, global = true)]
    tol_scale: Option<f64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Grid, local subspaces, T and the energy bounds.
    Build,
    /// Spectrum of T and the rank-one expansion.
    Spectrum,
    /// Clustering, harmonic, N-point, p-norm chain and Plancherel checks.
    Inequalities,
    /// ε-content counts and bounds.
    Content,
    /// Timelike relaxation and shrinking spectral support.
    Relaxation,
    /// Every suite.
    All,
    /// Print the embedded default configuration as TOML.
    PrintDefaults,
}

impl Command {
    fn suite(self) -> &'static str {
        match self {
            Command::Build => "build",
            Command::Spectrum => "spectrum",
            Command::Inequalities => "inequalities",
            Command::Content => "content",
            Command::Relaxation => "relaxation",
            Command::All | Command::PrintDefaults => "all",
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            toml::from_str::<RunConfig>(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(s) = cli.tol_scale {
        cfg.tol_scale = s;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Command::PrintDefaults = cli.command {
        match toml::to_string(&RunConfig::default()) {
            Ok(s) => {
                print!("{s}");
                return ExitCode::SUCCESS;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: invalid configuration: {e}");
            return ExitCode::from(2);
        }
    };
    let stages = stages_for(cli.command.suite()).expect("known suite");
    let results = match Context::build(&cfg).and_then(|ctx| run_stages(&ctx, &stages)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let files = match emit_report(&cli.out, &cfg, &results) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    for st in &results {
        let reps: Vec<_> = st.all_reports().collect();
        let failed = reps.iter().filter(|r| !r.pass).count();
        println!("{:<13} {:>5} checks  {:>3} failed", st.stage.name(), reps.len(), failed);
        for r in reps.iter().filter(|r| !r.pass) {
            println!("  FAIL {} (lhs {:.6e}, rhs {:.6e})", r.name, r.lhs, r.rhs);
        }
    }
    println!("wrote {} files to {}", files.len(), cli.out.display());
    if totals(&results).failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
