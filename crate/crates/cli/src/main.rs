//! `bsde-lab`: batch runs of the solver, the condition checks, the truncation
//! ladder and the stability sweeps, driven by one TOML file per run.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bsde-lab", version, about)]
struct Cli {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "BSDE_WORKERS")]
    workers: Option<usize>,

    /// Record wall times in reports and traces. Output is then no longer
    /// reproducible byte for byte.
    #[arg(long, global = true)]
    timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Run configuration; built-in defaults when omitted.
    config: Option<PathBuf>,

    /// Override a leaf of the configuration, e.g. `numerics.solver.paths=2000`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the configured problem by Picard iteration.
    Solve(RunArgs),
    /// Test the generator against the listed assumptions.
    Check(RunArgs),
    /// Run a perturbation family and judge the stability metrics.
    Stability(RunArgs),
    /// Solve along the truncation ladder and report inter-level distances.
    TruncateStudy(RunArgs),
    /// Evaluate the Bihari and Gronwall bounds and the Osgood divergence test.
    Bihari(RunArgs),
    /// Print the generator catalog with parameter schemas as JSON.
    ListGenerators,
    /// Print the fully defaulted configuration as TOML.
    ShowConfig(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    let ctx = commands::Ctx { timing: cli.timing };
    let result = match cli.command {
        Command::ListGenerators => commands::list_generators(),
        Command::Solve(a) => commands::load(a.config, &a.overrides).and_then(|c| commands::solve(&c, &ctx)),
        Command::Check(a) => commands::load(a.config, &a.overrides).and_then(|c| commands::check(&c, &ctx)),
        Command::Stability(a) => commands::load(a.config, &a.overrides).and_then(|c| commands::stability(&c, &ctx)),
        Command::TruncateStudy(a) => {
            commands::load(a.config, &a.overrides).and_then(|c| commands::truncate_study(&c, &ctx))
        }
        Command::Bihari(a) => commands::load(a.config, &a.overrides).and_then(|c| commands::bihari(&c, &ctx)),
        Command::ShowConfig(a) => commands::load(a.config, &a.overrides).and_then(|c| commands::show_config(&c)),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
