use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twonvw_cli::config::{self, ConfigError, Solver};
use twonvw_cli::run::{self, FitInput, Options, RunError};

#[derive(Parser)]
#[command(name = "twonvw", version, about = "Solvers for nematic director and order-parameter waves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the admissibility clauses of the configured potential.
    ValidatePotential(Common),
    /// Constant-speed case, Duhamel/Picard solver.
    RunSemilinear(Common),
    /// Full system, semi-Lagrangian fixed-point solver.
    RunQuasilinear(Common),
    /// Two-component Hunter-Saxton markers.
    RunHs2(Common),
    /// Convergence of the slow-time reduction over a sweep of epsilon.
    RunAsymptotic {
        #[command(flatten)]
        common: Common,
        /// Comma-separated epsilons, overriding asymptotic.epsilons.
        #[arg(long, value_name = "LIST", value_delimiter = ',')]
        epsilon_sweep: Option<Vec<f64>>,
    },
    /// Least-squares order of a JSON list of (h, error) pairs.
    FitOrder(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; overrides outputs.out_dir (default "out").
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

fn execute(cli: Cli) -> Result<(Vec<String>, bool), RunError> {
    let (common, solver, sweep) = match cli.command {
        Command::ValidatePotential(c) => (c, Some(Solver::ValidatePotential), None),
        Command::RunSemilinear(c) => (c, Some(Solver::Semilinear), None),
        Command::RunQuasilinear(c) => (c, Some(Solver::Quasilinear), None),
        Command::RunHs2(c) => (c, Some(Solver::Hs2), None),
        Command::RunAsymptotic { common, epsilon_sweep } => (common, Some(Solver::Asymptotic), epsilon_sweep),
        Command::FitOrder(c) => (c, None, None),
    };
    let quiet = common.quiet;
    let Some(solver) = solver else {
        let text = std::fs::read_to_string(&common.config)
            .map_err(|e| ConfigError::Io { path: common.config.display().to_string(), message: e.to_string() })?;
        let input: FitInput = serde_json::from_str(&text)
            .map_err(|e| ConfigError::Parse { line: e.line(), column: e.column(), message: e.to_string() })?;
        return Ok((run::run_fit(&input, common.out.as_deref())?, quiet));
    };
    let cfg = config::load(&common.config)?;
    // validate-potential accepts any configuration; the runs must match their subcommand.
    if solver != Solver::ValidatePotential && cfg.solver != solver {
        return Err(ConfigError::invalid(
            "solver",
            format!("configuration is for {:?}, but the subcommand runs {:?}", cfg.solver.name(), solver.name()),
        )
        .into());
    }
    let out_dir = common
        .out
        .or_else(|| cfg.outputs.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let opts = Options {
        out_dir,
        base_dir: common.config.parent().map_or_else(|| Path::new(".").to_path_buf(), Path::to_path_buf),
        epsilon_sweep: sweep,
    };
    let mut cfg = cfg;
    if solver == Solver::ValidatePotential {
        cfg.solver = Solver::ValidatePotential;
    }
    Ok((run::run(cfg, &opts)?, quiet))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok((lines, quiet)) => {
            if !quiet {
                for l in lines {
                    println!("{l}");
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
