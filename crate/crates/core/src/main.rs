use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ocp_wrm::exec::Execution;
use ocp_wrm::experiment::{self, parse_config, RunConfig};
use ocp_wrm::newton::SolverConfig;
use ocp_wrm::Error;

const EXIT_DIVERGED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "ocp-wrm", version, about = "Parabolic economic control solvers and experiment sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method at one (eps, L, p) and write report.csv and fields.csv.
    Solve(RunArgs),
    /// Build an iteration table over the (L, p, eps) axes.
    Sweep(RunArgs),
    /// Write the sampled data of a test case as CSV.
    DumpCase(RunArgs),
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct RunArgs {
    /// Flat key=value configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    test: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    eps: Option<String>,
    /// Comma-separated list of overlap widths in cells.
    #[arg(long)]
    overlap_cells: Option<String>,
    /// Comma-separated list.
    #[arg(long)]
    robin_p: Option<String>,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    nx: Option<String>,
    #[arg(long)]
    nt: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Outer stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Disable the thread pool.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => parse_config(path)?,
            None => RunConfig::default(),
        };
        let flags = [
            ("test", &self.test),
            ("eps", &self.eps),
            ("overlap_cells", &self.overlap_cells),
            ("robin_p", &self.robin_p),
            ("method", &self.method),
            ("seed", &self.seed),
            ("nx", &self.nx),
            ("nt", &self.nt),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).map_err(|m| Error::Config(format!("--{}: {m}", key.replace('_', "-"))))?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn solver(&self) -> Result<SolverConfig, Error> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("--tol must be positive, got {}", self.tol)));
        }
        Ok(SolverConfig {
            tol: self.tol,
            execution: if self.sequential { Execution::Sequential } else { Execution::Parallel },
            ..SolverConfig::default()
        })
    }
}

fn run(command: &Command) -> Result<bool, Error> {
    match command {
        Command::Solve(args) => {
            let (cfg, solver) = (args.resolve()?, args.solver()?);
            let outcome = experiment::run_case(&cfg, &solver)?;
            println!("{}", experiment::REPORT_HEADER);
            println!("{}", outcome.record.csv_row());
            if let Some(f) = &outcome.record.failure {
                eprintln!("solver failure: {f}");
            }
            Ok(outcome.record.converged())
        }
        Command::Sweep(args) => {
            let (cfg, solver) = (args.resolve()?, args.solver()?);
            let table = experiment::sweep_table(&cfg, &solver)?;
            print!("{}", table.to_markdown());
            let all = table.records().all(|r| r.converged());
            Ok(all)
        }
        Command::DumpCase(args) => {
            let cfg = args.resolve()?;
            let eps = cfg.eps[0];
            let (spec, grid) = experiment::problem_for(&cfg, eps)?;
            let path = cfg.out.join("case.csv");
            experiment::write_case(&path, &spec, &grid)?;
            println!("{}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_DIVERGED),
        Err(e @ (Error::Config(_) | Error::Parameter(_) | Error::Decomposition(_))) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
