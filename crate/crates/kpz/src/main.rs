use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use kpz::config::SGrid;
use kpz::output::write_atomic;
use kpz::run::{run, Format, RunConfig, Task};
use kpz::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "kpz",
    version,
    about = "Geometric last-passage percolation: simulation, exact formulas, KPZ limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Instance document (JSON); see docs/schemas.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent. Written only after the run succeeds.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
    /// RNG seed for `simulate` (default 0, or the document's `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the parallel engines (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Convergence tolerance for node doubling (exact 1e-9, asymptotic 1e-9, tw 1e-7).
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo estimate of a multi-point probability.
    Simulate,
    /// Exact probability by dynamic programming or a truncated sum.
    Oracle,
    /// Multi-point probability from the block Fredholm formula.
    Exact,
    /// Limiting multi-time distribution.
    Asymptotic,
    /// F_GUE over a grid of s.
    Tw {
        #[arg(long, allow_hyphen_values = true)]
        from: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        to: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Nyström nodes (the check runs at twice this).
        #[arg(long)]
        nodes: Option<usize>,
    },
    /// Run the acceptance criteria and print a pass/fail table.
    Validate {
        /// Comma-separated subset of criteria, e.g. `1,6,9`.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
}

fn task(cmd: Command) -> anyhow::Result<Task> {
    Ok(match cmd {
        Command::Simulate => Task::Simulate,
        Command::Oracle => Task::Oracle,
        Command::Exact => Task::Exact,
        Command::Asymptotic => Task::Asymptotic,
        Command::Tw { from, to, step, nodes } => {
            let grid = match (from, to, step) {
                (None, None, None) => None,
                (f, t, s) => {
                    let d = kpz::run::TW_GRID;
                    Some(SGrid {
                        from: f.unwrap_or(d.from),
                        to: t.unwrap_or(d.to),
                        step: s.unwrap_or(d.step),
                    })
                }
            };
            Task::Tw { grid, nodes }
        }
        Command::Validate { only } => Task::Validate { only },
    })
}

fn real_main(cli: Cli) -> anyhow::Result<bool> {
    let document = match &cli.config {
        Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
        None => None,
    };
    let cfg = RunConfig {
        task: task(cli.command)?,
        document,
        format: match cli.format {
            OutFormat::Json => Format::Json,
            OutFormat::Csv => Format::Csv,
        },
        seed: cli.seed,
        tol: cli.tol,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        anyhow::ensure!(n > 0, CliError::Usage("--workers must be at least 1".into()));
        pool = pool.num_threads(n);
    }
    let artifact = pool.build()?.install(|| run(&cfg))?;
    write_atomic(cli.out.as_deref(), &artifact.bytes).context("writing output")?;
    Ok(artifact.ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match real_main(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(1, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
