mod commands;
mod config;
mod error;
mod table;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{BranchKind, MasterKind, Settings};
use crate::config::ExperimentConfig;
use crate::error::{validation, CliError, CliResult};
use crate::table::{Format, Sink};

/// Ising minimization experiments on Möbius-ladder graphs.
#[derive(Debug, Parser)]
#[command(name = "isinglab", version)]
struct Cli {
    /// TOML experiment configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout if omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Ensemble size, sample count or start budget, depending on the command
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Success probability of every solver over a coupling grid
    Sweep {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        j_grid: Option<Vec<f64>>,
        /// Subset of HT, CIM-I, CIM-II, CIM-III
        #[arg(long, value_delimiter = ',')]
        variants: Option<Vec<String>>,
        /// Skip the quantum-annealing column
        #[arg(long)]
        no_qa: bool,
    },
    /// Coupling spectrum and thresholds
    Graph {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        j_grid: Option<Vec<f64>>,
    },
    /// Basin point cloud from random starts at a fixed pump
    Basins {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        j: Option<f64>,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        p: f64,
    },
    /// Critical points of the soft-spin energy
    Critical {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        j: Option<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p: Option<Vec<f64>>,
    },
    /// Analytic branch regions or saddle barriers
    Branches {
        #[arg(long, value_enum, default_value = "region")]
        kind: BranchKind,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        j_grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        p_grid: Option<Vec<f64>>,
    },
    /// Quantum annealing time series
    QaRun {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        j: Option<f64>,
        /// Apply the symmetry-breaking field
        #[arg(long)]
        field: bool,
    },
    /// Master-equation or imaginary-time annealing time series
    MasterRun {
        #[arg(long, value_enum, default_value = "sa")]
        mode: MasterKind,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        j: Option<f64>,
        #[arg(long)]
        field: bool,
    },
    /// Exhaustive ground state and energy histogram
    Oracle {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        j: Option<f64>,
    },
    /// Run the acceptance checks
    Verify {
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<usize>>,
    },
}

fn open_output(path: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(t) = cli.threads.or(cfg.threads) {
        if t == 0 {
            return Err(validation("threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| validation(e.to_string()))?;
    }
    let format = cli.format.or(cfg.format).unwrap_or_default();
    let out = cli.out.clone().or_else(|| cfg.out.clone());
    let set = Settings {
        seed: cli.seed.or(cfg.seed).unwrap_or(1),
        runs: cli.runs,
        cfg,
    };
    let mut sink = Sink::new(format, open_output(out.as_ref())?);
    let mut code = ExitCode::SUCCESS;
    match cli.command {
        Command::Sweep {
            n,
            j_grid,
            variants,
            no_qa,
        } => commands::sweep(&set, &mut sink, n, j_grid, variants, no_qa)?,
        Command::Graph { n, j_grid } => commands::graph(&set, &mut sink, n, j_grid)?,
        Command::Basins { n, j, p } => commands::basins(&set, &mut sink, n, j, p)?,
        Command::Critical { n, j, p } => commands::critical(&set, &mut sink, n, j, p)?,
        Command::Branches {
            kind,
            n,
            j_grid,
            p_grid,
        } => commands::branches(&set, &mut sink, kind, n, j_grid, p_grid)?,
        Command::QaRun { n, j, field } => commands::qa_run(&set, &mut sink, n, j, field)?,
        Command::MasterRun { mode, n, j, field } => commands::master_run(&set, &mut sink, mode, n, j, field)?,
        Command::Oracle { n, j } => commands::oracle(&set, &mut sink, n, j)?,
        Command::Verify { only } => {
            let failed = commands::verify(&mut sink, only)?;
            if failed > 0 {
                eprintln!("{failed} check(s) failed");
                code = ExitCode::from(1);
            }
        }
    }
    sink.finish()?;
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
