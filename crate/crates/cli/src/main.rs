//! Command-line front end: LP bounds, exact benchmarks, simulations and the
//! worked examples.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stochmatch::algorithms::LpMode;
use stochmatch::formulations::FormulationKind;

use report::Format;

#[derive(Parser, Debug)]
#[command(
    name = "stochmatch",
    version,
    about = "Online stochastic matching with patience"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 20240301)]
    pub seed: u64,
    /// Monte Carlo trials.
    #[arg(long, global = true, default_value_t = 100_000)]
    pub trials: usize,
    /// LP feasibility and optimality tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Sampling fraction of the unknown-graph ROM algorithm.
    #[arg(long, global = true, default_value_t = 0.367879441)]
    pub alpha: f64,
    /// How LP-new is solved: `colgen` or `enum`.
    #[arg(long, global = true, default_value = "colgen")]
    pub lp_mode: LpMode,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub out: Format,
    /// Worker threads for simulations; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub parallelism: usize,
}

#[derive(Args, Debug, Clone)]
pub struct Source {
    /// JSON instance file (a graph, or a type graph with rates and horizon).
    #[arg(conflicts_with = "example")]
    pub input: Option<PathBuf>,
    /// Built-in instance: stochasticity-gap, order-gap, half-rom,
    /// single-offline or noncommittal-gap.
    #[arg(long)]
    pub example: Option<String>,
    /// Parameter of the built-in instance (n or eps).
    #[arg(long)]
    pub param: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimal values of LP relaxations.
    Solve {
        #[command(flatten)]
        source: Source,
        /// Formulations to solve; repeatable. Defaults to every one that fits.
        #[arg(long = "kind")]
        kinds: Vec<FormulationKind>,
    },
    /// Exact offline and online benchmarks.
    Bench {
        #[command(flatten)]
        source: Source,
        /// Benchmarks to compute; repeatable. Defaults to all.
        #[arg(long = "quantity", value_enum)]
        quantities: Vec<BenchQuantity>,
        /// Raise the size limits of the exponential benchmarks.
        #[arg(long)]
        wide: bool,
    },
    /// Monte Carlo estimate of an online algorithm's expected value.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_enum, default_value = "plain")]
        algorithm: Algorithm,
        /// Fixed arrival order such as `2,0,1`; random order when absent.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
    },
    /// Worked examples with their expected values checked.
    Examples {
        #[arg(value_enum, default_value = "all")]
        name: ExampleName,
        /// n or eps of the chosen example.
        #[arg(long)]
        param: Option<f64>,
    },
    /// Parameter sweeps over instance families.
    Sweep {
        #[arg(value_enum)]
        family: Family,
        /// Comma-separated eps values for `half-rom`.
        #[arg(long, value_delimiter = ',', default_value = "0.5,0.1,0.01")]
        eps: Vec<f64>,
        /// Sizes as `a..b` (inclusive) or a comma list.
        #[arg(long)]
        n: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchQuantity {
    Committal,
    Noncommittal,
    OrderGap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    /// Known graph, one LP solve up front.
    Plain,
    /// Known graph, random order, arrival-time thresholds.
    Modified,
    /// Graph revealed online, random order.
    UnknownRom,
    /// Known type graph, i.i.d. arrivals.
    Iid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExampleName {
    All,
    OrderGap,
    NoncommittalGap,
    HalfRom,
    SingleOffline,
    StochasticityGap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Family {
    HalfRom,
    SingleOffline,
    Gnnp,
    UnknownRom,
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
    let outcome = match cli.command {
        Command::Solve { source, kinds } => commands::solve(&cli.common, &source, &kinds),
        Command::Bench {
            source,
            quantities,
            wide,
        } => commands::bench(&cli.common, &source, &quantities, wide),
        Command::Simulate {
            source,
            algorithm,
            order,
        } => commands::simulate(&cli.common, &source, algorithm, order),
        Command::Examples { name, param } => commands::examples(&cli.common, name, param),
        Command::Sweep { family, eps, n } => {
            commands::sweep(&cli.common, family, &eps, n.as_deref())
        }
    };
    match outcome {
        Ok(output) => {
            if let Err(e) = output.emit(cli.common.out) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            if output.checks.iter().all(|c| c.pass) {
                ExitCode::SUCCESS
            } else {
                for c in output.checks.iter().filter(|c| !c.pass) {
                    eprintln!(
                        "check failed: {} {}: observed {}, expected {}",
                        c.instance, c.quantity, c.observed, c.expected
                    );
                }
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
