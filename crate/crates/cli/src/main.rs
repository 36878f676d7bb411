//! Command-line front end: evaluates, converts, checks and simulates models
//! described by JSON model files or CSV tables.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use table::System;

#[derive(Parser, Debug)]
#[command(
    name = "lifeline",
    version,
    about = "Order statistics, diagonal sections and hazard rates of minimally stable lifetimes"
)]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "LIFELINE_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Convert between order statistics, diagonal sections and minima rate profiles
    Convert(ConvertArgs),
    /// Check exchangeability or minimal stability of a rate model
    Check(CheckArgs),
    /// Tabulate quantities of a model
    Eval(EvalArgs),
    /// Draw lifetimes from a rate model
    Simulate(SimulateArgs),
    /// Compare a simulated batch with the analytic laws
    Gof(GofArgs),
    /// Draw a minimally stable rate table with given stage totals
    Generate(GenerateArgs),
    /// Build and check copulas
    #[command(subcommand)]
    Copula(CopulaCommand),
    /// Archimedean generator utilities
    #[command(subcommand)]
    Archimedean(ArchimedeanCommand),
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub from: System,
    #[arg(long, value_enum)]
    pub to: System,
    /// JSON model file or CSV table
    #[arg(long)]
    pub model: PathBuf,
    /// Marginal for a diagonal table (CSV t,G or JSON)
    #[arg(long)]
    pub marginal: Option<PathBuf>,
    /// Points of the output grid (u for diagonals, t otherwise) when the input has none
    #[arg(long, default_value_t = 513)]
    pub grid: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Where to write the marginal (t,G) when converting to diagonals
    #[arg(long)]
    pub marginal_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Property {
    Exchangeable,
    MinStable,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub property: Property,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Time points for the minimal-stability check
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Probes for the exchangeability check
    #[arg(long, default_value_t = 256)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub marginal: Option<PathBuf>,
    /// marginal, orderstat:k, min:d, diagonal:d, profile:d, mu:d, psi:j1,j2.., survivor:a1,a2..
    #[arg(long = "quantity", short = 'q', required = true)]
    pub quantities: Vec<String>,
    /// Explicit abscissae, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub at: Option<Vec<f64>>,
    /// Number of grid points when --at is not given
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Right end of the time grid (default: where the last failure has probability 0.999)
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Grid points for the empirical summary
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Batch CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Empirical summary (JSON)
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GofArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub batch: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub grid: usize,
    #[arg(long, default_value_t = 4.0)]
    pub sigma: f64,
    /// Quantities to compare (default: margin, order statistics, minima, survivor sets)
    #[arg(long = "quantity", short = 'q')]
    pub quantities: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Stage totals L(1),..,L(r), comma separated
    #[arg(long = "L", value_delimiter = ',', required = true)]
    pub l: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub uniform_frailty: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum CopulaCommand {
    /// Write a skew FGM 2-copula, optionally tabulated
    SkewFgm {
        #[arg(long, allow_negative_numbers = true)]
        theta: f64,
        /// Tabulate on this many points per axis
        #[arg(long)]
        tabulate: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cyclic 3-copulas of a 2-copula
    Cyclic3 {
        #[arg(long)]
        seed: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the reversed-cycle twin
        #[arg(long)]
        twin_out: Option<PathBuf>,
    },
    /// Extend a diagonal-dependent copula by one dimension
    Extend {
        #[arg(long)]
        copula: PathBuf,
        /// One-based argument permutation
        #[arg(long, value_delimiter = ',')]
        perm: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// D + alpha (C1 - C2)
    Mix {
        #[arg(long)]
        d: PathBuf,
        #[arg(long)]
        c1: PathBuf,
        #[arg(long)]
        c2: PathBuf,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        d_lower: f64,
        #[arg(long)]
        c_upper: f64,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Average over all argument permutations
    Symmetrize {
        #[arg(long)]
        copula: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid check of diagonal dependence and exchangeability
    Check {
        #[arg(long)]
        copula: PathBuf,
        #[arg(long, value_enum, default_value_t = CopulaProperty::All)]
        property: CopulaProperty,
        #[arg(long, default_value_t = 33)]
        grid: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CopulaProperty {
    Dd,
    Exchangeable,
    All,
}

#[derive(Subcommand, Debug)]
pub enum ArchimedeanCommand {
    /// Check the generator of an archimedean or schur_constant model
    Validate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover a generator from a tabulated top diagonal section
    Recover {
        /// {"family":"tabulated_delta","r":..,"grid":[..],"values":[..]}
        #[arg(long)]
        delta: PathBuf,
        #[arg(long, default_value_t = 200)]
        m_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    ExitCode::SUCCESS
                }
                _ => {
                    let _ = e.print();
                    if e.kind() != ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        eprintln!("\n{}", Cli::command().render_long_help());
                    }
                    ExitCode::from(1)
                }
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(commands::Outcome::Pass) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Fail) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
