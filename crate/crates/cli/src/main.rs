//! `rho-priv`: construct recoverable query-response mechanisms, compute
//! their exact privacy, evaluate bounds and asymptotics, compare schemes,
//! and verify the numerical invariants end to end.
//!
//! Exit codes: 0 success, 2 validation, 3 realm, 4 size, 5 invariant
//! violation from `verify`.

mod cmds;
mod emit;
mod error;
mod instance;

use clap::{Parser, Subcommand, ValueEnum};

use error::CliError;
use instance::load_instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    /// Privacy-optimal row-lifted mechanism.
    Wo,
    /// Privacy-optimal add-noise mechanism.
    Vo,
    /// Predicate-privacy-optimal row-lifted mechanism.
    WoPred,
    /// Identity-predicate reduction (experimental; rejects invalid displays).
    WoDblprime,
    /// Paired-block add-noise scheme (levels above one half).
    V1,
    /// Uniform-block add-noise scheme (levels at or below one half).
    V2,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Wo => "wo",
            Scheme::Vo => "vo",
            Scheme::WoPred => "wo-pred",
            Scheme::WoDblprime => "wo-dblprime",
            Scheme::V1 => "v1",
            Scheme::V2 => "v2",
        }
    }
}

#[derive(Parser)]
#[command(
    name = "rho-priv",
    version,
    about = "Recoverable query-response privacy toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a mechanism and write its matrix report.
    Mechanism {
        /// Instance file (JSON), or `-` for stdin.
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        rho: f64,
        #[arg(long, value_enum)]
        scheme: Scheme,
        #[arg(long)]
        out: Option<String>,
    },
    /// Exact or simulated privacy of n i.i.d. responses through a scheme.
    Privacy {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        rho: f64,
        #[arg(long, value_enum)]
        scheme: Scheme,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Exact computation (default).
        #[arg(long, conflicts_with = "simulate")]
        exact: bool,
        /// Monte-Carlo estimate instead of exact enumeration.
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cap on exact enumeration size.
        #[arg(long, default_value_t = rho_privacy::privacy::DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Emit privacy and bound curves over a level grid as CSV.
    Curve {
        #[arg(long = "in")]
        input: String,
        /// Grid as start:stop:step, e.g. 0:1:0.01.
        #[arg(long)]
        grid: String,
        #[arg(long, default_value_t = 1)]
        n: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Compare the universal block scheme against repeated optimal responses.
    Compare {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 6)]
        nmax: usize,
        #[arg(long, default_value_t = rho_privacy::privacy::DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Run every applicable invariant suite; nonzero exit on any failure.
    Verify {
        #[arg(long = "in")]
        input: String,
        #[arg(long)]
        rho: f64,
        /// Grid step for the search oracle.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Monte-Carlo seed count (0 disables simulation checks).
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 200_000)]
        trials: u64,
        #[arg(long, default_value_t = rho_privacy::privacy::DEFAULT_ENUMERATION_CAP)]
        cap: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<String>,
    },
}

fn worker_count(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("RHO_PRIV_WORKERS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
    .max(1)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Mechanism {
            input,
            rho,
            scheme,
            out,
        } => {
            let loaded = load_instance(&input)?;
            cmds::cmd_mechanism(&loaded, rho, scheme, out.as_deref())
        }
        Command::Privacy {
            input,
            rho,
            scheme,
            n,
            exact: _,
            simulate,
            trials,
            seed,
            cap,
            workers,
            out,
        } => {
            let loaded = load_instance(&input)?;
            cmds::cmd_privacy(
                &loaded,
                rho,
                scheme,
                n,
                simulate,
                trials,
                seed,
                cap,
                worker_count(workers),
                out.as_deref(),
            )
        }
        Command::Curve {
            input,
            grid,
            n,
            out,
        } => {
            let loaded = load_instance(&input)?;
            cmds::cmd_curve(&loaded, &grid, n, out.as_deref())
        }
        Command::Compare {
            input,
            rho,
            nmax,
            cap,
            out,
        } => {
            let loaded = load_instance(&input)?;
            cmds::cmd_compare(&loaded, rho, nmax, cap, out.as_deref())
        }
        Command::Verify {
            input,
            rho,
            step,
            seeds,
            trials,
            cap,
            workers,
            out,
        } => {
            let loaded = load_instance(&input)?;
            cmds::cmd_verify(
                &loaded,
                rho,
                step,
                seeds,
                trials,
                cap,
                worker_count(workers),
                out.as_deref(),
            )
        }
    }
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rho-priv: {err}");
            std::process::ExitCode::from(err.exit_code())
        }
    }
}
