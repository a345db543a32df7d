//! `chaoskit`: verification harness and calculator for iterated Malliavin
//! matrix determinants of pairs of multiple Wiener integrals.

mod commands;
mod report;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use chaoskit::mc::{DEFAULT_BAND, DEFAULT_SAMPLES};
use clap::{Parser, Subcommand};

use commands::PairSource;
use report::{emit, Format, Render, VerifyReport};
use suites::{Suite, SuiteConfig};

const EXIT_FAILED_CHECK: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "chaoskit", version)]
#[command(about = "Wiener chaos tensor identities and iterated Malliavin matrix determinants")]
struct Cli {
    /// Base seed for every random draw
    #[arg(long, global = true, env = "CHAOSKIT_SEED", default_value_t = 1)]
    seed: u64,

    /// Report format
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    output: Format,

    /// Write the report here instead of stdout
    #[arg(short = 'o', global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run randomized identity checks and report each one
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,

        /// Largest dimension; trials cycle over 2..=dim
        #[arg(long, default_value_t = 3)]
        dim: usize,

        /// Largest chaos order of the random tensors
        #[arg(long, default_value_t = 4)]
        max_order: usize,

        /// Random instances per suite
        #[arg(long, default_value_t = 20)]
        trials: usize,

        /// Monte Carlo samples per estimate
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,

        #[arg(long, default_value_t = 1e-9)]
        tol_rel: f64,
    },

    /// Closed-form E det Λ^(k) with its term breakdown
    Edet {
        #[command(flatten)]
        source: PairSource,

        /// Comma-separated derivative orders (default: all)
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,

        /// Skip the symbolic chaos-expansion oracle
        #[arg(long)]
        no_symbolic: bool,

        /// Add a Monte Carlo estimate with this many samples
        #[arg(long)]
        samples: Option<usize>,

        #[arg(long, default_value_t = DEFAULT_BAND)]
        band: f64,
    },

    /// Decide whether the law of (F, G) has a density
    Density {
        #[command(flatten)]
        source: PairSource,

        /// Zero threshold for det C (default 1e-10 n!² ‖f‖² ‖g‖²)
        #[arg(long)]
        tol_abs: Option<f64>,
    },

    /// Monte Carlo estimates of E det Λ^(k) against the closed form
    Mc {
        #[command(flatten)]
        source: PairSource,

        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<usize>,

        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,

        /// Acceptance band in standard errors
        #[arg(long, default_value_t = DEFAULT_BAND)]
        band: f64,

        /// Also write every sample as CSV
        #[arg(long, value_name = "PATH")]
        dump: Option<PathBuf>,
    },

    /// Check the covariance inequality on many random equal-order pairs
    Sweep {
        /// Comma-separated orders n (default: 2..=max-order)
        #[arg(long, value_delimiter = ',')]
        order: Vec<usize>,

        #[arg(long, default_value_t = 6)]
        max_order: usize,

        /// Comma-separated dimensions
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        dim: Vec<usize>,

        #[arg(long, default_value_t = 1000)]
        trials: usize,

        #[arg(long, default_value_t = 1e-9)]
        tol_rel: f64,

        /// Report every pair (lhs, rhs, ratio, holds) instead of per-cell summaries in CSV
        #[arg(long)]
        per_pair: bool,
    },

    /// Write a random pair file
    Gen {
        #[arg(long, default_value_t = 2)]
        dim: usize,

        /// Order n of F
        #[arg(long, default_value_t = 2)]
        order: usize,

        /// Order m of G (defaults to n)
        #[arg(long)]
        m: Option<usize>,

        /// Make G = c F
        #[arg(long, value_name = "C", allow_hyphen_values = true)]
        proportional: Option<f64>,
    },
}

fn emit_report<R: Render>(cli: &Cli, report: &R, passed: bool) -> Result<u8, String> {
    emit(report, cli.output, cli.out.as_deref()).map_err(|e| format!("writing report: {e}"))?;
    Ok(if passed { 0 } else { EXIT_FAILED_CHECK })
}

fn run(cli: &Cli) -> Result<u8, String> {
    let seed = cli.seed;
    let lib = |e: chaoskit::Error| e.to_string();
    match &cli.command {
        Command::Verify {
            suite,
            dim,
            max_order,
            trials,
            samples,
            tol_rel,
        } => {
            let cfg = SuiteConfig {
                dim: *dim,
                max_order: *max_order,
                trials: *trials,
                samples: *samples,
                seed,
                tol_rel: *tol_rel,
            };
            let checks = suites::run(*suite, &cfg).map_err(lib)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            let report = VerifyReport {
                suite: suite.name().to_string(),
                seed,
                passed: checks.len() - failed,
                failed,
                checks,
            };
            for c in report.checks.iter().filter(|c| !c.passed) {
                eprintln!(
                    "FAILED {} {}: observed {} expected {} tolerance {}",
                    c.suite, c.name, c.observed, c.expected, c.tolerance
                );
            }
            emit_report(cli, &report, failed == 0)
        }
        Command::Edet {
            source,
            k,
            no_symbolic,
            samples,
            band,
        } => {
            let pair = source.load(seed).map_err(lib)?;
            let report =
                commands::edet(&pair, k, !no_symbolic, *samples, *band, seed).map_err(lib)?;
            let ok = report.consistent;
            emit_report(cli, &report, ok)
        }
        Command::Density { source, tol_abs } => {
            let pair = source.load(seed).map_err(lib)?;
            let report = commands::density(&pair, *tol_abs).map_err(lib)?;
            let ok = report.consistent;
            emit_report(cli, &report, ok)
        }
        Command::Mc {
            source,
            k,
            samples,
            band,
            dump,
        } => {
            let pair = source.load(seed).map_err(lib)?;
            let report =
                commands::mc(&pair, k, *samples, *band, seed, dump.as_deref()).map_err(lib)?;
            let ok = report.results.iter().all(|r| r.covers);
            emit_report(cli, &report, ok)
        }
        Command::Sweep {
            order,
            max_order,
            dim,
            trials,
            tol_rel,
            per_pair,
        } => {
            let orders: Vec<usize> = if order.is_empty() {
                (2..=*max_order).collect()
            } else {
                order.clone()
            };
            if orders.is_empty() {
                return Err("no orders to sweep: --max-order must be at least 2".into());
            }
            let report =
                commands::sweep(&orders, dim, *trials, *tol_rel, seed, *per_pair).map_err(lib)?;
            let ok = report.passed();
            emit_report(cli, &report, ok)
        }
        Command::Gen {
            dim,
            order,
            m,
            proportional,
        } => {
            let file = commands::gen(*dim, *order, *m, *proportional, seed).map_err(lib)?;
            emit_report(cli, &file, true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
