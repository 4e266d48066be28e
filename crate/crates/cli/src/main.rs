//! `sideout`: batch driver for the contact-log analytics pipeline.
//!
//! Subcommands run one stage each (simulate, ingest, fit-pwp, fit-sos,
//! attribute, report); every stage writes its artifacts plus a
//! `manifest.json` into `--out`. Failures print machine-readable JSON on
//! stderr and exit 1 (usage), 2 (data validation) or 3 (numerical).

use clap::{Parser, Subcommand, ValueEnum};
use sideout_core::attribution::{AggregateBasis, AggregateLevel};
use sideout_core::mixed::FitOptions;
use sideout_core::pipeline::{
    run_attribute, run_fit_pwp, run_fit_sos, run_ingest, run_report, run_simulate, ReportOptions,
};
use sideout_core::synth::SyntheticConfig;
use sideout_core::{Error, ErrorCategory};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "sideout",
    version,
    about = "Point win probability and Points Gained pipeline"
)]
struct Cli {
    /// Worker threads for parallel stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Seed override for stages that draw randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Treat any rejected row or dropped point as fatal.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Level {
    Player,
    Team,
    Conference,
}

// The shared prefix matches the kebab-case flag values (per-set, ...).
#[allow(clippy::enum_variant_names)]
#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    PerSet,
    PerContact,
    PerOpportunity,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate contact/lineup files into a point-log archive.
    Ingest {
        #[arg(long)]
        contacts: PathBuf,
        #[arg(long)]
        lineups: PathBuf,
        /// JSON column map; the canonical header is assumed when absent.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the transition model and sideout-probability table.
    FitPwp {
        #[arg(long)]
        points: PathBuf,
        /// Minimum state visits before backing off to a coarser state.
        #[arg(long, default_value_t = 20)]
        support: u64,
        #[arg(long, default_value_t = 100)]
        steps: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the serve model and the seven attack outcome models.
    FitSos {
        #[arg(long)]
        points: PathBuf,
        /// Directory holding fit-pwp outputs.
        #[arg(long)]
        pwp: PathBuf,
        #[arg(long, default_value_t = 500)]
        max_iters: u32,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce the per-contact Points Gained ledger.
    Attribute {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        pwp: PathBuf,
        /// Directory holding fit-sos outputs.
        #[arg(long)]
        sos: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate the ledger into report tables and histogram data.
    Report {
        #[arg(long)]
        points: PathBuf,
        /// Directory holding attribute outputs.
        #[arg(long)]
        attribution: PathBuf,
        #[arg(long, value_enum, default_value_t = Level::Player)]
        level: Level,
        #[arg(long, value_enum, default_value_t = Basis::PerSet)]
        basis: Basis,
        /// Suppress player columns with fewer credited contacts.
        #[arg(long, default_value_t = 0)]
        min_contacts: u64,
        /// Keep only the top N rows of the aggregate table.
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic season in the ingest file formats.
    Simulate {
        /// SyntheticConfig JSON; defaults apply when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Usage | ErrorCategory::Io => 1,
        ErrorCategory::Data => 2,
        ErrorCategory::Numerical => 3,
    }
}

fn category_name(category: ErrorCategory) -> &'static str {
    match category {
        ErrorCategory::Usage => "usage",
        ErrorCategory::Io => "io",
        ErrorCategory::Data => "data",
        ErrorCategory::Numerical => "numerical",
    }
}

fn fail(category: ErrorCategory, message: String) -> ! {
    let code = exit_code(category);
    eprintln!(
        "{}",
        serde_json::json!({
            "error": message,
            "category": category_name(category),
            "exit_code": code,
        })
    );
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), Error> {
    if cli.threads > 0 {
        // Ignore the error from a second initialization (tests may re-enter).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    match cli.command {
        Command::Ingest {
            contacts,
            lineups,
            schema,
            out,
        } => {
            run_ingest(&contacts, &lineups, schema.as_deref(), cli.strict, &out)?;
        }
        Command::FitPwp {
            points,
            support,
            steps,
            out,
        } => {
            run_fit_pwp(&points, support, steps, &out)?;
        }
        Command::FitSos {
            points,
            pwp,
            max_iters,
            tol,
            out,
        } => {
            let options = FitOptions { max_iters, tol };
            run_fit_sos(&points, &pwp, &options, &out)?;
        }
        Command::Attribute {
            points,
            pwp,
            sos,
            out,
        } => {
            run_attribute(&points, &pwp, &sos, &out)?;
        }
        Command::Report {
            points,
            attribution,
            level,
            basis,
            min_contacts,
            top,
            out,
        } => {
            let options = ReportOptions {
                level: match level {
                    Level::Player => AggregateLevel::Player,
                    Level::Team => AggregateLevel::Team,
                    Level::Conference => AggregateLevel::Conference,
                },
                basis: match basis {
                    Basis::PerSet => AggregateBasis::PerSet,
                    Basis::PerContact => AggregateBasis::PerContact,
                    Basis::PerOpportunity => AggregateBasis::PerOpportunity,
                },
                min_contacts,
                top,
            };
            run_report(&points, &attribution, &options, &out)?;
        }
        Command::Simulate { config, out } => {
            let mut config: SyntheticConfig = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::io(path.display().to_string(), e))?;
                    serde_json::from_str(&text)?
                }
                None => SyntheticConfig::default(),
            };
            if let Some(seed) = cli.seed {
                config.seed = seed;
            }
            run_simulate(&config, &out)?;
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own help/version output stays human-readable.
            if e.use_stderr() {
                fail(ErrorCategory::Usage, e.to_string());
            }
            e.exit();
        }
    };
    if let Err(e) = run(cli) {
        fail(e.category(), e.to_string());
    }
}
