//! `discopula`: copula arrays, Yule's Υ and the quasi-independence test for
//! contingency tables, from the command line.
//!
//! Every invocation writes one JSON document to stdout. Failures are written
//! as `{"error": {"kind", "message", ...}}` with a nonzero exit status.

mod render;
mod report;
mod scenario;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use discopula::io::{parse_table, CsvOptions, TableDocument, TableFormat};
use discopula::projection::IpfConfig;
use discopula::stats::InferenceOptions;
use serde_json::Value;

use crate::report::CliError;

#[derive(Debug, Parser)]
#[command(name = "discopula", version, about = "Discrete copula estimation and inference for contingency tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Input format; guessed from the file extension or content when omitted.
    #[arg(long, global = true, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// CSV grid has a header row of column labels and a first column of row labels.
    #[arg(long, global = true)]
    header: bool,
    /// Use raw relative frequencies instead of mixing in the quasi-uniform array.
    #[arg(long, global = true)]
    no_smoothing: bool,
    /// Largest allowed margin deviation of an IPF result.
    #[arg(long, global = true, default_value_t = IpfConfig::default().margin_tol)]
    ipf_tol: f64,
    /// Sweep budget for IPF.
    #[arg(long, global = true, default_value_t = IpfConfig::default().max_sweeps)]
    ipf_max_sweeps: usize,
    /// Print a plain-text rendering instead of JSON.
    #[arg(long, global = true)]
    human: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Empirical probability array, its copula array and IPF diagnostics.
    Copula {
        /// Table file, or `-` for stdin.
        table: PathBuf,
    },
    /// Yule's concordance coefficient with a normal confidence interval (two-way tables).
    Yule {
        table: PathBuf,
        /// Confidence level of the interval.
        #[arg(long, default_value_t = 0.95)]
        level: f64,
    },
    /// Wald test of quasi-independence on the table's support.
    QuasiTest {
        table: PathBuf,
        /// Basis matrix file (one row per cell in φ-order); rounded entries are snapped onto the kernel.
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Constraint rows and dependence-space basis for the table's support.
    Basis {
        table: PathBuf,
        /// Use the sign-alternating contrast basis (full support only).
        #[arg(long)]
        canonical: bool,
    },
    /// Monte Carlo study of the large-sample approximations.
    Simulate {
        /// Scenario file (JSON).
        scenario: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

impl CommonArgs {
    fn inference(&self) -> Result<InferenceOptions, CliError> {
        let ipf = IpfConfig { margin_tol: self.ipf_tol, max_sweeps: self.ipf_max_sweeps, ..IpfConfig::default() };
        ipf.validate()?;
        Ok(InferenceOptions { ipf, smoothing: !self.no_smoothing })
    }
}

fn read_input(path: &Path) -> Result<String, CliError> {
    if path == Path::new("-") {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| CliError::io(format!("stdin: {e}")))?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
    }
}

fn load_table(path: &Path, common: &CommonArgs) -> Result<TableDocument, CliError> {
    let text = read_input(path)?;
    let format = match &common.format {
        Some(f) => f.parse()?,
        None => TableFormat::from_path(path).unwrap_or(if text.trim_start().starts_with('{') {
            TableFormat::Json
        } else {
            TableFormat::Csv
        }),
    };
    Ok(parse_table(&text, format, CsvOptions { header: common.header })?)
}

fn run(cli: &Cli) -> Result<Value, CliError> {
    let common = &cli.common;
    let opts = common.inference()?;
    match &cli.command {
        Command::Copula { table } => report::copula(&load_table(table, common)?, &opts),
        Command::Yule { table, level } => report::yule(&load_table(table, common)?, *level, &opts),
        Command::QuasiTest { table, basis } => {
            let doc = load_table(table, common)?;
            let fixture = basis.as_deref().map(read_input).transpose()?;
            report::quasi_test(&doc, fixture.as_deref(), &opts)
        }
        Command::Basis { table, canonical } => report::basis(&load_table(table, common)?, *canonical, &opts),
        Command::Simulate { scenario, seed } => {
            configure_threads()?;
            let scn = scenario::parse(&read_input(scenario)?, *seed, &opts.ipf)?;
            report::simulate(&scn, &opts)
        }
    }
}

/// `DISCOPULA_THREADS` caps the worker pool used by `simulate`.
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DISCOPULA_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::usage(format!("DISCOPULA_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(doc) => {
            let text = if cli.common.human {
                render::render(&doc)
            } else {
                serde_json::to_string_pretty(&doc).expect("report serialises") + "\n"
            };
            // Write errors on a closed stdout are ignored.
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(err) => {
            if cli.common.human {
                eprintln!("error ({}): {}", err.kind, err.message);
            } else {
                let text = serde_json::to_string_pretty(&err.to_json()).expect("error serialises");
                let _ = writeln!(std::io::stdout(), "{text}");
            }
            ExitCode::from(err.exit_code)
        }
    }
}
