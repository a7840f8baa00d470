use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hkmetric::cli::{self, ScanField, ScanOptions, VerifyOptions};
use hkmetric::verify::{DEFAULT_POINTS, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "hkmetric", version, about = "Build and check hyper-Kähler metrics from exponential-sum spectra")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Field {
    Locus,
    V,
    Asd,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a spectrum file and check its expansion.
    Validate { path: PathBuf },
    /// Print the expanded exponential terms.
    Expand { path: PathBuf },
    /// Run every residual suite on sampled points.
    Verify {
        path: PathBuf,
        #[arg(long, default_value_t = DEFAULT_POINTS)]
        points: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// `lo:hi` or `lo:hi,lo:hi,lo:hi,lo:hi`
        #[arg(long = "box", allow_hyphen_values = true)]
        bounds: Option<String>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the metric and its eigenvalues at a point.
    Metric {
        path: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Print curvature diagnostics at a point.
    Curvature {
        path: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        at: String,
    },
    /// Evaluate a field on an n^4 grid as CSV.
    Scan {
        path: PathBuf,
        #[arg(long, default_value_t = 5)]
        grid: usize,
        #[arg(long = "box", allow_hyphen_values = true)]
        bounds: Option<String>,
        #[arg(long, value_enum, default_value = "locus")]
        field: Field,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { cli::EXIT_INPUT as u8 } else { 0 });
        }
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = match args.command {
        Command::Validate { path } => cli::cmd_validate(&path, &mut out, &mut err),
        Command::Expand { path } => cli::cmd_expand(&path, &mut out, &mut err),
        Command::Verify { path, points, seed, bounds, report } => {
            cli::cmd_verify(&path, &VerifyOptions { points, seed, bounds, report }, &mut out, &mut err)
        }
        Command::Metric { path, at } => cli::cmd_metric(&path, &at, &mut out, &mut err),
        Command::Curvature { path, at } => cli::cmd_curvature(&path, &at, &mut out, &mut err),
        Command::Scan { path, grid, bounds, field, output } => {
            let field = match field {
                Field::Locus => ScanField::Locus,
                Field::V => ScanField::V,
                Field::Asd => ScanField::Asd,
            };
            cli::cmd_scan(&path, &ScanOptions { grid, bounds, field, output }, &mut out, &mut err)
        }
    };
    ExitCode::from(code as u8)
}
