use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;
mod settings;

use commands::Failure;

/// Spectra, gap labels, resonance tongues and quantum walks for CMV matrices
/// with quasi-periodic and period-two Verblunsky coefficients.
#[derive(Parser)]
#[command(name = "cmvq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rotation-number scan and gap detection; writes spectrum.csv and gaps.json.
    #[command(alias = "gaps")]
    Spectrum(Common),
    /// Traces one resonance tongue and compares its opening slope with the prediction.
    Tongue(Common),
    /// Evolves a coined walk and verifies its conjugation to a CMV matrix.
    Qwalk(Common),
    /// Checks truncated-matrix eigenvalues against a previously computed gaps.json.
    Oracle(Common),
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// Model file (JSON), optionally with command sections.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Cocycle iterations per rotation-number estimate.
    #[arg(long, default_value_t = 200_000)]
    pub n_iter: usize,
    /// Number of theta grid points for scans.
    #[arg(long, default_value_t = 512)]
    pub grid: usize,
    /// Largest |k| entry searched for gap labels.
    #[arg(long, default_value_t = 10)]
    pub kmax: i64,
    /// Angular bisection tolerance for gap edges and tongue boundaries.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    /// Seed for randomized inputs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Spectrum(c) => commands::spectrum(c),
        Command::Tongue(c) => commands::tongue(c),
        Command::Qwalk(c) => commands::qwalk(c),
        Command::Oracle(c) => commands::oracle(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
