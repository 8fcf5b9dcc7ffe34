use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use schroreg::scenario::{Mode, Scenario};
use schroreg_cli::run::run;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Kernels,
    Spectrum,
    Regulate,
    Observe,
    Closedloop,
    Verify,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Kernels => Mode::Kernels,
            ModeArg::Spectrum => Mode::Spectrum,
            ModeArg::Regulate => Mode::Regulate,
            ModeArg::Observe => Mode::Observe,
            ModeArg::Closedloop => Mode::Closedloop,
            ModeArg::Verify => Mode::Verify,
        }
    }
}

/// Backstepping output regulation for the anti-stable Schrödinger equation.
///
/// Exit codes: 0 success, 1 verification failures, 2 invalid configuration,
/// 3 solvability failure, 4 simulation divergence.
#[derive(Debug, Parser)]
#[command(name = "schroreg", version)]
struct Cli {
    mode: ModeArg,
    /// Scenario JSON; the built-in reference scenario when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    n_cells: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let scenario = match &cli.config {
        Some(path) => Scenario::load(path),
        None => Ok(Scenario::reference()),
    };
    let result = scenario.and_then(|s| run(cli.mode.into(), &s.with_numerics(cli.n_cells, cli.dt, cli.horizon), &cli.out));
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", cli.out.join(f).display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
