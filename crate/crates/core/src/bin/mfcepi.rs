use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mfc_sir::io::{self, RunArgs};
use mfc_sir::solver::Progress;

#[derive(Parser)]
#[command(name = "mfcepi", version, about = "Controlled spatial SIR solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write its output directory.
    Run(RunArgs),
}

/// Sizes the global rayon pool from `MFCEPI_THREADS` when set.
fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("MFCEPI_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("MFCEPI_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let Cli {
        command: Command::Run(args),
    } = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let config = match io::parse_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut log = |p: &Progress| {
        eprintln!(
            "{:>7} P={:.8e} rel={:.2e} res=[{:.2e} {:.2e} {:.2e}]",
            p.iteration, p.objective, p.rel_error, p.residuals[0], p.residuals[1], p.residuals[2]
        );
    };
    match io::run(&config, &mut log) {
        Ok(outcome) => {
            let [s, i, r] = [0, 1, 2].map(|g| *outcome.masses[g].last().unwrap_or(&f64::NAN));
            eprintln!("terminal masses S={s:.6} I={i:.6} R={r:.6}");
            if outcome.converged {
                ExitCode::SUCCESS
            } else {
                eprintln!("iteration cap reached before convergence");
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
