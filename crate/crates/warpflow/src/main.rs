use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use warpflow::cli;

/// Mean curvature flow with density of spherical curves in rotationally
/// symmetric 3-spaces.
#[derive(Parser)]
#[command(name = "warpflow", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write its time series, snapshots and
    /// outcome report.
    Run { config: PathBuf },
    /// Sweep a grid of (r0, theta0) cells and write the phase matrix.
    Grid {
        config: PathBuf,
        /// Comma-separated initial radii.
        #[arg(long, value_delimiter = ',', required = true)]
        r0: Vec<f64>,
        /// Comma-separated initial polar angles.
        #[arg(long, value_delimiter = ',', required = true)]
        theta0: Vec<f64>,
        /// Concurrent cells.
        #[arg(short = 'j', long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the closed-form Gaussian predictions for a configuration.
    Oracle { config: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let code = match run(args) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            1
        }
    };
    ExitCode::from(code)
}

fn run(args: Args) -> Result<u8, cli::CliError> {
    match args.command {
        Command::Run { config } => {
            let config = cli::load_config(&config)?;
            let report = cli::run_single(&config)?;
            println!(
                "outcome: {} (report: {})",
                report.outcome.tag(),
                report.report_path.display()
            );
            Ok(report.exit_code as u8)
        }
        Command::Grid {
            config,
            r0,
            theta0,
            jobs,
        } => {
            let config = cli::load_config(&config)?;
            let report = cli::run_phase_grid(&config, &r0, &theta0, jobs)?;
            let agreed = report
                .cells
                .iter()
                .filter(|c| c.agree == Some(true))
                .count();
            let compared = report.cells.iter().filter(|c| c.agree.is_some()).count();
            println!(
                "{} cells written to {} ({agreed}/{compared} agree with the oracle)",
                report.cells.len(),
                report.matrix_path.display()
            );
            Ok(0)
        }
        Command::Oracle { config } => {
            let config = cli::load_config(&config)?;
            print!("{}", cli::oracle_report(&config)?);
            Ok(0)
        }
    }
}
