//! `adrflat run | verify | sweep`.

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use adrflat::acceptance::Faults;
use clap::{Parser, Subcommand, ValueEnum};

use commands::{Failure, Overrides};
use config::ScenarioFile;

#[derive(Parser)]
#[command(name = "adrflat", version, about = "Disturbance-observer based flat tracking control of a two-mass system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write log, metrics and figures.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, env = "ADRFLAT_OUT", default_value = "out")]
        out: PathBuf,
        /// conventional | brunovsky_robust | polymatrix_robust (prefixes accepted).
        #[arg(long)]
        controller: Option<String>,
        #[arg(long)]
        dob_order: Option<usize>,
        /// rad/s
        #[arg(long)]
        dob_bandwidth: Option<f64>,
        /// Integration step (s).
        #[arg(long)]
        dt: Option<f64>,
        /// Simulated time (s).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the acceptance checks and print a pass/fail table.
    Verify {
        /// Only checks whose id, name or tag matches (e.g. `dob`).
        #[arg(long)]
        filter: Option<String>,
        /// Deliberately break an invariant to exercise the failure path.
        #[arg(long, value_enum)]
        inject_fault: Option<Fault>,
    },
    /// Run a scenario once per value of a numeric key.
    Sweep {
        scenario: PathBuf,
        /// Dotted key (`observer.bandwidth`) or alias (`dob-bandwidth`, `dob-order`, `dt`, `duration`, `seed`).
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, env = "ADRFLAT_OUT", default_value = "out")]
        out: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Fault {
    CorruptGain,
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            controller,
            dob_order,
            dob_bandwidth,
            dt,
            duration,
            seed,
        } => {
            let mut file = ScenarioFile::load(&scenario)?;
            Overrides { controller, dob_order, dob_bandwidth, dt, duration, seed }.apply(&mut file)?;
            println!("seed: {}", file.sim.seed);
            let m = commands::run_file(&file, &out)?;
            println!(
                "{}: rmse_tracking = {:.4e} m on [{}, {}] s; artifacts in {}",
                file.controller.variant,
                m.rmse_tracking,
                m.t0,
                m.t1,
                out.display()
            );
            Ok(())
        }
        Command::Verify { filter, inject_fault } => {
            let faults = Faults {
                corrupt_gain: matches!(inject_fault, Some(Fault::CorruptGain)),
            };
            commands::verify(filter.as_deref(), faults)
        }
        Command::Sweep { scenario, param, values, out, jobs } => {
            let file = ScenarioFile::load(&scenario)?;
            println!("seed: {}", file.sim.seed);
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rows = commands::sweep(&file, &param, &values, &out, jobs)?;
            for r in &rows {
                println!("{param} = {}: rmse_tracking {:.4e}, est_rmse {:.4e} ({})", r.value, r.rmse_tracking, r.est_rmse, r.status);
            }
            if rows.iter().any(|r| r.status == "unstable") {
                return Err(Failure::Unstable("at least one sweep run became unstable".into()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
