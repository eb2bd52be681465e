use cfs_bench::{emit, load_scenario, run_benchmark, Format};
use cfs_core::CfsConfig;
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Run the CFS planner over a range of horizons.
#[derive(Parser, Debug)]
#[command(name = "cfs-bench", version)]
struct Args {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Comma-separated horizons; defaults to the scenario's list.
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<usize>>,
    /// Step tolerance on the trajectory; defaults to 1e-5.
    #[arg(long)]
    eps1: Option<f64>,
    /// Absolute cost tolerance; defaults to 1e-8·(1 + J(x⁰)).
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output file (json) or directory (csv). Prints the summary to stdout
    /// when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Include the waypoints of every iterate.
    #[arg(long)]
    emit_trajectories: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let mut config = CfsConfig::default();
    if let Some(e) = args.eps1 {
        config.eps1 = e;
    }
    config.eps2 = args.eps2;
    if let Some(m) = args.max_iter {
        config.max_iter = m;
    }
    let horizons = args.horizons.unwrap_or_else(|| scenario.horizons.clone());
    if horizons.is_empty() || horizons.contains(&0) {
        eprintln!("error: horizons must be positive");
        return ExitCode::from(1);
    }
    let report = match run_benchmark(&scenario, &horizons, &config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(e) = emit(&report, args.format, path, args.emit_trajectories) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
        None => {
            println!(
                "{:>5} {:>14} {:>5} {:>10} {:>9}  termination",
                "h", "Cost", "Iter", "Time[ms]", "dT[ms]"
            );
            for r in &report.rows {
                println!(
                    "{:>5} {:>14.4} {:>5} {:>10.2} {:>9.3}  {}",
                    r.h,
                    r.final_cost,
                    r.iterations,
                    r.total_time_ms,
                    r.per_iter_time_ms,
                    r.termination
                );
            }
        }
    }
    if report.any_infeasible() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
