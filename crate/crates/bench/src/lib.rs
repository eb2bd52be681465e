//! Scenario files, horizon sweeps and report output for the CFS planner.

pub mod bench;
pub mod emit;
pub mod scenario;

pub use bench::{problem_for, run_benchmark, BenchReport, BenchRow, Trace};
pub use emit::{emit, load_report, EmitError, Format};
pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError, ScenarioFile};
