//! Horizon sweeps over a scenario.

use crate::scenario::Scenario;
use cfs_core::{
    cfs_solve, initial_reference, CfsConfig, CfsError, CostModel, Termination, TrajectoryProblem,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// One row of the summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub h: usize,
    pub final_cost: f64,
    pub iterations: usize,
    pub total_time_ms: f64,
    /// `total_time_ms / iterations` (zero when no sub-problem was solved).
    pub per_iter_time_ms: f64,
    pub build_time_ms: f64,
    pub solve_time_ms: f64,
    pub termination: String,
    pub kkt_residual: Option<f64>,
    pub initial_feasibility_error: f64,
}

impl BenchRow {
    pub fn is_infeasible(&self) -> bool {
        self.termination == Termination::Infeasible.as_str()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::StepTol.as_str()
            || self.termination == Termination::CostTol.as_str()
    }
}

/// Per-iteration data of one run; index 0 is the initial reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub h: usize,
    pub cost: Vec<f64>,
    pub feas_err: Vec<f64>,
    pub step_norm: Vec<f64>,
    /// `∇J(x^k)·(x^{k-1} - x^k)` where `x^{k-1}` was feasible.
    pub descent: Vec<Option<f64>>,
    pub final_waypoints: Vec<[f64; 2]>,
    /// Waypoints of every iterate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub rows: Vec<BenchRow>,
    pub traces: Vec<Trace>,
}

impl BenchReport {
    pub fn any_infeasible(&self) -> bool {
        self.rows.iter().any(BenchRow::is_infeasible)
    }

    /// The report with timings zeroed, for comparing runs.
    pub fn without_timings(&self) -> BenchReport {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.total_time_ms = 0.0;
            row.per_iter_time_ms = 0.0;
            row.build_time_ms = 0.0;
            row.solve_time_ms = 0.0;
        }
        r
    }
}

/// The problem solved for horizon `h`.
pub fn problem_for(scenario: &Scenario, h: usize) -> Result<TrajectoryProblem, CfsError> {
    let reference = initial_reference(scenario.start, scenario.goal, h);
    let cost = CostModel::new(&reference, scenario.weights.for_horizon(h))?;
    Ok(TrajectoryProblem::new(
        cost,
        scenario.obstacles_for(h),
        scenario.margin,
    )?)
}

fn points(x: &nalgebra::DVector<f64>) -> Vec<[f64; 2]> {
    x.as_slice().chunks(2).map(|c| [c[0], c[1]]).collect()
}

/// Runs one solve per horizon from the straight-line reference. Rows that
/// end infeasible are recorded and the sweep continues.
pub fn run_benchmark(
    scenario: &Scenario,
    horizons: &[usize],
    config: &CfsConfig,
) -> Result<BenchReport, CfsError> {
    let mut rows = Vec::with_capacity(horizons.len());
    let mut traces = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let problem = problem_for(scenario, h)?;
        let x0 = initial_reference(scenario.start, scenario.goal, h);
        let t0 = Instant::now();
        let report = cfs_solve(&problem, &x0, config)?;
        let total_time_ms = t0.elapsed().as_secs_f64() * 1e3;
        let it = &report.iterates;
        let per_iter = if report.iterations == 0 {
            0.0
        } else {
            total_time_ms / report.iterations as f64
        };
        rows.push(BenchRow {
            h,
            final_cost: report.final_cost(),
            iterations: report.iterations,
            total_time_ms,
            per_iter_time_ms: per_iter,
            build_time_ms: it.iter().map(|r| r.build_time_ms).sum(),
            solve_time_ms: it.iter().map(|r| r.solve_time_ms).sum(),
            termination: report.termination.as_str().to_string(),
            kkt_residual: report
                .kkt_residual
                .is_finite()
                .then_some(report.kkt_residual),
            initial_feasibility_error: it[0].feasibility_error,
        });
        traces.push(Trace {
            h,
            cost: it.iter().map(|r| r.cost).collect(),
            feas_err: it.iter().map(|r| r.feasibility_error).collect(),
            step_norm: it.iter().map(|r| r.step_norm).collect(),
            descent: it.iter().map(|r| r.descent).collect(),
            final_waypoints: points(&it.last().expect("initial iterate").x),
            trajectories: Some(it.iter().map(|r| points(&r.x)).collect()),
        });
    }
    Ok(BenchReport {
        scenario: scenario.name.clone(),
        rows,
        traces,
    })
}
