//! Convex feasible set construction and the outer CFS iteration.
//!
//! At a reference `x^r` every constraint `φ_{j,q}(x_q) ≥ 0` is replaced by a
//! convex subset of its feasible region:
//!
//! - affine `φ`: the half-plane `φ ≥ 0` itself;
//! - convex `φ`: the half-plane `φ(x^r) + d·(x - x^r) ≥ 0`;
//! - otherwise: `φ(x^r) + d·(x - x^r) ≥ ½(x - x^r)ᵀH*(x - x^r)`;
//!
//! where `d` is the sub-gradient chosen against the steepest feasible descent
//! direction of `J`. The iteration then minimizes `J` over the intersection
//! and repeats from the minimizer.

use crate::geometry::{Point2, Vec2};
use crate::nonsmooth::{
    optimal_subgradient, steepest_feasible_direction, DirectionQuery, NonsmoothError, SafetySign,
    Subdifferential,
};
use crate::planning::{waypoint, PlanningError, Trajectory, TrajectoryProblem};
use crate::safety::{Curvature, SafetyEval};
use crate::subsolver::{
    phase_one, solve, BarrierSettings, ConstraintSlice, SubSolution, Subproblem, SubsolverError,
};
use nalgebra::DVector;
use std::time::Instant;
use thiserror::Error;

/// Offset subtracted from every slice when the sub-problem is assembled, so
/// that its solution stays strictly inside the convex feasible set after
/// rounding.
pub const SLICE_TIGHTENING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CfsError {
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Subsolver(#[from] SubsolverError),
    #[error(transparent)]
    Nonsmooth(#[from] NonsmoothError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Which construction produced a slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseTag {
    /// The constraint's own feasible half-plane (affine `φ`).
    Itself,
    /// Linearization of a convex `φ`.
    Linearized,
    /// Linearization minus the Hessian bound of a semi-convex `φ`.
    QuadraticBounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexFeasibleSet {
    pub slices: Vec<ConstraintSlice>,
    pub reference: DVector<f64>,
    pub cases: Vec<CaseTag>,
    /// `(obstacle, waypoint)` of each slice.
    pub sources: Vec<(usize, usize)>,
}

impl ConvexFeasibleSet {
    pub fn min_slack(&self, x: &DVector<f64>) -> f64 {
        self.slices
            .iter()
            .map(|s| s.slack_at(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Slices on waypoint `q`.
    pub fn at_waypoint(&self, q: usize) -> impl Iterator<Item = (usize, &ConstraintSlice)> {
        self.slices
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.waypoint == q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CfsConfig {
    /// Step tolerance on `‖x^{k+1} - x^k‖`.
    pub eps1: f64,
    /// Cost-descent tolerance; `None` means `1e-8·(1 + J(x⁰))`.
    pub eps2: Option<f64>,
    pub max_iter: usize,
    /// Sample each constructed set and count points that violate a
    /// constraint (slow; for diagnostics).
    pub sample_checks: bool,
    pub barrier: BarrierSettings,
}

impl Default for CfsConfig {
    fn default() -> Self {
        Self {
            eps1: 1e-5,
            eps2: None,
            max_iter: 100,
            sample_checks: false,
            barrier: BarrierSettings::default(),
        }
    }
}

impl CfsConfig {
    fn validate(&self) -> Result<(), CfsError> {
        if !(self.eps1 > 0.0 && self.eps1.is_finite()) {
            return Err(CfsError::InvalidConfig(format!("eps1 = {}", self.eps1)));
        }
        if let Some(e) = self.eps2 {
            if !(e > 0.0 && e.is_finite()) {
                return Err(CfsError::InvalidConfig(format!("eps2 = {e}")));
            }
        }
        if self.max_iter == 0 {
            return Err(CfsError::InvalidConfig(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    StepTol,
    CostTol,
    MaxIter,
    Infeasible,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::StepTol => "StepTol",
            Termination::CostTol => "CostTol",
            Termination::MaxIter => "MaxIter",
            Termination::Infeasible => "Infeasible",
        }
    }

    pub fn converged(&self) -> bool {
        matches!(self, Termination::StepTol | Termination::CostTol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub x: DVector<f64>,
    pub cost: f64,
    pub feasibility_error: f64,
    /// `‖x^k - x^{k-1}‖`, zero for the initial point.
    pub step_norm: f64,
    pub build_time_ms: f64,
    pub solve_time_ms: f64,
    /// `∇J(x^k)·(x^{k-1} - x^k)` when `x^{k-1}` was feasible.
    pub descent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// `iterates[0]` is the initial trajectory.
    pub iterates: Vec<IterateRecord>,
    pub termination: Termination,
    pub final_trajectory: Trajectory,
    /// KKT residual of the last sub-problem solve.
    pub kkt_residual: f64,
    /// Number of sub-problems solved.
    pub iterations: usize,
    /// Absolute cost tolerance that was applied.
    pub eps2: f64,
    /// Sampled points that satisfied every slice but violated a constraint
    /// (only counted with `sample_checks`).
    pub inclusion_violations: usize,
}

impl SolveReport {
    pub fn final_cost(&self) -> f64 {
        self.iterates.last().map_or(f64::NAN, |r| r.cost)
    }
}

/// Outcome of the two stopping tests between consecutive iterates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminationCheck {
    pub step_norm: f64,
    pub cost_drop: f64,
    pub step_fired: bool,
    pub cost_fired: bool,
}

impl TerminationCheck {
    /// The step test wins when both fire.
    pub fn decision(&self) -> Option<Termination> {
        if self.step_fired {
            Some(Termination::StepTol)
        } else if self.cost_fired {
            Some(Termination::CostTol)
        } else {
            None
        }
    }
}

pub fn check_termination(
    prev: &IterateRecord,
    next: &IterateRecord,
    eps1: f64,
    eps2: f64,
) -> TerminationCheck {
    let step_norm = (&next.x - &prev.x).norm();
    let cost_drop = prev.cost - next.cost;
    TerminationCheck {
        step_norm,
        cost_drop,
        step_fired: step_norm <= eps1,
        cost_fired: cost_drop <= eps2,
    }
}

/// Steepest feasible descent direction at waypoint `q`, or `None` when the
/// feasible cone is empty.
fn waypoint_direction(evals: &[SafetyEval], grad_q: Vec2, at: Point2) -> Option<Vec2> {
    let query = DirectionQuery {
        cost_gradient: grad_q,
        active: evals
            .iter()
            .map(|e| {
                (
                    SafetySign::of(e.value),
                    Subdifferential {
                        generators: e.generators.clone(),
                        point: at,
                    },
                )
            })
            .collect(),
    };
    steepest_feasible_direction(&query).ok()
}

fn slice_from(
    e: &SafetyEval,
    d: Vec2,
    curvature: Curvature,
    q: usize,
    xq: Point2,
) -> (ConstraintSlice, CaseTag) {
    let b = e.value - d.dot(&xq);
    match curvature {
        Curvature::Affine => (ConstraintSlice::linear(q, d, b), CaseTag::Itself),
        Curvature::Convex => (ConstraintSlice::linear(q, d, b), CaseTag::Linearized),
        Curvature::SemiConvex => (
            ConstraintSlice::quadratic(q, d, b, e.hessian_bound, xq),
            CaseTag::QuadraticBounded,
        ),
    }
}

fn subgradient(
    e: &SafetyEval,
    v_star: Option<Vec2>,
    grad_q: Vec2,
    at: Point2,
) -> Result<Vec2, NonsmoothError> {
    if e.smooth {
        return Ok(e.generators[0]);
    }
    let sub = Subdifferential {
        generators: e.generators.clone(),
        point: at,
    };
    match v_star {
        Some(v) => optimal_subgradient(&sub, v, grad_q, SafetySign::of(e.value)),
        None => optimal_subgradient(&sub, Vec2::zeros(), grad_q, SafetySign::Positive),
    }
}

fn waypoint_evals(problem: &TrajectoryProblem, q: usize, p: Point2) -> Vec<SafetyEval> {
    (0..problem.obstacles.len())
        .map(|j| problem.phi(j, q, p))
        .collect()
}

fn grad_block(g: &DVector<f64>, q: usize) -> Vec2 {
    Vec2::new(g[2 * q], g[2 * q + 1])
}

/// Convex slice for obstacle `j` at waypoint `q` around `xr`.
pub fn lift_constraint(
    problem: &TrajectoryProblem,
    j: usize,
    q: usize,
    xr: &DVector<f64>,
) -> Result<(ConstraintSlice, CaseTag), CfsError> {
    let p = waypoint(xr, q);
    let grad = problem.cost.grad(xr)?;
    let gq = grad_block(&grad, q);
    let evals = waypoint_evals(problem, q, p);
    let e = &evals[j];
    let v_star = if e.smooth {
        None
    } else {
        Some(
            waypoint_direction(&evals, gq, p)
                .ok_or(CfsError::Nonsmooth(NonsmoothError::EmptyCone))?,
        )
    };
    let d = subgradient(e, v_star, gq, p)?;
    Ok(slice_from(
        e,
        d,
        problem.obstacles[j].shape.curvature(),
        q,
        p,
    ))
}

/// `F(x^r) = ⋂ F_{j,q}(x^r)`, one slice per obstacle and waypoint.
///
/// When the feasible cone at a waypoint is empty, or the filter removes every
/// sub-gradient, the unfiltered choice is used instead.
pub fn build_cfs(problem: &TrajectoryProblem, xr: &DVector<f64>) -> ConvexFeasibleSet {
    let h = problem.horizon();
    let grad = problem
        .cost
        .grad(xr)
        .expect("reference has the problem dimension");
    let mut slices = Vec::with_capacity(h * problem.obstacles.len());
    let mut cases = Vec::with_capacity(slices.capacity());
    let mut sources = Vec::with_capacity(slices.capacity());
    for q in 0..h {
        let p = waypoint(xr, q);
        let gq = grad_block(&grad, q);
        let evals = waypoint_evals(problem, q, p);
        let v_star = if evals.iter().all(|e| e.smooth) {
            None
        } else {
            waypoint_direction(&evals, gq, p)
        };
        for (j, e) in evals.iter().enumerate() {
            let d = subgradient(e, v_star, gq, p)
                .or_else(|_| subgradient(e, None, gq, p))
                .expect("generator lists are never empty");
            let (s, c) = slice_from(e, d, problem.obstacles[j].shape.curvature(), q, p);
            slices.push(s);
            cases.push(c);
            sources.push((j, q));
        }
    }
    ConvexFeasibleSet {
        slices,
        reference: xr.clone(),
        cases,
        sources,
    }
}

fn subproblem(problem: &TrajectoryProblem, cfs: ConvexFeasibleSet) -> Subproblem {
    let mut constraints = cfs.slices;
    for c in &mut constraints {
        c.b -= SLICE_TIGHTENING;
    }
    Subproblem {
        hessian: problem.cost.hessian().clone(),
        linear: problem.cost.linear().clone(),
        constant: problem.cost.constant(),
        constraints,
    }
}

/// Sampled check of `F ⊆ Γ`: counts points that satisfy every slice at a
/// waypoint but give some `φ_{j,q} < -1e-8`.
pub fn count_inclusion_violations(
    problem: &TrajectoryProblem,
    cfs: &ConvexFeasibleSet,
    samples: usize,
    radius: f64,
) -> usize {
    let mut bad = 0;
    for q in 0..problem.horizon() {
        let c = waypoint(&cfs.reference, q);
        let slices: Vec<&ConstraintSlice> = cfs.at_waypoint(q).map(|(_, s)| s).collect();
        for i in 0..samples {
            let u = halton(i + 1, 2);
            let v = halton(i + 1, 3);
            let p = c + radius * Vec2::new(2.0 * u - 1.0, 2.0 * v - 1.0);
            if slices.iter().all(|s| s.slack(p) >= 0.0)
                && (0..problem.obstacles.len()).any(|j| problem.phi(j, q, p).value < -1e-8)
            {
                bad += 1;
            }
        }
    }
    bad
}

fn halton(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Runs the CFS iteration from `x0`.
///
/// The stopping tests are applied only once the previous iterate is feasible;
/// from an infeasible start the first step usually raises the cost. If phase
/// one finds no interior point, the report ends with
/// [`Termination::Infeasible`].
pub fn cfs_solve(
    problem: &TrajectoryProblem,
    x0: &Trajectory,
    config: &CfsConfig,
) -> Result<SolveReport, CfsError> {
    config.validate()?;
    let mut x = x0.to_vector();
    let cost = &problem.cost;
    let j0 = cost.eval(&x)?;
    let eps2 = config.eps2.unwrap_or(1e-8 * (1.0 + j0));
    let mut iterates = vec![IterateRecord {
        x: x.clone(),
        cost: j0,
        feasibility_error: problem.feasibility_error(&x),
        step_norm: 0.0,
        build_time_ms: 0.0,
        solve_time_ms: 0.0,
        descent: None,
    }];
    let mut termination = Termination::MaxIter;
    let mut kkt = f64::NAN;
    let mut inclusion_violations = 0;
    for _ in 0..config.max_iter {
        let t0 = Instant::now();
        let cfs = build_cfs(problem, &x);
        let build_time_ms = ms(t0);
        if config.sample_checks {
            inclusion_violations += count_inclusion_violations(problem, &cfs, 200, 1.0);
        }
        let t1 = Instant::now();
        let sub = subproblem(problem, cfs);
        let start = match phase_one(&sub, &x) {
            Ok(s) => s,
            Err(SubsolverError::Infeasible { .. }) => {
                termination = Termination::Infeasible;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let SubSolution {
            x: x_new,
            kkt_residual,
            ..
        } = solve(&sub, &start, &config.barrier)?;
        let solve_time_ms = ms(t1);
        kkt = kkt_residual;
        let prev = iterates.last().expect("initial iterate recorded");
        let descent = (prev.feasibility_error == 0.0)
            .then(|| cost.grad(&x_new).map(|g| g.dot(&(&x - &x_new))))
            .transpose()?;
        let rec = IterateRecord {
            cost: cost.eval(&x_new)?,
            feasibility_error: problem.feasibility_error(&x_new),
            step_norm: (&x_new - &x).norm(),
            build_time_ms,
            solve_time_ms,
            descent,
            x: x_new.clone(),
        };
        let check = check_termination(prev, &rec, config.eps1, eps2);
        let prev_feasible = prev.feasibility_error == 0.0;
        iterates.push(rec);
        x = x_new;
        if prev_feasible {
            if let Some(t) = check.decision() {
                termination = t;
                break;
            }
        }
    }
    Ok(SolveReport {
        iterations: iterates.len() - 1,
        final_trajectory: x0.with_vector(&x)?,
        iterates,
        termination,
        kkt_residual: kkt,
        eps2,
        inclusion_violations,
    })
}

/// Fixed-point residual at a feasible `x`: `‖x_sub - x‖ + r_KKT`, where
/// `x_sub` minimizes `J` over `F(x)`. Returns infinity when the sub-problem
/// cannot be solved.
pub fn kkt_certificate(problem: &TrajectoryProblem, x: &DVector<f64>) -> f64 {
    let sub = subproblem(problem, build_cfs(problem, x));
    let Ok(start) = phase_one(&sub, x) else {
        return f64::INFINITY;
    };
    match solve(&sub, &start, &BarrierSettings::default()) {
        Ok(sol) => (&sol.x - x).norm() + sol.kkt_residual,
        Err(_) => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ConvexPolygon;
    use crate::planning::{initial_reference, CostModel, CostWeights};
    use crate::safety::{Obstacle, Shape};

    fn square(c: Vec2, r: f64) -> Obstacle {
        Obstacle::new(Shape::ConvexPolygon(
            ConvexPolygon::new(vec![
                c + Vec2::new(r, r),
                c + Vec2::new(-r, r),
                c + Vec2::new(-r, -r),
                c + Vec2::new(r, -r),
            ])
            .unwrap(),
        ))
    }

    fn problem(h: usize, obstacles: Vec<Obstacle>) -> (TrajectoryProblem, Trajectory) {
        let t = initial_reference(Vec2::zeros(), Vec2::new(9.0, 0.0), h);
        let cost = CostModel::new(&t, CostWeights::smoothness(h)).unwrap();
        (TrajectoryProblem::new(cost, obstacles, 0.0).unwrap(), t)
    }

    #[test]
    fn obstacle_free_set_is_empty() {
        let (p, t) = problem(5, vec![]);
        assert!(build_cfs(&p, &t.to_vector()).slices.is_empty());
    }

    #[test]
    fn one_slice_per_waypoint() {
        let (p, t) = problem(3, vec![square(Vec2::new(4.5, 3.0), 1.0)]);
        let f = build_cfs(&p, &t.to_vector());
        assert_eq!(f.slices.len(), 3);
        assert!(f.cases.iter().all(|c| *c == CaseTag::Linearized));
        assert!(f.min_slack(&t.to_vector()) >= -1e-10);
    }

    #[test]
    fn obstacle_free_solve_is_one_step() {
        let (p, t) = problem(30, vec![]);
        let r = cfs_solve(&p, &t, &CfsConfig::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.final_cost().abs() < 1e-9);
        assert_eq!(r.termination, Termination::StepTol);
    }

    #[test]
    fn identical_iterates_fire_step_test() {
        let rec = IterateRecord {
            x: DVector::from_vec(vec![1.0, 2.0]),
            cost: 3.0,
            feasibility_error: 0.0,
            step_norm: 0.0,
            build_time_ms: 0.0,
            solve_time_ms: 0.0,
            descent: None,
        };
        assert_eq!(
            check_termination(&rec, &rec, 1e-4, 1e-4).decision(),
            Some(Termination::StepTol)
        );
        let mut far = rec.clone();
        far.x[0] += 1.0;
        far.cost -= 1e-3;
        assert_eq!(check_termination(&rec, &far, 1e-4, 1e-4).decision(), None);
    }

    #[test]
    fn square_astride_the_line() {
        let (p, t) = problem(30, vec![square(Vec2::new(4.5, 0.0), 1.0)]);
        let r = cfs_solve(
            &p,
            &t,
            &CfsConfig {
                max_iter: 50,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.termination.converged(), "{:?}", r.termination);
        for w in r.iterates.windows(2).skip(1) {
            assert!(w[1].cost <= w[0].cost + 1e-8);
        }
        assert!(r.iterates[1..].iter().all(|i| i.feasibility_error == 0.0));
    }
}
