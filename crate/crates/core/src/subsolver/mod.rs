//! Interior point solver for the convex sub-problems.
//!
//! A sub-problem minimizes `½xᵀHx + cᵀx + k` with `H` banded SPD, subject to
//! per-waypoint constraints `a·x_q + b - ½(x_q - x̂_q)ᵀH_q(x_q - x̂_q) ≥ 0`.
//! The solver runs a primal log-barrier Newton method on the banded system,
//! then refines the result on the identified active set.

mod barrier;
mod phase_one;
mod polish;

pub use phase_one::phase_one;

use crate::geometry::{Mat2, Vec2};
use crate::linalg::{BandedSym, LinalgError};
use crate::planning::waypoint;
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubsolverError {
    #[error("constraints at waypoint {waypoint} have no interior (best slack {max_slack:e})")]
    Infeasible { waypoint: usize, max_slack: f64 },
    #[error("start point violates constraint {constraint} (slack {slack:e})")]
    NotStrictlyFeasible { constraint: usize, slack: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("constraint {index} is invalid: {reason}")]
    InvalidConstraint { index: usize, reason: String },
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite(#[source] LinalgError),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// `a·x_q + b ≥ ½(x_q - center)ᵀ·quad·(x_q - center)` on waypoint `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSlice {
    /// 0-based waypoint index.
    pub waypoint: usize,
    pub a: Vec2,
    pub b: f64,
    pub quad: Option<Mat2>,
    pub center: Vec2,
}

impl ConstraintSlice {
    pub fn linear(waypoint: usize, a: Vec2, b: f64) -> Self {
        Self {
            waypoint,
            a,
            b,
            quad: None,
            center: Vec2::zeros(),
        }
    }

    pub fn quadratic(waypoint: usize, a: Vec2, b: f64, quad: Mat2, center: Vec2) -> Self {
        Self {
            waypoint,
            a,
            b,
            quad: Some(quad),
            center,
        }
    }

    /// Constraint value at waypoint position `p`; feasible when `≥ 0`.
    pub fn slack(&self, p: Vec2) -> f64 {
        let lin = self.a.dot(&p) + self.b;
        match &self.quad {
            None => lin,
            Some(h) => {
                let d = p - self.center;
                lin - 0.5 * d.dot(&(h * d))
            }
        }
    }

    pub fn gradient(&self, p: Vec2) -> Vec2 {
        match &self.quad {
            None => self.a,
            Some(h) => self.a - h * (p - self.center),
        }
    }

    /// `H_q`, the negated Hessian of the slack (zero for linear slices).
    pub fn curvature(&self) -> Mat2 {
        self.quad.unwrap_or_else(Mat2::zeros)
    }

    pub fn slack_at(&self, x: &DVector<f64>) -> f64 {
        self.slack(waypoint(x, self.waypoint))
    }
}

#[derive(Debug, Clone)]
pub struct Subproblem {
    pub hessian: BandedSym,
    pub linear: DVector<f64>,
    pub constant: f64,
    pub constraints: Vec<ConstraintSlice>,
}

impl Subproblem {
    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn horizon(&self) -> usize {
        self.dim() / 2
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.hessian.quad_form(x.as_slice()) + self.linear.dot(x) + self.constant
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.hessian.mul_dvec(x) + &self.linear
    }

    /// `J(x + d) - J(x)` without the cancellation of differencing two
    /// objective values.
    pub fn objective_change(&self, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        self.gradient(x).dot(d) + 0.5 * self.hessian.quad_form(d.as_slice())
    }

    pub fn slacks(&self, x: &DVector<f64>) -> Vec<f64> {
        self.constraints.iter().map(|c| c.slack_at(x)).collect()
    }

    /// Constraint indices grouped by waypoint.
    pub(crate) fn by_waypoint(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.horizon()];
        for (i, c) in self.constraints.iter().enumerate() {
            out[c.waypoint].push(i);
        }
        out
    }

    fn validate(&self) -> Result<(), SubsolverError> {
        let n = self.dim();
        if n % 2 != 0 || self.hessian.dim() != n {
            return Err(SubsolverError::DimensionMismatch {
                expected: self.hessian.dim(),
                found: n,
            });
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let bad = |reason: &str| SubsolverError::InvalidConstraint {
                index: i,
                reason: reason.into(),
            };
            if c.waypoint >= n / 2 {
                return Err(bad("waypoint out of range"));
            }
            if !(c.a.iter().all(|v| v.is_finite()) && c.b.is_finite()) {
                return Err(bad("non-finite coefficients"));
            }
            if let Some(h) = &c.quad {
                let tr = 0.5 * (h[(0, 0)] + h[(1, 1)]);
                let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
                let min_eig = tr - (tr * tr - det).max(0.0).sqrt();
                if (h[(0, 1)] - h[(1, 0)]).abs() > 1e-12 || min_eig < -1e-12 {
                    return Err(bad("quadratic term must be symmetric PSD"));
                }
            }
        }
        Ok(())
    }
}

/// Interior point settings. The defaults are `μ₀ = 1`, reduction `0.2`,
/// Armijo `0.25` and backtracking `0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSettings {
    pub mu0: f64,
    pub mu_factor: f64,
    pub armijo: f64,
    pub backtrack: f64,
    /// Stop when `m·μ ≤ gap_tol·(1 + |J|)` …
    pub gap_tol: f64,
    /// … and `m·μ ≤ abs_gap_tol`.
    pub abs_gap_tol: f64,
    pub max_newton: usize,
    /// Refine the barrier solution on its active set.
    pub polish: bool,
}

impl Default for BarrierSettings {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            mu_factor: 0.2,
            armijo: 0.25,
            backtrack: 0.5,
            gap_tol: 1e-9,
            abs_gap_tol: 1e-10,
            max_newton: 3000,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubSolution {
    pub x: DVector<f64>,
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub objective: f64,
}

/// Solves `sub` from a strictly feasible `start`.
pub fn solve(
    sub: &Subproblem,
    start: &DVector<f64>,
    settings: &BarrierSettings,
) -> Result<SubSolution, SubsolverError> {
    sub.validate()?;
    if start.len() != sub.dim() {
        return Err(SubsolverError::DimensionMismatch {
            expected: sub.dim(),
            found: start.len(),
        });
    }
    if sub.constraints.is_empty() {
        let chol = sub
            .hessian
            .cholesky()
            .map_err(SubsolverError::NotPositiveDefinite)?;
        let x = -chol.solve(&sub.linear);
        return Ok(finish(sub, x, Vec::new(), 1));
    }
    for (i, s) in sub.slacks(start).into_iter().enumerate() {
        if !(s > 0.0) {
            return Err(SubsolverError::NotStrictlyFeasible {
                constraint: i,
                slack: s,
            });
        }
    }
    let b = barrier::run(sub, start.clone(), settings)?;
    let barrier_obj = sub.objective(&b.x);
    if settings.polish {
        if let Some((x, lambda)) = polish::refine(sub, &b.x, &b.multipliers, b.mu) {
            let df = sub.objective_change(&b.x, &(&x - &b.x));
            let cand = finish(sub, x, lambda, b.iterations);
            let base = kkt_residual(sub, &b.x, &b.multipliers);
            if df <= 1e-12 * (1.0 + barrier_obj.abs()) && cand.kkt_residual <= base {
                return Ok(cand);
            }
        }
    }
    Ok(finish(sub, b.x, b.multipliers, b.iterations))
}

fn finish(
    sub: &Subproblem,
    x: DVector<f64>,
    multipliers: Vec<f64>,
    iterations: usize,
) -> SubSolution {
    let kkt = kkt_residual(sub, &x, &multipliers);
    SubSolution {
        objective: sub.objective(&x),
        x,
        multipliers,
        kkt_residual: kkt,
        iterations,
    }
}

/// `‖∇J - Σλ_i∇s_i‖∞ + max|λ_i s_i| + max(0, -s_i)`.
pub fn kkt_residual(sub: &Subproblem, x: &DVector<f64>, multipliers: &[f64]) -> f64 {
    let mut r = sub.gradient(x);
    let mut comp: f64 = 0.0;
    let mut viol: f64 = 0.0;
    for (c, l) in sub.constraints.iter().zip(multipliers) {
        let p = waypoint(x, c.waypoint);
        let g = c.gradient(p);
        r[2 * c.waypoint] -= l * g.x;
        r[2 * c.waypoint + 1] -= l * g.y;
        let s = c.slack(p);
        comp = comp.max((l * s).abs());
        viol = viol.max(-s);
    }
    let neg_dual = multipliers.iter().fold(0.0_f64, |m, l| m.max(-l));
    r.amax() + comp + viol + neg_dual
}
