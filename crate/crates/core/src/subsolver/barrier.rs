use super::{BarrierSettings, Subproblem, SubsolverError};
use crate::planning::waypoint;
use nalgebra::DVector;

pub(super) struct BarrierResult {
    pub x: DVector<f64>,
    pub multipliers: Vec<f64>,
    pub mu: f64,
    pub iterations: usize,
}

/// Newton decrement below which a point counts as centered.
const CENTERED: f64 = 1e-14;
/// Centering that stops making progress is accepted when `dec/μ`, the
/// decrement of the scaled barrier `J/μ - Σ ln s`, is below this.
const PROXIMITY: f64 = 1e-6;
/// Stalls are only looked for below this decrement; above it steps may
/// legitimately raise the decrement while `ψ` still falls.
const NOISE: f64 = 1e-9;

/// `ψ(x + t·dx) - ψ(x)` for `ψ = J - μΣ ln s`, computed from the step so that
/// the large constant and quadratic terms of `J` never cancel. `None` when
/// the trial point leaves the interior.
#[allow(clippy::too_many_arguments)]
fn barrier_change(
    sub: &Subproblem,
    x: &DVector<f64>,
    slacks: &[f64],
    dx: &DVector<f64>,
    gdx: f64,
    dhd: f64,
    t: f64,
    mu: f64,
) -> Option<f64> {
    let xn = x + t * dx;
    let mut logs = 0.0;
    for (c, s) in sub.constraints.iter().zip(slacks) {
        let sn = c.slack_at(&xn);
        if !(sn > 0.0) {
            return None;
        }
        logs += ((sn - s) / s).ln_1p();
    }
    Some(t * gdx + 0.5 * t * t * dhd - mu * logs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Centering {
    Centered,
    /// Progress stopped at the rounding floor before reaching proximity.
    Floor,
}

/// Damped Newton on `ψ = J - μΣ ln s` from the strictly feasible `x`.
///
/// Each step solves the banded system
/// `(H + μΣ[∇s∇sᵀ/s² + H_q/s]) dx = -∇ψ`, where every constraint adds a 2×2
/// block on its own waypoint, so the factorization stays `O(h)`.
fn center(
    sub: &Subproblem,
    mut x: DVector<f64>,
    mu: f64,
    settings: &BarrierSettings,
    iterations: &mut usize,
) -> Result<(DVector<f64>, Centering), SubsolverError> {
    let kd = sub.hessian.bandwidth().max(1);
    let base = sub.hessian.widened(kd);
    let close = |dec: f64| dec <= PROXIMITY * mu;
    let mut best = f64::INFINITY;
    let mut stale = 0;
    loop {
        let mut grad = sub.gradient(&x);
        let mut hess = base.clone();
        let mut slacks = Vec::with_capacity(sub.constraints.len());
        for c in &sub.constraints {
            let q = c.waypoint;
            let p = waypoint(&x, q);
            let s = c.slack(p);
            let g = c.gradient(p);
            slacks.push(s);
            grad[2 * q] -= mu * g.x / s;
            grad[2 * q + 1] -= mu * g.y / s;
            let w = mu / (s * s);
            let hq = c.curvature() * (mu / s);
            hess.add(2 * q, 2 * q, w * g.x * g.x + hq[(0, 0)]);
            hess.add(2 * q + 1, 2 * q, w * g.x * g.y + hq[(1, 0)]);
            hess.add(2 * q + 1, 2 * q + 1, w * g.y * g.y + hq[(1, 1)]);
        }
        let chol = hess.cholesky().map_err(|e| {
            SubsolverError::NumericalFailure(format!("barrier Hessian factorization: {e}"))
        })?;
        let dx = -chol.solve(&grad);
        let dec = -grad.dot(&dx);
        if !(dec > CENTERED) {
            return Ok((x, Centering::Centered));
        }
        let mut t: f64 = 1.0;
        for (c, s) in sub.constraints.iter().zip(&slacks) {
            if c.quad.is_none() {
                let q = c.waypoint;
                let ds = c.a.x * dx[2 * q] + c.a.y * dx[2 * q + 1];
                if ds < 0.0 {
                    t = t.min(-0.99 * s / ds);
                }
            }
        }
        let gdx = sub.gradient(&x).dot(&dx);
        let dhd = sub.hessian.quad_form(dx.as_slice());
        let accepted = loop {
            if let Some(d) = barrier_change(sub, &x, &slacks, &dx, gdx, dhd, t, mu) {
                if d <= -settings.armijo * t * dec {
                    break Some(&x + t * &dx);
                }
            }
            t *= settings.backtrack;
            if t < 1e-14 {
                break None;
            }
        };
        *iterations += 1;
        match accepted {
            Some(xn) => x = xn,
            None if close(dec) => return Ok((x, Centering::Centered)),
            None => return Ok((x, Centering::Floor)),
        }
        // Steps that no longer halve a tiny decrement have reached the
        // rounding floor of the gradient.
        if dec < 0.5 * best {
            best = dec;
            stale = 0;
        } else if dec <= NOISE {
            stale += 1;
            if stale >= 3 {
                let outcome = if close(dec) {
                    Centering::Centered
                } else {
                    Centering::Floor
                };
                return Ok((x, outcome));
            }
        }
        if *iterations >= settings.max_newton {
            return Err(SubsolverError::NumericalFailure(
                "Newton iteration limit reached".into(),
            ));
        }
    }
}

/// Primal log-barrier path following from a strictly feasible `x`.
///
/// The first `μ` is at least `(J(x) - J_unc)/m`, which bounds the
/// suboptimality of `x` per constraint, so that starts far up the cost
/// surface do not need thousands of damped steps to center.
///
/// `μ` shrinks until both gap tolerances hold. Shrinking stops early once
/// centering hits the rounding floor, or breaks down (slacks near the
/// rounding floor make the Newton system indefinite in floating point); the
/// last usable point is returned and the active-set polish takes over.
pub(super) fn run(
    sub: &Subproblem,
    mut x: DVector<f64>,
    settings: &BarrierSettings,
) -> Result<BarrierResult, SubsolverError> {
    let m = sub.constraints.len() as f64;
    let mut mu = settings.mu0;
    if let Ok(chol) = sub.hessian.cholesky() {
        let x_unc = -chol.solve(&sub.linear);
        let gap = sub.objective_change(&x_unc, &(&x - &x_unc));
        if gap.is_finite() {
            mu = mu.max(gap / m);
        }
    }
    let mut last_mu = None;
    let mut iterations = 0;
    loop {
        match center(sub, x.clone(), mu, settings, &mut iterations) {
            Ok((xc, outcome)) => {
                x = xc;
                last_mu = Some(mu);
                if outcome == Centering::Floor {
                    break;
                }
            }
            Err(e) => match last_mu {
                Some(prev) => {
                    mu = prev;
                    break;
                }
                None => return Err(e),
            },
        }
        let f = sub.objective(&x);
        if m * mu <= settings.gap_tol * (1.0 + f.abs()) && m * mu <= settings.abs_gap_tol {
            break;
        }
        mu *= settings.mu_factor;
    }
    let multipliers = sub
        .constraints
        .iter()
        .map(|c| mu / c.slack_at(&x))
        .collect();
    Ok(BarrierResult {
        x,
        multipliers,
        mu,
        iterations,
    })
}
