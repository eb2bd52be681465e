use super::Subproblem;
use crate::planning::waypoint;
use nalgebra::{DMatrix, DVector};

const MAX_ROUNDS: usize = 8;
const MAX_NEWTON: usize = 30;

/// Solves the KKT system with the constraints in `active` held as equalities,
/// starting from `x0`. Returns the point and one multiplier per active
/// constraint.
fn equality_solve(
    sub: &Subproblem,
    x0: &DVector<f64>,
    active: &[usize],
    lambda0: &[f64],
) -> Option<(DVector<f64>, Vec<f64>)> {
    let n = sub.dim();
    let k = active.len();
    let kd = sub.hessian.bandwidth().max(1);
    let mut x = x0.clone();
    let mut lambda: Vec<f64> = lambda0.to_vec();
    let nonlinear = active.iter().any(|&i| sub.constraints[i].quad.is_some());
    for it in 0..MAX_NEWTON {
        let mut w = sub.hessian.widened(kd);
        for (&i, l) in active.iter().zip(&lambda) {
            let c = &sub.constraints[i];
            if let Some(h) = &c.quad {
                let q = c.waypoint;
                let l = l.max(0.0);
                w.add(2 * q, 2 * q, l * h[(0, 0)]);
                w.add(2 * q + 1, 2 * q, l * h[(1, 0)]);
                w.add(2 * q + 1, 2 * q + 1, l * h[(1, 1)]);
            }
        }
        let chol = w.cholesky().ok()?;
        let g0 = sub.gradient(&x);
        let w_g0 = chol.solve(&g0);
        let mut y = DMatrix::zeros(n, k);
        let mut grads = Vec::with_capacity(k);
        for (col, &i) in active.iter().enumerate() {
            let c = &sub.constraints[i];
            let q = c.waypoint;
            let g = c.gradient(waypoint(&x, q));
            let mut e = DVector::zeros(n);
            e[2 * q] = g.x;
            e[2 * q + 1] = g.y;
            y.set_column(col, &chol.solve(&e));
            grads.push((q, g));
        }
        let mut schur = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for a in 0..k {
            let (qa, ga) = grads[a];
            for b in 0..k {
                schur[(a, b)] = ga.x * y[(2 * qa, b)] + ga.y * y[(2 * qa + 1, b)];
            }
            rhs[a] = ga.x * w_g0[2 * qa] + ga.y * w_g0[2 * qa + 1]
                - sub.constraints[active[a]].slack_at(&x);
        }
        let schur = 0.5 * (&schur + schur.transpose());
        let lam_new = schur.clone().cholesky()?.solve(&rhs);
        let dx = &y * &lam_new - w_g0;
        x += &dx;
        lambda = lam_new.iter().copied().collect();
        let small = dx.amax() <= 1e-14 * (1.0 + x.amax());
        if (!nonlinear && it >= 1) || (nonlinear && small) {
            break;
        }
    }
    let scale = 1.0 + x.amax();
    let ok = active
        .iter()
        .all(|&i| sub.constraints[i].slack_at(&x).abs() <= 1e-10 * scale);
    ok.then_some((x, lambda))
}

/// Whether the gradient of constraint `i` at `x` is independent of those of
/// the `active` constraints on the same waypoint.
fn independent(sub: &Subproblem, x: &DVector<f64>, active: &[usize], i: usize) -> bool {
    let c = &sub.constraints[i];
    let g = c.gradient(waypoint(x, c.waypoint));
    let mut same = active
        .iter()
        .map(|&j| &sub.constraints[j])
        .filter(|o| o.waypoint == c.waypoint);
    match (same.next(), same.next()) {
        (None, _) => true,
        (Some(o), None) => {
            let h = o.gradient(waypoint(x, o.waypoint));
            (g.x * h.y - g.y * h.x).abs() > 1e-9 * g.norm() * h.norm()
        }
        _ => false,
    }
}

/// Active-set refinement of a barrier solution.
///
/// Constraints with `λ_i > s_i` start active, largest multiplier first,
/// skipping any whose gradient depends on those already chosen on its
/// waypoint (overlapping obstacles give duplicate slices). Rounds drop the
/// most negative multiplier or add the most violated independent inactive
/// constraint until the point is a KKT point of the inequality problem.
pub(super) fn refine(
    sub: &Subproblem,
    xb: &DVector<f64>,
    lambda_b: &[f64],
    _mu: f64,
) -> Option<(DVector<f64>, Vec<f64>)> {
    let m = sub.constraints.len();
    let slacks = sub.slacks(xb);
    let mut order: Vec<usize> = (0..m).filter(|&i| lambda_b[i] > slacks[i]).collect();
    order.sort_by(|&a, &b| lambda_b[b].total_cmp(&lambda_b[a]));
    let mut active: Vec<usize> = Vec::new();
    for i in order {
        if independent(sub, xb, &active, i) {
            active.push(i);
        }
    }
    active.sort_unstable();
    for _ in 0..MAX_ROUNDS {
        let l0: Vec<f64> = active.iter().map(|&i| lambda_b[i]).collect();
        let (x, la) = equality_solve(sub, xb, &active, &l0)?;
        let lmax = la.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let neg = la
            .iter()
            .enumerate()
            .filter(|(_, l)| **l < -1e-10 * (1.0 + lmax))
            .min_by(|a, b| a.1.total_cmp(b.1));
        if let Some((pos, _)) = neg {
            active.remove(pos);
            continue;
        }
        let viol = (0..m)
            .filter(|i| !active.contains(i))
            .map(|i| (i, sub.constraints[i].slack_at(&x)))
            .filter(|(_, s)| *s < -1e-12)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((i, _)) = viol {
            if !independent(sub, &x, &active, i) {
                return None;
            }
            active.push(i);
            active.sort_unstable();
            continue;
        }
        let mut lambda = vec![0.0; m];
        for (&i, l) in active.iter().zip(&la) {
            lambda[i] = l.max(0.0);
        }
        return Some((x, lambda));
    }
    None
}
