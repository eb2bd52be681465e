use super::{Subproblem, SubsolverError};
use crate::geometry::Vec2;
use crate::planning::waypoint;
use nalgebra::{DVector, Matrix3, Vector3};

/// Required slack of a phase-one point.
pub const MIN_SLACK: f64 = 1e-8;
/// Slacks above which phase one stops pushing into the interior (meters).
/// The small cap is tried first so that near-feasible hints barely move.
const SLACK_CAPS: [f64; 2] = [1e-6, 1.0];

struct Local<'a> {
    sub: &'a Subproblem,
    idx: &'a [usize],
    hint: Vec2,
    rho: f64,
    cap: f64,
}

impl Local<'_> {
    /// Barrier objective `-t + ρ‖p - hint‖² - μ[Σ ln(s_i - t) + ln(T - t)]`.
    fn value(&self, z: Vector3<f64>, mu: f64) -> Option<f64> {
        let p = Vec2::new(z.x, z.y);
        let t = z.z;
        if !(self.cap - t > 0.0) {
            return None;
        }
        let mut logs = (self.cap - t).ln();
        for &i in self.idx {
            let r = self.sub.constraints[i].slack(p) - t;
            if !(r > 0.0) {
                return None;
            }
            logs += r.ln();
        }
        Some(-t + self.rho * (p - self.hint).norm_squared() - mu * logs)
    }

    fn newton(&self, z: Vector3<f64>, mu: f64) -> Option<(Vector3<f64>, f64)> {
        let p = Vec2::new(z.x, z.y);
        let t = z.z;
        let mut g = Vector3::new(
            2.0 * self.rho * (p.x - self.hint.x),
            2.0 * self.rho * (p.y - self.hint.y),
            -1.0,
        );
        let mut h = Matrix3::zeros();
        h[(0, 0)] = 2.0 * self.rho;
        h[(1, 1)] = 2.0 * self.rho;
        let rc = self.cap - t;
        g.z += mu / rc;
        h[(2, 2)] += mu / (rc * rc);
        for &i in self.idx {
            let c = &self.sub.constraints[i];
            let r = c.slack(p) - t;
            let gs = c.gradient(p);
            let hq = c.curvature();
            let w = mu / (r * r);
            g.x -= mu * gs.x / r;
            g.y -= mu * gs.y / r;
            g.z += mu / r;
            for a in 0..2 {
                for b in 0..2 {
                    h[(a, b)] += w * gs[a] * gs[b] + mu / r * hq[(a, b)];
                }
                h[(a, 2)] -= w * gs[a];
                h[(2, a)] -= w * gs[a];
            }
            h[(2, 2)] += w;
        }
        let dz = -h.cholesky()?.solve(&g);
        Some((dz, -g.dot(&dz)))
    }

    /// Maximizes the common slack `t`; returns the point and `t`.
    fn solve(&self) -> (Vec2, f64) {
        let min_s = self
            .idx
            .iter()
            .map(|&i| self.sub.constraints[i].slack(self.hint))
            .fold(f64::INFINITY, f64::min);
        let mut z = Vector3::new(self.hint.x, self.hint.y, min_s.min(self.cap) - 1.0);
        let m = self.idx.len() as f64 + 1.0;
        let mut mu = 1.0;
        while m * mu > 1e-11 {
            for _ in 0..80 {
                let Some((dz, dec)) = self.newton(z, mu) else {
                    break;
                };
                if dec <= 1e-18 {
                    break;
                }
                let f0 = self.value(z, mu).expect("strictly feasible");
                let mut step = 1.0;
                let mut moved = false;
                while step > 1e-14 {
                    let zn = z + step * dz;
                    if let Some(fn_) = self.value(zn, mu) {
                        if fn_ <= f0 - 0.25 * step * dec + 1e-15 * (1.0 + f0.abs()) {
                            z = zn;
                            moved = true;
                            break;
                        }
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
            mu *= 0.2;
        }
        (Vec2::new(z.x, z.y), z.z)
    }
}

/// Finds a point where every constraint has slack at least `1e-8`.
///
/// Constraints touch one waypoint each, so the search splits into one small
/// problem per waypoint: maximize `t` subject to `s_i(p) ≥ t`, `t ≤ cap`, with a
/// small proximal pull towards the hint. Waypoints whose hint already has the
/// required slack are left untouched.
pub fn phase_one(sub: &Subproblem, hint: &DVector<f64>) -> Result<DVector<f64>, SubsolverError> {
    if hint.len() != sub.dim() {
        return Err(SubsolverError::DimensionMismatch {
            expected: sub.dim(),
            found: hint.len(),
        });
    }
    let mut x = hint.clone();
    for (q, idx) in sub.by_waypoint().iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let p0 = waypoint(hint, q);
        if idx
            .iter()
            .all(|&i| sub.constraints[i].slack(p0) >= MIN_SLACK)
        {
            continue;
        }
        let mut best = (p0, f64::NEG_INFINITY);
        for (cap, rho) in SLACK_CAPS.iter().flat_map(|&c| [(c, 1e-6), (c, 1e-12)]) {
            let local = Local {
                sub,
                idx,
                hint: p0,
                rho,
                cap,
            };
            let (p, t) = local.solve();
            let actual = idx
                .iter()
                .map(|&i| sub.constraints[i].slack(p))
                .fold(f64::INFINITY, f64::min);
            if actual > best.1 {
                best = (p, actual);
            }
            if actual >= MIN_SLACK && t >= MIN_SLACK {
                break;
            }
        }
        if !(best.1 >= MIN_SLACK) {
            return Err(SubsolverError::Infeasible {
                waypoint: q,
                max_slack: best.1,
            });
        }
        x[2 * q] = best.0.x;
        x[2 * q + 1] = best.0.y;
    }
    Ok(x)
}
