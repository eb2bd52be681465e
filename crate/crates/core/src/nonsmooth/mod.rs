//! Directional derivatives, sub-differentials and sub-gradient selection.
//!
//! All selections work on a single 2D waypoint block, since every obstacle
//! constraint depends on one waypoint only.

mod validate;

pub use validate::{validate_decomposition, ValidationOptions, ValidationReport, Violation};

use crate::geometry::{perp, Vec2};
use crate::safety::SafetyFunction;
use thiserror::Error;

/// Values within this distance of zero count as "on the boundary".
pub const SIGN_TOL: f64 = 1e-9;
/// `d·v > 0` is implemented as `d·v ≥ STRICT`.
pub const STRICT: f64 = 1e-10;
/// Rounding slack applied to every membership test.
const SLACK: f64 = 1e-14;

const RICHARDSON_STEP: f64 = 1e-4;
const GOLDEN_ITERS: usize = 90;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NonsmoothError {
    #[error("sub-differential has no generator")]
    EmptySubdifferential,
    #[error("no feasible search direction exists")]
    EmptyCone,
    #[error("every sub-gradient is removed by the feasibility filter")]
    EmptyFeasibleSubgradients,
}

/// Sign class of a safety value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetySign {
    Positive,
    Zero,
    Negative,
}

impl SafetySign {
    pub fn of(value: f64) -> Self {
        if value > SIGN_TOL {
            SafetySign::Positive
        } else if value < -SIGN_TOL {
            SafetySign::Negative
        } else {
            SafetySign::Zero
        }
    }

    /// Whether `d` passes the sub-gradient filter for this sign given `v*`.
    pub fn admits(self, d: Vec2, v_star: Vec2) -> bool {
        match self {
            SafetySign::Positive => true,
            SafetySign::Zero => d.dot(&v_star) >= -SLACK,
            SafetySign::Negative => d.dot(&v_star) >= STRICT - SLACK,
        }
    }

    /// Nominal lower limit on `d·v*`. It sits `SLACK` inside the limit used
    /// by [`SafetySign::admits`], so points computed on it are admitted after
    /// rounding.
    fn threshold(self) -> Option<f64> {
        match self {
            SafetySign::Positive => None,
            SafetySign::Zero => Some(0.0),
            SafetySign::Negative => Some(STRICT),
        }
    }
}

/// Finite generator representation of a sub-differential.
#[derive(Debug, Clone, PartialEq)]
pub struct Subdifferential {
    pub generators: Vec<Vec2>,
    pub point: Vec2,
}

impl Subdifferential {
    /// `max_g g·v`, i.e. `max_{d ∈ Dφ} d·v`.
    pub fn support(&self, v: Vec2) -> f64 {
        self.generators
            .iter()
            .map(|g| g.dot(&v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether the origin lies in the convex hull of the generators.
    pub fn contains_origin(&self) -> bool {
        origin_in_hull(&self.generators, 1e-12)
    }
}

/// Constraint information for one waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionQuery {
    pub cost_gradient: Vec2,
    pub active: Vec<(SafetySign, Subdifferential)>,
}

impl DirectionQuery {
    /// The three-case membership rule for a unit direction `v`.
    pub fn is_feasible(&self, v: Vec2) -> bool {
        self.active.iter().all(|(sign, sub)| match sign {
            SafetySign::Positive => true,
            SafetySign::Zero => sub.support(v) >= -SLACK,
            SafetySign::Negative => sub.support(v) >= STRICT - SLACK,
        })
    }
}

/// `∂_vφ(x) = max_g g·v` over the generators of `φ` at `x`.
///
/// At a polygon vertex on the boundary the generators are the two edge
/// normals, so for `v` strictly inside the vertex normal cone this is smaller
/// than the true rate, which is 1. Everywhere else it is exact.
pub fn directional_derivative<F: SafetyFunction + ?Sized>(phi: &F, x: Vec2, v: Vec2) -> f64 {
    if v == Vec2::zeros() {
        return 0.0;
    }
    phi.eval(x).max_directional(v)
}

/// One-sided derivative from Richardson-extrapolated forward differences
/// with steps `1e-4` and `5e-5`.
pub fn directional_derivative_fd<F: Fn(Vec2) -> f64>(phi: F, x: Vec2, v: Vec2) -> f64 {
    let h = RICHARDSON_STEP;
    let f0 = phi(x);
    let d1 = (phi(x + h * v) - f0) / h;
    let d2 = (phi(x + 0.5 * h * v) - f0) / (0.5 * h);
    2.0 * d2 - d1
}

pub fn subdifferential<F: SafetyFunction + ?Sized>(
    phi: &F,
    x: Vec2,
) -> Result<Subdifferential, NonsmoothError> {
    let e = phi.eval(x);
    if e.generators.is_empty() {
        return Err(NonsmoothError::EmptySubdifferential);
    }
    Ok(Subdifferential {
        generators: e.generators,
        point: x,
    })
}

/// Total order used for tie-breaking: smallest first entry, then second.
fn lex_less(a: Vec2, b: Vec2) -> bool {
    a.x < b.x || (a.x == b.x && a.y < b.y)
}

/// `v* = argmin_{v ∈ C} ∇J·v` over unit vectors in the feasible cone `C`.
///
/// In 2D the minimizer is either `-∇J/‖∇J‖` or an endpoint of one of the
/// half-circles that make up `C`, so the candidates are enumerated exactly.
/// `(-1, 0)` is added so the tie-break is honoured when `∇J = 0`.
pub fn steepest_feasible_direction(query: &DirectionQuery) -> Result<Vec2, NonsmoothError> {
    let g = query.cost_gradient;
    let mut cands: Vec<Vec2> = Vec::new();
    let gn = g.norm();
    if gn > 0.0 {
        cands.push(-g / gn);
    }
    cands.push(Vec2::new(-1.0, 0.0));
    for (sign, sub) in &query.active {
        for d in &sub.generators {
            let n = d.norm();
            if n == 0.0 {
                continue;
            }
            let u = d / n;
            let w = perp(u);
            match sign {
                SafetySign::Positive => {}
                SafetySign::Zero => {
                    cands.push(w);
                    cands.push(-w);
                }
                SafetySign::Negative => {
                    let a = (STRICT / n).min(1.0);
                    let b = (1.0 - a * a).sqrt();
                    cands.push(a * u + b * w);
                    cands.push(a * u - b * w);
                }
            }
        }
    }
    let mut best: Option<(f64, Vec2)> = None;
    for v in cands {
        if !query.is_feasible(v) {
            continue;
        }
        let val = g.dot(&v);
        best = match best {
            None => Some((val, v)),
            Some((bv, bx)) => {
                if val < bv - 1e-15 || (val <= bv + 1e-15 && lex_less(v, bx)) {
                    Some((val, v))
                } else {
                    Some((bv, bx))
                }
            }
        };
    }
    best.map(|(_, v)| v).ok_or(NonsmoothError::EmptyCone)
}

fn normalized_score(grad: Vec2, d: Vec2) -> f64 {
    let n = d.norm();
    if n == 0.0 {
        0.0
    } else {
        grad.dot(&d) / n
    }
}

/// `argmin_{d ∈ DF} ∇J·d/‖d‖` over the filtered sub-differential.
///
/// Candidates are the admissible generators, the minimizer along every
/// generator pair segment restricted to its admissible sub-interval (found by
/// golden-section search, which is exact up to rounding because the score is
/// unimodal along a segment that avoids the origin), and the origin itself
/// when it lies in the hull and passes the filter.
pub fn optimal_subgradient(
    sub: &Subdifferential,
    v_star: Vec2,
    cost_gradient: Vec2,
    sign: SafetySign,
) -> Result<Vec2, NonsmoothError> {
    let gens = &sub.generators;
    if gens.is_empty() {
        return Err(NonsmoothError::EmptySubdifferential);
    }
    let score = |d: Vec2| normalized_score(cost_gradient, d);
    let mut best: Option<(f64, Vec2)> = None;
    let offer = |d: Vec2, best: &mut Option<(f64, Vec2)>| {
        if !sign.admits(d, v_star) {
            return;
        }
        let s = score(d);
        if best.is_none_or(|(bs, _)| s < bs - 1e-15) {
            *best = Some((s, d));
        }
    };
    for g in gens {
        offer(*g, &mut best);
    }
    for i in 0..gens.len() {
        for j in (i + 1)..gens.len() {
            let (a, b) = (gens[i], gens[j]);
            let Some((lo, hi)) = admissible_interval(a, b, v_star, sign) else {
                continue;
            };
            let at = |l: f64| (1.0 - l) * a + l * b;
            // Split where the segment crosses the origin.
            let mut pieces = vec![(lo, hi)];
            let ab = b - a;
            let den = ab.norm_squared();
            if den > 0.0 {
                let l0 = -a.dot(&ab) / den;
                if l0 > lo && l0 < hi && at(l0).norm() <= 1e-12 * (a.norm() + b.norm()) {
                    pieces = vec![(lo, l0), (l0, hi)];
                }
            }
            for (l, h) in pieces {
                let lam = golden_min(|l| score(at(l)), l, h);
                offer(at(lam), &mut best);
                offer(at(l), &mut best);
                offer(at(h), &mut best);
            }
        }
    }
    if sub.contains_origin() {
        offer(Vec2::zeros(), &mut best);
    }
    best.map(|(_, d)| d)
        .ok_or(NonsmoothError::EmptyFeasibleSubgradients)
}

/// Sub-interval of `λ ∈ [0, 1]` where `(1-λ)a + λb` passes the filter.
fn admissible_interval(a: Vec2, b: Vec2, v: Vec2, sign: SafetySign) -> Option<(f64, f64)> {
    let Some(thr) = sign.threshold() else {
        return Some((0.0, 1.0));
    };
    // c(λ) = a·v + λ(b-a)·v ≥ thr
    let c0 = a.dot(&v) - thr;
    let c1 = (b - a).dot(&v);
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    if c1 > 0.0 {
        lo = lo.max(-c0 / c1);
    } else if c1 < 0.0 {
        hi = hi.min(-c0 / c1);
    } else if c0 < 0.0 {
        return None;
    }
    (lo <= hi).then_some((lo, hi))
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-15 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Whether `0 ∈ conv(gens)`: true when some generator vanishes or the
/// generator directions leave no angular gap wider than `π`.
pub fn origin_in_hull(gens: &[Vec2], tol: f64) -> bool {
    if gens.iter().any(|g| g.norm() <= tol) {
        return true;
    }
    max_angular_gap(gens) <= std::f64::consts::PI + 1e-12
}

/// Largest angular gap between consecutive generator directions.
pub fn max_angular_gap(gens: &[Vec2]) -> f64 {
    let mut ang: Vec<f64> = gens
        .iter()
        .filter(|g| g.norm() > 0.0)
        .map(|g| g.y.atan2(g.x))
        .collect();
    if ang.is_empty() {
        return 2.0 * std::f64::consts::PI;
    }
    ang.sort_by(f64::total_cmp);
    let mut gap = ang[0] + 2.0 * std::f64::consts::PI - ang[ang.len() - 1];
    for w in ang.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap
}
