use crate::geometry::{Mat2, Point2, Vec2};

const GRID: usize = 41;
const DIRECTIONS: usize = 8;
const SAFETY_FACTOR: f64 = 1.5;

/// Conservative curvature bound `κ·I` for `phi` on the box `[lo, hi]`.
///
/// `κ` is 1.5 times the largest `|φ(x+av) - 2φ(x) + φ(x-av)| / a²` over a
/// grid of points and unit directions, with `a` one percent of the box
/// diagonal. The magnitude is used rather than the negative part so that the
/// bound also covers curvature missed between grid points.
pub fn estimate_hessian_bound<F: Fn(Point2) -> f64>(phi: F, lo: Vec2, hi: Vec2) -> Mat2 {
    let a = 0.01 * (hi - lo).norm().max(1e-6);
    let mut kappa: f64 = 0.0;
    for i in 0..GRID {
        for j in 0..GRID {
            let x = Vec2::new(
                lo.x + (hi.x - lo.x) * i as f64 / (GRID - 1) as f64,
                lo.y + (hi.y - lo.y) * j as f64 / (GRID - 1) as f64,
            );
            let f0 = phi(x);
            for k in 0..DIRECTIONS {
                let th = std::f64::consts::PI * k as f64 / DIRECTIONS as f64;
                let v = a * Vec2::new(th.cos(), th.sin());
                let d2 = phi(x + v) - 2.0 * f0 + phi(x - v);
                kappa = kappa.max(d2.abs() / (a * a));
            }
        }
    }
    Mat2::identity() * (SAFETY_FACTOR * kappa)
}
