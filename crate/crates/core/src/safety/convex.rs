use super::{SafetyEval, FEATURE_TOL};
use crate::geometry::{ConvexPolygon, Mat2, Point2, Vec2};

/// Signed distance to a convex polygon: positive outside, negative inside.
///
/// Generators are the unit gradients of every nearest boundary feature
/// (edge or vertex) within [`FEATURE_TOL`]. On the boundary they are the
/// outward normals of the edges through `x`.
pub fn eval_convex(poly: &ConvexPolygon, x: Point2) -> SafetyEval {
    let edges = poly.edges();
    let line: Vec<f64> = edges.iter().map(|e| e.line_distance(x)).collect();
    let max_line = line.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    if max_line < -FEATURE_TOL {
        let gens = edges
            .iter()
            .zip(&line)
            .filter(|(_, d)| **d >= max_line - FEATURE_TOL)
            .map(|(e, _)| e.normal)
            .collect();
        return SafetyEval::new(max_line, gens, Mat2::zeros());
    }
    if max_line <= FEATURE_TOL {
        let gens = edges
            .iter()
            .zip(&line)
            .filter(|(_, d)| d.abs() <= FEATURE_TOL)
            .map(|(e, _)| e.normal)
            .collect();
        return SafetyEval::new(max_line, gens, Mat2::zeros());
    }

    // Outside: nearest point on each edge segment.
    let mut feats: Vec<(f64, Vec2)> = Vec::with_capacity(2);
    let mut best = f64::INFINITY;
    for e in edges {
        let s = e.dir.dot(&(x - e.start));
        let (d, g) = if s <= 0.0 {
            let r = x - e.start;
            (r.norm(), r / r.norm())
        } else if s >= e.length {
            let r = x - e.end;
            (r.norm(), r / r.norm())
        } else if e.line_distance(x) > 0.0 {
            (e.line_distance(x), e.normal)
        } else {
            // Edges facing away never hold the nearest point.
            continue;
        };
        best = best.min(d);
        feats.push((d, g));
    }
    let gens = feats
        .into_iter()
        .filter(|(d, _)| *d <= best + FEATURE_TOL)
        .map(|(_, g)| g)
        .collect();
    SafetyEval::new(best, gens, Mat2::zeros())
}
