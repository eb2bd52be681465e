use super::{SafetyError, SafetyEval, FEATURE_TOL};
use crate::geometry::{ConvexPolygon, Mat2, Point2, Vec2};

/// Depth of a notch below a hull edge as a function of the edge-centered
/// parameter `t ∈ [-L/2, L/2]` (`t = 0` at the edge midpoint, increasing in
/// the counter-clockwise direction).
#[derive(Debug, Clone, PartialEq)]
pub enum NotchDepth {
    /// `depth(t) = c₀ + c₁t + c₂t² + …`.
    Polynomial(Vec<f64>),
    /// Breakpoints `(t, depth)` with increasing `t`, interpolated linearly.
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthEval {
    pub value: f64,
    /// One slope on a smooth stretch, two at a table breakpoint.
    pub slopes: Vec<f64>,
    pub second: f64,
}

impl NotchDepth {
    /// `None` when `t` falls outside a table's coverage.
    pub fn eval(&self, t: f64) -> Option<DepthEval> {
        match self {
            NotchDepth::Polynomial(c) => {
                let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &a in c.iter().rev() {
                    d2 = d2 * t + 2.0 * d1;
                    d1 = d1 * t + f;
                    f = f * t + a;
                }
                Some(DepthEval {
                    value: f,
                    slopes: vec![d1],
                    second: d2,
                })
            }
            NotchDepth::Table(pts) => {
                let (t0, tn) = (pts.first()?.0, pts.last()?.0);
                if !(t >= t0 - FEATURE_TOL && t <= tn + FEATURE_TOL) || pts.len() < 2 {
                    return None;
                }
                let t = t.clamp(t0, tn);
                let k = pts
                    .partition_point(|p| p.0 <= t)
                    .saturating_sub(1)
                    .min(pts.len() - 2);
                let slope = |k: usize| (pts[k + 1].1 - pts[k].1) / (pts[k + 1].0 - pts[k].0);
                let value = pts[k].1 + slope(k) * (t - pts[k].0);
                let mut slopes = vec![slope(k)];
                for j in 1..pts.len() - 1 {
                    if (t - pts[j].0).abs() <= FEATURE_TOL {
                        slopes = vec![slope(j - 1), slope(j)];
                    }
                }
                Some(DepthEval {
                    value,
                    slopes,
                    second: 0.0,
                })
            }
        }
    }
}

/// A notch cut into hull edge `edge`.
#[derive(Debug, Clone, PartialEq)]
pub struct Notch {
    pub edge: usize,
    pub depth: NotchDepth,
}

/// Non-convex obstacle described by its convex hull and notches cut into
/// hull edges.
///
/// The correspondence maps a hull point `y` on edge `e` to
/// `y - depth_e(t)·n_e` on the obstacle boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct NonConvexShape {
    hull: ConvexPolygon,
    depths: Vec<Option<NotchDepth>>,
    bound: Mat2,
}

const SAMPLES: usize = 400;

impl NonConvexShape {
    /// Validates the notches and builds the Hessian bound.
    ///
    /// Each notch must vanish at both edge endpoints, stay nonnegative, stay
    /// inside the hull and, for tables, cover the whole edge without concave
    /// kinks. A declared `hstar` must dominate the analytic bound.
    pub fn new(
        hull: ConvexPolygon,
        notches: Vec<Notch>,
        hstar: Option<Mat2>,
    ) -> Result<Self, SafetyError> {
        let shape = Self::assemble(hull, notches)?;
        for (i, d) in shape.depths.iter().enumerate() {
            if let Some(d) = d {
                shape.check_notch(i, d)?;
            }
        }
        shape.with_declared_bound(hstar)
    }

    /// Like [`NonConvexShape::new`] but skips the per-notch shape and coverage
    /// checks.
    pub fn new_unchecked(
        hull: ConvexPolygon,
        notches: Vec<Notch>,
        hstar: Option<Mat2>,
    ) -> Result<Self, SafetyError> {
        Self::assemble(hull, notches)?.with_declared_bound(hstar)
    }

    fn assemble(hull: ConvexPolygon, notches: Vec<Notch>) -> Result<Self, SafetyError> {
        let mut depths: Vec<Option<NotchDepth>> = vec![None; hull.len()];
        for n in notches {
            if n.edge >= hull.len() {
                return Err(SafetyError::InvalidNotch {
                    edge: n.edge,
                    reason: format!("hull has {} edges", hull.len()),
                });
            }
            if depths[n.edge].is_some() {
                return Err(SafetyError::InvalidNotch {
                    edge: n.edge,
                    reason: "edge notched twice".into(),
                });
            }
            depths[n.edge] = Some(n.depth);
        }
        let mut bound = Mat2::zeros();
        for (i, d) in depths.iter().enumerate() {
            if let Some(NotchDepth::Polynomial(_)) = d {
                let e = &hull.edges()[i];
                let half = 0.5 * e.length;
                let min2 = (0..=SAMPLES)
                    .filter_map(|k| {
                        d.as_ref()?
                            .eval(-half + e.length * k as f64 / SAMPLES as f64)
                    })
                    .map(|de| de.second)
                    .fold(f64::INFINITY, f64::min);
                if min2 < 0.0 {
                    bound += -min2 * e.dir * e.dir.transpose();
                }
            }
        }
        Ok(Self {
            hull,
            depths,
            bound,
        })
    }

    fn with_declared_bound(mut self, hstar: Option<Mat2>) -> Result<Self, SafetyError> {
        if let Some(h) = hstar {
            if h.iter().any(|v| !v.is_finite()) || (h[(0, 1)] - h[(1, 0)]).abs() > 1e-12 {
                return Err(SafetyError::InvalidHessianBound(
                    "matrix must be finite and symmetric".into(),
                ));
            }
            if min_eigenvalue(&h) < -1e-12 {
                return Err(SafetyError::InvalidHessianBound(
                    "matrix must be positive semidefinite".into(),
                ));
            }
            if min_eigenvalue(&(h - self.bound)) < -1e-9 {
                return Err(SafetyError::InvalidHessianBound(format!(
                    "declared bound does not dominate the notch curvature {}",
                    self.bound
                )));
            }
            self.bound = h;
        }
        Ok(self)
    }

    fn check_notch(&self, edge: usize, depth: &NotchDepth) -> Result<(), SafetyError> {
        let e = &self.hull.edges()[edge];
        let half = 0.5 * e.length;
        let bad = |reason: String| SafetyError::InvalidNotch { edge, reason };
        if let NotchDepth::Table(pts) = depth {
            if pts.len() < 2 || pts.iter().any(|(t, d)| !(t.is_finite() && d.is_finite())) {
                return Err(bad("table needs at least 2 finite breakpoints".into()));
            }
            let mut prev_slope = f64::NEG_INFINITY;
            for (k, w) in pts.windows(2).enumerate() {
                if !(w[1].0 > w[0].0) {
                    return Err(bad(format!("breakpoint {} does not increase in t", k + 1)));
                }
                let s = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                if s < prev_slope - 1e-12 * (1.0 + s.abs()) {
                    return Err(bad(format!("concave kink at breakpoint {k}")));
                }
                prev_slope = s;
            }
        }
        if let NotchDepth::Polynomial(c) = depth {
            if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                return Err(bad("polynomial needs finite coefficients".into()));
            }
        }
        for t in [-half, half] {
            let d = depth
                .eval(t)
                .ok_or(SafetyError::Correspondence { edge, t })?;
            if d.value.abs() > 1e-9 * (1.0 + e.length) {
                return Err(bad(format!(
                    "depth {} at endpoint t = {t} is not zero",
                    d.value
                )));
            }
        }
        let width = self.hull.width_along(edge);
        for k in 0..=SAMPLES {
            let t = -half + e.length * k as f64 / SAMPLES as f64;
            let d = depth
                .eval(t)
                .ok_or(SafetyError::Correspondence { edge, t })?
                .value;
            if d < -1e-12 {
                return Err(bad(format!("negative depth {d} at t = {t}")));
            }
            if d >= width {
                return Err(bad(format!("depth {d} at t = {t} cuts through the hull")));
            }
            let p = e.point_at(t) - d * e.normal;
            let outside = self
                .hull
                .edges()
                .iter()
                .map(|f| f.line_distance(p))
                .fold(f64::NEG_INFINITY, f64::max);
            if outside > 1e-9 {
                return Err(bad(format!("notch leaves the hull at t = {t}")));
            }
        }
        Ok(())
    }

    pub fn hull(&self) -> &ConvexPolygon {
        &self.hull
    }

    pub fn notch(&self, edge: usize) -> Option<&NotchDepth> {
        self.depths.get(edge)?.as_ref()
    }

    /// `H* = Σ_e max(0, -min depth_e'')·u_e u_eᵀ` unless a bound was declared.
    pub fn hessian_bound(&self) -> Mat2 {
        self.bound
    }

    fn depth(&self, edge: usize, t: f64) -> Result<DepthEval, SafetyError> {
        match &self.depths[edge] {
            None => Ok(DepthEval {
                value: 0.0,
                slopes: vec![0.0],
                second: 0.0,
            }),
            Some(d) => d.eval(t).ok_or(SafetyError::Correspondence { edge, t }),
        }
    }

    /// Obstacle boundary points: notch curves and un-notched hull edges.
    pub fn boundary_points(&self, n: usize) -> Vec<Point2> {
        let per = self.hull.perimeter();
        let mut out = Vec::with_capacity(n + self.hull.len());
        for (i, e) in self.hull.edges().iter().enumerate() {
            let m = ((n as f64 * e.length / per).round() as usize).max(1);
            for k in 0..m {
                let t = -0.5 * e.length + e.length * (k as f64 + 0.5) / m as f64;
                let d = self.depth(i, t).map(|d| d.value).unwrap_or(0.0);
                out.push(e.point_at(t) - d * e.normal);
            }
        }
        out
    }
}

fn min_eigenvalue(m: &Mat2) -> f64 {
    let tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    tr - (tr * tr - det).max(0.0).sqrt()
}

/// Signed directional distance to a notched obstacle.
///
/// Outside the hull the value is the hull distance plus the notch depth at
/// the nearest hull point. Inside it is `max_e (n_e·x - b_e + depth_e(t_e))`
/// with `t_e` clamped to the edge. On the hull boundary the generator sets of
/// both branches are merged.
pub fn eval_nonconvex(shape: &NonConvexShape, x: Point2) -> Result<SafetyEval, SafetyError> {
    let edges = shape.hull.edges();
    let max_line = edges
        .iter()
        .map(|e| e.line_distance(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut gens: Vec<Vec2> = Vec::new();
    let mut value = 0.0;

    if max_line >= -FEATURE_TOL {
        let mut feats = Vec::with_capacity(edges.len());
        let mut best = f64::INFINITY;
        let mut best_val = 0.0;
        for (i, e) in edges.iter().enumerate() {
            let half = 0.5 * e.length;
            let tc = e.centered_param(x);
            let t = tc.clamp(-half, half);
            let d = (x - e.point_at(t)).norm();
            if d < best {
                best = d;
                best_val = d + shape.depth(i, t)?.value;
            }
            feats.push((i, tc, d));
        }
        if max_line > 0.0 {
            value = best_val;
        }
        for (i, tc, d) in feats {
            if d > best + FEATURE_TOL {
                continue;
            }
            let e = &edges[i];
            let half = 0.5 * e.length;
            if tc.abs() <= half + FEATURE_TOL {
                for s in shape.depth(i, tc.clamp(-half, half))?.slopes {
                    gens.push(e.normal + s * e.dir);
                }
            }
            if tc.abs() >= half - FEATURE_TOL {
                let r = x - if tc > 0.0 { e.end } else { e.start };
                let rn = r.norm();
                if rn > FEATURE_TOL {
                    gens.push(r / rn);
                }
            }
        }
    }

    if max_line <= FEATURE_TOL {
        let mut terms: Vec<(f64, Vec<Vec2>)> = Vec::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            let half = 0.5 * e.length;
            let tc = e.centered_param(x);
            let de = shape.depth(i, tc.clamp(-half, half))?;
            let mut g = Vec::with_capacity(2);
            if tc.abs() <= half + FEATURE_TOL {
                g.extend(de.slopes.iter().map(|s| e.normal + *s * e.dir));
            }
            if tc.abs() >= half - FEATURE_TOL {
                g.push(e.normal);
            }
            terms.push((e.line_distance(x) + de.value, g));
        }
        let m = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        if max_line <= 0.0 {
            value = m;
        }
        for (v, g) in terms {
            if v >= m - FEATURE_TOL {
                gens.extend(g);
            }
        }
    }

    Ok(SafetyEval::new(value, gens, shape.bound))
}
