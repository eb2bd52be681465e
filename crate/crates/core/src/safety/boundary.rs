use super::{estimate_hessian_bound, Curvature, SafetyError, SafetyEval, FEATURE_TOL};
use crate::geometry::{Isometry2, Mat2, Point2, Vec2};

/// Half-width of the profile-frame interval `|t| ≤ PROFILE_WINDOW` on which
/// polynomial curvature bounds are checked or estimated.
pub const PROFILE_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// Breakpoints `(t, f(t))` with increasing `t`, extended linearly past
    /// both ends.
    PiecewiseLinear(Vec<(f64, f64)>),
    /// Coefficients `c` of `f(t) = c₀ + c₁t + c₂t² + …`.
    Polynomial(Vec<f64>),
}

/// Boundary obstacle `{p₂ ≥ f(p₁)}` in a frame placed by `frame`.
///
/// Free space lies below the graph and the index is `φ = f(p₁) - p₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    kind: ProfileKind,
    pub frame: Isometry2,
    slopes: Vec<f64>,
    bound: Mat2,
}

impl BoundaryProfile {
    /// Convex piecewise-linear profile. Concave kinks are rejected.
    pub fn piecewise_linear(
        points: Vec<(f64, f64)>,
        frame: Isometry2,
    ) -> Result<Self, SafetyError> {
        if points.len() < 2 {
            return Err(SafetyError::InvalidProfile(
                "piecewise-linear profile needs at least 2 breakpoints".into(),
            ));
        }
        if points
            .iter()
            .any(|(t, f)| !(t.is_finite() && f.is_finite()))
        {
            return Err(SafetyError::InvalidProfile("non-finite breakpoint".into()));
        }
        let mut slopes = Vec::with_capacity(points.len() - 1);
        for (k, w) in points.windows(2).enumerate() {
            let dt = w[1].0 - w[0].0;
            if !(dt > 0.0) {
                return Err(SafetyError::InvalidProfile(format!(
                    "breakpoint {} does not increase in t",
                    k + 1
                )));
            }
            slopes.push((w[1].1 - w[0].1) / dt);
        }
        for k in 1..slopes.len() {
            let tol = 1e-12 * (1.0 + slopes[k].abs().max(slopes[k - 1].abs()));
            if slopes[k] < slopes[k - 1] - tol {
                return Err(SafetyError::ConcaveKink { index: k });
            }
        }
        Ok(Self {
            kind: ProfileKind::PiecewiseLinear(points),
            frame,
            slopes,
            bound: Mat2::zeros(),
        })
    }

    /// Smooth polynomial profile.
    ///
    /// With `curvature = Some(κ)` the bound is `H* = diag(κ, 0)` and
    /// `f'' ≥ -κ` is checked on `|t| ≤ PROFILE_WINDOW`. Without it the bound
    /// is estimated from sampled second differences.
    pub fn polynomial(
        coeffs: Vec<f64>,
        curvature: Option<f64>,
        frame: Isometry2,
    ) -> Result<Self, SafetyError> {
        let mut coeffs = coeffs;
        if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SafetyError::InvalidProfile(
                "polynomial needs finite coefficients".into(),
            ));
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        let mut p = Self {
            kind: ProfileKind::Polynomial(coeffs),
            frame,
            slopes: Vec::new(),
            bound: Mat2::zeros(),
        };
        p.bound = match curvature {
            Some(k) => {
                if !(k.is_finite() && k >= 0.0) {
                    return Err(SafetyError::InvalidProfile(format!(
                        "curvature bound must be finite and nonnegative, got {k}"
                    )));
                }
                let n = 4000;
                for i in 0..=n {
                    let t = -PROFILE_WINDOW + 2.0 * PROFILE_WINDOW * i as f64 / n as f64;
                    let f2 = p.poly_derivs(t).2;
                    if f2 < -k - 1e-9 * (1.0 + k) {
                        return Err(SafetyError::InvalidProfile(format!(
                            "f''({t}) = {f2} is below the declared bound -{k}"
                        )));
                    }
                }
                Mat2::new(k, 0.0, 0.0, 0.0)
            }
            None if p.degree() <= 1 => Mat2::zeros(),
            None => {
                let probe = Self {
                    frame: Isometry2::identity(),
                    ..p.clone()
                };
                estimate_hessian_bound(
                    |x: Point2| probe.f(x.x) - x.y,
                    Vec2::new(-PROFILE_WINDOW, -1.0),
                    Vec2::new(PROFILE_WINDOW, 1.0),
                )
            }
        };
        Ok(p)
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn degree(&self) -> usize {
        match &self.kind {
            ProfileKind::PiecewiseLinear(_) => 1,
            ProfileKind::Polynomial(c) => c.len().saturating_sub(1),
        }
    }

    /// `(f, f', f'')` of the polynomial profile at `t`.
    fn poly_derivs(&self, t: f64) -> (f64, f64, f64) {
        let ProfileKind::Polynomial(c) = &self.kind else {
            unreachable!()
        };
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for &a in c.iter().rev() {
            d2 = d2 * t + 2.0 * d1;
            d1 = d1 * t + f;
            f = f * t + a;
        }
        (f, d1, d2)
    }

    pub fn f(&self, t: f64) -> f64 {
        match &self.kind {
            ProfileKind::Polynomial(_) => self.poly_derivs(t).0,
            ProfileKind::PiecewiseLinear(pts) => {
                let k = self.segment(t);
                pts[k].1 + self.slopes[k] * (t - pts[k].0)
            }
        }
    }

    /// Index of the linear piece containing `t`.
    fn segment(&self, t: f64) -> usize {
        let ProfileKind::PiecewiseLinear(pts) = &self.kind else {
            unreachable!()
        };
        let upper = pts.partition_point(|(tk, _)| *tk <= t);
        upper.saturating_sub(1).min(self.slopes.len() - 1)
    }

    /// Slopes of every piece active at `t`: one on a smooth stretch, two at a
    /// breakpoint.
    pub fn slopes_at(&self, t: f64) -> Vec<f64> {
        match &self.kind {
            ProfileKind::Polynomial(_) => vec![self.poly_derivs(t).1],
            ProfileKind::PiecewiseLinear(pts) => {
                let mut out = vec![self.slopes[self.segment(t)]];
                for k in 1..pts.len() - 1 {
                    if (t - pts[k].0).abs() <= FEATURE_TOL {
                        out = vec![self.slopes[k - 1], self.slopes[k]];
                    }
                }
                out
            }
        }
    }

    pub fn curvature(&self) -> Curvature {
        match &self.kind {
            ProfileKind::PiecewiseLinear(_) => {
                let first = self.slopes[0];
                if self
                    .slopes
                    .iter()
                    .all(|s| (s - first).abs() <= 1e-12 * (1.0 + first.abs()))
                {
                    Curvature::Affine
                } else {
                    Curvature::Convex
                }
            }
            ProfileKind::Polynomial(c) => match c.len() {
                0..=2 => Curvature::Affine,
                3 if c[2] >= 0.0 => Curvature::Convex,
                _ => Curvature::SemiConvex,
            },
        }
    }

    /// Hessian bound in the profile frame.
    pub fn hessian_bound(&self) -> Mat2 {
        self.bound
    }

    /// Graph points `(t, f(t))` mapped through `frame`.
    pub fn graph_points(&self, n: usize) -> Vec<Point2> {
        let (lo, hi) = match &self.kind {
            ProfileKind::PiecewiseLinear(pts) => (pts[0].0 - 1.0, pts[pts.len() - 1].0 + 1.0),
            ProfileKind::Polynomial(_) => (-PROFILE_WINDOW, PROFILE_WINDOW),
        };
        (0..n)
            .map(|k| {
                let t = lo + (hi - lo) * (k as f64 + 0.5) / n as f64;
                self.frame.apply(Vec2::new(t, self.f(t)))
            })
            .collect()
    }
}

/// Directional distance `f(p₁) - p₂` with `x` given in the profile frame.
pub fn eval_boundary(profile: &BoundaryProfile, x: Point2) -> SafetyEval {
    let gens = profile
        .slopes_at(x.x)
        .into_iter()
        .map(|s| Vec2::new(s, -1.0))
        .collect();
    SafetyEval::new(profile.f(x.x) - x.y, gens, profile.hessian_bound())
}
