//! Safety indices `φ_j` for obstacles.
//!
//! A safety index is positive in free space, zero on the obstacle boundary and
//! negative inside the obstacle. Evaluations return the value together with a
//! finite generator list for the sub-differential and a lower bound `-H*` on
//! the Hessian.

mod boundary;
mod convex;
mod hessian;
mod nonconvex;

pub use boundary::{eval_boundary, BoundaryProfile, ProfileKind, PROFILE_WINDOW};
pub use convex::eval_convex;
pub use hessian::estimate_hessian_bound;
pub use nonconvex::{eval_nonconvex, DepthEval, NonConvexShape, Notch, NotchDepth};

use crate::geometry::{ConvexPolygon, GeometryError, Isometry2, Mat2, Point2, Vec2};
use thiserror::Error;

/// Two pieces are treated as simultaneously active when their values differ
/// by at most this much.
pub const FEATURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SafetyError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("profile has a concave kink at breakpoint {index}")]
    ConcaveKink { index: usize },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("invalid notch on edge {edge}: {reason}")]
    InvalidNotch { edge: usize, reason: String },
    #[error("no correspondence for hull edge {edge} at parameter {t}")]
    Correspondence { edge: usize, t: f64 },
    #[error("invalid Hessian bound: {0}")]
    InvalidHessianBound(String),
    #[error("margin must be finite and nonnegative, got {0}")]
    InvalidMargin(f64),
}

/// Value and first/second order information of a safety index at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyEval {
    pub value: f64,
    /// Gradients of the active smooth pieces. Their convex hull is the
    /// sub-differential.
    pub generators: Vec<Vec2>,
    pub smooth: bool,
    /// `H*` with `φ + ½(x-x₀)ᵀH*(x-x₀)` convex.
    pub hessian_bound: Mat2,
}

impl SafetyEval {
    /// Builds an evaluation, merging generators closer than [`FEATURE_TOL`]
    /// and sorting them lexicographically.
    pub fn new(value: f64, generators: Vec<Vec2>, hessian_bound: Mat2) -> Self {
        let mut gens: Vec<Vec2> = Vec::with_capacity(generators.len());
        for g in generators {
            if !gens.iter().any(|h| (h - g).amax() <= FEATURE_TOL) {
                gens.push(g);
            }
        }
        gens.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        Self {
            value,
            smooth: gens.len() == 1,
            generators: gens,
            hessian_bound,
        }
    }

    pub fn gradient(&self) -> Vec2 {
        self.generators[0]
    }

    /// `max_g g·v`, the directional derivative of a semi-convex index.
    pub fn max_directional(&self, v: Vec2) -> f64 {
        self.generators
            .iter()
            .map(|g| g.dot(&v))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Re-expresses an evaluation taken in a rotated frame in world axes.
    pub fn rotated(mut self, iso: &Isometry2) -> Self {
        if iso.rotation != 0.0 {
            for g in &mut self.generators {
                *g = iso.rotate(*g);
            }
            let r = iso.rotation_matrix();
            let h = r * self.hessian_bound * r.transpose();
            self.hessian_bound = 0.5 * (h + h.transpose());
        }
        self
    }
}

/// Anything that can be evaluated as a safety index in the plane.
pub trait SafetyFunction {
    fn eval(&self, x: Point2) -> SafetyEval;

    fn value(&self, x: Point2) -> f64 {
        self.eval(x).value
    }
}

/// How the curvature of a safety index is classified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    /// `φ` is affine, hence concave; its super-level set is a half-plane.
    Affine,
    Convex,
    /// Neither convex nor concave; only the Hessian lower bound is known.
    SemiConvex,
}

/// Obstacle geometry in its own frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    ConvexPolygon(ConvexPolygon),
    Boundary(BoundaryProfile),
    NonConvex(NonConvexShape),
}

impl Shape {
    pub fn curvature(&self) -> Curvature {
        match self {
            Shape::ConvexPolygon(_) => Curvature::Convex,
            Shape::Boundary(b) => b.curvature(),
            Shape::NonConvex(n) => {
                if n.hessian_bound() == Mat2::zeros() {
                    Curvature::Convex
                } else {
                    Curvature::SemiConvex
                }
            }
        }
    }

    pub fn hessian_bound(&self) -> Mat2 {
        match self {
            Shape::ConvexPolygon(_) => Mat2::zeros(),
            Shape::Boundary(b) => {
                let r = b.frame.rotation_matrix();
                r * b.hessian_bound() * r.transpose()
            }
            Shape::NonConvex(n) => n.hessian_bound(),
        }
    }

    /// Points on the zero level set, in the shape frame.
    pub fn boundary_points(&self, n: usize) -> Vec<Point2> {
        match self {
            Shape::ConvexPolygon(p) => {
                let per = p.perimeter();
                (0..n)
                    .map(|k| p.boundary_point(per * k as f64 / n as f64))
                    .collect()
            }
            Shape::Boundary(b) => b.graph_points(n),
            Shape::NonConvex(s) => s.boundary_points(n),
        }
    }

    /// Axis-aligned box `(lo, hi)` around the interesting part of the shape.
    pub fn extent(&self) -> (Point2, Point2) {
        let pts = self.boundary_points(64);
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in &pts {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }
}

impl SafetyFunction for Shape {
    fn eval(&self, x: Point2) -> SafetyEval {
        match self {
            Shape::ConvexPolygon(p) => eval_convex(p, x),
            Shape::Boundary(b) => eval_boundary(b, b.frame.apply_inverse(x)).rotated(&b.frame),
            Shape::NonConvex(s) => {
                eval_nonconvex(s, x).expect("correspondence validated at construction")
            }
        }
    }
}

/// An obstacle: shape, per-waypoint placement and distance margin.
#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub shape: Shape,
    poses: Vec<Isometry2>,
    margin: f64,
}

impl Obstacle {
    /// A static obstacle at the identity placement with zero margin.
    pub fn new(shape: Shape) -> Self {
        Self {
            shape,
            poses: Vec::new(),
            margin: 0.0,
        }
    }

    pub fn with_pose(mut self, pose: Isometry2) -> Self {
        self.poses = vec![pose];
        self
    }

    /// Per-waypoint placements. Waypoints past the end reuse the last pose.
    pub fn with_poses(mut self, poses: Vec<Isometry2>) -> Self {
        self.poses = poses;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Result<Self, SafetyError> {
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(SafetyError::InvalidMargin(margin));
        }
        self.margin = margin;
        Ok(self)
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn poses(&self) -> &[Isometry2] {
        &self.poses
    }

    pub fn is_static(&self) -> bool {
        self.poses.len() <= 1
    }

    /// Placement at waypoint `q` (0-based: waypoint 0 is `x₁`).
    pub fn pose_at(&self, q: usize) -> Isometry2 {
        match self.poses.len() {
            0 => Isometry2::identity(),
            n => self.poses[q.min(n - 1)],
        }
    }

    pub fn at(&self, q: usize, extra_margin: f64) -> PosedObstacle<'_> {
        PosedObstacle {
            obstacle: self,
            waypoint: q,
            extra_margin,
        }
    }
}

/// Evaluates obstacle `obstacle` at waypoint `q` at world point `x`.
///
/// The point is mapped into the obstacle frame, the margin is subtracted from
/// the value and generators are rotated back into world axes.
pub fn apply_pose(obstacle: &Obstacle, q: usize, x: Point2) -> SafetyEval {
    let pose = obstacle.pose_at(q);
    let mut e = obstacle.shape.eval(pose.apply_inverse(x)).rotated(&pose);
    e.value -= obstacle.margin;
    e
}

/// Hessian bound of an obstacle in its own frame.
pub fn hessian_bound(obstacle: &Obstacle) -> Mat2 {
    obstacle.shape.hessian_bound()
}

/// An obstacle fixed at one waypoint, usable as a plain safety function.
#[derive(Debug, Clone, Copy)]
pub struct PosedObstacle<'a> {
    pub obstacle: &'a Obstacle,
    pub waypoint: usize,
    /// Added to the obstacle's own margin.
    pub extra_margin: f64,
}

impl SafetyFunction for PosedObstacle<'_> {
    fn eval(&self, x: Point2) -> SafetyEval {
        let mut e = apply_pose(self.obstacle, self.waypoint, x);
        e.value -= self.extra_margin;
        e
    }
}
