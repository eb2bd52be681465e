//! Planar points, rigid transforms and convex polygons.

use nalgebra::{Matrix2, Vector2};
use std::cmp::Ordering;
use thiserror::Error;

/// A 2D vector or point, in meters.
pub type Vec2 = Vector2<f64>;
/// Alias used where a value is a position rather than a direction.
pub type Point2 = Vec2;
/// A 2×2 matrix.
pub type Mat2 = Matrix2<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("polygon is not strictly convex and counter-clockwise at vertex {0}")]
    NotConvexCcw(usize),
}

/// Rigid motion `x ↦ R(rotation)·x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Isometry2 {
    pub rotation: f64,
    pub translation: Vec2,
}

impl Default for Isometry2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Isometry2 {
    pub fn new(rotation: f64, translation: Vec2) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(0.0, Vec2::zeros())
    }

    pub fn translation(t: Vec2) -> Self {
        Self::new(0.0, t)
    }

    pub fn is_identity(&self) -> bool {
        self.rotation == 0.0 && self.translation == Vec2::zeros()
    }

    pub fn rotation_matrix(&self) -> Mat2 {
        let (s, c) = self.rotation.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    pub fn rotate(&self, v: Vec2) -> Vec2 {
        let (s, c) = self.rotation.sin_cos();
        Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    pub fn rotate_inverse(&self, v: Vec2) -> Vec2 {
        let (s, c) = self.rotation.sin_cos();
        Vec2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        self.rotate(p) + self.translation
    }

    pub fn apply_inverse(&self, p: Point2) -> Point2 {
        self.rotate_inverse(p - self.translation)
    }

    pub fn inverse(&self) -> Isometry2 {
        Isometry2::new(-self.rotation, -self.rotate_inverse(self.translation))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Isometry2) -> Isometry2 {
        Isometry2::new(
            self.rotation + other.rotation,
            self.apply(other.translation),
        )
    }

    /// Linear interpolation of angle and translation.
    pub fn lerp(&self, other: &Isometry2, s: f64) -> Isometry2 {
        Isometry2::new(
            self.rotation + s * (other.rotation - self.rotation),
            self.translation + s * (other.translation - self.translation),
        )
    }
}

/// `(b - a) × (c - a)`; positive when `a, b, c` turn left.
pub fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// One polygon edge with its outward unit normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub start: Point2,
    pub end: Point2,
    /// Unit direction from `start` to `end`.
    pub dir: Vec2,
    /// Outward unit normal.
    pub normal: Vec2,
    pub length: f64,
    /// `normal · x - offset` is the signed distance to the supporting line.
    pub offset: f64,
}

impl Edge {
    fn new(start: Point2, end: Point2) -> Self {
        let d = end - start;
        let length = d.norm();
        let dir = d / length;
        let normal = Vec2::new(dir.y, -dir.x);
        Self {
            start,
            end,
            dir,
            normal,
            length,
            offset: normal.dot(&start),
        }
    }

    pub fn midpoint(&self) -> Point2 {
        0.5 * (self.start + self.end)
    }

    /// Signed distance from `x` to the supporting line (positive outside).
    pub fn line_distance(&self, x: Point2) -> f64 {
        self.normal.dot(&x) - self.offset
    }

    /// Edge-centered coordinate of the projection of `x`, unclamped.
    pub fn centered_param(&self, x: Point2) -> f64 {
        self.dir.dot(&(x - self.midpoint()))
    }

    pub fn point_at(&self, t: f64) -> Point2 {
        self.midpoint() + t * self.dir
    }
}

/// Strictly convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point2>,
    edges: Vec<Edge>,
}

impl ConvexPolygon {
    /// Validates that `vertices` are finite, counter-clockwise and strictly convex.
    pub fn new(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if n < 3 {
            return Err(GeometryError::TooFewVertices(n));
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite()))
        {
            return Err(GeometryError::NonFinite(i));
        }
        let scale = vertices.iter().map(|v| v.amax()).fold(1.0_f64, f64::max);
        for i in 0..n {
            let a = vertices[(i + n - 1) % n];
            let b = vertices[i];
            let c = vertices[(i + 1) % n];
            if orient(a, b, c) <= 1e-12 * scale * scale {
                return Err(GeometryError::NotConvexCcw(i));
            }
        }
        // A star-shaped winding (e.g. a pentagram) passes the local test.
        let mut turn = 0.0;
        for i in 0..n {
            let e0 = vertices[(i + 1) % n] - vertices[i];
            let e1 = vertices[(i + 2) % n] - vertices[(i + 1) % n];
            turn += e0.perp(&e1).atan2(e0.dot(&e1));
        }
        if (turn - 2.0 * std::f64::consts::PI).abs() > 1e-6 {
            return Err(GeometryError::NotConvexCcw(0));
        }
        let edges = (0..n)
            .map(|i| Edge::new(vertices[i], vertices[(i + 1) % n]))
            .collect();
        Ok(Self { vertices, edges })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, x: Point2) -> bool {
        self.edges.iter().all(|e| e.line_distance(x) <= 0.0)
    }

    pub fn centroid(&self) -> Point2 {
        self.vertices.iter().sum::<Vec2>() / self.vertices.len() as f64
    }

    pub fn perimeter(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    /// Point at arc length `s` along the boundary, starting at vertex 0.
    pub fn boundary_point(&self, s: f64) -> Point2 {
        let total = self.perimeter();
        let mut s = s.rem_euclid(total);
        for e in &self.edges {
            if s <= e.length {
                return e.start + s * e.dir;
            }
            s -= e.length;
        }
        self.vertices[0]
    }

    pub fn transformed(&self, iso: &Isometry2) -> ConvexPolygon {
        let vertices = self.vertices.iter().map(|v| iso.apply(*v)).collect();
        ConvexPolygon::new(vertices).expect("rigid motions preserve convexity")
    }

    /// Polygon width measured along the normal of edge `edge`.
    pub fn width_along(&self, edge: usize) -> f64 {
        let e = &self.edges[edge];
        self.vertices
            .iter()
            .map(|v| -e.line_distance(*v))
            .fold(0.0, f64::max)
    }
}

fn lex(a: &Point2, b: &Point2) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// Smallest counter-clockwise convex polygon containing `points`.
///
/// Collinear boundary points are dropped so the result is strictly convex.
pub fn convex_hull(points: &[Point2]) -> Result<ConvexPolygon, GeometryError> {
    if let Some(i) = points
        .iter()
        .position(|v| !(v.x.is_finite() && v.y.is_finite()))
    {
        return Err(GeometryError::NonFinite(i));
    }
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(lex);
    pts.dedup_by(|a, b| a == b);
    if pts.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!(
            "{} distinct points",
            pts.len()
        )));
    }
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], *p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], *p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 {
        return Err(GeometryError::DegenerateInput(
            "all points are collinear".into(),
        ));
    }
    ConvexPolygon::new(lower)
        .map_err(|_| GeometryError::DegenerateInput("points are nearly collinear".into()))
}
