#![allow(dead_code)]

use cfs_core::{
    initial_reference, BoundaryProfile, ConvexPolygon, CostModel, CostWeights, Isometry2,
    NonConvexShape, Notch, NotchDepth, Obstacle, Point2, Shape, Trajectory, TrajectoryProblem,
    Vec2,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> ConvexPolygon {
    ConvexPolygon::new(vec![
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
    ])
    .unwrap()
}

/// The square with corners `(±1, ±1)`.
pub fn unit_square() -> ConvexPolygon {
    rect(-1.0, -1.0, 1.0, 1.0)
}

/// Unit square whose bottom edge is replaced by the curve `p₂ = -p₁²`.
pub fn notched_square() -> NonConvexShape {
    NonConvexShape::new(
        unit_square(),
        vec![Notch {
            edge: 2,
            depth: NotchDepth::Polynomial(vec![1.0, 0.0, -1.0]),
        }],
        None,
    )
    .unwrap()
}

pub fn uniform(r: &mut ChaCha8Rng, lo: Vec2, hi: Vec2) -> Vec2 {
    Vec2::new(r.random_range(lo.x..hi.x), r.random_range(lo.y..hi.y))
}

pub fn unit(r: &mut ChaCha8Rng) -> Vec2 {
    let th: f64 = r.random_range(0.0..std::f64::consts::TAU);
    Vec2::new(th.cos(), th.sin())
}

/// One obstacle of each kind together with independent geometry for tests.
pub struct Family {
    pub name: &'static str,
    pub obstacle: Obstacle,
    pub lo: Vec2,
    pub hi: Vec2,
    /// Membership of a world point in the obstacle interior, computed without
    /// the safety index. `None` within `1e-6` of the boundary.
    pub inside: Box<dyn Fn(Point2) -> Option<bool>>,
    /// World points on the obstacle boundary.
    pub boundary: Vec<Point2>,
}

fn classify(margin: f64) -> Option<bool> {
    if margin > 1e-6 {
        Some(true)
    } else if margin < -1e-6 {
        Some(false)
    } else {
        None
    }
}

fn inside_convex(verts: &[Point2], p: Point2) -> f64 {
    // smallest signed distance to the left of each CCW edge
    let n = verts.len();
    (0..n)
        .map(|i| {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let e = b - a;
            (e.x * (p.y - a.y) - e.y * (p.x - a.x)) / e.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

fn edge_samples(verts: &[Point2], per_edge: usize) -> Vec<Point2> {
    let n = verts.len();
    let mut out = Vec::new();
    for i in 0..n {
        for k in 0..per_edge {
            let s = k as f64 / per_edge as f64;
            out.push(verts[i] * (1.0 - s) + verts[(i + 1) % n] * s);
        }
    }
    out
}

pub fn families() -> Vec<Family> {
    let mut out = Vec::new();

    let pent = vec![
        Vec2::new(1.0, 0.0),
        Vec2::new(0.4, 1.1),
        Vec2::new(-0.9, 0.7),
        Vec2::new(-0.8, -0.6),
        Vec2::new(0.5, -1.0),
    ];
    let pose = Isometry2::new(0.7, Vec2::new(1.0, -0.5));
    let local = pent.clone();
    out.push(Family {
        name: "convex_polygon",
        obstacle: Obstacle::new(Shape::ConvexPolygon(
            ConvexPolygon::new(pent.clone()).unwrap(),
        ))
        .with_pose(pose),
        lo: Vec2::new(-1.5, -2.5),
        hi: Vec2::new(3.5, 1.5),
        inside: Box::new(move |p| classify(inside_convex(&local, pose.apply_inverse(p)))),
        boundary: edge_samples(&pent, 200)
            .into_iter()
            .map(|p| pose.apply(p))
            .collect(),
    });

    // f(t) = -t for t < 0 and t/2 for t ≥ 0, extrapolated linearly.
    let pwl = BoundaryProfile::piecewise_linear(
        vec![(-1.0, 1.0), (0.0, 0.0), (2.0, 1.0)],
        Isometry2::identity(),
    )
    .unwrap();
    let pose = Isometry2::new(-0.4, Vec2::new(0.3, 0.2));
    let f = |t: f64| if t < 0.0 { -t } else { 0.5 * t };
    out.push(Family {
        name: "boundary_pwl",
        obstacle: Obstacle::new(Shape::Boundary(pwl)).with_pose(pose),
        lo: Vec2::new(-3.0, -3.0),
        hi: Vec2::new(3.0, 3.0),
        inside: Box::new(move |p| {
            let l = pose.apply_inverse(p);
            classify((l.y - f(l.x)) / 2.0)
        }),
        boundary: (0..1000)
            .map(|k| {
                let t = -3.0 + 6.0 * k as f64 / 999.0;
                pose.apply(Vec2::new(t, f(t)))
            })
            .collect(),
    });

    // f(t) = -t²/4, semi-convex with curvature bound 1/2.
    let poly = BoundaryProfile::polynomial(
        vec![0.0, 0.0, -0.25],
        Some(0.5),
        Isometry2::new(0.5, Vec2::zeros()),
    )
    .unwrap();
    let frame = Isometry2::new(0.5, Vec2::zeros());
    let g = |t: f64| -0.25 * t * t;
    out.push(Family {
        name: "boundary_poly",
        obstacle: Obstacle::new(Shape::Boundary(poly)),
        lo: Vec2::new(-3.0, -3.0),
        hi: Vec2::new(3.0, 3.0),
        inside: Box::new(move |p| {
            let l = frame.apply_inverse(p);
            classify((l.y - g(l.x)) / (1.0 + 0.5 * l.x.abs()))
        }),
        boundary: (0..1000)
            .map(|k| {
                let t = -3.0 + 6.0 * k as f64 / 999.0;
                frame.apply(Vec2::new(t, g(t)))
            })
            .collect(),
    });

    let pose = Isometry2::new(1.1, Vec2::new(-0.5, 0.8));
    let sq = unit_square();
    let corners = sq.vertices().to_vec();
    let mut boundary: Vec<Point2> = Vec::new();
    for k in 0..250 {
        let t = -1.0 + 2.0 * k as f64 / 250.0;
        boundary.push(Vec2::new(t, -t * t));
        boundary.push(Vec2::new(1.0, t));
        boundary.push(Vec2::new(-t, 1.0));
        boundary.push(Vec2::new(-1.0, -t));
    }
    out.push(Family {
        name: "nonconvex",
        obstacle: Obstacle::new(Shape::NonConvex(notched_square())).with_pose(pose),
        lo: Vec2::new(-3.0, -2.5),
        hi: Vec2::new(2.0, 3.0),
        inside: Box::new(move |p| {
            let l = pose.apply_inverse(p);
            let hull = inside_convex(&corners, l);
            let notch = (l.y + l.x * l.x) / (1.0 + 2.0 * l.x.abs());
            classify(hull.min(notch))
        }),
        boundary: boundary.into_iter().map(|p| pose.apply(p)).collect(),
    });
    out
}

/// `J` with `Q = 0`, `S = h⁻¹AᵀA` on the straight line from `start` to `goal`.
pub fn problem(
    h: usize,
    start: Vec2,
    goal: Vec2,
    obstacles: Vec<Obstacle>,
    margin: f64,
) -> (TrajectoryProblem, Trajectory) {
    let t = initial_reference(start, goal, h);
    let cost = CostModel::new(&t, CostWeights::smoothness(h)).unwrap();
    (TrajectoryProblem::new(cost, obstacles, margin).unwrap(), t)
}

pub fn convex(p: ConvexPolygon) -> Obstacle {
    Obstacle::new(Shape::ConvexPolygon(p))
}

/// Random convex polygon: hull of points on a jittered circle.
pub fn random_polygon(r: &mut ChaCha8Rng, center: Vec2, radius: f64) -> ConvexPolygon {
    let n = r.random_range(3..8);
    let mut angles: Vec<f64> = (0..n)
        .map(|_| r.random_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    let pts: Vec<Point2> = angles
        .iter()
        .map(|a| center + radius * r.random_range(0.6..1.0) * Vec2::new(a.cos(), a.sin()))
        .collect();
    cfs_core::convex_hull(&pts).unwrap_or_else(|_| {
        rect(
            center.x - radius,
            center.y - radius,
            center.x + radius,
            center.y + radius,
        )
    })
}
