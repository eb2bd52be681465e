use super::{max_angular_gap, origin_in_hull};
use crate::geometry::{Point2, Vec2};
use crate::safety::{apply_pose, Obstacle, SafetyEval};

/// Sampling settings for [`validate_decomposition`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    /// Boundary samples per obstacle; the same number of interior samples is
    /// drawn from the box.
    pub samples: usize,
    pub lo: Vec2,
    pub hi: Vec2,
}

impl ValidationOptions {
    /// Box covering every obstacle at every listed waypoint, padded by 1 m.
    pub fn around(obstacles: &[Obstacle], waypoints: &[usize], samples: usize) -> Self {
        let mut lo = Vec2::repeat(f64::INFINITY);
        let mut hi = Vec2::repeat(f64::NEG_INFINITY);
        for o in obstacles {
            let (a, b) = o.shape.extent();
            for &q in waypoints {
                let pose = o.pose_at(q);
                for c in [a, b, Vec2::new(a.x, b.y), Vec2::new(b.x, a.y)] {
                    let w = pose.apply(c);
                    lo = lo.inf(&w);
                    hi = hi.sup(&w);
                }
            }
        }
        if !lo.x.is_finite() {
            lo = Vec2::repeat(-1.0);
            hi = Vec2::repeat(1.0);
        }
        Self {
            samples,
            lo: lo - Vec2::repeat(1.0),
            hi: hi + Vec2::repeat(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Every generator of the sub-differential vanishes.
    ZeroSubdifferential {
        obstacle: usize,
        waypoint: usize,
        point: Point2,
    },
    /// The origin lies in the sub-differential at a boundary point.
    OriginInSubdifferential {
        obstacle: usize,
        waypoint: usize,
        point: Point2,
    },
    /// Several indices vanish together with no common strict descent
    /// direction.
    NoCommonDescent {
        obstacles: Vec<usize>,
        waypoint: usize,
        point: Point2,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub points_checked: usize,
    pub junctions_checked: usize,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const JUNCTION_TOL: f64 = 1e-7;

/// Moves `p` onto the zero level set of obstacle `o` by Newton steps along
/// its gradient.
fn project(o: &Obstacle, q: usize, mut p: Point2) -> Point2 {
    for _ in 0..30 {
        let e = apply_pose(o, q, p);
        if e.value.abs() <= 1e-13 {
            break;
        }
        let g = e.generators[0];
        let n2 = g.norm_squared();
        if n2 == 0.0 {
            break;
        }
        p -= e.value / n2 * g;
    }
    p
}

/// Ordered samples of the zero level set of obstacle `o` at waypoint `q`.
fn level_points(o: &Obstacle, q: usize, n: usize) -> Vec<Point2> {
    let pose = o.pose_at(q);
    let mut local = o.shape.boundary_points(n);
    if let crate::safety::Shape::ConvexPolygon(p) = &o.shape {
        local.extend_from_slice(p.vertices());
    }
    if let crate::safety::Shape::NonConvex(s) = &o.shape {
        local.extend_from_slice(s.hull().vertices());
    }
    local
        .into_iter()
        .map(|p| project(o, q, pose.apply(p)))
        .collect()
}

/// Van der Corput radical inverse, used for deterministic interior samples.
fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut r = 0.0;
    while i > 0 {
        r += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    r
}

fn no_common_descent(evals: &[&SafetyEval]) -> bool {
    let gens: Vec<Vec2> = evals
        .iter()
        .flat_map(|e| e.generators.iter().copied())
        .collect();
    origin_in_hull(&gens, 1e-12) || max_angular_gap(&gens) <= std::f64::consts::PI + 1e-9
}

/// Checks the three regularity conditions of a decomposition by sampling.
///
/// 1. Some generator is nonzero everywhere.
/// 2. The origin is not in the sub-differential on each obstacle boundary.
/// 3. Where several indices vanish together, their generators lie in a common
///    open half-plane, so a direction decreasing all of them exists.
///
/// Junctions are located from boundary samples of each obstacle that land on
/// another boundary, and by bisecting sign changes of the other indices along
/// the sampled boundary.
pub fn validate_decomposition(
    obstacles: &[Obstacle],
    waypoints: &[usize],
    options: &ValidationOptions,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = options.samples.max(1);
    for &q in waypoints {
        // Condition 1 on interior samples.
        for i in 0..n {
            let p = Vec2::new(
                options.lo.x + (options.hi.x - options.lo.x) * radical_inverse(i + 1, 2),
                options.lo.y + (options.hi.y - options.lo.y) * radical_inverse(i + 1, 3),
            );
            for (j, o) in obstacles.iter().enumerate() {
                report.points_checked += 1;
                if apply_pose(o, q, p)
                    .generators
                    .iter()
                    .all(|g| g.norm() == 0.0)
                {
                    report.violations.push(Violation::ZeroSubdifferential {
                        obstacle: j,
                        waypoint: q,
                        point: p,
                    });
                }
            }
        }
        for (j, o) in obstacles.iter().enumerate() {
            let pts = level_points(o, q, n);
            let mut junctions: Vec<Point2> = Vec::new();
            for p in &pts {
                report.points_checked += 1;
                let e = apply_pose(o, q, *p);
                if e.generators.iter().all(|g| g.norm() == 0.0) {
                    report.violations.push(Violation::ZeroSubdifferential {
                        obstacle: j,
                        waypoint: q,
                        point: *p,
                    });
                } else if e.value.abs() <= JUNCTION_TOL && origin_in_hull(&e.generators, 1e-12) {
                    report.violations.push(Violation::OriginInSubdifferential {
                        obstacle: j,
                        waypoint: q,
                        point: *p,
                    });
                }
                if obstacles
                    .iter()
                    .enumerate()
                    .any(|(k, ok)| k != j && apply_pose(ok, q, *p).value.abs() <= JUNCTION_TOL)
                {
                    junctions.push(*p);
                }
            }
            // Sign changes of other indices between consecutive samples.
            let m = o.shape.boundary_points(n).len();
            for (k, ok) in obstacles.iter().enumerate() {
                if k == j {
                    continue;
                }
                for a in 0..m {
                    let b = (a + 1) % m;
                    let (pa, pb) = (pts[a], pts[b]);
                    if (pa - pb).norm() > 0.5 * options.hi.metric_distance(&options.lo) {
                        continue;
                    }
                    let (fa, fb) = (apply_pose(ok, q, pa).value, apply_pose(ok, q, pb).value);
                    if fa * fb >= 0.0 {
                        continue;
                    }
                    let (mut lo, mut hi, mut flo) = (pa, pb, fa);
                    let mut mid = pa;
                    for _ in 0..80 {
                        mid = project(o, q, 0.5 * (lo + hi));
                        let fm = apply_pose(ok, q, mid).value;
                        if fm.abs() <= 1e-12 {
                            break;
                        }
                        if (fm < 0.0) == (flo < 0.0) {
                            lo = mid;
                            flo = fm;
                        } else {
                            hi = mid;
                        }
                    }
                    junctions.push(mid);
                }
            }
            for p in junctions {
                report.junctions_checked += 1;
                let evals: Vec<(usize, SafetyEval)> = obstacles
                    .iter()
                    .enumerate()
                    .map(|(k, ok)| (k, apply_pose(ok, q, p)))
                    .filter(|(_, e)| e.value.abs() <= JUNCTION_TOL)
                    .collect();
                if evals.len() < 2 {
                    continue;
                }
                let refs: Vec<&SafetyEval> = evals.iter().map(|(_, e)| e).collect();
                if no_common_descent(&refs) {
                    let ids: Vec<usize> = evals.iter().map(|(k, _)| *k).collect();
                    let dup = report.violations.iter().any(|v| {
                        matches!(v,
                        Violation::NoCommonDescent { obstacles, point, .. }
                            if *obstacles == ids && (point - p).norm() < 1e-6)
                    });
                    if !dup {
                        report.violations.push(Violation::NoCommonDescent {
                            obstacles: ids,
                            waypoint: q,
                            point: p,
                        });
                    }
                }
            }
        }
    }
    report
}
