//! Trajectory variables, finite-difference operators and the quadratic cost.
//!
//! The full trajectory is `x̄ = [x₀, x₁, …, x_h, G]` with fixed endpoints. The
//! free vector holds `x₁ … x_h` interleaved as `[p₁, p₂, p₁, p₂, …]`, so
//! waypoint `q` (0-based, `q = 0` is `x₁`) occupies entries `2q` and `2q + 1`.

use crate::geometry::{Point2, Vec2};
use crate::linalg::{BandedSym, LinalgError};
use crate::safety::{apply_pose, Obstacle, SafetyEval};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("sampling time must be positive and finite, got {0}")]
    InvalidSamplingTime(f64),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("reduced cost Hessian is not positive definite")]
    NotPositiveDefinite(#[source] LinalgError),
    #[error("obstacle {obstacle} has {found} poses; expected 0, 1 or {horizon}")]
    PoseCount {
        obstacle: usize,
        found: usize,
        horizon: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Point2,
    pub goal: Point2,
    pub waypoints: Vec<Point2>,
    pub ts: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.waypoints.len()
    }

    /// Free vector of length `2h`.
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            2 * self.waypoints.len(),
            self.waypoints.iter().flat_map(|p| [p.x, p.y]),
        )
    }

    pub fn with_vector(&self, x: &DVector<f64>) -> Result<Trajectory, PlanningError> {
        if x.len() != 2 * self.horizon() {
            return Err(PlanningError::DimensionMismatch {
                expected: 2 * self.horizon(),
                found: x.len(),
            });
        }
        Ok(Trajectory {
            waypoints: waypoints_of(x),
            ..self.clone()
        })
    }

    /// `[x₀, x₁, …, x_h, G]`.
    pub fn full_points(&self) -> Vec<Point2> {
        let mut v = Vec::with_capacity(self.waypoints.len() + 2);
        v.push(self.start);
        v.extend_from_slice(&self.waypoints);
        v.push(self.goal);
        v
    }
}

pub fn waypoints_of(x: &DVector<f64>) -> Vec<Point2> {
    x.as_slice()
        .chunks_exact(2)
        .map(|c| Vec2::new(c[0], c[1]))
        .collect()
}

pub fn waypoint(x: &DVector<f64>, q: usize) -> Point2 {
    Vec2::new(x[2 * q], x[2 * q + 1])
}

/// Straight line from `x0` to `goal` with `h` equally spaced waypoints and
/// `ts = 1/(h+1)`.
pub fn initial_reference(x0: Point2, goal: Point2, h: usize) -> Trajectory {
    let n = (h + 1) as f64;
    Trajectory {
        start: x0,
        goal,
        waypoints: (1..=h).map(|q| x0 + (q as f64 / n) * (goal - x0)).collect(),
        ts: 1.0 / n,
    }
}

/// Block difference operator acting on trajectories of 2D points.
///
/// Row block `r` is `scale · Σ_k stencil[k]·x̄_{r+k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffOperator {
    pub rows: usize,
    pub cols: usize,
    pub stencil: Vec<f64>,
    pub scale: f64,
}

impl DiffOperator {
    pub fn apply(&self, pts: &[Point2]) -> Vec<Vec2> {
        assert_eq!(pts.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.scale
                    * self
                        .stencil
                        .iter()
                        .enumerate()
                        .map(|(k, c)| *c * pts[r + k])
                        .sum::<Vec2>()
            })
            .collect()
    }

    /// Dense `2·rows × 2·cols` matrix in interleaved coordinates.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(2 * self.rows, 2 * self.cols);
        for r in 0..self.rows {
            for (k, c) in self.stencil.iter().enumerate() {
                for d in 0..2 {
                    m[(2 * r + d, 2 * (r + k) + d)] = self.scale * c;
                }
            }
        }
        m
    }

    /// Per-coordinate Gram matrix `OᵀO` (size `cols`, bandwidth
    /// `stencil.len() - 1`).
    pub fn scalar_gram(&self) -> BandedSym {
        let w = self.stencil.len();
        let mut g = BandedSym::zeros(self.cols, w - 1);
        let s2 = self.scale * self.scale;
        for r in 0..self.rows {
            for a in 0..w {
                for b in 0..=a {
                    g.add(r + a, r + b, s2 * self.stencil[a] * self.stencil[b]);
                }
            }
        }
        // `add` is symmetric, so off-diagonal pairs were added once each.
        g
    }
}

/// `V` (first differences, `(I, -I)/ts` blocks, `h+1` rows) and `A`
/// (second differences, `(I, -2I, I)/ts²` blocks, `h` rows), both acting on
/// the `h+2` points of `x̄`.
pub fn build_difference_matrices(h: usize, ts: f64) -> (DiffOperator, DiffOperator) {
    let v = DiffOperator {
        rows: h + 1,
        cols: h + 2,
        stencil: vec![1.0, -1.0],
        scale: 1.0 / ts,
    };
    let a = DiffOperator {
        rows: h,
        cols: h + 2,
        stencil: vec![1.0, -2.0, 1.0],
        scale: 1.0 / (ts * ts),
    };
    (v, a)
}

/// `J(x) = w₁‖x̄ - x̄ʳ‖²_Q + w₂‖x̄‖²_S` with `Q = Σ cq_i Q_i`,
/// `S = Σ cs_i Q_i` and `Q₁ = I`, `Q₂ = VᵀV`, `Q₃ = AᵀA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub w1: f64,
    pub w2: f64,
    pub cq: [f64; 3],
    pub cs: [f64; 3],
}

impl CostWeights {
    /// `Q = 0`, `S = h⁻¹AᵀA`, unit weights.
    pub fn smoothness(h: usize) -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            cq: [0.0; 3],
            cs: [0.0, 0.0, 1.0 / h as f64],
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostModel {
    h: usize,
    ts: f64,
    weights: CostWeights,
    start: Point2,
    goal: Point2,
    reference: Vec<Point2>,
    /// Identity, velocity and acceleration operators on the `h+2` points.
    ops: [DiffOperator; 3],
    hessian: BandedSym,
    linear: DVector<f64>,
    constant: f64,
}

fn combine(c: &[f64; 3], grams: &[BandedSym; 3], n: usize) -> BandedSym {
    let mut out = BandedSym::zeros(n, 2);
    for (ci, g) in c.iter().zip(grams) {
        if *ci != 0.0 {
            out.axpy(*ci, g);
        }
    }
    out
}

impl CostModel {
    /// `reference` supplies `x̄ʳ`, the endpoints and `ts`.
    pub fn new(reference: &Trajectory, weights: CostWeights) -> Result<Self, PlanningError> {
        let h = reference.horizon();
        if h == 0 {
            return Err(PlanningError::InvalidHorizon);
        }
        let ts = reference.ts;
        if !(ts.is_finite() && ts > 0.0) {
            return Err(PlanningError::InvalidSamplingTime(ts));
        }
        let all = [weights.w1, weights.w2]
            .into_iter()
            .chain(weights.cq)
            .chain(weights.cs);
        for w in all {
            if !(w.is_finite() && w >= 0.0) {
                return Err(PlanningError::InvalidWeights(format!(
                    "weights must be finite and nonnegative, got {w}"
                )));
            }
        }
        let n = h + 2;
        let (v, a) = build_difference_matrices(h, ts);
        let grams = [BandedSym::identity(n, 0), v.scalar_gram(), a.scalar_gram()];
        let id = DiffOperator {
            rows: n,
            cols: n,
            stencil: vec![1.0],
            scale: 1.0,
        };
        let q = combine(&weights.cq, &grams, n);
        let s = combine(&weights.cs, &grams, n);
        let mut wq = q.clone();
        wq.scale(weights.w1);
        let mut m = s;
        m.scale(weights.w2);
        m.axpy(1.0, &wq);

        let mut hessian = BandedSym::zeros(2 * h, 4);
        for i in 0..h {
            for j in i.saturating_sub(2)..=i {
                let v = 2.0 * m.get(i + 1, j + 1);
                for d in 0..2 {
                    hessian.add(2 * i + d, 2 * j + d, v);
                }
            }
        }
        hessian
            .cholesky()
            .map_err(PlanningError::NotPositiveDefinite)?;

        let reference_pts = reference.full_points();
        let mut linear = DVector::zeros(2 * h);
        let mut constant = 0.0;
        for d in 0..2 {
            let r: Vec<f64> = reference_pts.iter().map(|p| p[d]).collect();
            let mut e0 = vec![0.0; n];
            e0[0] = reference.start[d];
            e0[n - 1] = reference.goal[d];
            let me0 = m.mul_vec(&e0);
            let qr = wq.mul_vec(&r);
            for i in 0..h {
                linear[2 * i + d] = 2.0 * me0[i + 1] - 2.0 * qr[i + 1];
            }
            constant += m.quad_form(&e0) - 2.0 * dot(&e0, &qr) + wq.quad_form(&r);
        }
        Ok(Self {
            h,
            ts,
            weights,
            start: reference.start,
            goal: reference.goal,
            reference: reference_pts,
            ops: [id, v, a],
            hessian,
            linear,
            constant,
        })
    }

    pub fn horizon(&self) -> usize {
        self.h
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    pub fn start(&self) -> Point2 {
        self.start
    }

    pub fn goal(&self) -> Point2 {
        self.goal
    }

    fn check(&self, x: &DVector<f64>) -> Result<(), PlanningError> {
        if x.len() != 2 * self.h {
            return Err(PlanningError::DimensionMismatch {
                expected: 2 * self.h,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `J(x)` evaluated from its definition, as weighted sums of squared
    /// differences (no cancellation between large Gram terms).
    pub fn eval(&self, x: &DVector<f64>) -> Result<f64, PlanningError> {
        self.check(x)?;
        let mut pts = Vec::with_capacity(self.h + 2);
        pts.push(self.start);
        pts.extend((0..self.h).map(|q| waypoint(x, q)));
        pts.push(self.goal);
        let dev: Vec<Vec2> = pts
            .iter()
            .zip(&self.reference)
            .map(|(p, r)| p - r)
            .collect();
        let sq = |o: &DiffOperator, p: &[Point2]| -> f64 {
            o.apply(p).iter().map(|v| v.norm_squared()).sum()
        };
        let mut j = 0.0;
        for (k, o) in self.ops.iter().enumerate() {
            if self.weights.cq[k] != 0.0 {
                j += self.weights.w1 * self.weights.cq[k] * sq(o, &dev);
            }
            if self.weights.cs[k] != 0.0 {
                j += self.weights.w2 * self.weights.cs[k] * sq(o, &pts);
            }
        }
        Ok(j)
    }

    /// `∇J(x)` on the free variables.
    pub fn grad(&self, x: &DVector<f64>) -> Result<DVector<f64>, PlanningError> {
        self.check(x)?;
        Ok(self.hessian.mul_dvec(x) + &self.linear)
    }

    /// Reduced Hessian (bandwidth 4 in interleaved order).
    pub fn hessian(&self) -> &BandedSym {
        &self.hessian
    }

    /// Linear term `c` of `J = ½xᵀHx + cᵀx + k`.
    pub fn linear(&self) -> &DVector<f64> {
        &self.linear
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `½xᵀHx + cᵀx + k`, the same value as [`CostModel::eval`].
    pub fn quadratic_value(&self, x: &DVector<f64>) -> f64 {
        0.5 * self.hessian.quad_form(x.as_slice()) + self.linear.dot(x) + self.constant
    }

    /// Smallest eigenvalue of the reduced Hessian (dense, for diagnostics).
    pub fn min_eigenvalue(&self) -> f64 {
        self.hessian
            .to_dense()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cost model plus obstacles: `min J(x)` subject to `φ_{j,q}(x_q) ≥ 0`.
#[derive(Debug, Clone)]
pub struct TrajectoryProblem {
    pub cost: CostModel,
    pub obstacles: Vec<Obstacle>,
    /// Added to each obstacle's own margin.
    pub margin: f64,
}

impl TrajectoryProblem {
    pub fn new(
        cost: CostModel,
        obstacles: Vec<Obstacle>,
        margin: f64,
    ) -> Result<Self, PlanningError> {
        let h = cost.horizon();
        for (j, o) in obstacles.iter().enumerate() {
            let n = o.poses().len();
            if n > 1 && n != h {
                return Err(PlanningError::PoseCount {
                    obstacle: j,
                    found: n,
                    horizon: h,
                });
            }
        }
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(PlanningError::InvalidWeights(format!(
                "margin must be finite and nonnegative, got {margin}"
            )));
        }
        Ok(Self {
            cost,
            obstacles,
            margin,
        })
    }

    pub fn horizon(&self) -> usize {
        self.cost.horizon()
    }

    /// `φ_{j,q}` at world point `p`, margins included.
    pub fn phi(&self, j: usize, q: usize, p: Point2) -> SafetyEval {
        let mut e = apply_pose(&self.obstacles[j], q, p);
        e.value -= self.margin;
        e
    }

    /// `max_{j,q} max(0, -φ_{j,q}(x))`.
    pub fn feasibility_error(&self, x: &DVector<f64>) -> f64 {
        let mut err: f64 = 0.0;
        for q in 0..self.horizon() {
            let p = waypoint(x, q);
            for j in 0..self.obstacles.len() {
                err = err.max(-self.phi(j, q, p).value);
            }
        }
        err
    }

    /// The straight-line trajectory as a template for vectors.
    pub fn template(&self) -> Trajectory {
        Trajectory {
            start: self.cost.start,
            goal: self.cost.goal,
            waypoints: self.cost.reference[1..=self.cost.h].to_vec(),
            ts: self.cost.ts,
        }
    }
}
