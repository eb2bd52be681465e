//! Convex feasible set (CFS) optimization for 2D trajectory planning.
//!
//! The crate solves `min J(x)` over trajectories `x` whose waypoints must stay
//! clear of obstacles. The cost `J` is a strictly convex quadratic; the
//! constraints are non-convex and non-smooth. Each iteration builds a convex
//! subset of the feasible region around the current reference trajectory and
//! solves a convex sub-problem inside it.
//!
//! Module map:
//!
//! - [`geometry`]: points, isometries, convex polygons and hulls.
//! - [`safety`]: safety indices for convex, boundary and non-convex obstacles.
//! - [`nonsmooth`]: directional derivatives, sub-differentials, sub-gradient
//!   selection and decomposition validation.
//! - [`planning`]: trajectory variables, finite-difference operators and the
//!   quadratic cost.
//! - [`subsolver`]: log-barrier interior point solver for the convex
//!   sub-problems.
//! - [`cfs`]: convex feasible set construction and the outer iteration.

pub mod cfs;
pub mod geometry;
pub mod linalg;
pub mod nonsmooth;
pub mod planning;
pub mod safety;
pub mod subsolver;

pub use cfs::{
    build_cfs, cfs_solve, check_termination, kkt_certificate, lift_constraint, CaseTag, CfsConfig,
    CfsError, ConvexFeasibleSet, IterateRecord, SolveReport, Termination, TerminationCheck,
};
pub use geometry::{convex_hull, ConvexPolygon, GeometryError, Isometry2, Mat2, Point2, Vec2};
pub use nonsmooth::{
    directional_derivative, directional_derivative_fd, optimal_subgradient,
    steepest_feasible_direction, subdifferential, validate_decomposition, DirectionQuery,
    NonsmoothError, SafetySign, Subdifferential, ValidationOptions, ValidationReport,
};
pub use planning::{
    build_difference_matrices, initial_reference, CostModel, CostWeights, PlanningError,
    Trajectory, TrajectoryProblem,
};
pub use safety::{
    apply_pose, eval_boundary, eval_convex, eval_nonconvex, hessian_bound, BoundaryProfile,
    Curvature, NonConvexShape, Notch, NotchDepth, Obstacle, PosedObstacle, ProfileKind,
    SafetyError, SafetyEval, SafetyFunction, Shape,
};
pub use subsolver::{
    kkt_residual, phase_one, solve, BarrierSettings, ConstraintSlice, SubSolution, Subproblem,
    SubsolverError,
};
