//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use cfs_bench::{load_scenario, problem_for, run_benchmark, Scenario};
use cfs_core::linalg::BandedSym;
use cfs_core::planning::waypoint;
use cfs_core::{
    build_cfs, cfs_solve, convex_hull, directional_derivative, initial_reference, kkt_certificate,
    lift_constraint, phase_one, solve, BarrierSettings, BoundaryProfile, CaseTag, CfsConfig,
    ConstraintSlice, ConvexFeasibleSet, ConvexPolygon, CostModel, CostWeights, Isometry2, Mat2,
    NonConvexShape, Notch, NotchDepth, Obstacle, Point2, SafetyFunction, Shape, SolveReport,
    Subproblem, Trajectory, TrajectoryProblem, Vec2,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut ChaCha8Rng, lo: Vec2, hi: Vec2) -> Vec2 {
    Vec2::new(r.random_range(lo.x..hi.x), r.random_range(lo.y..hi.y))
}

fn unit(r: &mut ChaCha8Rng) -> Vec2 {
    let th: f64 = r.random_range(0.0..std::f64::consts::TAU);
    Vec2::new(th.cos(), th.sin())
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> ConvexPolygon {
    ConvexPolygon::new(vec![
        Vec2::new(x1, y1),
        Vec2::new(x0, y1),
        Vec2::new(x0, y0),
        Vec2::new(x1, y0),
    ])
    .unwrap()
}

fn notched_square() -> NonConvexShape {
    NonConvexShape::new(
        rect(-1.0, -1.0, 1.0, 1.0),
        vec![Notch {
            edge: 2,
            depth: NotchDepth::Polynomial(vec![1.0, 0.0, -1.0]),
        }],
        None,
    )
    .unwrap()
}

fn random_polygon(r: &mut ChaCha8Rng, center: Vec2, radius: f64) -> ConvexPolygon {
    let n = r.random_range(3..8);
    let pts: Vec<Point2> = (0..n)
        .map(|_| center + radius * r.random_range(0.6..1.0) * unit(r))
        .collect();
    convex_hull(&pts).unwrap_or_else(|_| {
        rect(
            center.x - radius,
            center.y - radius,
            center.x + radius,
            center.y + radius,
        )
    })
}

/// One obstacle of each kind with a sampling box around it.
fn families() -> Vec<(&'static str, Obstacle, Vec2, Vec2)> {
    let pent = ConvexPolygon::new(vec![
        Vec2::new(1.0, 0.0),
        Vec2::new(0.4, 1.1),
        Vec2::new(-0.9, 0.7),
        Vec2::new(-0.8, -0.6),
        Vec2::new(0.5, -1.0),
    ])
    .unwrap();
    let pwl = BoundaryProfile::piecewise_linear(
        vec![(-1.0, 1.0), (0.0, 0.0), (2.0, 1.0)],
        Isometry2::identity(),
    )
    .unwrap();
    let poly = BoundaryProfile::polynomial(
        vec![0.0, 0.0, -0.25],
        Some(0.5),
        Isometry2::new(0.5, Vec2::zeros()),
    )
    .unwrap();
    vec![
        (
            "convex polygon",
            Obstacle::new(Shape::ConvexPolygon(pent))
                .with_pose(Isometry2::new(0.7, Vec2::new(1.0, -0.5))),
            Vec2::new(-1.5, -2.5),
            Vec2::new(3.5, 1.5),
        ),
        (
            "piecewise-linear boundary",
            Obstacle::new(Shape::Boundary(pwl))
                .with_pose(Isometry2::new(-0.4, Vec2::new(0.3, 0.2))),
            Vec2::new(-3.0, -3.0),
            Vec2::new(3.0, 3.0),
        ),
        (
            "polynomial boundary",
            Obstacle::new(Shape::Boundary(poly)),
            Vec2::new(-3.0, -3.0),
            Vec2::new(3.0, 3.0),
        ),
        (
            "non-convex",
            Obstacle::new(Shape::NonConvex(notched_square()))
                .with_pose(Isometry2::new(1.1, Vec2::new(-0.5, 0.8))),
            Vec2::new(-3.0, -2.5),
            Vec2::new(2.0, 3.0),
        ),
    ]
}

fn problem(
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

fn sub_of(p: &TrajectoryProblem, cfs: &ConvexFeasibleSet) -> Subproblem {
    Subproblem {
        hessian: p.cost.hessian().clone(),
        linear: p.cost.linear().clone(),
        constant: p.cost.constant(),
        constraints: cfs.slices.clone(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn convex_worked_example() -> Outcome {
    let square = Obstacle::new(Shape::ConvexPolygon(rect(-1.0, -1.0, 1.0, 1.0)));
    let (p, t) = problem(1, Vec2::new(-3.0, -3.0), Vec2::zeros(), vec![square], 0.0);
    let xr = t.to_vector();
    let phi = p.phi(0, 0, waypoint(&xr, 0)).value;
    ensure(
        (phi - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-9,
        || format!("φ = {phi}"),
    )?;
    let (s, case) = lift_constraint(&p, 0, 0, &xr).map_err(|e| e.to_string())?;
    ensure(case == CaseTag::Linearized && s.quad.is_none(), || {
        format!("case {case:?}")
    })?;
    // a·p + b ≥ 0 scaled to -p₁ - p₂ ≥ 2.
    let k = -1.0 / s.a.x;
    let (a2, rhs) = (k * s.a.y, -k * s.b);
    ensure(
        (a2 + 1.0).abs() <= 1e-9 && (rhs - 2.0).abs() <= 1e-9,
        || format!("scaled slice -p1 + {a2}·p2 ≥ {rhs}"),
    )?;
    let times: Vec<f64> = (0..101)
        .map(|_| {
            let t0 = Instant::now();
            std::hint::black_box(build_cfs(&p, std::hint::black_box(&xr)));
            t0.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    let ms = median(times);
    ensure(ms < 1.0, || format!("median build time {ms:.4} ms"))?;
    Ok(format!(
        "slice -p1 - p2 ≥ 2 (err {:.1e}), φ = √2/2, median {ms:.4} ms",
        (a2 + 1.0).abs().max((rhs - 2.0).abs())
    ))
}

fn nonconvex_worked_example() -> Outcome {
    let obs = Obstacle::new(Shape::NonConvex(notched_square()));
    let (p, t) = problem(1, Vec2::new(0.0, -2.0), Vec2::zeros(), vec![obs], 0.0);
    let xr = t.to_vector();
    let e = p.phi(0, 0, Vec2::new(0.0, -1.0));
    ensure((e.value - 1.0).abs() <= 1e-9, || format!("φ = {}", e.value))?;
    ensure(
        e.generators.len() == 1 && (e.generators[0] - Vec2::new(0.0, -1.0)).norm() <= 1e-9,
        || format!("generators {:?}", e.generators),
    )?;
    let (s, case) = lift_constraint(&p, 0, 0, &xr).map_err(|e| e.to_string())?;
    ensure(case == CaseTag::QuadraticBounded, || {
        format!("case {case:?}")
    })?;
    let hq = s.quad.ok_or("no quadratic term")?;
    ensure((hq - Mat2::new(2.0, 0.0, 0.0, 0.0)).amax() <= 1e-9, || {
        format!("Hq = {hq}")
    })?;
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x = uniform(&mut r, Vec2::repeat(-3.0), Vec2::repeat(3.0));
        worst = worst.max((s.slack(x) - (-x.y - x.x * x.x)).abs());
    }
    ensure(worst <= 1e-9, || {
        format!("slice differs from -p2 - p1² by {worst:e}")
    })?;
    Ok(format!(
        "φ = 1, ∇φ = (0,-1), Hq = diag(2,0), slice vs -p2-p1² max err {worst:.1e}"
    ))
}

/// Rejection-samples points satisfying every slice at waypoint `q`.
fn slice_feasible(r: &mut ChaCha8Rng, cfs: &ConvexFeasibleSet, q: usize, n: usize) -> Vec<Vec2> {
    let c = waypoint(&cfs.reference, q);
    let mut out = Vec::with_capacity(n);
    for _ in 0..200 * n {
        if out.len() == n {
            break;
        }
        let p = c + 4.0 * Vec2::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        if cfs.at_waypoint(q).all(|(_, s)| s.slack(p) >= 0.0) {
            out.push(p);
        }
    }
    out
}

fn set_inclusion() -> Outcome {
    let mut r = rng(3);
    let fams = families();
    let (mut instances, mut points, mut skipped) = (0, 0, 0);
    while instances < 50 {
        let (_, obs, lo, hi) = &fams[instances % fams.len()];
        let mut obstacles = vec![obs.clone()];
        if r.random_bool(0.5) {
            let c = uniform(&mut r, *lo, *hi);
            obstacles.push(Obstacle::new(Shape::ConvexPolygon(random_polygon(
                &mut r, c, 0.8,
            ))));
        }
        let h = r.random_range(1..5);
        let (p, _) = problem(h, *lo, *hi, obstacles, r.random_range(0.0..0.3));
        let xr = DVector::from_iterator(
            2 * h,
            (0..h).flat_map(|_| {
                let w = uniform(&mut r, *lo, *hi);
                [w.x, w.y]
            }),
        );
        let cfs = build_cfs(&p, &xr);
        let per = 10_000usize.div_ceil(h);
        let samples: Vec<Vec<Vec2>> = (0..h)
            .map(|q| slice_feasible(&mut r, &cfs, q, per))
            .collect();
        if samples.iter().any(|s| s.len() < per) {
            // Sets with no volume near the reference carry no test points.
            skipped += 1;
            continue;
        }
        for (q, pts) in samples.iter().enumerate() {
            for &x in pts {
                points += 1;
                for j in 0..p.obstacles.len() {
                    let v = p.phi(j, q, x).value;
                    ensure(v >= -1e-8, || {
                        format!("instance {instances}: φ_{j},{q}({x:?}) = {v:e}")
                    })?;
                }
            }
        }
        instances += 1;
    }
    Ok(format!("50 instances, {points} slice-feasible points, 0 violations ({skipped} near-empty sets redrawn)"))
}

/// One-sided derivative from Richardson-extrapolated forward differences.
/// The spatial step shrinks until two successive extrapolations agree, so a
/// kink close to `x` along `v` does not leak into the estimate.
fn fd<F: SafetyFunction>(phi: &F, x: Vec2, v: Vec2) -> f64 {
    let len = v.norm();
    if len == 0.0 {
        return 0.0;
    }
    let f0 = phi.value(x);
    let q = |s: f64| (phi.value(x + (s / len) * v) - f0) / (s / len);
    let rich = |s: f64| 2.0 * q(0.5 * s) - q(s);
    let mut s = 1e-4;
    let mut prev = rich(s);
    while s > 1e-7 {
        s *= 0.25;
        let next = rich(s);
        if (next - prev).abs() <= 1e-8 * (1.0 + len) {
            return next;
        }
        prev = next;
    }
    prev
}

fn derivative_inequalities() -> Outcome {
    let mut r = rng(4);
    let mut worst: f64 = f64::NEG_INFINITY;
    for (name, obs, lo, hi) in families() {
        let phi = obs.at(0, 0.0);
        for i in 0..10_000 {
            let x = uniform(&mut r, lo, hi);
            let (v, v1, v2) = (3.0 * unit(&mut r), unit(&mut r), 2.0 * unit(&mut r));
            let b: f64 = r.random_range(0.01..10.0);
            let a = |w: Vec2| directional_derivative(&phi, x, w);
            let n = |w: Vec2| fd(&phi, x, w);
            for (which, d) in [
                ("analytic", &a as &dyn Fn(Vec2) -> f64),
                ("finite-difference", &n),
            ] {
                let gaps = [
                    -(d(v) + d(-v)),
                    b * d(v) - d(b * v),
                    d(v1 + v2) - d(v1) - d(v2),
                ];
                for (k, g) in gaps.iter().enumerate() {
                    worst = worst.max(*g);
                    ensure(*g <= 1e-6, || {
                        format!(
                            "{name}, {which}, sample {i}, inequality {}: excess {g:e}",
                            k + 1
                        )
                    })?;
                }
            }
        }
    }
    Ok(format!("4 families × 10⁴ samples, analytic and finite-difference derivatives, worst excess {worst:.1e}"))
}

struct BenchRun {
    scenario: &'static str,
    h: usize,
    problem: TrajectoryProblem,
    report: SolveReport,
    time_ms: f64,
}

fn bench_runs() -> Vec<BenchRun> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut out = Vec::new();
    for name in ["scenario1", "scenario2"] {
        let s: Scenario = load_scenario(dir.join(format!("{name}.json"))).unwrap();
        for h in [30, 50, 100] {
            let problem = problem_for(&s, h).unwrap();
            let x0 = initial_reference(s.start, s.goal, h);
            let t0 = Instant::now();
            let report = cfs_solve(&problem, &x0, &CfsConfig::default()).unwrap();
            let time_ms = t0.elapsed().as_secs_f64() * 1e3;
            out.push(BenchRun {
                scenario: name,
                h,
                problem,
                report,
                time_ms,
            });
        }
    }
    out
}

fn descent_and_monotonicity(runs: &[BenchRun]) -> Outcome {
    let mut worst_descent = f64::INFINITY;
    let mut worst_rise = f64::NEG_INFINITY;
    for run in runs {
        let it = &run.report.iterates;
        let tag = format!("{} h={}", run.scenario, run.h);
        for k in 1..it.len() {
            if it[k - 1].feasibility_error == 0.0 {
                let g = run.problem.cost.grad(&it[k].x).unwrap();
                let d = g.dot(&(&it[k - 1].x - &it[k].x));
                worst_descent = worst_descent.min(d);
                ensure(d >= -1e-8, || format!("{tag}: descent {d:e} at k={k}"))?;
            }
            if k >= 2 {
                let rise = it[k].cost - it[k - 1].cost;
                worst_rise = worst_rise.max(rise);
                ensure(rise <= 1e-8, || {
                    format!("{tag}: cost rose by {rise:e} at k={k}")
                })?;
            }
            if run.scenario == "scenario1" {
                ensure(it[k].feasibility_error == 0.0, || {
                    format!(
                        "{tag}: feasibility error {} at k={k}",
                        it[k].feasibility_error
                    )
                })?;
            }
        }
    }
    Ok(format!(
        "{} solves, min descent {worst_descent:.1e}, max cost change {worst_rise:.1e}, scenario1 feasible from k=1",
        runs.len()
    ))
}

/// Straight-line instances through disjoint random polygons.
fn disjoint_instance(r: &mut ChaCha8Rng) -> (TrajectoryProblem, Trajectory) {
    let margin = r.random_range(0.0..0.3);
    let n = r.random_range(1..=4);
    let slot = 9.0 / n as f64;
    let obstacles = (0..n)
        .map(|k| {
            let radius = r.random_range(0.3..(0.5 * slot - margin - 0.05).min(1.5));
            let c = Vec2::new(
                slot * (k as f64 + 0.5),
                r.random_range(-0.5 * radius..0.5 * radius),
            );
            Obstacle::new(Shape::ConvexPolygon(random_polygon(r, c, radius)))
        })
        .collect();
    problem(
        r.random_range(10..80),
        Vec2::zeros(),
        Vec2::new(9.0, 0.0),
        obstacles,
        margin,
    )
}

fn certificates(runs: &[BenchRun]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut check = |tag: String, p: &TrajectoryProblem, rep: &SolveReport| -> Result<(), String> {
        if rep.termination.converged() {
            let c = kkt_certificate(p, &rep.iterates.last().unwrap().x);
            worst = worst.max(c);
            count += 1;
            ensure(c <= 1e-5, || format!("{tag}: certificate {c:e}"))?;
        }
        Ok(())
    };
    for run in runs {
        check(
            format!("{} h={}", run.scenario, run.h),
            &run.problem,
            &run.report,
        )?;
    }
    let mut r = rng(6);
    for i in 0..20 {
        let (p, t) = disjoint_instance(&mut r);
        let rep = cfs_solve(&p, &t, &CfsConfig::default()).map_err(|e| e.to_string())?;
        check(format!("random instance {i}"), &p, &rep)?;
    }
    Ok(format!(
        "{count} converged runs, worst certificate {worst:.1e}"
    ))
}

fn banded(m: &DMatrix<f64>) -> BandedSym {
    let n = m.nrows();
    let mut b = BandedSym::zeros(n, n - 1);
    for i in 0..n {
        for j in 0..=i {
            b.add(i, j, m[(i, j)]);
        }
    }
    b
}

/// Best KKT point over all active sets.
fn active_set_oracle(sub: &Subproblem, h: &DMatrix<f64>) -> Option<DVector<f64>> {
    let n = sub.dim();
    let m = sub.constraints.len();
    let rows: Vec<(DVector<f64>, f64)> = sub
        .constraints
        .iter()
        .map(|c| {
            let mut a = DVector::zeros(n);
            a[2 * c.waypoint] = c.a.x;
            a[2 * c.waypoint + 1] = c.a.y;
            (a, c.b)
        })
        .collect();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0..(1usize << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let k = act.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        rhs.rows_mut(0, n).copy_from(&(-&sub.linear));
        for (r, &i) in act.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + r)] = -rows[i].0[j];
                kkt[(n + r, j)] = rows[i].0[j];
            }
            rhs[n + r] = -rows[i].1;
        }
        let Some(sol) = kkt.clone().lu().solve(&rhs) else {
            continue;
        };
        if (&kkt * &sol - &rhs).amax() > 1e-9 {
            continue;
        }
        let x = sol.rows(0, n).into_owned();
        let dual_ok = (0..k).all(|r| sol[n + r] >= -1e-12);
        let primal_ok = rows.iter().all(|(a, b)| a.dot(&x) + b >= -1e-10);
        if dual_ok && primal_ok {
            let f = sub.objective(&x);
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, x));
            }
        }
    }
    best.map(|b| b.1)
}

fn grid_oracle(f: impl Fn(Vec2) -> f64, feasible: impl Fn(Vec2) -> bool) -> Vec2 {
    let (mut c, mut half) = (Vec2::zeros(), 2.0);
    let n = 200;
    loop {
        let step = 2.0 * half / n as f64;
        let mut best = (f64::INFINITY, c);
        for i in 0..=n {
            for j in 0..=n {
                let p = c + Vec2::new(-half + step * i as f64, -half + step * j as f64);
                if feasible(p) && f(p) < best.0 {
                    best = (f(p), p);
                }
            }
        }
        c = best.1;
        if step <= 1e-4 {
            return c;
        }
        half = 4.0 * step;
    }
}

fn subsolver_oracles() -> Outcome {
    let mut r = rng(7);
    let settings = BarrierSettings::default();
    let mut worst: f64 = 0.0;
    for case in 0..500 {
        let n = 2 * r.random_range(1..=2);
        let g = DMatrix::from_fn(n, n, |_, _| r.random_range(-1.0..1.0));
        let h = &g * g.transpose() + DMatrix::identity(n, n) * r.random_range(0.05..1.0);
        let interior = DVector::from_fn(n, |_, _| r.random_range(-1.0..1.0));
        let constraints = (0..r.random_range(0..=3))
            .map(|_| {
                let q = r.random_range(0..n / 2);
                let a = r.random_range(0.2..3.0) * unit(&mut r);
                let p = Vec2::new(interior[2 * q], interior[2 * q + 1]);
                ConstraintSlice::linear(q, a, -a.dot(&p) + r.random_range(0.05..1.0))
            })
            .collect();
        let sub = Subproblem {
            hessian: banded(&h),
            linear: DVector::from_fn(n, |_, _| r.random_range(-4.0..4.0)),
            constant: 0.0,
            constraints,
        };
        let start = phase_one(&sub, &DVector::zeros(n)).map_err(|e| format!("case {case}: {e}"))?;
        let s = solve(&sub, &start, &settings).map_err(|e| format!("case {case}: {e}"))?;
        let want = active_set_oracle(&sub, &h)
            .ok_or_else(|| format!("case {case}: oracle found no KKT point"))?;
        let err = (&s.x - &want).amax();
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("case {case}: error {err:e}"))?;
    }

    // min p1² + (p2-1)² s.t. p2 ≤ -p1²
    let slice = ConstraintSlice::quadratic(
        0,
        Vec2::new(0.0, -1.0),
        0.0,
        Mat2::new(2.0, 0.0, 0.0, 0.0),
        Vec2::zeros(),
    );
    let mut h = BandedSym::zeros(2, 1);
    h.add(0, 0, 2.0);
    h.add(1, 1, 2.0);
    let sub = Subproblem {
        hessian: h,
        linear: DVector::from_vec(vec![0.0, -2.0]),
        constant: 1.0,
        constraints: vec![slice.clone()],
    };
    let start = phase_one(&sub, &DVector::from_vec(vec![0.5, 0.5])).map_err(|e| e.to_string())?;
    let s = solve(&sub, &start, &settings).map_err(|e| e.to_string())?;
    let got = Vec2::new(s.x[0], s.x[1]);
    let grid = grid_oracle(
        |p| p.x * p.x + (p.y - 1.0) * (p.y - 1.0),
        |p| slice.slack(p) >= 0.0,
    );
    let gerr = (got - grid).norm();
    ensure(gerr <= 1e-4 && got.norm() <= 1e-4, || {
        format!("quadratic example {got} vs grid {grid}")
    })?;
    Ok(format!(
        "500 QPs worst error {worst:.1e}; quadratic example {:.1e} from grid optimum",
        gerr
    ))
}

fn benchmark_protocol(runs: &[BenchRun]) -> Outcome {
    let s1: Vec<&BenchRun> = runs.iter().filter(|r| r.scenario == "scenario1").collect();
    let mut parts = Vec::new();
    for run in &s1 {
        let rep = &run.report;
        ensure(rep.termination.converged(), || {
            format!("h={}: {:?}", run.h, rep.termination)
        })?;
        ensure(rep.iterations <= 30, || {
            format!("h={}: {} iterations", run.h, rep.iterations)
        })?;
        ensure(run.time_ms <= 2000.0, || {
            format!("h={}: {:.0} ms", run.h, run.time_ms)
        })?;
        parts.push(format!(
            "h={} {} it {:.0} ms",
            run.h, rep.iterations, run.time_ms
        ));
    }
    let per = |h: usize| {
        let r = s1.iter().find(|r| r.h == h).unwrap();
        r.time_ms / r.report.iterations as f64
    };
    let ratio = per(100) / per(30);
    ensure(ratio <= 6.0, || {
        format!("per-iteration time ratio {ratio:.2}")
    })?;
    Ok(format!(
        "{}; per-iteration ratio {ratio:.2}",
        parts.join(", ")
    ))
}

fn first_sets_have_interiors() -> Outcome {
    let mut r = rng(9);
    let mut done = 0;
    let mut worst_slack = f64::INFINITY;
    while done < 100 {
        let (p, t) = disjoint_instance(&mut r);
        let xr = t.to_vector();
        if p.feasibility_error(&xr) == 0.0 {
            continue;
        }
        let cfs = build_cfs(&p, &xr);
        let x = phase_one(&sub_of(&p, &cfs), &xr).map_err(|e| format!("reference {done}: {e}"))?;
        let s = cfs.min_slack(&x);
        worst_slack = worst_slack.min(s);
        ensure(s > 0.0, || format!("reference {done}: slack {s:e}"))?;
        done += 1;
    }
    Ok(format!(
        "100/100 infeasible references, smallest interior slack {worst_slack:.1e}"
    ))
}

fn determinism(runs: &[BenchRun]) -> Outcome {
    let again = bench_runs();
    for (a, b) in runs.iter().zip(&again) {
        let tag = format!("{} h={}", a.scenario, a.h);
        let (x, y) = (&a.report, &b.report);
        ensure(
            x.iterations == y.iterations && x.termination == y.termination,
            || tag.clone(),
        )?;
        for (p, q) in x.iterates.iter().zip(&y.iterates) {
            let same = p.x == q.x
                && p.cost.to_bits() == q.cost.to_bits()
                && p.feasibility_error.to_bits() == q.feasibility_error.to_bits()
                && p.step_norm.to_bits() == q.step_norm.to_bits();
            ensure(same, || format!("{tag}: iterates differ"))?;
        }
    }
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let s = load_scenario(dir.join("scenario2.json")).unwrap();
    let a = run_benchmark(&s, &[30, 50], &CfsConfig::default()).map_err(|e| e.to_string())?;
    let b = run_benchmark(&s, &[30, 50], &CfsConfig::default()).map_err(|e| e.to_string())?;
    ensure(a.without_timings() == b.without_timings(), || {
        "reports differ".into()
    })?;
    Ok(format!(
        "{} solves and 2 sweep reports identical",
        runs.len()
    ))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("PASS {id:>2} {name}: {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL {id:>2} {name}: {detail}");
            false
        }
    }
}

fn main() -> ExitCode {
    let runs = bench_runs();
    let results = [
        run(1, "convex worked example", convex_worked_example),
        run(2, "non-convex worked example", nonconvex_worked_example),
        run(3, "set inclusion", set_inclusion),
        run(
            4,
            "directional-derivative inequalities",
            derivative_inequalities,
        ),
        run(5, "strong descent and monotonicity", || {
            descent_and_monotonicity(&runs)
        }),
        run(6, "convergence certificate", || certificates(&runs)),
        run(7, "sub-solver oracles", subsolver_oracles),
        run(8, "benchmark protocol", || benchmark_protocol(&runs)),
        run(
            9,
            "interior points at infeasible references",
            first_sets_have_interiors,
        ),
        run(10, "determinism", || determinism(&runs)),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
