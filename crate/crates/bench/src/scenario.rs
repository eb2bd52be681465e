//! Scenario files: JSON schema, conversion to core types and validation.

use cfs_core::{
    validate_decomposition, BoundaryProfile, ConvexPolygon, CostWeights, Isometry2, Mat2,
    NonConvexShape, Notch, NotchDepth, Obstacle, Point2, SafetyError, Shape, ValidationOptions,
    Vec2,
};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_HORIZONS: [usize; 3] = [30, 50, 100];

/// Boundary samples per obstacle used when validating a decomposition.
const VALIDATION_SAMPLES: usize = 300;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}", validation_message(*.line, .message))]
    Validation {
        line: Option<usize>,
        message: String,
    },
}

fn validation_message(line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("invalid scenario at line {l}: {message}"),
        None => format!("invalid scenario: {message}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    #[serde(default)]
    pub margin: f64,
    pub weights: WeightsSpec,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSpec {
    pub w1: f64,
    pub w2: f64,
    pub cq: [f64; 3],
    pub cs: [f64; 3],
    /// Divide `cq` and `cs` by the horizon, so that `cs = [0, 0, 1]` gives
    /// `S = h⁻¹AᵀA` and sums approximate time integrals.
    #[serde(default)]
    pub per_horizon: bool,
}

impl WeightsSpec {
    pub fn for_horizon(&self, h: usize) -> CostWeights {
        let k = if self.per_horizon {
            1.0 / h as f64
        } else {
            1.0
        };
        CostWeights {
            w1: self.w1,
            w2: self.w2,
            cq: self.cq.map(|c| c * k),
            cs: self.cs.map(|c| c * k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    #[serde(default)]
    pub theta: f64,
    pub t: [f64; 2],
}

impl PoseSpec {
    fn iso(&self) -> Isometry2 {
        Isometry2::new(self.theta, v(self.t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "lowercase")]
pub enum ProfileSpec {
    /// Breakpoints `[t, f(t)]`.
    Pwl(Vec<[f64; 2]>),
    Poly(PolyData),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolyData {
    Coeffs(Vec<f64>),
    WithCurvature {
        coeffs: Vec<f64>,
        curvature: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotchSpec {
    pub edge: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(t) => vec![t.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    ConvexPolygon {
        vertices: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        poses: Option<Vec<PoseSpec>>,
        #[serde(default)]
        margin: f64,
    },
    Boundary {
        profile: ProfileSpec,
        /// Frame of the profile: `p₂ = f(p₁)` in this frame.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pose: Option<PoseSpec>,
        #[serde(default)]
        margin: f64,
    },
    Nonconvex {
        hull: Vec<[f64; 2]>,
        notch: OneOrMany<NotchSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hstar: Option<[[f64; 2]; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        poses: Option<Vec<PoseSpec>>,
        #[serde(default)]
        margin: f64,
    },
}

fn v(a: [f64; 2]) -> Vec2 {
    Vec2::new(a[0], a[1])
}

impl ObstacleSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ObstacleSpec::ConvexPolygon { .. } => "convex_polygon",
            ObstacleSpec::Boundary { .. } => "boundary",
            ObstacleSpec::Nonconvex { .. } => "nonconvex",
        }
    }

    /// Builds the obstacle with its keyframe poses.
    pub fn build(&self) -> Result<Obstacle, SafetyError> {
        let (shape, poses, margin) = match self {
            ObstacleSpec::ConvexPolygon {
                vertices,
                poses,
                margin,
            } => {
                let poly = ConvexPolygon::new(vertices.iter().copied().map(v).collect())?;
                (Shape::ConvexPolygon(poly), poses.clone(), *margin)
            }
            ObstacleSpec::Boundary {
                profile,
                pose,
                margin,
            } => {
                let frame = pose.map_or(Isometry2::identity(), |p| p.iso());
                let b = match profile {
                    ProfileSpec::Pwl(pts) => BoundaryProfile::piecewise_linear(
                        pts.iter().map(|p| (p[0], p[1])).collect(),
                        frame,
                    )?,
                    ProfileSpec::Poly(PolyData::Coeffs(c)) => {
                        BoundaryProfile::polynomial(c.clone(), None, frame)?
                    }
                    ProfileSpec::Poly(PolyData::WithCurvature { coeffs, curvature }) => {
                        BoundaryProfile::polynomial(coeffs.clone(), *curvature, frame)?
                    }
                };
                (Shape::Boundary(b), None, *margin)
            }
            ObstacleSpec::Nonconvex {
                hull,
                notch,
                hstar,
                poses,
                margin,
            } => {
                let hull = ConvexPolygon::new(hull.iter().copied().map(v).collect())?;
                let mut notches = Vec::new();
                for n in notch.to_vec() {
                    let depth = match (n.poly, n.table) {
                        (Some(p), None) => NotchDepth::Polynomial(p),
                        (None, Some(t)) => {
                            NotchDepth::Table(t.iter().map(|p| (p[0], p[1])).collect())
                        }
                        _ => {
                            return Err(SafetyError::InvalidNotch {
                                edge: n.edge,
                                reason: "give exactly one of \"poly\" or \"table\"".into(),
                            })
                        }
                    };
                    notches.push(Notch {
                        edge: n.edge,
                        depth,
                    });
                }
                let hstar = hstar.map(|m| Mat2::new(m[0][0], m[0][1], m[1][0], m[1][1]));
                let shape = NonConvexShape::new(hull, notches, hstar)?;
                (Shape::NonConvex(shape), poses.clone(), *margin)
            }
        };
        let mut o = Obstacle::new(shape).with_margin(margin)?;
        if let Some(p) = poses {
            o = o.with_poses(p.iter().map(PoseSpec::iso).collect());
        }
        Ok(o)
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub start: Point2,
    pub goal: Point2,
    pub margin: f64,
    pub weights: WeightsSpec,
    /// Obstacles with their keyframe poses.
    pub obstacles: Vec<Obstacle>,
    pub horizons: Vec<usize>,
    pub file: ScenarioFile,
}

impl Scenario {
    /// Obstacles for horizon `h`: keyframe poses are resampled linearly onto
    /// the `h` waypoints, with the first keyframe at `x₁` and the last at
    /// `x_h`.
    pub fn obstacles_for(&self, h: usize) -> Vec<Obstacle> {
        self.obstacles.iter().map(|o| resample(o, h)).collect()
    }
}

fn resample(o: &Obstacle, h: usize) -> Obstacle {
    let keys = o.poses();
    if keys.len() <= 1 || keys.len() == h {
        return o.clone();
    }
    let k = keys.len() - 1;
    let poses = (0..h)
        .map(|q| {
            let s = if h == 1 {
                0.0
            } else {
                q as f64 * k as f64 / (h - 1) as f64
            };
            let i = (s.floor() as usize).min(k - 1);
            keys[i].lerp(&keys[i + 1], s - i as f64)
        })
        .collect();
    o.clone().with_poses(poses)
}

/// Line of the `index`-th `"kind"` key in the text, which is the line of the
/// corresponding obstacle entry.
fn obstacle_line(text: &str, index: usize) -> Option<usize> {
    text.lines()
        .enumerate()
        .flat_map(|(i, l)| std::iter::repeat_n(i + 1, l.matches("\"kind\"").count()))
        .nth(index)
}

fn line_of(text: &str, needle: &str) -> Option<usize> {
    text.lines().position(|l| l.contains(needle)).map(|i| i + 1)
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let invalid = |needle: &str, message: String| ScenarioError::Validation {
        line: line_of(text, needle),
        message,
    };
    let finite = |p: [f64; 2]| p.iter().all(|c| c.is_finite());
    if !finite(file.start) || !finite(file.goal) {
        return Err(invalid("\"start\"", "start and goal must be finite".into()));
    }
    if !(file.margin.is_finite() && file.margin >= 0.0) {
        return Err(invalid(
            "\"margin\"",
            format!("margin must be finite and nonnegative, got {}", file.margin),
        ));
    }
    let horizons = file
        .horizons
        .clone()
        .unwrap_or_else(|| DEFAULT_HORIZONS.to_vec());
    if horizons.is_empty() || horizons.contains(&0) {
        return Err(invalid("\"horizons\"", "horizons must be positive".into()));
    }
    for &h in &horizons {
        cfs_core::CostModel::new(
            &cfs_core::initial_reference(v(file.start), v(file.goal), h),
            file.weights.for_horizon(h),
        )
        .map_err(|e| invalid("\"weights\"", e.to_string()))?;
    }

    let mut obstacles = Vec::with_capacity(file.obstacles.len());
    for (i, spec) in file.obstacles.iter().enumerate() {
        let o = spec.build().map_err(|e| ScenarioError::Validation {
            line: obstacle_line(text, i),
            message: format!("obstacle {i} ({}): {e}", spec.kind()),
        })?;
        obstacles.push(o);
    }

    let keyframes = obstacles.iter().map(|o| o.poses().len()).max().unwrap_or(0);
    let waypoints: Vec<usize> = (0..keyframes.max(1)).collect();
    let options = ValidationOptions::around(&obstacles, &waypoints, VALIDATION_SAMPLES);
    let report = validate_decomposition(&obstacles, &waypoints, &options);
    if let Some(first) = report.violations.first() {
        return Err(ScenarioError::Validation {
            line: line_of(text, "\"obstacles\""),
            message: format!(
                "invalid decomposition ({} violations), first: {first:?}",
                report.violations.len()
            ),
        });
    }

    Ok(Scenario {
        name: file.name.clone(),
        start: v(file.start),
        goal: v(file.goal),
        margin: file.margin,
        weights: file.weights.clone(),
        obstacles,
        horizons,
        file,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_scenario(&text)
}
