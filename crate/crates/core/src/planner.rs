//! Radial base-placement candidate generation and collision-risk pruning.
//!
//! For every radial direction around the object the planner walks outward
//! from `reach_min` in steps of the footprint radius and keeps the first
//! standoff that passes three checks: robot body cuboid clear of points,
//! reach corridor cuboid clear of points, footprint circle on free cells.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{normalize_angle, FrameTag, OrientedBox, Point2, Point3, Pose2D};
use crate::scene::{ObjectObservation, OccupancyGrid, PointCloud, SceneSnapshot};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    #[serde(alias = "r_r")]
    pub footprint_radius: f64,
    #[serde(alias = "h_r")]
    pub robot_height: f64,
    #[serde(alias = "d_min")]
    pub reach_min: f64,
    #[serde(alias = "d_max")]
    pub reach_max: f64,
    /// Radial spacing in radians; 0 selects [`default_angle_increment`].
    #[serde(alias = "theta")]
    pub angle_increment: f64,
    /// A cuboid holding more than this many points prunes the candidate.
    #[serde(alias = "k_obs")]
    pub obstacle_point_threshold: usize,
    pub treat_unknown_as_occupied: bool,
    /// Ignore the target's own points in both cuboid counts.
    pub exclude_target_points: bool,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            footprint_radius: 0.25,
            robot_height: 1.35,
            reach_min: 0.4,
            reach_max: 0.9,
            angle_increment: 0.0,
            obstacle_point_threshold: 50,
            treat_unknown_as_occupied: true,
            exclude_target_points: true,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.footprint_radius,
            self.robot_height,
            self.reach_min,
            self.reach_max,
            self.angle_increment,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Param("parameters must be finite".into()));
        }
        if self.footprint_radius <= 0.0 {
            return Err(Error::Param(format!("footprint_radius must be > 0, got {}", self.footprint_radius)));
        }
        if self.robot_height <= 0.0 {
            return Err(Error::Param(format!("robot_height must be > 0, got {}", self.robot_height)));
        }
        if !(0.0 < self.reach_min && self.reach_min <= self.reach_max) {
            return Err(Error::Param(format!(
                "need 0 < reach_min <= reach_max, got {} and {}",
                self.reach_min, self.reach_max
            )));
        }
        if !(0.0..=2.0 * PI).contains(&self.angle_increment) {
            return Err(Error::Param(format!(
                "angle_increment must be in [0, 2pi], got {}",
                self.angle_increment
            )));
        }
        Ok(())
    }

    /// The explicit angle increment, or the chord default when it is 0.
    pub fn resolved_angle_increment(&self) -> Result<f64> {
        if self.angle_increment > 0.0 {
            Ok(self.angle_increment)
        } else {
            default_angle_increment(self)
        }
    }

    /// Reads parameters from a `.toml` file, or JSON otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let params: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        params.validate()?;
        Ok(params)
    }
}

/// Angle whose chord on the `reach_min` circle equals the footprint diameter.
pub fn default_angle_increment(params: &RobotParams) -> Result<f64> {
    let r = params.footprint_radius;
    let d = params.reach_min;
    if !(r > 0.0 && d > 0.0) || r >= 2.0 * d {
        return Err(Error::Param(format!(
            "chord angle needs 0 < footprint_radius < 2 * reach_min, got {r} and {d}"
        )));
    }
    Ok(2.0 * (r / (2.0 * d)).asin())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialVectorSet {
    /// Object position projected onto the ground plane.
    pub origin: Point2,
    pub vectors: Vec<Point2>,
}

impl RadialVectorSet {
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.vectors.len() as f64
    }
}

/// `ceil(2pi / theta)` unit vectors, re-spaced evenly around the circle.
pub fn generate_radial_vectors(object_position: Point3, angle_increment: f64) -> Result<RadialVectorSet> {
    if !(angle_increment > 0.0 && angle_increment <= 2.0 * PI) {
        return Err(Error::Param(format!(
            "angle increment must be in (0, 2pi], got {angle_increment}"
        )));
    }
    // Tolerance absorbs divisors of 2pi that land a hair above an integer.
    let n = ((2.0 * PI / angle_increment) - 1e-9).ceil().max(1.0) as usize;
    let vectors = (0..n)
        .map(|k| Point2::from_angle(2.0 * PI * k as f64 / n as f64))
        .collect();
    Ok(RadialVectorSet {
        origin: object_position.planar(),
        vectors,
    })
}

/// `2r x 2r x h` cuboid standing on the floor at the candidate.
pub fn body_box(position: Point2, heading: f64, params: &RobotParams) -> OrientedBox {
    let r = params.footprint_radius;
    OrientedBox::new(
        position.with_z(params.robot_height / 2.0),
        [r, r, params.robot_height / 2.0],
        heading,
    )
}

/// Corridor at object height spanning object to candidate, as wide and tall
/// as the detected object.
pub fn reach_box(object: &ObjectObservation, position: Point2) -> Result<OrientedBox> {
    let from = object.position.planar();
    let delta = position - from;
    let length = delta.norm();
    if !(length > 1e-12) {
        return Err(Error::Geometry("reach corridor endpoints coincide".into()));
    }
    let mid = from + delta * 0.5;
    OrientedBox::try_new(
        mid.with_z(object.position.z),
        [length / 2.0, object.width / 2.0, object.height / 2.0],
        delta.angle(),
    )
}

// Slack on the exclusion box so surface points lying exactly on the
// object's faces stay excluded after rounding.
const EXCLUSION_SLACK: f64 = 1e-6;

/// Box carving the target's own points out of the cuboid counts.
pub fn target_exclusion_box(object: &ObjectObservation) -> OrientedBox {
    let half_w = object.width / 2.0 + EXCLUSION_SLACK;
    OrientedBox::new(
        object.position,
        [half_w, half_w, object.height / 2.0 + EXCLUSION_SLACK],
        0.0,
    )
}

pub fn count_points_in_box(cloud: &PointCloud, b: &OrientedBox, exclusion: Option<&OrientedBox>) -> usize {
    cloud
        .points
        .iter()
        .filter(|p| b.contains(p) && !exclusion.is_some_and(|e| e.contains(p)))
        .count()
}

/// Lattice cells (possibly outside the grid) whose centers lie within
/// `radius` of `center`.
pub fn footprint_cells(grid: &OccupancyGrid, center: Point2, radius: f64) -> Vec<(i64, i64)> {
    let (ci, cj) = grid.lattice_index(center);
    let span = (radius / grid.resolution).ceil() as i64 + 1;
    let mut cells = Vec::new();
    for j in cj - span..=cj + span {
        for i in ci - span..=ci + span {
            if grid.cell_center(i, j).distance(&center) <= radius {
                cells.push((i, j));
            }
        }
    }
    cells
}

/// Whether any cell under the footprint circle blocks the robot. Cells
/// outside the grid count as occupied.
pub fn footprint_occupied(grid: &OccupancyGrid, center: Point2, radius: f64, treat_unknown_as_occupied: bool) -> bool {
    footprint_cells(grid, center, radius)
        .into_iter()
        .any(|(i, j)| grid.is_blocked(i, j, treat_unknown_as_occupied))
}

/// Breakdown of the three collision checks at one candidate position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskAssessment {
    pub body_points: usize,
    pub reach_points: usize,
    pub footprint_blocked: bool,
}

impl RiskAssessment {
    pub fn is_risky(&self, threshold: usize) -> bool {
        self.body_points > threshold || self.reach_points > threshold || self.footprint_blocked
    }
}

pub fn assess_candidate(position: Point2, params: &RobotParams, snapshot: &SceneSnapshot) -> Result<RiskAssessment> {
    let object = &snapshot.object;
    let heading = (object.position.planar() - position).angle();
    let exclusion = params.exclude_target_points.then(|| target_exclusion_box(object));
    let body = body_box(position, heading, params);
    let reach = reach_box(object, position)?;
    Ok(RiskAssessment {
        body_points: count_points_in_box(&snapshot.cloud, &body, exclusion.as_ref()),
        reach_points: count_points_in_box(&snapshot.cloud, &reach, exclusion.as_ref()),
        footprint_blocked: footprint_occupied(
            &snapshot.grid,
            position,
            params.footprint_radius,
            params.treat_unknown_as_occupied,
        ),
    })
}

pub fn has_collision_risk(position: Point2, params: &RobotParams, snapshot: &SceneSnapshot) -> Result<bool> {
    Ok(assess_candidate(position, params, snapshot)?.is_risky(params.obstacle_point_threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementCandidate {
    /// Map-frame pose facing the object.
    pub pose: Pose2D,
    pub radial_index: usize,
    /// Planar distance to the object.
    pub standoff: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<PlacementCandidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, PlacementCandidate> {
        self.candidates.iter()
    }
}

/// A standoff that was tried and rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrunedProbe {
    pub radial_index: usize,
    pub standoff: f64,
    pub position: Point2,
    pub risk: RiskAssessment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub frame: FrameTag,
    pub angle_increment: f64,
    pub radial_count: usize,
    #[serde(flatten)]
    pub set: CandidateSet,
    pub pruned: Vec<PrunedProbe>,
}

/// Standoffs tried along each ray: reach_min, reach_min + r, ... up to reach_max.
pub fn standoff_sequence(params: &RobotParams) -> Vec<f64> {
    (0..)
        .map(|k| params.reach_min + k as f64 * params.footprint_radius)
        .take_while(|s| *s <= params.reach_max)
        .collect()
}

/// Candidate pose at `standoff` along `direction`, facing back at the object.
pub fn candidate_pose(origin: Point2, direction: Point2, standoff: f64) -> Pose2D {
    let p = origin + direction * standoff;
    Pose2D::new(p.x, p.y, (direction * -1.0).angle())
}

pub fn plan_placements(snapshot: &SceneSnapshot, params: &RobotParams) -> Result<CandidateSet> {
    Ok(plan_placements_detailed(snapshot, params)?.set)
}

/// Like [`plan_placements`], also reporting every rejected probe.
pub fn plan_placements_detailed(snapshot: &SceneSnapshot, params: &RobotParams) -> Result<PlanReport> {
    params.validate()?;
    snapshot.object.validate()?;
    let theta = params.resolved_angle_increment()?;
    let rays = generate_radial_vectors(snapshot.object.position, theta)?;
    let standoffs = standoff_sequence(params);

    let per_ray: Vec<(Option<PlacementCandidate>, Vec<PrunedProbe>)> = rays
        .vectors
        .par_iter()
        .enumerate()
        .map(|(radial_index, dir)| {
            let mut pruned = Vec::new();
            for &standoff in &standoffs {
                let pose = candidate_pose(rays.origin, *dir, standoff);
                let risk = assess_candidate(pose.position(), params, snapshot)?;
                if !risk.is_risky(params.obstacle_point_threshold) {
                    let candidate = PlacementCandidate {
                        pose,
                        radial_index,
                        standoff,
                    };
                    return Ok((Some(candidate), pruned));
                }
                pruned.push(PrunedProbe {
                    radial_index,
                    standoff,
                    position: pose.position(),
                    risk,
                });
            }
            Ok((None, pruned))
        })
        .collect::<Result<_>>()?;

    let mut report = PlanReport {
        frame: FrameTag::Map,
        angle_increment: theta,
        radial_count: rays.vectors.len(),
        set: CandidateSet::default(),
        pruned: Vec::new(),
    };
    for (candidate, pruned) in per_ray {
        report.set.candidates.extend(candidate);
        report.pruned.extend(pruned);
    }
    Ok(report)
}

/// Heading error of a pose relative to facing `target`, wrapped to (-pi, pi].
pub fn heading_error(pose: &Pose2D, target: Point2) -> f64 {
    normalize_angle(pose.heading - (target - pose.position()).angle())
}
