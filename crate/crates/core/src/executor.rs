//! Cost-ranked execution of placement candidates.
//!
//! [`execute_pickup`] repeatedly picks the cheapest remaining candidate from
//! the robot's current pose, removes it and navigates there. A navigation
//! failure re-ranks the rest from wherever the robot stopped; the first
//! successful navigation is followed by exactly one pickup, whose result is
//! final.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Point3, Pose2D};
use crate::planner::{
    footprint_occupied, reach_box, target_exclusion_box, CandidateSet, PlacementCandidate,
    RobotParams,
};
use crate::scene::SceneSnapshot;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionCostWeights {
    pub nav_weight: f64,
    pub manip_weight: f64,
}

impl Default for MotionCostWeights {
    fn default() -> Self {
        Self {
            nav_weight: 1.0,
            manip_weight: 1.0,
        }
    }
}

impl MotionCostWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = self.nav_weight.is_finite()
            && self.manip_weight.is_finite()
            && self.nav_weight >= 0.0
            && self.manip_weight >= 0.0
            && (self.nav_weight > 0.0 || self.manip_weight > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Param(format!(
                "weights must be >= 0 and not both 0, got {} and {}",
                self.nav_weight, self.manip_weight
            )))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nav_weight: self.nav_weight * factor,
            manip_weight: self.manip_weight * factor,
        }
    }
}

/// Navigation distance (current pose to candidate) plus manipulation
/// distance (candidate to object), both planar and weighted.
pub fn motion_cost(candidate: &Pose2D, object_position: &Point3, current: &Pose2D, weights: &MotionCostWeights) -> f64 {
    let p = candidate.position();
    weights.nav_weight * p.distance(&current.position()) + weights.manip_weight * p.distance(&object_position.planar())
}

// Relative tolerance under which two costs count as tied.
const COST_TIE_TOLERANCE: f64 = 1e-9;

fn compare_ranked(a: (f64, &PlacementCandidate), b: (f64, &PlacementCandidate)) -> Ordering {
    let scale = a.0.abs().max(b.0.abs()).max(1.0);
    let by_cost = if (a.0 - b.0).abs() <= COST_TIE_TOLERANCE * scale {
        Ordering::Equal
    } else {
        a.0.total_cmp(&b.0)
    };
    by_cost
        .then(a.1.radial_index.cmp(&b.1.radial_index))
        .then(a.1.standoff.total_cmp(&b.1.standoff))
}

/// Index of the cheapest candidate; ties go to the lower radial index, then
/// the lower standoff.
pub fn best_index(
    candidates: &[PlacementCandidate],
    object_position: &Point3,
    current: &Pose2D,
    weights: &MotionCostWeights,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, c) in candidates.iter().enumerate() {
        let cost = motion_cost(&c.pose, object_position, current, weights);
        best = match best {
            Some((b, bc)) if compare_ranked((bc, &candidates[b]), (cost, c)) != Ordering::Greater => Some((b, bc)),
            _ => Some((idx, cost)),
        };
    }
    best.map(|(idx, _)| idx)
}

pub fn select_best(
    set: &CandidateSet,
    object_position: &Point3,
    current: &Pose2D,
    weights: &MotionCostWeights,
) -> Result<PlacementCandidate> {
    best_index(&set.candidates, object_position, current, weights)
        .map(|i| set.candidates[i])
        .ok_or(Error::EmptySet)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavResult {
    pub success: bool,
    pub resulting_pose: Pose2D,
}

/// Seam to a navigation and manipulation stack.
///
/// A successful `navigate` must leave the robot within 0.05 m and 0.1 rad of
/// the goal.
pub trait MotionBackend {
    fn current_pose(&self) -> Pose2D;
    fn navigate(&mut self, goal: &Pose2D) -> NavResult;
    fn pickup(&mut self, object_position: &Point3, from_pose: &Pose2D) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecutionStatus {
    PickupSucceeded,
    PickupFailed,
    NoCandidates,
    AllNavigationFailed,
}

/// One navigation attempt and, if it succeeded, the pickup that followed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub goal: Pose2D,
    /// `None` for fixed-goal (baseline) attempts.
    pub radial_index: Option<usize>,
    pub standoff: f64,
    /// Pose the candidate was ranked from.
    pub from_pose: Pose2D,
    pub nav_cost: f64,
    pub manip_cost: f64,
    pub cost: f64,
    pub nav: NavResult,
    pub pickup: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecutionStatus,
    pub attempts: Vec<Attempt>,
    pub final_pose: Pose2D,
}

impl ExecutionOutcome {
    pub fn succeeded(&self) -> bool {
        self.status == ExecutionStatus::PickupSucceeded
    }

    /// One JSON object per attempt, newline-terminated.
    pub fn attempts_jsonl(&self) -> String {
        self.attempts
            .iter()
            .map(|a| serde_json::to_string(a).expect("attempt serializes") + "\n")
            .collect()
    }
}

fn run_attempt<B: MotionBackend + ?Sized>(
    backend: &mut B,
    object_position: &Point3,
    goal: Pose2D,
    radial_index: Option<usize>,
    standoff: f64,
    from_pose: Pose2D,
    weights: &MotionCostWeights,
) -> Attempt {
    let nav_cost = goal.position().distance(&from_pose.position());
    let manip_cost = goal.position().distance(&object_position.planar());
    let nav = backend.navigate(&goal);
    let pickup = nav.success.then(|| backend.pickup(object_position, &nav.resulting_pose));
    Attempt {
        goal,
        radial_index,
        standoff,
        from_pose,
        nav_cost,
        manip_cost,
        cost: weights.nav_weight * nav_cost + weights.manip_weight * manip_cost,
        nav,
        pickup,
    }
}

/// Drives the backend through the ranked candidates. Attempted candidates
/// are removed from `set`.
pub fn execute_pickup<B: MotionBackend + ?Sized>(
    object_position: &Point3,
    set: &mut CandidateSet,
    backend: &mut B,
    weights: &MotionCostWeights,
) -> Result<ExecutionOutcome> {
    weights.validate()?;
    let mut attempts = Vec::new();
    if set.is_empty() {
        return Ok(ExecutionOutcome {
            status: ExecutionStatus::NoCandidates,
            attempts,
            final_pose: backend.current_pose(),
        });
    }
    while !set.is_empty() {
        let current = backend.current_pose();
        let idx = best_index(&set.candidates, object_position, &current, weights).expect("set is non-empty");
        let candidate = set.candidates.remove(idx);
        let attempt = run_attempt(
            backend,
            object_position,
            candidate.pose,
            Some(candidate.radial_index),
            candidate.standoff,
            current,
            weights,
        );
        attempts.push(attempt);
        if let Some(picked) = attempt.pickup {
            let status = if picked {
                ExecutionStatus::PickupSucceeded
            } else {
                ExecutionStatus::PickupFailed
            };
            return Ok(ExecutionOutcome {
                status,
                attempts,
                final_pose: backend.current_pose(),
            });
        }
    }
    Ok(ExecutionOutcome {
        status: ExecutionStatus::AllNavigationFailed,
        attempts,
        final_pose: backend.current_pose(),
    })
}

/// Navigate to one predefined goal and try the pickup from there.
pub fn execute_fixed_goal<B: MotionBackend + ?Sized>(
    object_position: &Point3,
    goal: Pose2D,
    backend: &mut B,
    weights: &MotionCostWeights,
) -> ExecutionOutcome {
    let current = backend.current_pose();
    let standoff = goal.position().distance(&object_position.planar());
    let attempt = run_attempt(backend, object_position, goal, None, standoff, current, weights);
    let status = match attempt.pickup {
        Some(true) => ExecutionStatus::PickupSucceeded,
        Some(false) => ExecutionStatus::PickupFailed,
        None => ExecutionStatus::AllNavigationFailed,
    };
    ExecutionOutcome {
        status,
        attempts: vec![attempt],
        final_pose: backend.current_pose(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavModel {
    /// Skip the straight-line feasibility check.
    #[serde(alias = "nav_always_succeeds")]
    pub always_succeeds: bool,
    pub failure_prob: f64,
}

impl Default for NavModel {
    fn default() -> Self {
        Self {
            always_succeeds: true,
            failure_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PickupModel {
    pub failure_prob: f64,
    /// Ignore points at or below the object's base (the surface it rests on)
    /// in the reach clearance check.
    pub ignore_support_surface: bool,
}

impl Default for PickupModel {
    fn default() -> Self {
        Self {
            failure_prob: 0.0,
            ignore_support_surface: true,
        }
    }
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be in [0, 1], got {p}")))
    }
}

// Slack on the reach band so candidates placed exactly at its ends pass.
const REACH_TOLERANCE: f64 = 1e-9;

/// Deterministic stand-in for the navigation and manipulation stacks.
pub struct SimulatedBackend<'a> {
    snapshot: &'a SceneSnapshot,
    params: RobotParams,
    nav_model: NavModel,
    pickup_model: PickupModel,
    rng: ChaCha8Rng,
    pose: Pose2D,
}

impl<'a> SimulatedBackend<'a> {
    pub fn new(
        snapshot: &'a SceneSnapshot,
        params: RobotParams,
        nav_model: NavModel,
        pickup_model: PickupModel,
        start: Pose2D,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        check_prob(nav_model.failure_prob, "navigation failure_prob")?;
        check_prob(pickup_model.failure_prob, "pickup failure_prob")?;
        Ok(Self {
            snapshot,
            params,
            nav_model,
            pickup_model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pose: start,
        })
    }

    fn footprint_free(&self, p: Point2) -> bool {
        !footprint_occupied(
            &self.snapshot.grid,
            p,
            self.params.footprint_radius,
            self.params.treat_unknown_as_occupied,
        )
    }

    /// Whether the segment swept by the footprint circle crosses a blocking cell.
    pub fn segment_blocked(&self, from: Point2, to: Point2) -> bool {
        let grid = &self.snapshot.grid;
        let r = self.params.footprint_radius;
        let (a, b) = (grid.lattice_index(from), grid.lattice_index(to));
        let pad = (r / grid.resolution).ceil() as i64 + 1;
        for j in a.1.min(b.1) - pad..=a.1.max(b.1) + pad {
            for i in a.0.min(b.0) - pad..=a.0.max(b.0) + pad {
                if point_segment_distance(grid.cell_center(i, j), from, to) <= r
                    && grid.is_blocked(i, j, self.params.treat_unknown_as_occupied)
                {
                    return true;
                }
            }
        }
        false
    }

    /// Last footprint-free sample on the way to `to`, or the start.
    fn stop_point(&self, from: Point2, to: Point2) -> Point2 {
        let len = from.distance(&to);
        let step = self.snapshot.grid.resolution / 2.0;
        let steps = (len / step).ceil() as usize;
        let mut last = from;
        for k in 1..=steps {
            let p = from + (to - from) * (k as f64 / steps as f64);
            if !self.footprint_free(p) {
                break;
            }
            last = p;
        }
        last
    }

    fn fail_at(&mut self, p: Point2, goal: &Pose2D) -> NavResult {
        let heading = if p.distance(&goal.position()) > 0.0 {
            (goal.position() - p).angle()
        } else {
            self.pose.heading
        };
        self.pose = Pose2D::new(p.x, p.y, heading);
        NavResult {
            success: false,
            resulting_pose: self.pose,
        }
    }
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(&ab);
    if len2 == 0.0 {
        return p.distance(&a);
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    p.distance(&(a + ab * t))
}

impl MotionBackend for SimulatedBackend<'_> {
    fn current_pose(&self) -> Pose2D {
        self.pose
    }

    fn navigate(&mut self, goal: &Pose2D) -> NavResult {
        let from = self.pose.position();
        let to = goal.position();
        if !self.nav_model.always_succeeds && self.segment_blocked(from, to) {
            let stop = self.stop_point(from, to);
            return self.fail_at(stop, goal);
        }
        if self.nav_model.failure_prob > 0.0 && self.rng.gen_bool(self.nav_model.failure_prob) {
            let frac: f64 = self.rng.gen();
            return self.fail_at(from + (to - from) * frac, goal);
        }
        self.pose = *goal;
        NavResult {
            success: true,
            resulting_pose: self.pose,
        }
    }

    fn pickup(&mut self, object_position: &Point3, from_pose: &Pose2D) -> bool {
        let object = self.snapshot.object;
        let distance = from_pose.position().distance(&object_position.planar());
        let in_band = distance >= self.params.reach_min - REACH_TOLERANCE
            && distance <= self.params.reach_max + REACH_TOLERANCE;
        let clear = in_band
            && match reach_box(&object, from_pose.position()) {
                Ok(corridor) => {
                    let exclusion = self.params.exclude_target_points.then(|| target_exclusion_box(&object));
                    let support = object.base_z() + 1e-9;
                    let ignore_support = self.pickup_model.ignore_support_surface;
                    let count = self
                        .snapshot
                        .cloud
                        .points
                        .iter()
                        .filter(|p| !ignore_support || p.z > support)
                        .filter(|p| corridor.contains(p) && !exclusion.as_ref().is_some_and(|e| e.contains(p)))
                        .count();
                    count <= self.params.obstacle_point_threshold
                }
                Err(_) => false,
            };
        if !clear {
            return false;
        }
        !(self.pickup_model.failure_prob > 0.0 && self.rng.gen_bool(self.pickup_model.failure_prob))
    }
}
