// Shared fixtures and brute-force oracles for the integration suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use placeplan::executor::{best_index, execute_pickup, motion_cost, MotionBackend, MotionCostWeights, NavResult};
use placeplan::planner::{body_box, candidate_pose, reach_box, target_exclusion_box, PlacementCandidate};
use placeplan::scene::{CellState, SceneObject, TableSpec};
use placeplan::{
    CandidateSet, OccupancyGrid, OrientedBox, Point2, Point3, PointCloud, Pose2D, RobotParams, SceneDescription,
    SceneSnapshot,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Box-containment oracle: the box as the intersection of six half-spaces.
pub fn oracle_contains(b: &OrientedBox, p: &Point3) -> bool {
    let (s, c) = b.yaw.sin_cos();
    let (dx, dy, dz) = (p.x - b.center.x, p.y - b.center.y, p.z - b.center.z);
    let [hx, hy, hz] = b.half_extents;
    let planes = [
        (c * dx + s * dy, hx),
        ((-c) * dx + (-s) * dy, hx),
        ((-s) * dx + c * dy, hy),
        (s * dx + (-c) * dy, hy),
        (dz, hz),
        (-dz, hz),
    ];
    planes.iter().all(|(d, h)| *d <= *h)
}

pub fn oracle_count(cloud: &PointCloud, b: &OrientedBox, exclusion: Option<&OrientedBox>) -> usize {
    let mut n = 0;
    for p in &cloud.points {
        if oracle_contains(b, p) && !exclusion.is_some_and(|e| oracle_contains(e, p)) {
            n += 1;
        }
    }
    n
}

/// Footprint oracle: rasterizes every lattice cell of the grid and of the
/// circle's bounding box in grid-local coordinates. Any covered cell outside the grid,
/// occupied, or (optionally) unknown blocks.
pub fn oracle_footprint(grid: &OccupancyGrid, center: Point2, radius: f64, unknown_blocks: bool) -> bool {
    let (s, c) = grid.origin.heading.sin_cos();
    let (dx, dy) = (center.x - grid.origin.x, center.y - grid.origin.y);
    let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
    let (w, h) = (grid.width as i64, grid.height as i64);
    let lo = |v: f64| ((v - radius) / grid.resolution).floor() as i64 - 1;
    let hi = |v: f64| ((v + radius) / grid.resolution).ceil() as i64 + 1;
    for j in lo(ly).min(0)..hi(ly).max(h) {
        for i in lo(lx).min(0)..hi(lx).max(w) {
            let cx = (i as f64 + 0.5) * grid.resolution;
            let cy = (j as f64 + 0.5) * grid.resolution;
            if ((cx - lx).powi(2) + (cy - ly).powi(2)).sqrt() > radius {
                continue;
            }
            if i < 0 || j < 0 || i >= w || j >= h {
                return true;
            }
            match grid.get(i as usize, j as usize) {
                CellState::Free => {}
                CellState::Occupied => return true,
                CellState::Unknown if unknown_blocks => return true,
                CellState::Unknown => {}
            }
        }
    }
    false
}

pub fn random_params(rng: &mut TestRng) -> RobotParams {
    let footprint_radius = rng.gen_range(0.15..0.35);
    let reach_min = rng.gen_range(0.3..0.6);
    RobotParams {
        footprint_radius,
        robot_height: rng.gen_range(1.0..1.6),
        reach_min,
        reach_max: reach_min + rng.gen_range(0.0..0.7),
        obstacle_point_threshold: rng.gen_range(0..120),
        ..RobotParams::default()
    }
}

pub fn random_table(rng: &mut TestRng) -> TableSpec {
    TableSpec {
        center: Pose2D::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-PI..PI)),
        length: rng.gen_range(0.8..2.0),
        width: rng.gen_range(0.5..1.0),
        height: rng.gen_range(0.5..0.9),
    }
}

/// Random floor obstacle within `radius` of `near`.
pub fn random_obstacle(rng: &mut TestRng, near: Point2, radius: f64) -> OrientedBox {
    let angle = rng.gen_range(-PI..PI);
    let dist = rng.gen_range(0.0..radius);
    let c = near + Point2::from_angle(angle) * dist;
    let hz = rng.gen_range(0.05..0.8);
    OrientedBox::new(
        c.with_z(hz),
        [rng.gen_range(0.03..0.3), rng.gen_range(0.03..0.3), hz],
        rng.gen_range(-PI..PI),
    )
}

/// Random table with one target on it and up to `max_obstacles` floor
/// obstacles around it.
pub fn random_scene(rng: &mut TestRng, max_obstacles: usize) -> SceneDescription {
    let table = random_table(rng);
    let width = rng.gen_range(0.03..0.1);
    let depth = rng.gen_range(0.03..0.1);
    let object = SceneObject {
        id: "target".into(),
        position: Point2::new(
            rng.gen_range(width / 2.0..table.width - width / 2.0),
            rng.gen_range(depth / 2.0..table.length - depth / 2.0),
        ),
        width,
        height: rng.gen_range(0.05..0.3),
        depth,
    };
    let object_map = table.table_to_map().apply(object.position);
    let start_dir = Point2::from_angle(rng.gen_range(-PI..PI));
    let start = table.center.position() + start_dir * 2.0;
    let n_obstacles = rng.gen_range(0..=max_obstacles);
    let obstacles = (0..n_obstacles).map(|_| random_obstacle(rng, object_map, 1.5)).collect();
    SceneDescription {
        table: Some(table),
        objects: vec![object],
        obstacles,
        robot_start: Pose2D::new(start.x, start.y, 0.0),
        target_id: "target".into(),
    }
}

/// Re-checks one candidate with the oracles; `Err` names the violation.
pub fn recheck_candidate(c: &PlacementCandidate, params: &RobotParams, snapshot: &SceneSnapshot) -> Result<(), String> {
    let object = &snapshot.object;
    let target = object.position.planar();
    let p = c.pose.position();
    let d = p.distance(&target);
    if d < params.reach_min - 1e-9 || d > params.reach_max + 1e-9 {
        return Err(format!("standoff {d} outside [{}, {}]", params.reach_min, params.reach_max));
    }
    if (d - c.standoff).abs() > 1e-9 {
        return Err(format!("reported standoff {} but distance is {d}", c.standoff));
    }
    let facing = (target - p).angle();
    let mut err = (c.pose.heading - facing).rem_euclid(2.0 * PI);
    if err > PI {
        err = 2.0 * PI - err;
    }
    if err > 1e-9 {
        return Err(format!("heading off by {err}"));
    }
    if oracle_footprint(&snapshot.grid, p, params.footprint_radius, params.treat_unknown_as_occupied) {
        return Err("footprint overlaps a blocking cell".into());
    }
    let exclusion = params.exclude_target_points.then(|| target_exclusion_box(object));
    let body = oracle_count(&snapshot.cloud, &body_box(p, facing, params), exclusion.as_ref());
    let reach_corridor = reach_box(object, p).map_err(|e| e.to_string())?;
    let reach = oracle_count(&snapshot.cloud, &reach_corridor, exclusion.as_ref());
    let k = params.obstacle_point_threshold;
    if body > k || reach > k {
        return Err(format!("point counts body {body}, reach {reach} exceed {k}"));
    }
    Ok(())
}

/// Navigation outcomes follow a script; failures stop part way to the goal.
pub struct ScriptedBackend {
    pub pose: Pose2D,
    pub script: Vec<(bool, f64)>,
    pub pickup_result: bool,
    pub nav_calls: usize,
    pub pickup_calls: usize,
}

impl ScriptedBackend {
    pub fn new(start: Pose2D, script: Vec<(bool, f64)>, pickup_result: bool) -> Self {
        Self {
            pose: start,
            script,
            pickup_result,
            nav_calls: 0,
            pickup_calls: 0,
        }
    }
}

impl MotionBackend for ScriptedBackend {
    fn current_pose(&self) -> Pose2D {
        self.pose
    }

    fn navigate(&mut self, goal: &Pose2D) -> NavResult {
        let (ok, frac) = self.script.get(self.nav_calls).copied().unwrap_or((true, 1.0));
        self.nav_calls += 1;
        if ok {
            self.pose = *goal;
        } else {
            let p = self.pose.position() + (goal.position() - self.pose.position()) * frac;
            self.pose = Pose2D::new(p.x, p.y, self.pose.heading + 0.3);
        }
        NavResult {
            success: ok,
            resulting_pose: self.pose,
        }
    }

    fn pickup(&mut self, _object: &Point3, _from: &Pose2D) -> bool {
        self.pickup_calls += 1;
        self.pickup_result
    }
}

/// Random candidate set around `object`; radial indices are distinct.
pub fn random_candidates(rng: &mut TestRng, object: Point2, n: usize) -> CandidateSet {
    let mut indices: Vec<usize> = (0..3 * n.max(1)).collect();
    indices.shuffle(rng);
    let candidates = indices[..n]
        .iter()
        .map(|&radial_index| {
            let standoff = rng.gen_range(0.3..1.2);
            let dir = Point2::from_angle(rng.gen_range(-PI..PI));
            PlacementCandidate {
                pose: candidate_pose(object, dir, standoff),
                radial_index,
                standoff,
            }
        })
        .collect();
    CandidateSet { candidates }
}

/// Runs `execute_pickup` under a scripted backend and checks the executor
/// contract against a brute-force ranking.
pub fn check_executor_contract(
    set: &CandidateSet,
    object: Point3,
    start: Pose2D,
    weights: &MotionCostWeights,
    script: Vec<(bool, f64)>,
    pickup_result: bool,
) -> Result<(), String> {
    let mut remaining = set.clone();
    let mut backend = ScriptedBackend::new(start, script, pickup_result);
    let outcome = execute_pickup(&object, &mut remaining, &mut backend, weights).map_err(|e| e.to_string())?;
    let attempts = &outcome.attempts;

    if attempts.len() > set.len() {
        return Err(format!("{} attempts for {} candidates", attempts.len(), set.len()));
    }
    if backend.pickup_calls > 1 {
        return Err(format!("{} pickup attempts", backend.pickup_calls));
    }
    if let Some(k) = attempts.iter().position(|a| a.nav.success) {
        if k + 1 != attempts.len() || attempts[k].pickup.is_none() || backend.pickup_calls != 1 {
            return Err("pickup must follow the first successful navigation and end the run".into());
        }
    } else if backend.pickup_calls != 0 {
        return Err("pickup attempted without a successful navigation".into());
    }

    let mut pool = set.candidates.clone();
    let mut from = start;
    for (k, a) in attempts.iter().enumerate() {
        if a.from_pose != from {
            return Err(format!("attempt {k} ranked from {:?}, expected {from:?}", a.from_pose));
        }
        let idx = a.radial_index.ok_or("planned attempt without a radial index")?;
        let pos = pool
            .iter()
            .position(|c| c.radial_index == idx)
            .ok_or_else(|| format!("attempt {k} reuses or invents candidate {idx}"))?;
        let chosen = pool.remove(pos);
        let cost = motion_cost(&chosen.pose, &object, &from, weights);
        for other in &pool {
            let oc = motion_cost(&other.pose, &object, &from, weights);
            if oc < cost - 1e-9 * cost.abs().max(oc.abs()).max(1.0) {
                return Err(format!("attempt {k} picked cost {cost} over {oc}"));
            }
            if oc == cost && (other.radial_index, other.standoff) < (chosen.radial_index, chosen.standoff) {
                return Err(format!("attempt {k} broke a tie against radial index {}", other.radial_index));
            }
        }
        from = a.nav.resulting_pose;
    }
    let left: Vec<usize> = remaining.iter().map(|c| c.radial_index).collect();
    let expected: Vec<usize> = pool.iter().map(|c| c.radial_index).collect();
    if left != expected {
        return Err(format!("set after execution {left:?}, expected {expected:?}"));
    }
    Ok(())
}

/// Whether the argmin survives scaling both weights by `factor`.
pub fn argmin_scale_invariant(
    set: &CandidateSet,
    object: &Point3,
    from: &Pose2D,
    weights: &MotionCostWeights,
    factor: f64,
) -> bool {
    best_index(&set.candidates, object, from, weights) == best_index(&set.candidates, object, from, &weights.scaled(factor))
}

/// `base` with `extra` obstacles added: their surface points are appended to
/// the cloud and their footprints marked occupied on the same grid.
pub fn with_extra_obstacles(
    scene: &SceneDescription,
    base: &SceneSnapshot,
    extra: &[OrientedBox],
    density: f64,
    seed: u64,
) -> SceneSnapshot {
    let mut bigger = scene.clone();
    bigger.obstacles.extend_from_slice(extra);
    let cloud = placeplan::scene::synthesize_cloud(&bigger, density, seed).expect("cloud");
    assert_eq!(
        &cloud.points[..base.cloud.len()],
        &base.cloud.points[..],
        "adding obstacles must only append points"
    );
    let mut grid = base.grid.clone();
    for j in 0..grid.height {
        for i in 0..grid.width {
            let c = grid.cell_to_world(i, j);
            if extra.iter().any(|b| b.footprint_contains(c)) {
                grid.set(i, j, CellState::Occupied);
            }
        }
    }
    SceneSnapshot::new(cloud, grid, base.object).expect("snapshot")
}

/// Monotonicity check between a scene and the same scene with more
/// obstacles. Returns the number of candidates compared.
pub fn check_monotone(before: &CandidateSet, after: &CandidateSet) -> Result<usize, String> {
    if after.len() > before.len() {
        return Err(format!("candidate count grew from {} to {}", before.len(), after.len()));
    }
    for c in after.iter() {
        let old = before
            .iter()
            .find(|o| o.radial_index == c.radial_index)
            .ok_or_else(|| format!("ray {} gained a candidate", c.radial_index))?;
        if c.standoff < old.standoff {
            return Err(format!("ray {} standoff shrank {} -> {}", c.radial_index, old.standoff, c.standoff));
        }
    }
    Ok(after.len())
}
