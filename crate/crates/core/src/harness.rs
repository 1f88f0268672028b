//! Tabletop grid experiment: one object placed on each cell of a grid taped
//! to the table, several grasp trials per cell, for the planned-placement
//! approach and for a fixed-goal baseline.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::executor::{
    execute_fixed_goal, execute_pickup, ExecutionOutcome, MotionCostWeights, NavModel, PickupModel, SimulatedBackend,
};
use crate::geometry::{Point2, Pose2D};
use crate::planner::{plan_placements, RobotParams};
use crate::scene::{SceneDescription, SceneObject, SceneSnapshot, SynthesisConfig, TableSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Proposed,
    Baseline,
}

impl Approach {
    pub fn label(&self) -> &'static str {
        match self {
            Approach::Proposed => "proposed",
            Approach::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Approach {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Approach::Proposed),
            "baseline" => Ok(Approach::Baseline),
            other => Err(Error::Config(format!("unknown approach `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableDims {
    pub height: f64,
    pub width: f64,
    pub length: f64,
}

impl Default for TableDims {
    fn default() -> Self {
        Self {
            height: 0.74,
            width: 0.80,
            length: 1.80,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectTemplate {
    pub width: f64,
    pub height: f64,
    pub depth: f64,
}

impl Default for ObjectTemplate {
    fn default() -> Self {
        Self {
            width: 0.06,
            height: 0.20,
            depth: 0.06,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridExperimentConfig {
    pub table: TableDims,
    /// Map-frame pose of the table center.
    pub table_center: Pose2D,
    pub cell_size: f64,
    /// Cells along the short edge (x).
    pub grid_cols: usize,
    /// Cells along the long edge (y).
    pub grid_rows: usize,
    pub trials_per_cell: usize,
    pub approaches: Vec<Approach>,
    /// Robot distance from the aligned short edge at the baseline goal.
    pub baseline_edge_offset: f64,
    /// Explicit table-frame baseline goal; overrides `baseline_edge_offset`.
    pub baseline_goal: Option<Pose2D>,
    /// Table-frame start pose.
    pub robot_start: Pose2D,
    pub object: ObjectTemplate,
    pub params: RobotParams,
    pub weights: MotionCostWeights,
    /// Cloud density, grid resolution and margin; the seed is per trial.
    pub synthesis: SynthesisConfig,
    pub nav_model: NavModel,
    pub pickup_model: PickupModel,
    pub seed: u64,
}

impl Default for GridExperimentConfig {
    fn default() -> Self {
        Self {
            table: TableDims::default(),
            table_center: Pose2D::new(0.4, 0.9, 0.0),
            cell_size: 0.20,
            grid_cols: 3,
            grid_rows: 4,
            trials_per_cell: 5,
            approaches: vec![Approach::Proposed, Approach::Baseline],
            baseline_edge_offset: 0.35,
            baseline_goal: None,
            robot_start: Pose2D::new(0.4, -1.2, FRAC_PI_2),
            object: ObjectTemplate::default(),
            params: RobotParams::default(),
            weights: MotionCostWeights::default(),
            synthesis: SynthesisConfig::default(),
            nav_model: NavModel::default(),
            pickup_model: PickupModel::default(),
            seed: 0,
        }
    }
}

impl GridExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.weights.validate()?;
        if !(self.cell_size > 0.0) || self.grid_cols == 0 || self.grid_rows == 0 {
            return Err(Error::Config("grid needs a positive cell size and at least one cell".into()));
        }
        if self.grid_cols as f64 * self.cell_size > self.table.width + 1e-9
            || self.grid_rows as f64 * self.cell_size > self.table.length + 1e-9
        {
            return Err(Error::Config(format!(
                "{} x {} grid of {} m cells does not fit a {} x {} m table",
                self.grid_cols, self.grid_rows, self.cell_size, self.table.width, self.table.length
            )));
        }
        if self.trials_per_cell == 0 {
            return Err(Error::Config("trials_per_cell must be at least 1".into()));
        }
        Ok(())
    }

    pub fn table_spec(&self) -> TableSpec {
        TableSpec {
            center: self.table_center,
            length: self.table.length,
            width: self.table.width,
            height: self.table.height,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.grid_rows).flat_map(move |j| (0..self.grid_cols).map(move |i| (i, j)))
    }

    /// Baseline goal in the table frame: centered on the aligned short edge,
    /// outside the table, facing it.
    pub fn baseline_goal_table(&self) -> Pose2D {
        self.baseline_goal
            .unwrap_or_else(|| Pose2D::new(self.table.width / 2.0, -self.baseline_edge_offset, FRAC_PI_2))
    }

    pub fn baseline_goal_map(&self) -> Pose2D {
        self.table_spec().table_to_map().apply_pose(&self.baseline_goal_table())
    }
}

/// Table-frame center of grid cell `(i, j)`. The grid is centered across the
/// table width and flush with the reference short edge.
pub fn cell_center(cell: (usize, usize), config: &GridExperimentConfig) -> Result<Point2> {
    let (i, j) = cell;
    if i >= config.grid_cols || j >= config.grid_rows {
        return Err(Error::Range(format!(
            "cell ({i}, {j}) outside {} x {} grid",
            config.grid_cols, config.grid_rows
        )));
    }
    let margin_x = (config.table.width - config.grid_cols as f64 * config.cell_size) / 2.0;
    Ok(Point2::new(
        margin_x + (i as f64 + 0.5) * config.cell_size,
        (j as f64 + 0.5) * config.cell_size,
    ))
}

pub const TARGET_ID: &str = "target";

pub fn build_cell_scene(cell: (usize, usize), config: &GridExperimentConfig) -> Result<SceneDescription> {
    let table = config.table_spec();
    let scene = SceneDescription {
        table: Some(table),
        objects: vec![SceneObject {
            id: TARGET_ID.into(),
            position: cell_center(cell, config)?,
            width: config.object.width,
            height: config.object.height,
            depth: config.object.depth,
        }],
        obstacles: vec![],
        robot_start: table.table_to_map().apply_pose(&config.robot_start),
        target_id: TARGET_ID.into(),
    };
    scene.validate()?;
    Ok(scene)
}

/// SplitMix64 finalizer, used to derive independent seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trial_seed(base: u64, cell: (usize, usize), trial: usize) -> u64 {
    mix(mix(mix(base ^ cell.0 as u64) ^ cell.1 as u64) ^ trial as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: (usize, usize),
    pub trial: usize,
    pub approach: Approach,
    pub seed: u64,
    pub success: bool,
    /// Planned candidate count; `None` for the baseline.
    pub candidates: Option<usize>,
    pub outcome: ExecutionOutcome,
}

/// Runs one trial of `approach` with the object on `cell`.
pub fn run_scene_trial(
    scene: &SceneDescription,
    approach: Approach,
    baseline_goal: Pose2D,
    config: &GridExperimentConfig,
    seed: u64,
) -> Result<(Option<usize>, ExecutionOutcome)> {
    let synthesis = SynthesisConfig {
        seed: mix(seed ^ 1),
        ..config.synthesis
    };
    let snapshot = SceneSnapshot::synthesize(scene, &synthesis)?;
    let mut backend = SimulatedBackend::new(
        &snapshot,
        config.params,
        config.nav_model,
        config.pickup_model,
        scene.robot_start,
        mix(seed ^ 2),
    )?;
    let object = snapshot.object.position;
    match approach {
        Approach::Proposed => {
            let mut set = plan_placements(&snapshot, &config.params)?;
            let planned = set.len();
            let outcome = execute_pickup(&object, &mut set, &mut backend, &config.weights)?;
            Ok((Some(planned), outcome))
        }
        Approach::Baseline => Ok((None, execute_fixed_goal(&object, baseline_goal, &mut backend, &config.weights))),
    }
}

pub fn run_trial(
    cell: (usize, usize),
    approach: Approach,
    config: &GridExperimentConfig,
    seed: u64,
) -> Result<TrialRecord> {
    let scene = build_cell_scene(cell, config)?;
    let (candidates, outcome) = run_scene_trial(&scene, approach, config.baseline_goal_map(), config, seed)?;
    Ok(TrialRecord {
        cell,
        trial: 0,
        approach,
        seed,
        success: outcome.succeeded(),
        candidates,
        outcome,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub attempts: usize,
    pub candidates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: (usize, usize),
    pub successes: usize,
    pub failures: usize,
    pub trials: Vec<TrialSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub approach: Approach,
    pub trials_per_cell: usize,
    pub grid_cols: usize,
    pub grid_rows: usize,
    pub cells: Vec<CellResult>,
    pub total_successes: usize,
    pub total_trials: usize,
    pub success_rate: f64,
    pub config: GridExperimentConfig,
}

impl ExperimentReport {
    pub fn cell(&self, cell: (usize, usize)) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.cell == cell)
    }
}

pub fn run_experiment(config: &GridExperimentConfig, approach: Approach) -> Result<ExperimentReport> {
    Ok(run_experiment_with_records(config, approach)?.0)
}

/// Runs every cell and trial; trials run in parallel, results are ordered by
/// cell (row-major from (0, 0)) and trial index.
pub fn run_experiment_with_records(
    config: &GridExperimentConfig,
    approach: Approach,
) -> Result<(ExperimentReport, Vec<TrialRecord>)> {
    config.validate()?;
    let jobs: Vec<((usize, usize), usize)> = config
        .cells()
        .flat_map(|cell| (0..config.trials_per_cell).map(move |t| (cell, t)))
        .collect();
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(cell, trial)| {
            let seed = trial_seed(config.seed, cell, trial);
            run_trial(cell, approach, config, seed).map(|r| TrialRecord { trial, ..r })
        })
        .collect::<Result<_>>()?;

    let cells: Vec<CellResult> = config
        .cells()
        .map(|cell| {
            let trials: Vec<TrialSummary> = records
                .iter()
                .filter(|r| r.cell == cell)
                .map(|r| TrialSummary {
                    trial: r.trial,
                    seed: r.seed,
                    success: r.success,
                    attempts: r.outcome.attempts.len(),
                    candidates: r.candidates,
                })
                .collect();
            let successes = trials.iter().filter(|t| t.success).count();
            CellResult {
                cell,
                successes,
                failures: trials.len() - successes,
                trials,
            }
        })
        .collect();
    let total_successes = cells.iter().map(|c| c.successes).sum();
    let total_trials = records.len();
    let report = ExperimentReport {
        approach,
        trials_per_cell: config.trials_per_cell,
        grid_cols: config.grid_cols,
        grid_rows: config.grid_rows,
        cells,
        total_successes,
        total_trials,
        success_rate: total_successes as f64 / total_trials as f64,
        config: config.clone(),
    };
    Ok((report, records))
}

/// One attempt of one trial, as written to `attempts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptLogRecord {
    pub approach: Approach,
    pub cell: (usize, usize),
    pub trial: usize,
    pub attempt: usize,
    #[serde(flatten)]
    pub data: crate::executor::Attempt,
}

pub fn attempt_log(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for r in records {
        for (attempt, data) in r.outcome.attempts.iter().enumerate() {
            let line = AttemptLogRecord {
                approach: r.approach,
                cell: r.cell,
                trial: r.trial,
                attempt,
                data: *data,
            };
            out.push_str(&serde_json::to_string(&line).expect("attempt serializes"));
            out.push('\n');
        }
    }
    out
}

/// Runs every configured approach and writes `report.json`, `report.csv`,
/// `heatmap.ppm`, `heatmap.svg`, one `heatmap_<approach>.ppm` per approach
/// and `attempts.jsonl` into `out_dir`.
pub fn write_benchmark(config: &GridExperimentConfig, out_dir: &std::path::Path) -> Result<Vec<ExperimentReport>> {
    use crate::render::{render_ppm, render_reports, ReportFormat, CELL_PX};

    config.validate()?;
    if config.approaches.is_empty() {
        return Err(Error::Config("no approaches listed".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let write = |name: &str, bytes: &[u8]| {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };

    let mut reports = Vec::new();
    let mut log = String::new();
    for &approach in &config.approaches {
        let (report, records) = run_experiment_with_records(config, approach)?;
        log.push_str(&attempt_log(&records));
        write(
            &format!("heatmap_{}.ppm", approach.label()),
            &render_ppm(std::slice::from_ref(&report), CELL_PX),
        )?;
        reports.push(report);
    }
    write("report.json", &render_reports(&reports, ReportFormat::Json)?)?;
    write("report.csv", &render_reports(&reports, ReportFormat::Csv)?)?;
    write("heatmap.ppm", &render_reports(&reports, ReportFormat::Ppm)?)?;
    write("heatmap.svg", &render_reports(&reports, ReportFormat::Svg)?)?;
    write("attempts.jsonl", log.as_bytes())?;
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{observe_object, synthesize_grid, CellState};
    use approx::assert_abs_diff_eq;

    #[test]
    fn cell_center_examples() {
        let cfg = GridExperimentConfig::default();
        let c = cell_center((0, 0), &cfg).unwrap();
        assert_abs_diff_eq!(c.x, 0.20, epsilon = 1e-12);
        assert_abs_diff_eq!(c.y, 0.10, epsilon = 1e-12);
        let c = cell_center((2, 3), &cfg).unwrap();
        assert_abs_diff_eq!(c.x, 0.60, epsilon = 1e-12);
        assert_abs_diff_eq!(c.y, 0.70, epsilon = 1e-12);
        assert!(matches!(cell_center((3, 0), &cfg), Err(Error::Range(_))));
        assert!(matches!(cell_center((0, 4), &cfg), Err(Error::Range(_))));

        let centers: Vec<Point2> = cfg.cells().map(|c| cell_center(c, &cfg).unwrap()).collect();
        for (a, pa) in centers.iter().enumerate() {
            for pb in &centers[a + 1..] {
                assert!((pa.x - pb.x).abs() >= 0.2 - 1e-9 || (pa.y - pb.y).abs() >= 0.2 - 1e-9);
            }
        }
    }

    #[test]
    fn cell_scene_has_one_object_on_the_table() {
        let cfg = GridExperimentConfig::default();
        for cell in cfg.cells() {
            let scene = build_cell_scene(cell, &cfg).unwrap();
            assert_eq!(scene.objects.len(), 1);
            let b = scene.object_box(&scene.objects[0]);
            assert_abs_diff_eq!(b.center.z - b.half_extents[2], 0.74, epsilon = 1e-12);
        }
        let obs = observe_object(&build_cell_scene((0, 0), &cfg).unwrap()).unwrap();
        assert_abs_diff_eq!(obs.position.z, 0.74 + 0.20 / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cell_scene_grid_marks_table() {
        let cfg = GridExperimentConfig::default();
        let scene = build_cell_scene((1, 1), &cfg).unwrap();
        let grid = synthesize_grid(&scene, 0.05, 1.0).unwrap();
        assert_eq!(grid.count(CellState::Occupied), 16 * 36);
        let table = scene.table.unwrap();
        for j in 0..grid.height {
            for i in 0..grid.width {
                let inside = table.footprint_contains(grid.cell_to_world(i, j));
                assert_eq!(grid.get(i, j) == CellState::Occupied, inside);
            }
        }
    }

    #[test]
    fn config_rejects_oversized_grid() {
        let cfg = GridExperimentConfig {
            grid_cols: 5,
            ..GridExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn default_baseline_goal() {
        let cfg = GridExperimentConfig::default();
        let g = cfg.baseline_goal_map();
        assert_abs_diff_eq!(g.x, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(g.y, -0.35, epsilon = 1e-12);
        assert_abs_diff_eq!(g.heading, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn trial_examples() {
        let cfg = GridExperimentConfig::default();
        let proposed = run_trial((1, 1), Approach::Proposed, &cfg, 3).unwrap();
        assert!(proposed.success);
        assert!(proposed.candidates.unwrap() >= 1);
        assert!(!run_trial((0, 3), Approach::Baseline, &cfg, 3).unwrap().success);
        assert!(run_trial((0, 0), Approach::Baseline, &cfg, 3).unwrap().success);
    }

    #[test]
    fn seeds_differ_per_cell_and_trial() {
        let mut seen = std::collections::HashSet::new();
        for j in 0..4 {
            for i in 0..3 {
                for t in 0..5 {
                    assert!(seen.insert(trial_seed(0, (i, j), t)));
                }
            }
        }
    }

    #[test]
    fn config_json_defaults() {
        let cfg = GridExperimentConfig::from_json(r#"{"trials_per_cell": 2, "approaches": ["baseline"]}"#).unwrap();
        assert_eq!(cfg.trials_per_cell, 2);
        assert_eq!(cfg.approaches, vec![Approach::Baseline]);
        assert_eq!(cfg.params, RobotParams::default());
        assert!(GridExperimentConfig::from_json(r#"{"approaches": ["teleport"]}"#).is_err());
    }
}
