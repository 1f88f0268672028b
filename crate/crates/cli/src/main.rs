use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use placeplan::executor::ExecutionOutcome;
use placeplan::harness::{run_scene_trial, write_benchmark, Approach, ExperimentReport, GridExperimentConfig};
use placeplan::planner::{plan_placements_detailed, PlanReport};
use placeplan::render::render_scene_svg;
use placeplan::scene::{load_cloud, load_grid, SynthesisConfig};
use placeplan::{CandidateSet, FrameTag, ObjectObservation, RobotParams, SceneDescription, SceneSnapshot};
use serde::Serialize;

const EXIT_INPUT: u8 = 1;
const EXIT_NO_CANDIDATES: u8 = 2;
const EXIT_EXECUTION: u8 = 3;

/// Plan base placements around a target object and replay grasping trials.
///
/// Exit codes: 0 success, 1 input error, 2 no candidates, 3 execution failure.
#[derive(Parser)]
#[command(name = "placeplan", version)]
struct Cli {
    /// Print machine-readable JSON on stdout instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate and prune placement candidates.
    Plan(PlanArgs),
    /// Run one simulated pickup trial.
    Simulate(SimulateArgs),
    /// Run the tabletop grid experiment.
    Benchmark(BenchmarkArgs),
    /// Draw a scene and its candidates as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Seed for scene synthesis.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cloud density in points per square meter.
    #[arg(long)]
    density: Option<f64>,
    /// Grid resolution in meters.
    #[arg(long)]
    resolution: Option<f64>,
}

impl SynthArgs {
    fn config(&self) -> SynthesisConfig {
        let d = SynthesisConfig::default();
        SynthesisConfig {
            density: self.density.unwrap_or(d.density),
            resolution: self.resolution.unwrap_or(d.resolution),
            seed: self.seed,
            ..d
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Scene description JSON; cloud and grid are synthesized from it.
    #[arg(long, conflicts_with_all = ["grid", "grid_meta", "cloud", "object"])]
    scene: Option<PathBuf>,
    /// Occupancy grid image (PGM).
    #[arg(long, requires_all = ["grid_meta", "cloud", "object"])]
    grid: Option<PathBuf>,
    /// Occupancy grid metadata (YAML).
    #[arg(long)]
    grid_meta: Option<PathBuf>,
    /// Point cloud, one `x,y,z` per line.
    #[arg(long)]
    cloud: Option<PathBuf>,
    /// Object observation JSON.
    #[arg(long)]
    object: Option<PathBuf>,
    /// Robot parameters (TOML or JSON).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Where to write the candidate set JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    synth: SynthArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long, default_value = "proposed")]
    approach: Approach,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `attempts.jsonl` and `outcome.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Experiment config JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    scene: PathBuf,
    /// Output of `plan`; may be empty.
    #[arg(long)]
    candidates: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

fn input_error(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INPUT,
        message: message.into(),
    }
}

/// Attaches `path` to an error message unless it already names it.
fn in_file<T, E: Display>(path: &Path, r: Result<T, E>) -> CliResult<T> {
    r.map_err(|e| {
        let msg = e.to_string();
        let shown = path.display().to_string();
        if msg.contains(&shown) {
            input_error(msg)
        } else {
            input_error(format!("{shown}: {msg}"))
        }
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    in_file(path, std::fs::read_to_string(path))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        in_file(dir, std::fs::create_dir_all(dir))?;
    }
    in_file(path, std::fs::write(path, bytes))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn load_params(path: Option<&Path>) -> CliResult<RobotParams> {
    match path {
        Some(p) => in_file(p, RobotParams::load(p)),
        None => Ok(RobotParams::default()),
    }
}

fn load_scene(path: &Path) -> CliResult<SceneDescription> {
    in_file(path, SceneDescription::load(path))
}

fn required<'a>(flag: &str, value: &'a Option<PathBuf>) -> CliResult<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| input_error(format!("--{flag} is required without --scene")))
}

fn plan_snapshot(args: &PlanArgs) -> CliResult<SceneSnapshot> {
    if let Some(scene) = &args.scene {
        let description = load_scene(scene)?;
        return in_file(scene, SceneSnapshot::synthesize(&description, &args.synth.config()));
    }
    let grid_path = required("grid", &args.grid)?;
    let meta_path = required("grid-meta", &args.grid_meta)?;
    let cloud_path = required("cloud", &args.cloud)?;
    let object_path = required("object", &args.object)?;

    let image = in_file(grid_path, std::fs::read(grid_path))?;
    let meta = read_text(meta_path)?;
    let grid = in_file(grid_path, load_grid(&image, &meta))?;
    let cloud = in_file(cloud_path, load_cloud(&read_text(cloud_path)?))?;
    let object: ObjectObservation = in_file(object_path, serde_json::from_str(&read_text(object_path)?))?;
    in_file(object_path, SceneSnapshot::new(cloud, grid, object))
}

fn cmd_plan(args: &PlanArgs, json: bool) -> CliResult<()> {
    let params = load_params(args.params.as_deref())?;
    let snapshot = plan_snapshot(args)?;
    let report = plan_placements_detailed(&snapshot, &params).map_err(|e| input_error(e.to_string()))?;
    let text = to_json(&report);
    if let Some(out) = &args.out {
        write_file(out, &text)?;
    }
    eprintln!(
        "plan: {} candidates, {} pruned probes over {} rays",
        report.set.len(),
        report.pruned.len(),
        report.radial_count
    );
    if json {
        print!("{text}");
    } else {
        for c in report.set.iter() {
            println!(
                "ray {:>3}  standoff {:.3}  x {:>8.3}  y {:>8.3}  heading {:>7.3}",
                c.radial_index, c.standoff, c.pose.x, c.pose.y, c.pose.heading
            );
        }
    }
    if report.set.is_empty() {
        return Err(Failure {
            code: EXIT_NO_CANDIDATES,
            message: "no collision-free placement found".into(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    approach: Approach,
    seed: u64,
    candidates: Option<usize>,
    #[serde(flatten)]
    outcome: &'a ExecutionOutcome,
}

fn cmd_simulate(args: &SimulateArgs, json: bool) -> CliResult<()> {
    let params = load_params(args.params.as_deref())?;
    let scene = load_scene(&args.scene)?;
    let config = GridExperimentConfig {
        params,
        ..GridExperimentConfig::default()
    };
    let baseline_goal = match (&scene.table, args.approach) {
        (Some(table), _) => table.table_to_map().apply_pose(&config.baseline_goal_table()),
        (None, Approach::Baseline) => {
            return Err(input_error(format!(
                "{}: the baseline needs a table to place its goal",
                args.scene.display()
            )))
        }
        (None, Approach::Proposed) => scene.robot_start,
    };
    let (candidates, outcome) = in_file(
        &args.scene,
        run_scene_trial(&scene, args.approach, baseline_goal, &config, args.seed),
    )?;
    let summary = SimulationSummary {
        approach: args.approach,
        seed: args.seed,
        candidates,
        outcome: &outcome,
    };
    if let Some(dir) = &args.out {
        write_file(&dir.join("attempts.jsonl"), outcome.attempts_jsonl())?;
        write_file(&dir.join("outcome.json"), to_json(&summary))?;
    }
    if json {
        print!("{}", to_json(&summary));
    } else {
        println!(
            "{}: {:?} after {} attempt(s)",
            args.approach.label(),
            outcome.status,
            outcome.attempts.len()
        );
    }
    if outcome.succeeded() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_EXECUTION,
            message: format!("pickup did not succeed ({:?})", outcome.status),
        })
    }
}

fn print_report(report: &ExperimentReport) {
    println!(
        "{}: {}/{} successes ({:.1}%)",
        report.approach.label(),
        report.total_successes,
        report.total_trials,
        100.0 * report.success_rate
    );
    for y in (0..report.grid_rows).rev() {
        let row: Vec<String> = (0..report.grid_cols)
            .map(|x| report.cell((x, y)).map_or("  -".into(), |c| format!("{:>3}", c.successes)))
            .collect();
        println!("  y={y} {}", row.join(" "));
    }
}

fn cmd_benchmark(args: &BenchmarkArgs, json: bool) -> CliResult<()> {
    let config = match &args.config {
        Some(path) => in_file(path, GridExperimentConfig::from_json(&read_text(path)?))?,
        None => GridExperimentConfig::default(),
    };
    let reports = write_benchmark(&config, &args.out).map_err(|e| input_error(e.to_string()))?;
    if json {
        print!("{}", to_json(&serde_json::json!({ "reports": reports })));
    } else {
        for r in &reports {
            print_report(r);
        }
        println!("wrote {}", args.out.display());
    }
    Ok(())
}

fn load_plan(path: &Path) -> CliResult<Option<PlanReport>> {
    let text = read_text(path)?;
    if text.trim().is_empty() {
        return Ok(None);
    }
    if let Ok(report) = serde_json::from_str::<PlanReport>(&text) {
        return Ok(Some(report));
    }
    let set: CandidateSet = in_file(path, serde_json::from_str(&text))?;
    Ok(Some(PlanReport {
        frame: FrameTag::Map,
        angle_increment: 0.0,
        radial_count: set.len(),
        set,
        pruned: Vec::new(),
    }))
}

fn cmd_render(args: &RenderArgs, json: bool) -> CliResult<()> {
    let scene = load_scene(&args.scene)?;
    let plan = match &args.candidates {
        Some(path) => load_plan(path)?,
        None => None,
    };
    let svg = in_file(&args.scene, render_scene_svg(&scene, plan.as_ref()))?;
    write_file(&args.out, &svg)?;
    let drawn = plan.as_ref().map_or(0, |p| p.set.len());
    if json {
        print!("{}", to_json(&serde_json::json!({ "out": args.out, "candidates": drawn })));
    } else {
        println!("wrote {} ({drawn} candidates)", args.out.display());
    }
    Ok(())
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("PLACEPLAN_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| input_error(format!("PLACEPLAN_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| input_error(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INPUT);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Plan(args) => cmd_plan(args, cli.json),
        Command::Simulate(args) => cmd_simulate(args, cli.json),
        Command::Benchmark(args) => cmd_benchmark(args, cli.json),
        Command::Render(args) => cmd_render(args, cli.json),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("placeplan: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
