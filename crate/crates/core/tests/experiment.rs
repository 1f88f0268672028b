use placeplan::harness::{
    build_cell_scene, cell_center, run_experiment, run_experiment_with_records, trial_seed, write_benchmark,
    Approach, GridExperimentConfig,
};
use placeplan::Point2;

#[test]
fn default_grid_reproduces_the_baseline_blind_spot() {
    let config = GridExperimentConfig::default();
    let (proposed, records) = run_experiment_with_records(&config, Approach::Proposed).unwrap();
    let baseline = run_experiment(&config, Approach::Baseline).unwrap();
    for cell in config.cells() {
        let p = proposed.cell(cell).unwrap();
        let b = baseline.cell(cell).unwrap();
        assert_eq!(p.successes, config.trials_per_cell, "proposed at {cell:?}");
        let expected = if cell.1 == 3 { 0 } else { config.trials_per_cell };
        assert_eq!(b.successes, expected, "baseline at {cell:?}");
    }
    assert!(records.iter().all(|r| r.candidates.unwrap_or(0) > 0));
}

#[test]
fn cells_tile_the_reference_edge() {
    let config = GridExperimentConfig::default();
    let close = |a: Point2, b: Point2| a.distance(&b) < 1e-12;
    assert!(close(cell_center((0, 0), &config).unwrap(), Point2::new(0.2, 0.1)));
    assert!(close(cell_center((2, 3), &config).unwrap(), Point2::new(0.6, 0.7)));
    assert!(cell_center((3, 0), &config).is_err());
    let scene = build_cell_scene((1, 2), &config).unwrap();
    assert_eq!(scene.target().unwrap().position, cell_center((1, 2), &config).unwrap());
}

#[test]
fn trial_seeds_are_distinct() {
    let mut seeds: Vec<u64> = (0..3)
        .flat_map(|i| (0..4).flat_map(move |j| (0..5).map(move |t| trial_seed(7, (i, j), t))))
        .collect();
    seeds.sort_unstable();
    seeds.dedup();
    assert_eq!(seeds.len(), 60);
}

#[test]
fn benchmark_writes_identical_files_twice() {
    let config = GridExperimentConfig {
        trials_per_cell: 2,
        ..GridExperimentConfig::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_benchmark(&config, a.path()).unwrap();
    write_benchmark(&config, b.path()).unwrap();
    for name in [
        "report.json",
        "report.csv",
        "heatmap.ppm",
        "heatmap.svg",
        "heatmap_proposed.ppm",
        "heatmap_baseline.ppm",
        "attempts.jsonl",
    ] {
        let left = std::fs::read(a.path().join(name)).unwrap();
        assert!(!left.is_empty(), "{name} is empty");
        assert_eq!(left, std::fs::read(b.path().join(name)).unwrap(), "{name} differs");
    }
}
