use std::fs;
use std::time::Duration;

use lipdelay::config::{AlgorithmName, DelaySpec, RewardName, RunConfig};
use lipdelay::export::{export_run, read_csv, Summary, MAX_CURVE_POINTS};
use lipdelay::grid::RunResult;
use lipdelay_core::experiment::{aggregate, RegretTrace};

fn constant_traces(values: &[f64], len: usize) -> Vec<RegretTrace> {
    values.iter().enumerate().map(|(i, &v)| RegretTrace { cumulative: vec![v; len], seed: i as u64 }).collect()
}

fn result(len: usize) -> RunResult {
    let mut config = RunConfig::new(AlgorithmName::Dlpp, RewardName::Sine, DelaySpec::Geometric { mean: 20.0 });
    config.horizon = len as u64;
    config.trials = 2;
    RunResult {
        config,
        aggregate: aggregate(&constant_traces(&[100.0, 200.0], len)).unwrap(),
        wall_time: Duration::from_millis(5),
    }
}

#[test]
fn summary_of_two_constant_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("fresh");
    let paths = export_run(&result(50), &dir).unwrap();
    let summary: Summary = serde_json::from_str(&fs::read_to_string(&paths.json).unwrap()).unwrap();
    assert_eq!(summary.final_mean, 150.0);
    assert_eq!(summary.finals, vec![100.0, 200.0]);
    assert_eq!(summary.label, "dlpp/geometric/20");
    assert_eq!(summary.config.horizon, 50);
}

#[test]
fn csv_rows_match_subsample_count() {
    let tmp = tempfile::tempdir().unwrap();
    for len in [1, 50, 1000, 4321] {
        let r = result(len);
        let paths = export_run(&r, tmp.path()).unwrap();
        let text = fs::read_to_string(&paths.csv).unwrap();
        let expected = r.aggregate.subsample(MAX_CURVE_POINTS).len();
        assert_eq!(text.lines().count(), expected + 1);
        assert!(expected <= MAX_CURVE_POINTS);
        let points = read_csv(&paths.csv).unwrap();
        assert_eq!(points.first().unwrap().round, 1);
        assert_eq!(points.last().unwrap().round, len as u64);
        assert!(points.iter().all(|p| p.mean == 150.0));
    }
}

#[test]
fn unwritable_directory_reports_path() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = export_run(&result(10), &blocker.join("sub")).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}
