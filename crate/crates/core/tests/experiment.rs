use std::fs;
use std::path::Path;

use son_core::config::{load_config, AgentKind, ExperimentConfig};
use son_core::experiment::run_experiment;
use son_core::nn::QNetwork;
use son_core::Error;

fn small(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.cluster.num_sites = 3;
    c.episode.zeta = 4;
    c.seeds = vec![1, 2];
    c.ues_per_cell = vec![3];
    c.output_dir = out.to_path_buf();
    c
}

fn read(p: &Path) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn writes_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let report = run_experiment(&small(&out)).unwrap();
    assert_eq!(report.runs.len(), 6);
    for agent in AgentKind::ALL {
        assert!(out.join(format!("cdf_{agent}.csv")).is_file());
        let episodes = read(&out.join(format!("episodes_{agent}.csv")));
        let mut lines = episodes.lines();
        assert_eq!(lines.next(), Some("seed,episode,total_reward,ttis,cleared"));
        assert_eq!(lines.count(), 8);
    }
    let summary = read(&out.join("summary.csv"));
    let mut lines = summary.lines();
    assert_eq!(
        lines.next(),
        Some("agent,q,peak,average,edge,cell_average,mean_clearance_ttis")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("random,3,"));
    for seed in [1, 2] {
        let w = read(&out.join(format!("weights/dqn_q3_seed{seed}.txt")));
        let net = QNetwork::from_snapshot(&w).unwrap();
        assert_eq!(net.sizes(), vec![3, 24, 24, 5]);
    }
    let cdf = read(&out.join("cdf_dqn.csv"));
    let last = cdf.lines().last().unwrap();
    assert!(last.ends_with(",1.000000000"), "{last}");
}

#[test]
fn multi_load_grid_uses_subdirectories_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small(dir.path());
    c.agents = vec![AgentKind::Fifo];
    c.ues_per_cell = vec![2, 4];
    c.write_traces = true;
    run_experiment(&c).unwrap();
    for q in [2, 4] {
        assert!(dir.path().join(format!("q{q}/episodes_fifo.csv")).is_file());
        let trace = read(&dir.path().join(format!("traces/fifo_q{q}_seed1.csv")));
        assert!(trace.starts_with("episode,tti,state,action,reward,alarm_count"));
    }
    assert_eq!(read(&dir.path().join("summary.csv")).lines().count(), 3);
}

#[test]
fn manifest_round_trips_as_config() {
    let dir = tempfile::tempdir().unwrap();
    let c = small(dir.path());
    run_experiment(&c).unwrap();
    let manifest = dir.path().join("manifest.txt");
    let text = read(&manifest);
    assert!(text.contains("# run dqn 3 2 4 "));
    assert_eq!(load_config(&manifest).unwrap(), c);
}

#[test]
fn failure_removes_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    // A directory where summary.csv should go makes the last CSV write fail
    // after the per-agent files are already on disk.
    fs::create_dir_all(out.join("summary.csv")).unwrap();
    let err = run_experiment(&small(&out)).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
    let left: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(left, vec!["summary.csv".to_string()]);
}

#[test]
fn unwritable_output_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let err = run_experiment(&small(&blocker.join("sub"))).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err}");
}
