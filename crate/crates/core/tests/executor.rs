mod common;

use std::fs;
use std::time::Duration;

use common::fixture;
use mapbench_core::config::ParamValue;
use mapbench_core::executor::{
    read_profile, ExecError, FailureReason, ProfileSummary, RunState, RunStatus, RunTask,
};
use mapbench_core::layout::{PROFILING_FILE, SENTINEL_FILE, TRAJECTORY_FILE};
use mapbench_core::{ConfigId, RunId};

#[test]
fn finished_run_has_results() {
    let fx = fixture(1, 2.0);
    let ex = fx.executor(10.0);
    let ws = ex.prepare_workspace(RunId(1), &fx.config(1, 1), &fx.catalog).unwrap();
    let handle = ex.launch(ws, None).unwrap();
    assert_eq!(handle.state(), RunState::Running);
    let result = handle.await_finished(Duration::from_millis(10));
    assert_eq!(result.status, RunStatus::Finished, "{:?}", result.reason);
    let results = fx.layout.run_dir(RunId(1)).join("results");
    assert!(results.join(TRAJECTORY_FILE).is_file());
    assert!(results.join(SENTINEL_FILE).is_file());
    assert_eq!(fs::read(results.join(SENTINEL_FILE)).unwrap().len(), 0);
    assert!(result.map.is_none());
}

#[test]
fn prepared_dataset_is_mounted() {
    let fx = fixture(1, 2.0);
    let ex = fx.executor(10.0);
    let config = fx
        .config(1, 1)
        .with_dataset_param("frame_rate", 5.0)
        .with_dataset_param("resolution_factor", 0.5);
    let ws = ex.prepare_workspace(RunId(1), &config, &fx.catalog).unwrap();
    assert!(ws.prep_key.is_some());
    assert!(ws.dataset_mount.starts_with(fx.layout.prepared_root()));
    assert_ne!(ws.dataset_mount, fx.layout.sequence_dir(config.dataset_id, "seq0"));
    let result = ex.launch(ws, None).unwrap().await_finished(Duration::from_millis(10));
    assert_eq!(result.status, RunStatus::Finished, "{:?}", result.reason);
    let traj = fs::read_to_string(result.trajectory.unwrap()).unwrap();
    let poses = mapbench_core::trajeval::parse_trajectory(&traj).unwrap();
    assert_eq!(poses.len(), 11);
}

#[test]
fn workspace_errors() {
    let fx = fixture(1, 1.0);
    let ex = fx.executor(10.0);
    assert!(matches!(
        ex.prepare_workspace(RunId(1), &fx.config(1, 9), &fx.catalog),
        Err(ExecError::MissingDataset(_))
    ));
    let results = fx.layout.run_dir(RunId(2)).join("results");
    fs::create_dir_all(&results).unwrap();
    fs::write(results.join("stale"), b"x").unwrap();
    assert!(matches!(
        ex.prepare_workspace(RunId(2), &fx.config(1, 1), &fx.catalog),
        Err(ExecError::ResultsDirNotEmpty(_))
    ));
}

#[test]
fn unregistered_adapter() {
    let mut fx = fixture(1, 1.0);
    fx.adapters = mapbench_core::executor::AdapterRegistry::new();
    let ex = fx.executor(10.0);
    let ws = ex.prepare_workspace(RunId(1), &fx.config(1, 1), &fx.catalog).unwrap();
    assert!(matches!(ex.launch(ws, None), Err(ExecError::AdapterMissing(_))));
}

#[test]
fn failing_and_hanging_adapters() {
    let fx = fixture(1, 1.0);
    let ex = fx.executor(10.0);
    let failing = fx.config(1, 1).with_algorithm_param("exit_code", 1i64);
    let ws = ex.prepare_workspace(RunId(1), &failing, &fx.catalog).unwrap();
    let r = ex.launch(ws, None).unwrap().await_finished(Duration::from_millis(10));
    assert_eq!(r.status, RunStatus::Failed);
    assert_eq!(r.reason, Some(FailureReason::ExitCode(1)));

    let hanging = fx.config(1, 1).with_algorithm_param("hang", true);
    let ws = ex.prepare_workspace(RunId(2), &hanging, &fx.catalog).unwrap();
    let handle = ex.launch(ws, Some(Duration::from_secs(2))).unwrap();
    let r = handle.await_finished(Duration::from_millis(10));
    assert_eq!(r.status, RunStatus::TimedOut);
    assert!(r.finished_at - r.started_at >= 1.9);
}

#[test]
fn missing_trajectory_demotes_to_failed() {
    let fx = fixture(1, 1.0);
    let ex = fx.executor(10.0);
    let config = fx.config(1, 1).with_algorithm_param("coverage", 0.0);
    let ws = ex.prepare_workspace(RunId(1), &config, &fx.catalog).unwrap();
    let r = ex.launch(ws, None).unwrap().await_finished(Duration::from_millis(10));
    assert_eq!(r.status, RunStatus::Failed);
    assert_eq!(r.reason, Some(FailureReason::MissingTrajectory));
}

#[test]
fn dataset_writes_are_detected() {
    let fx = fixture(1, 1.0);
    let ex = fx.executor(10.0);
    let config = fx.config(1, 1).with_algorithm_param("tamper", true);
    let ws = ex.prepare_workspace(RunId(1), &config, &fx.catalog).unwrap();
    let r = ex.launch(ws, None).unwrap().await_finished(Duration::from_millis(10));
    assert_eq!(r.status, RunStatus::Failed);
    assert_eq!(r.reason, Some(FailureReason::DatasetModified));
}

#[test]
fn profile_matches_summary_and_sandbox_gone_after_finish() {
    let fx = fixture(1, 2.0);
    let ex = fx.executor(2.0);
    let config = fx.config(1, 1).with_algorithm_param("busy_threads", 2i64);
    let ws = ex.prepare_workspace(RunId(1), &config, &fx.catalog).unwrap();
    let mut handle = ex.launch(ws, None).unwrap();
    std::thread::sleep(Duration::from_millis(300));
    handle.sample_resources().unwrap();
    let r = handle.await_finished(Duration::from_millis(10));
    assert_eq!(r.status, RunStatus::Finished, "{:?}", r.reason);
    let series = read_profile(&r.profiling.clone().unwrap()).unwrap();
    assert!(series.len() >= 3);
    assert!(series.windows(2).all(|w| w[0].t <= w[1].t));
    assert!(series.iter().all(|s| s.cpu >= 0.0 && s.ram >= 0.0));
    let again = ProfileSummary::from_samples(&series);
    assert!((again.cpu_mean - r.cpu_mean).abs() < 1e-9);
    assert!((again.cpu_max - r.cpu_max).abs() < 1e-9);
    assert!(r.cpu_mean <= r.cpu_max);
    assert!(r.run_dir.join("results").join(PROFILING_FILE).is_file());
}

#[test]
fn sample_after_finish_is_sandbox_gone() {
    let fx = fixture(1, 0.5);
    let ex = fx.executor(10.0);
    let ws = ex.prepare_workspace(RunId(1), &fx.config(1, 1), &fx.catalog).unwrap();
    let mut handle = ex.launch(ws, None).unwrap();
    let deadline = std::time::Instant::now() + Duration::from_secs(10);
    loop {
        match handle.sample_resources() {
            Err(ExecError::SandboxGone) => break,
            _ if std::time::Instant::now() > deadline => panic!("sandbox never went away"),
            _ => std::thread::sleep(Duration::from_millis(20)),
        }
    }
}

fn group_alive(pgid: i32) -> usize {
    mapbench_core::executor::group_usage(pgid).processes
}

#[test]
fn run_queue_ordering_and_parallelism() {
    let fx = fixture(1, 1.0);
    let ex = fx.executor(4.0);
    let tasks: Vec<RunTask> = (1..=4)
        .map(|i| RunTask {
            run_id: RunId(i),
            config: {
                let mut c = fx.config(1, 1).with_algorithm_param("noise", ParamValue::Real(0.01 * i as f64));
                c.id = ConfigId(i);
                c
            },
        })
        .collect();
    let seq = ex.run_queue(&fx.catalog, &tasks[..3], 1).unwrap();
    assert_eq!(seq.iter().map(|r| r.run_id.0).collect::<Vec<_>>(), vec![1, 2, 3]);
    for w in seq.windows(2) {
        assert!(w[0].finished_at <= w[1].started_at, "overlap in sequential queue");
    }

    let tasks: Vec<RunTask> = (5..=8)
        .map(|i| RunTask {
            run_id: RunId(i),
            config: fx.config(1, 1),
        })
        .collect();
    let par = ex.run_queue(&fx.catalog, &tasks, 2).unwrap();
    assert_eq!(par.iter().map(|r| r.run_id.0).collect::<Vec<_>>(), vec![5, 6, 7, 8]);
    let mut events: Vec<(f64, i32)> = par
        .iter()
        .flat_map(|r| [(r.started_at, 1), (r.finished_at, -1)])
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut live = 0;
    let mut peak = 0;
    for (_, d) in events {
        live += d;
        peak = peak.max(live);
    }
    assert!(peak <= 2, "peak concurrency {peak}");
    assert!(par.iter().all(|r| r.status == RunStatus::Finished));

    for r in seq.iter().chain(&par) {
        let pgid: i32 = r.sandbox.rsplit('-').next().unwrap().parse().unwrap();
        assert_eq!(group_alive(pgid), 0, "orphans left for {}", r.sandbox);
    }
}
