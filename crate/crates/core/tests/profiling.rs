//! CPU measurement lives in its own test binary so that other tests do not
//! compete for cores while it samples.

mod common;

use std::time::Duration;

use common::fixture;
use mapbench_core::executor::read_profile;
use mapbench_core::RunId;

fn cores_expected(threads: f64) -> f64 {
    threads.min(mapbench_core::executor::core_count() as f64)
}

#[test]
fn cpu_load_oracle() {
    let fx = fixture(1, 4.0);
    let ex = fx.executor(1.0);
    for (run, threads) in [(1u64, 0i64), (2, 2)] {
        let config = fx.config(1, 1).with_algorithm_param("busy_threads", threads);
        let ws = ex.prepare_workspace(RunId(run), &config, &fx.catalog).unwrap();
        let r = ex.launch(ws, None).unwrap().await_finished(Duration::from_millis(10));
        let series = read_profile(&r.profiling.unwrap()).unwrap();
        // the middle of the run, away from start-up and shutdown
        let mid: Vec<f64> = series.iter().filter(|s| s.t > 1.0 && s.t < 3.5).map(|s| s.cpu).collect();
        assert!(!mid.is_empty());
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        if threads == 0 {
            assert!(mean < 0.1, "idle mean {mean}");
        } else {
            let want = cores_expected(threads as f64);
            assert!((mean - want).abs() < 0.3, "busy mean {mean}, want {want}");
        }
    }
}

