#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use mapbench_core::config::{AlgorithmSpec, Catalog, MappingConfiguration, ParamSpec, SensorMode, ValueKind};
use mapbench_core::executor::{AdapterRegistry, Executor, ExecutorOptions};
use mapbench_core::synthetic::{self, SyntheticSpec};
use mapbench_core::{AlgorithmId, DatasetId, Layout};

pub const MOCK_IMAGE_A: &str = "mock/a:1";
pub const MOCK_IMAGE_B: &str = "mock/b:1";

pub fn mock_adapter() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_mock-adapter"))
}

pub fn mock_algorithm(id: u64, name: &str, image: &str) -> AlgorithmSpec {
    AlgorithmSpec {
        id: AlgorithmId(id),
        name: name.into(),
        sensor_modes: BTreeSet::from([SensorMode::Mono]),
        image_ref: image.into(),
        parameter_template: vec![
            ParamSpec::new("noise", 0.01, ValueKind::Real),
            ParamSpec::new("offset", 0.0, ValueKind::Real),
            ParamSpec::new("drift", 0.0, ValueKind::Real),
            ParamSpec::new("coverage", 1.0, ValueKind::Real),
            ParamSpec::new("busy_threads", 0i64, ValueKind::Integer),
            ParamSpec::new("exit_code", 0i64, ValueKind::Integer),
            ParamSpec::new("hang", false, ValueKind::Flag),
            ParamSpec::new("tamper", false, ValueKind::Flag),
            ParamSpec::new("nFeatures", 1000i64, ValueKind::Integer),
        ],
    }
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub layout: Layout,
    pub catalog: Catalog,
    pub adapters: AdapterRegistry,
}

/// Two mock algorithms and `datasets` synthetic datasets of one sequence
/// (`seq0`) each, `duration` seconds long.
pub fn fixture(datasets: u64, duration: f64) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let layout = Layout::new(dir.path());
    let mut catalog = Catalog::default();
    catalog.add_algorithm(mock_algorithm(1, "mock-a", MOCK_IMAGE_A)).unwrap();
    catalog.add_algorithm(mock_algorithm(2, "mock-b", MOCK_IMAGE_B)).unwrap();
    for d in 1..=datasets {
        let spec = SyntheticSpec {
            duration,
            seed: d * 100,
            ..Default::default()
        };
        let ds = synthetic::install_dataset(&layout, DatasetId(d), &format!("synth-{d}"), &["seq0"], &spec).unwrap();
        catalog.add_dataset(ds).unwrap();
    }
    let adapters = AdapterRegistry::new()
        .with(MOCK_IMAGE_A, mock_adapter())
        .with(MOCK_IMAGE_B, mock_adapter());
    Fixture {
        dir,
        layout,
        catalog,
        adapters,
    }
}

impl Fixture {
    pub fn executor(&self, time_scale: f64) -> Executor {
        Executor::new(
            self.layout.clone(),
            self.adapters.clone(),
            ExecutorOptions {
                time_scale,
                profile_period: Duration::from_millis(100),
                poll_period: Duration::from_millis(10),
                ..Default::default()
            },
        )
    }

    pub fn config(&self, alg: u64, ds: u64) -> MappingConfiguration {
        MappingConfiguration::new(AlgorithmId(alg), DatasetId(ds), "seq0")
    }
}

use mapbench_core::executor::{RunStatus, RunTask};
use mapbench_core::store::{RunRecord, Store};
use mapbench_core::ConfigId;

impl Fixture {
    /// A store holding this fixture's catalog.
    pub fn store(&self) -> Store {
        let store = Store::open(self.layout.store_path()).unwrap();
        for a in self.catalog.algorithms.values() {
            store.add_algorithm(a.clone()).unwrap();
        }
        for d in self.catalog.datasets.values() {
            store.add_dataset(d.clone()).unwrap();
        }
        store
    }

    /// Queues, executes and ingests one run per configuration id.
    pub fn run_configs(&self, store: &Store, ids: &[ConfigId], max_parallel: usize, time_scale: f64) -> Vec<RunRecord> {
        let tasks = store.create_tasks(ids).unwrap();
        let started = store.start_tasks(&tasks).unwrap();
        let run_tasks: Vec<RunTask> = started.iter().map(|(_, t)| t.clone()).collect();
        let results = self
            .executor(time_scale)
            .run_queue(&store.snapshot().catalog, &run_tasks, max_parallel)
            .unwrap();
        let mut records = Vec::new();
        for ((task, rt), res) in started.iter().zip(&results) {
            let (rec, fresh) = store.ingest(&res.run_dir, rt.config.id, &self.layout).unwrap();
            assert!(fresh);
            store.complete_task(*task).unwrap();
            records.push(rec);
        }
        records
    }
}

pub fn all_finished(records: &[RunRecord]) -> bool {
    records.iter().all(|r| r.status == RunStatus::Finished)
}
