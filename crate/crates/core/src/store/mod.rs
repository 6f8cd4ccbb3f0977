//! Persistence of the catalog, configurations, runs, evaluations and
//! analysis reports, plus ingest, evaluation and search.
//!
//! The store keeps one immutable snapshot ([`StoreData`]) behind an `Arc`.
//! Readers clone the `Arc` and never block writers; writers are serialized,
//! work on a copy, persist it atomically (write to a temporary file, then
//! rename) and publish it. A failed write leaves both the published
//! snapshot and the file untouched.

mod evaluate;
mod export;
mod ingest;
mod query;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::config::{
    expand_combinations, AlgorithmSpec, Catalog, CombinationSpec, ConfigError, DatasetSpec,
    ExpandOptions, MappingConfiguration,
};
use crate::dataprep::PrepKey;
use crate::executor::{RunStatus, RunTask};
use crate::ids::{AlgorithmId, CombId, ConfigId, DatasetId, NodeId, RunId, TaskId};
use crate::trajeval::MetricStats;

pub use evaluate::{evaluate_pair, BatchEvaluation, EvalOptions, EvaluationOutput, BUNDLE_FILES, EVALUATOR_VERSION};
pub use export::{
    catalog_dump, export_configurations_csv, export_runs_csv, CONFIGURATION_COLUMNS, RUN_COLUMNS,
};
pub use ingest::frame_reference;
pub use query::{
    config_value, key_kind, parse_predicate, run_matches, run_value, search, CmpOp, MetricBound,
    Predicate, SearchQuery, SearchTarget, METRIC_KEYS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("corrupt results: {0}")]
    CorruptResults(String),
    #[error("run {0} is not finished")]
    RunNotFinished(RunId),
    #[error("run {0} is already evaluated")]
    AlreadyEvaluated(RunId),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("malformed predicate {0:?}")]
    MalformedPredicate(String),
    #[error("query has no clauses")]
    EmptyQuery,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o error: {0}")]
    Io(String),
}

pub(crate) fn io_err(e: impl std::fmt::Display) -> StoreError {
    StoreError::Io(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Queued,
    Running,
    Done,
}

/// A request to execute one configuration once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: TaskId,
    pub config_id: ConfigId,
    pub state: TaskState,
    pub run_id: Option<RunId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: RunId,
    pub config_id: ConfigId,
    pub node_id: NodeId,
    pub cpu_type: String,
    pub core_count: usize,
    pub status: RunStatus,
    pub reason: Option<String>,
    /// Cores.
    pub cpu_mean: f64,
    pub cpu_max: f64,
    /// MB.
    pub ram_max: f64,
    /// Matched estimated frames over reference frames, in [0, 1].
    pub traj_length: Option<f64>,
    /// Unix seconds.
    pub started_at: f64,
    pub finished_at: f64,
    /// Playback acceleration used for the run (1.0 = real time).
    pub time_scale: f64,
    pub run_dir: PathBuf,
    pub prep_key: Option<PrepKey>,
    pub map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub run_id: RunId,
    pub ate: MetricStats,
    /// `None` when the trajectory is shorter than one RPE window.
    pub rpe: Option<MetricStats>,
    pub aligned: bool,
    pub with_scale: bool,
    pub max_time_diff: f64,
    /// Meters.
    pub rpe_delta: f64,
    pub pairs: usize,
    pub evaluator_version: String,
    pub bundle_dir: PathBuf,
}

impl EvaluationRecord {
    /// Value of `ate_<stat>` / `rpe_<stat>` names.
    pub fn metric(&self, name: &str) -> Option<f64> {
        let (family, stat) = name.split_once('_')?;
        let stats = match family {
            "ate" => &self.ate,
            "rpe" => self.rpe.as_ref()?,
            _ => return None,
        };
        stats.get(stat)
    }
}

/// Listing entry of an analysis report; the report body lives on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub id: u64,
    pub token: String,
    pub group_name: String,
    pub created_at: f64,
    /// Reports created in view-only mode are reachable by token only.
    pub listed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub config: u64,
    pub comb: u64,
    pub task: u64,
    pub run: u64,
    pub report: u64,
}

impl Default for Counters {
    fn default() -> Self {
        Self {
            config: 1,
            comb: 1,
            task: 1,
            run: 1,
            report: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreData {
    pub catalog: Catalog,
    pub configurations: BTreeMap<ConfigId, MappingConfiguration>,
    pub combinations: BTreeMap<CombId, CombinationSpec>,
    pub tasks: BTreeMap<TaskId, TaskRecord>,
    pub runs: BTreeMap<RunId, RunRecord>,
    pub evaluations: BTreeMap<RunId, EvaluationRecord>,
    pub reports: BTreeMap<u64, ReportMeta>,
    pub counters: Counters,
}

impl StoreData {
    pub fn config(&self, id: ConfigId) -> Result<&MappingConfiguration, StoreError> {
        self.configurations
            .get(&id)
            .ok_or_else(|| StoreError::NotFound(format!("configuration {id}")))
    }

    pub fn run(&self, id: RunId) -> Result<&RunRecord, StoreError> {
        self.runs.get(&id).ok_or_else(|| StoreError::NotFound(format!("run {id}")))
    }

    pub fn runs_of_config(&self, id: ConfigId) -> impl Iterator<Item = &RunRecord> + '_ {
        self.runs.values().filter(move |r| r.config_id == id)
    }

    pub fn configs_of_comb(&self, id: CombId) -> impl Iterator<Item = &MappingConfiguration> + '_ {
        self.configurations.values().filter(move |c| c.comb_parent == Some(id))
    }

    pub fn algorithm_of(&self, run: &RunRecord) -> Option<AlgorithmId> {
        self.configurations.get(&run.config_id).map(|c| c.algorithm_id)
    }

    pub fn dataset_of(&self, run: &RunRecord) -> Option<DatasetId> {
        self.configurations.get(&run.config_id).map(|c| c.dataset_id)
    }

    /// Finished runs without an evaluation record, id-ascending.
    pub fn unevaluated(&self) -> Vec<RunId> {
        self.runs
            .values()
            .filter(|r| r.status == RunStatus::Finished && !self.evaluations.contains_key(&r.run_id))
            .map(|r| r.run_id)
            .collect()
    }
}

#[derive(Debug)]
pub struct Store {
    path: Option<PathBuf>,
    current: RwLock<Arc<StoreData>>,
    writer: Mutex<()>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self::from_data(None, StoreData::default())
    }

    fn from_data(path: Option<PathBuf>, data: StoreData) -> Self {
        Self {
            path,
            current: RwLock::new(Arc::new(data)),
            writer: Mutex::new(()),
        }
    }

    /// Opens (or creates on first write) a store file.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let data = if path.exists() {
            let text = fs::read_to_string(&path).map_err(io_err)?;
            serde_json::from_str(&text).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?
        } else {
            StoreData::default()
        };
        Ok(Self::from_data(Some(path), data))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Consistent read view.
    pub fn snapshot(&self) -> Arc<StoreData> {
        self.current.read().expect("store lock poisoned").clone()
    }

    /// Applies `f` atomically: either the whole mutation is published and
    /// persisted, or nothing changes.
    pub fn transact<R>(
        &self,
        f: impl FnOnce(&mut StoreData) -> Result<R, StoreError>,
    ) -> Result<R, StoreError> {
        let _guard = self.writer.lock().expect("store writer poisoned");
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        if let Some(path) = &self.path {
            persist(path, &next)?;
        }
        *self.current.write().expect("store lock poisoned") = Arc::new(next);
        Ok(out)
    }

    pub fn add_algorithm(&self, spec: AlgorithmSpec) -> Result<AlgorithmId, StoreError> {
        self.transact(|d| {
            let id = spec.id;
            d.catalog.add_algorithm(spec)?;
            Ok(id)
        })
    }

    pub fn add_dataset(&self, spec: DatasetSpec) -> Result<DatasetId, StoreError> {
        self.transact(|d| {
            let id = spec.id;
            d.catalog.add_dataset(spec)?;
            Ok(id)
        })
    }

    pub fn add_configuration(&self, mut config: MappingConfiguration) -> Result<ConfigId, StoreError> {
        self.transact(|d| {
            config.validate(&d.catalog)?;
            config.id = ConfigId(d.counters.config);
            config.comb_parent = None;
            d.counters.config += 1;
            let id = config.id;
            d.configurations.insert(id, config);
            Ok(id)
        })
    }

    /// Stores the combination and every configuration it expands to.
    pub fn add_combination(&self, mut spec: CombinationSpec) -> Result<(CombId, Vec<ConfigId>), StoreError> {
        self.transact(|d| {
            spec.id = CombId(d.counters.comb);
            let configs = expand_combinations(
                &spec,
                &ExpandOptions {
                    first_id: ConfigId(d.counters.config),
                    ..Default::default()
                },
            )?;
            for c in &configs {
                c.validate(&d.catalog)?;
            }
            d.counters.comb += 1;
            d.counters.config += configs.len() as u64;
            let ids: Vec<ConfigId> = configs.iter().map(|c| c.id).collect();
            d.configurations.extend(configs.into_iter().map(|c| (c.id, c)));
            let id = spec.id;
            d.combinations.insert(id, spec);
            Ok((id, ids))
        })
    }

    /// Queues one task per configuration id.
    pub fn create_tasks(&self, config_ids: &[ConfigId]) -> Result<Vec<TaskId>, StoreError> {
        self.transact(|d| {
            let mut ids = Vec::with_capacity(config_ids.len());
            for &config_id in config_ids {
                d.config(config_id)?;
                let id = TaskId(d.counters.task);
                d.counters.task += 1;
                d.tasks.insert(
                    id,
                    TaskRecord {
                        id,
                        config_id,
                        state: TaskState::Queued,
                        run_id: None,
                    },
                );
                ids.push(id);
            }
            Ok(ids)
        })
    }

    /// Marks queued tasks as running and allocates one run id each.
    pub fn start_tasks(&self, task_ids: &[TaskId]) -> Result<Vec<(TaskId, RunTask)>, StoreError> {
        self.transact(|d| {
            let mut out = Vec::with_capacity(task_ids.len());
            for &tid in task_ids {
                let task = d
                    .tasks
                    .get(&tid)
                    .ok_or_else(|| StoreError::NotFound(format!("task {tid}")))?
                    .clone();
                if task.state != TaskState::Queued {
                    return Err(StoreError::Config(ConfigError::Invalid(format!("task {tid} is not queued"))));
                }
                let config = d.config(task.config_id)?.clone();
                let run_id = RunId(d.counters.run);
                d.counters.run += 1;
                let entry = d.tasks.get_mut(&tid).expect("checked above");
                entry.state = TaskState::Running;
                entry.run_id = Some(run_id);
                out.push((tid, RunTask { run_id, config }));
            }
            Ok(out)
        })
    }

    pub fn queued_tasks(&self) -> Vec<TaskId> {
        self.snapshot()
            .tasks
            .values()
            .filter(|t| t.state == TaskState::Queued)
            .map(|t| t.id)
            .collect()
    }

    pub fn complete_task(&self, task: TaskId) -> Result<(), StoreError> {
        self.transact(|d| {
            let t = d
                .tasks
                .get_mut(&task)
                .ok_or_else(|| StoreError::NotFound(format!("task {task}")))?;
            t.state = TaskState::Done;
            Ok(())
        })
    }

    /// Registers an analysis report and returns its id.
    pub fn add_report(&self, mut meta: ReportMeta) -> Result<ReportMeta, StoreError> {
        self.transact(|d| {
            meta.id = d.counters.report;
            d.counters.report += 1;
            d.reports.insert(meta.id, meta.clone());
            Ok(meta)
        })
    }

    pub fn next_report_id(&self) -> u64 {
        self.snapshot().counters.report
    }
}

fn persist(path: &Path, data: &StoreData) -> Result<(), StoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(data).map_err(io_err)?).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{ParamSpec, SensorMode, ValueKind};
    use std::collections::BTreeSet;

    fn alg() -> AlgorithmSpec {
        AlgorithmSpec {
            id: AlgorithmId(1),
            name: "a".into(),
            sensor_modes: BTreeSet::from([SensorMode::Mono]),
            image_ref: "img".into(),
            parameter_template: vec![ParamSpec::new("nFeatures", 1000i64, ValueKind::Integer)],
        }
    }

    fn ds() -> DatasetSpec {
        DatasetSpec {
            id: DatasetId(1),
            name: "d".into(),
            sequences: vec!["s".into()],
            topics: BTreeMap::from([("cam0".into(), "/cam0".into())]),
            ground_truth_ref: "groundtruth.txt".into(),
            native_rate: 20.0,
            native_resolution: (752, 480),
        }
    }

    #[test]
    fn persisted_store_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let store = Store::open(&path).unwrap();
        store.add_algorithm(alg()).unwrap();
        store.add_dataset(ds()).unwrap();
        let id = store
            .add_configuration(MappingConfiguration::new(AlgorithmId(1), DatasetId(1), "s"))
            .unwrap();
        assert_eq!(id, ConfigId(1));
        let reopened = Store::open(&path).unwrap();
        assert_eq!(*reopened.snapshot(), *store.snapshot());
    }

    #[test]
    fn failed_transaction_changes_nothing() {
        let store = Store::in_memory();
        let before = store.snapshot();
        let err = store.add_configuration(MappingConfiguration::new(AlgorithmId(9), DatasetId(1), "s"));
        assert!(err.is_err());
        assert_eq!(*store.snapshot(), *before);
    }

    #[test]
    fn tasks_allocate_runs() {
        let store = Store::in_memory();
        store.add_algorithm(alg()).unwrap();
        store.add_dataset(ds()).unwrap();
        let c = store
            .add_configuration(MappingConfiguration::new(AlgorithmId(1), DatasetId(1), "s"))
            .unwrap();
        let tasks = store.create_tasks(&[c, c]).unwrap();
        let started = store.start_tasks(&tasks).unwrap();
        assert_eq!(started[0].1.run_id, RunId(1));
        assert_eq!(started[1].1.run_id, RunId(2));
        assert!(store.start_tasks(&tasks[..1]).is_err());
        assert!(store.queued_tasks().is_empty());
    }
}
