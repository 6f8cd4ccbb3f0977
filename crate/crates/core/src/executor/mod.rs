//! Sandboxed execution of mapping runs with CPU/RAM profiling.
//!
//! A run goes through [`Executor::prepare_workspace`] (dataset variant,
//! results directory, rendered configuration), [`Executor::launch`] and
//! [`RunHandle::await_finished`]. [`Executor::run_queue`] drives many runs
//! with bounded parallelism.

mod profile;
mod sandbox;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{render_unified_config, Catalog, MappingConfiguration};
use crate::dataprep::{self, PrepCache, PrepKey, PrepParams};
use crate::ids::{ConfigId, NodeId, RunId};
use crate::layout::{
    Layout, ADAPTER_LOG_FILE, CONFIG_FILE, CPU_PLOT_FILE, GROUND_TRUTH_FILE, LOG_DIR, MEM_PLOT_FILE,
    PROFILING_FILE, RESULTS_DIR, RUN_META_FILE, SENTINEL_FILE, TRAJECTORY_FILE,
};
use crate::trajeval;

pub use profile::{read_profile, ProfileSummary, ResourceSample, PROFILE_HEADER};
pub use sandbox::{group_usage, ContainerSandbox, LocalSandbox, Sandbox, SandboxProcess, SpawnSpec, Usage};

pub const ENV_DATASET_DIR: &str = "MAPBENCH_DATASET_DIR";
pub const ENV_RESULTS_DIR: &str = "MAPBENCH_RESULTS_DIR";
pub const ENV_CONFIG: &str = "MAPBENCH_CONFIG";
pub const ENV_PLAYBACK_SPEED: &str = "MAPBENCH_PLAYBACK_SPEED";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("dataset {0} is not available")]
    MissingDataset(String),
    #[error("results directory {0} is not empty")]
    ResultsDirNotEmpty(PathBuf),
    #[error("no adapter registered for image {0:?}")]
    AdapterMissing(String),
    #[error("sandbox spawn failed: {0}")]
    SandboxSpawnFailure(String),
    #[error("sandbox has no running processes")]
    SandboxGone,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn io_err(e: impl std::fmt::Display) -> ExecError {
    ExecError::Io(e.to_string())
}

/// How to start the adapter for one sandbox image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterCommand {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
}

/// Image reference → adapter command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdapterRegistry {
    adapters: BTreeMap<String, AdapterCommand>,
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, image_ref: &str, command: AdapterCommand) {
        self.adapters.insert(image_ref.to_string(), command);
    }

    pub fn with(mut self, image_ref: &str, program: impl Into<PathBuf>) -> Self {
        self.register(
            image_ref,
            AdapterCommand {
                program: program.into(),
                args: Vec::new(),
            },
        );
        self
    }

    pub fn get(&self, image_ref: &str) -> Option<&AdapterCommand> {
        self.adapters.get(image_ref)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutorOptions {
    /// Playback acceleration; 1.0 is real time.
    pub time_scale: f64,
    pub profile_period: Duration,
    pub poll_period: Duration,
    /// Overrides the duration-based timeout.
    pub timeout: Option<Duration>,
    /// Lower bound of the duration-based timeout.
    pub timeout_floor: Duration,
    pub node: NodeId,
}

impl Default for ExecutorOptions {
    fn default() -> Self {
        Self {
            time_scale: 1.0,
            profile_period: Duration::from_millis(500),
            poll_period: Duration::from_millis(20),
            timeout: None,
            timeout_floor: Duration::from_secs(10),
            node: NodeId(1),
        }
    }
}

/// Laid-out run directory ready for launch.
#[derive(Debug, Clone, PartialEq)]
pub struct Workspace {
    pub run_id: RunId,
    pub config_id: ConfigId,
    pub image_ref: String,
    pub run_dir: PathBuf,
    /// Read-only input: the original sequence or its prepared variant.
    pub dataset_mount: PathBuf,
    /// Read-write output.
    pub results_mount: PathBuf,
    pub config_path: PathBuf,
    pub prep_key: Option<PrepKey>,
    /// Recording length in seconds.
    pub duration: f64,
    pub dataset_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Preparing,
    Running,
    Finished,
    Failed,
    TimedOut,
}

impl RunState {
    pub fn is_terminal(self) -> bool {
        matches!(self, RunState::Finished | RunState::Failed | RunState::TimedOut)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Finished,
    Failed,
    TimedOut,
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunStatus::Finished => "finished",
            RunStatus::Failed => "failed",
            RunStatus::TimedOut => "timed_out",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum FailureReason {
    ExitCode(i32),
    ExitedWithoutSentinel,
    MissingTrajectory,
    DatasetModified,
    Timeout,
    Setup(String),
}

impl std::fmt::Display for FailureReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FailureReason::ExitCode(c) => write!(f, "adapter exited with code {c}"),
            FailureReason::ExitedWithoutSentinel => f.write_str("adapter exited without writing the sentinel"),
            FailureReason::MissingTrajectory => f.write_str("missing or unparsable trajectory"),
            FailureReason::DatasetModified => f.write_str("dataset mount was modified"),
            FailureReason::Timeout => f.write_str("timeout"),
            FailureReason::Setup(m) => write!(f, "setup failed: {m}"),
        }
    }
}

/// Outcome of one run; also persisted as `run.json` in the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: RunId,
    pub config_id: ConfigId,
    pub node_id: NodeId,
    pub status: RunStatus,
    pub reason: Option<FailureReason>,
    pub sandbox: String,
    pub cpu_type: String,
    pub core_count: usize,
    pub run_dir: PathBuf,
    pub dataset_mount: PathBuf,
    pub prep_key: Option<PrepKey>,
    pub trajectory: Option<PathBuf>,
    pub profiling: Option<PathBuf>,
    pub map: Option<PathBuf>,
    pub cpu_mean: f64,
    pub cpu_max: f64,
    pub ram_max: f64,
    pub samples: usize,
    pub exit_code: Option<i32>,
    /// Unix seconds.
    pub started_at: f64,
    pub finished_at: f64,
    pub time_scale: f64,
}

impl RunResult {
    pub fn load(run_dir: &Path) -> Result<Self, ExecError> {
        let text = fs::read_to_string(run_dir.join(RUN_META_FILE)).map_err(io_err)?;
        serde_json::from_str(&text).map_err(io_err)
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// CPU model name of this host.
pub fn cpu_type() -> String {
    fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|text| {
            text.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string())
}

pub fn core_count() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Content hash of a directory tree (relative paths, sizes and bytes).
pub fn hash_dir(root: &Path) -> Result<String, ExecError> {
    fn walk(dir: &Path, root: &Path, hasher: &mut Sha256) -> std::io::Result<()> {
        let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let path = e.path();
            let rel = path.strip_prefix(root).unwrap_or(&path);
            if e.file_type()?.is_dir() {
                hasher.update(format!("d {}\n", rel.display()).as_bytes());
                walk(&path, root, hasher)?;
            } else {
                let bytes = fs::read(&path)?;
                hasher.update(format!("f {} {}\n", rel.display(), bytes.len()).as_bytes());
                hasher.update(&bytes);
            }
        }
        Ok(())
    }
    let mut hasher = Sha256::new();
    walk(root, root, &mut hasher).map_err(io_err)?;
    Ok(hex::encode(hasher.finalize()))
}

/// One queued run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTask {
    pub run_id: RunId,
    pub config: MappingConfiguration,
}

pub struct Executor {
    layout: Layout,
    adapters: AdapterRegistry,
    sandbox: Arc<dyn Sandbox>,
    prep: Arc<PrepCache>,
    options: ExecutorOptions,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("layout", &self.layout)
            .field("sandbox", &self.sandbox.kind())
            .field("options", &self.options)
            .finish()
    }
}

impl Executor {
    pub fn new(layout: Layout, adapters: AdapterRegistry, options: ExecutorOptions) -> Self {
        let prep = Arc::new(PrepCache::on_disk(layout.prepared_root()));
        Self {
            layout,
            adapters,
            sandbox: Arc::new(LocalSandbox),
            prep,
            options,
        }
    }

    pub fn with_sandbox(mut self, sandbox: Arc<dyn Sandbox>) -> Self {
        self.sandbox = sandbox;
        self
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn options(&self) -> &ExecutorOptions {
        &self.options
    }

    pub fn prep_cache(&self) -> &PrepCache {
        &self.prep
    }

    /// Lays out the run directory and picks the dataset mount.
    pub fn prepare_workspace(
        &self,
        run_id: RunId,
        config: &MappingConfiguration,
        catalog: &Catalog,
    ) -> Result<Workspace, ExecError> {
        let dataset = catalog
            .datasets
            .get(&config.dataset_id)
            .ok_or_else(|| ExecError::MissingDataset(format!("id {}", config.dataset_id)))?;
        let algorithm = catalog.algorithms.get(&config.algorithm_id).ok_or_else(|| {
            ExecError::Config(format!("algorithm {} is not registered", config.algorithm_id))
        })?;
        config.validate(catalog).map_err(|e| ExecError::Config(e.to_string()))?;
        let source_dir = self.layout.sequence_dir(config.dataset_id, &config.sequence);
        let source_log = source_dir.join(LOG_DIR);
        if !source_log.join(dataprep::INDEX_FILE).is_file() {
            return Err(ExecError::MissingDataset(format!(
                "{} sequence {}",
                config.dataset_id, config.sequence
            )));
        }

        let (dataset_mount, prep_key, duration) = match PrepParams::for_config(config, dataset) {
            None => {
                let log = dataprep::read_log(&source_log).map_err(io_err)?;
                (source_dir.clone(), None, log.duration())
            }
            Some(params) => {
                let (key, log) = self
                    .prep
                    .prepare(config.dataset_id, &config.sequence, dataset.native_rate, &params, || {
                        dataprep::read_log(&source_log)
                    })
                    .map_err(|e| ExecError::Config(e.to_string()))?;
                let dir = self
                    .prep
                    .variant_dir(config.dataset_id, &config.sequence, &key)
                    .ok_or_else(|| ExecError::Io("prepared variants need a disk-backed cache".into()))?;
                let gt = dir.join(GROUND_TRUTH_FILE);
                if !gt.exists() {
                    let tmp = dir.join(format!(".{GROUND_TRUTH_FILE}.{run_id}"));
                    fs::copy(source_dir.join(GROUND_TRUTH_FILE), &tmp).map_err(io_err)?;
                    fs::rename(&tmp, &gt).map_err(io_err)?;
                }
                (dir, Some(key), log.duration())
            }
        };

        let run_dir = self.layout.run_dir(run_id);
        let results_mount = run_dir.join(RESULTS_DIR);
        if results_mount.exists() && fs::read_dir(&results_mount).map_err(io_err)?.next().is_some() {
            return Err(ExecError::ResultsDirNotEmpty(results_mount));
        }
        fs::create_dir_all(&results_mount).map_err(io_err)?;
        let unified = render_unified_config(config, catalog).map_err(|e| ExecError::Config(e.to_string()))?;
        let config_path = run_dir.join(CONFIG_FILE);
        fs::write(&config_path, unified.to_yaml()).map_err(io_err)?;
        let dataset_hash = hash_dir(&dataset_mount)?;
        Ok(Workspace {
            run_id,
            config_id: config.id,
            image_ref: algorithm.image_ref.clone(),
            run_dir,
            dataset_mount,
            results_mount,
            config_path,
            prep_key,
            duration,
            dataset_hash,
        })
    }

    /// Default timeout: three times the accelerated playback time, floored.
    pub fn timeout_for(&self, ws: &Workspace) -> Duration {
        self.options.timeout.unwrap_or_else(|| {
            let playback = ws.duration / self.options.time_scale.max(1e-9);
            Duration::from_secs_f64(3.0 * playback).max(self.options.timeout_floor)
        })
    }

    /// Starts the adapter registered for the workspace's image.
    pub fn launch(&self, ws: Workspace, timeout: Option<Duration>) -> Result<RunHandle, ExecError> {
        let adapter = self
            .adapters
            .get(&ws.image_ref)
            .ok_or_else(|| ExecError::AdapterMissing(ws.image_ref.clone()))?;
        let timeout = timeout.unwrap_or_else(|| self.timeout_for(&ws));
        let spec = SpawnSpec {
            program: adapter.program.clone(),
            args: adapter.args.clone(),
            env: vec![
                (ENV_DATASET_DIR.into(), ws.dataset_mount.display().to_string()),
                (ENV_RESULTS_DIR.into(), ws.results_mount.display().to_string()),
                (ENV_CONFIG.into(), ws.config_path.display().to_string()),
                (ENV_PLAYBACK_SPEED.into(), self.options.time_scale.to_string()),
            ],
            dataset_mount: ws.dataset_mount.clone(),
            results_mount: ws.results_mount.clone(),
            config_path: ws.config_path.clone(),
            log_path: ws.run_dir.join(ADAPTER_LOG_FILE),
        };
        let mut profile = File::create(ws.results_mount.join(PROFILING_FILE)).map_err(io_err)?;
        profile::write_header(&mut profile).map_err(io_err)?;
        let started_at = unix_now();
        let t0 = Instant::now();
        let process = self.sandbox.spawn(&spec)?;
        let baseline = process.usage().map(|u| u.cpu_seconds).unwrap_or(0.0);
        Ok(RunHandle {
            ws,
            process,
            state: RunState::Running,
            started_at,
            t0,
            timeout,
            period: self.options.profile_period,
            samples: Vec::new(),
            profile,
            last_cpu: (0.0, baseline),
            node: self.options.node,
            time_scale: self.options.time_scale,
            sandbox_kind: self.sandbox.kind(),
        })
    }

    /// prepare → launch → await for one task; setup errors become failed results.
    pub fn execute(&self, task: &RunTask, catalog: &Catalog) -> RunResult {
        let started_at = unix_now();
        let attempt = self
            .prepare_workspace(task.run_id, &task.config, catalog)
            .and_then(|ws| self.launch(ws, None));
        match attempt {
            Ok(handle) => handle.await_finished(self.options.poll_period),
            Err(e) => self.setup_failure(task, started_at, e),
        }
    }

    fn setup_failure(&self, task: &RunTask, started_at: f64, e: ExecError) -> RunResult {
        let run_dir = self.layout.run_dir(task.run_id);
        let result = RunResult {
            run_id: task.run_id,
            config_id: task.config.id,
            node_id: self.options.node,
            status: RunStatus::Failed,
            reason: Some(FailureReason::Setup(e.to_string())),
            sandbox: self.sandbox.kind().into(),
            cpu_type: cpu_type(),
            core_count: core_count(),
            run_dir: run_dir.clone(),
            dataset_mount: PathBuf::new(),
            prep_key: None,
            trajectory: None,
            profiling: None,
            map: None,
            cpu_mean: 0.0,
            cpu_max: 0.0,
            ram_max: 0.0,
            samples: 0,
            exit_code: None,
            started_at,
            finished_at: unix_now(),
            time_scale: self.options.time_scale,
        };
        let meta = run_dir.join(RUN_META_FILE);
        if !matches!(e, ExecError::ResultsDirNotEmpty(_)) && !meta.exists() && fs::create_dir_all(&run_dir).is_ok() {
            let _ = write_json(&meta, &result);
        }
        result
    }

    /// Runs every task with at most `max_parallel` live sandboxes. Results
    /// follow input order; individual failures do not stop the queue.
    pub fn run_queue(&self, catalog: &Catalog, tasks: &[RunTask], max_parallel: usize) -> Result<Vec<RunResult>, ExecError> {
        if max_parallel == 0 {
            return Err(ExecError::InvalidArgument("max_parallel must be at least 1".into()));
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<RunResult>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..max_parallel.min(tasks.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(task) = tasks.get(i) else { break };
                    let result = self.execute(task, catalog);
                    *slots[i].lock().expect("result slot poisoned") = Some(result);
                });
            }
        });
        Ok(slots
            .into_iter()
            .map(|m| m.into_inner().expect("result slot poisoned").expect("every task ran"))
            .collect())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExecError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec_pretty(value).map_err(io_err)?).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

/// A launched run, owned by one worker.
pub struct RunHandle {
    ws: Workspace,
    process: Box<dyn SandboxProcess>,
    state: RunState,
    started_at: f64,
    t0: Instant,
    timeout: Duration,
    period: Duration,
    samples: Vec<ResourceSample>,
    profile: File,
    /// (seconds since launch, cumulative cpu seconds) at the previous sample.
    last_cpu: (f64, f64),
    node: NodeId,
    time_scale: f64,
    sandbox_kind: &'static str,
}

impl std::fmt::Debug for RunHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RunHandle")
            .field("run_id", &self.ws.run_id)
            .field("sandbox", &self.process.id())
            .field("state", &self.state)
            .finish()
    }
}

impl RunHandle {
    pub fn run_id(&self) -> RunId {
        self.ws.run_id
    }

    pub fn sandbox_id(&self) -> String {
        self.process.id()
    }

    pub fn state(&self) -> RunState {
        self.state
    }

    pub fn started_at(&self) -> f64 {
        self.started_at
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn samples(&self) -> &[ResourceSample] {
        &self.samples
    }

    fn transition(&mut self, next: RunState) {
        debug_assert!(next > self.state || next == self.state, "{:?} -> {next:?}", self.state);
        if !self.state.is_terminal() {
            self.state = next;
        }
    }

    /// Takes one reading covering the whole process group and appends it to
    /// `profiling.csv`.
    pub fn sample_resources(&mut self) -> Result<ResourceSample, ExecError> {
        if self.state.is_terminal() {
            return Err(ExecError::SandboxGone);
        }
        let usage = self.process.usage().ok_or(ExecError::SandboxGone)?;
        let t = self.t0.elapsed().as_secs_f64();
        let (t_prev, cpu_prev) = self.last_cpu;
        let dt = t - t_prev;
        let cpu = if dt > 0.0 {
            ((usage.cpu_seconds - cpu_prev) / dt).max(0.0)
        } else {
            0.0
        };
        self.last_cpu = (t, usage.cpu_seconds);
        let sample = ResourceSample {
            t,
            cpu,
            ram: usage.rss_mb,
        };
        writeln!(self.profile, "{}", profile::format_sample(&sample))
            .and_then(|_| self.profile.flush())
            .map_err(io_err)?;
        self.samples.push(sample);
        Ok(sample)
    }

    /// Blocks until the sentinel appears, the adapter exits or the timeout
    /// fires; always reaps the sandbox.
    pub fn await_finished(mut self, poll: Duration) -> RunResult {
        let sentinel = self.ws.results_mount.join(SENTINEL_FILE);
        let mut next_sample = self.period;
        let mut exit_code = None;
        let mut reason = None;
        loop {
            if sentinel.exists() {
                self.transition(RunState::Finished);
                break;
            }
            match self.process.try_wait() {
                Ok(Some(code)) => {
                    exit_code = Some(code);
                    if sentinel.exists() {
                        self.transition(RunState::Finished);
                    } else {
                        reason = Some(if code == 0 {
                            FailureReason::ExitedWithoutSentinel
                        } else {
                            FailureReason::ExitCode(code)
                        });
                        self.transition(RunState::Failed);
                    }
                    break;
                }
                Ok(None) => {}
                Err(e) => {
                    reason = Some(FailureReason::Setup(e.to_string()));
                    self.transition(RunState::Failed);
                    break;
                }
            }
            let elapsed = self.t0.elapsed();
            if elapsed >= self.timeout {
                reason = Some(FailureReason::Timeout);
                self.transition(RunState::TimedOut);
                break;
            }
            if elapsed >= next_sample {
                let _ = self.sample_resources();
                next_sample += self.period;
            }
            std::thread::sleep(poll.min(self.timeout.saturating_sub(elapsed)).max(Duration::from_millis(1)));
        }
        if exit_code.is_none() && self.state == RunState::Finished {
            // let a well-behaved adapter exit on its own before the group is killed
            let grace = Instant::now();
            while grace.elapsed() < Duration::from_millis(200) {
                if let Ok(Some(code)) = self.process.try_wait() {
                    exit_code = Some(code);
                    break;
                }
                std::thread::sleep(Duration::from_millis(5));
            }
        }
        self.process.terminate();
        let finished_at = unix_now();

        let traj_path = self.ws.results_mount.join(TRAJECTORY_FILE);
        let traj_ok = fs::read_to_string(&traj_path)
            .ok()
            .is_some_and(|text| trajeval::parse_trajectory(&text).is_ok());
        let mut status = match self.state {
            RunState::Finished => RunStatus::Finished,
            RunState::TimedOut => RunStatus::TimedOut,
            _ => RunStatus::Failed,
        };
        if status == RunStatus::Finished && !traj_ok {
            status = RunStatus::Failed;
            reason = Some(FailureReason::MissingTrajectory);
        }
        if hash_dir(&self.ws.dataset_mount).ok().as_deref() != Some(self.ws.dataset_hash.as_str()) {
            status = RunStatus::Failed;
            reason = Some(FailureReason::DatasetModified);
        }
        let _ = self.profile.flush();
        let summary = ProfileSummary::from_samples(&self.samples);
        let _ = profile::write_plot(&self.ws.results_mount.join(CPU_PLOT_FILE), "cpu_cores", &self.samples, |s| s.cpu);
        let _ = profile::write_plot(&self.ws.results_mount.join(MEM_PLOT_FILE), "ram_mb", &self.samples, |s| s.ram);
        let map = self.ws.results_mount.join(crate::mock::MAP_FILE);
        let result = RunResult {
            run_id: self.ws.run_id,
            config_id: self.ws.config_id,
            node_id: self.node,
            status,
            reason,
            sandbox: format!("{}:{}", self.sandbox_kind, self.process.id()),
            cpu_type: cpu_type(),
            core_count: core_count(),
            run_dir: self.ws.run_dir.clone(),
            dataset_mount: self.ws.dataset_mount.clone(),
            prep_key: self.ws.prep_key.clone(),
            trajectory: traj_ok.then_some(traj_path),
            profiling: Some(self.ws.results_mount.join(PROFILING_FILE)),
            map: map.exists().then_some(map),
            cpu_mean: summary.cpu_mean,
            cpu_max: summary.cpu_max,
            ram_max: summary.ram_max,
            samples: self.samples.len(),
            exit_code,
            started_at: self.started_at,
            finished_at,
            time_scale: self.time_scale,
        };
        if let Err(e) = write_json(&self.ws.run_dir.join(RUN_META_FILE), &result) {
            log::warn!("run {}: cannot write run metadata: {e}", self.ws.run_id);
        }
        result
    }
}
