//! On-disk file structure shared by the executor, the store and the analysis module.
//!
//! ```text
//! <root>/
//!   datasets/<dataset_id>/<sequence>/groundtruth.txt
//!   datasets/<dataset_id>/<sequence>/log/index.csv
//!   prepared/<dataset_id>/<sequence>/<prep_key>/...
//!   mapping_results/<run_id>/run.json
//!   mapping_results/<run_id>/config.yaml
//!   mapping_results/<run_id>/results/{traj.txt, profiling.csv, cpu.csv, mem.csv, finished}
//!   evaluation_results/<run_id>/...
//!   analyses/<token>/...
//!   subTask.txt
//!   store.json
//! ```

use std::path::{Path, PathBuf};

use crate::ids::{DatasetId, RunId};
use crate::trajeval::{self, Trajectory};

pub const GROUND_TRUTH_FILE: &str = "groundtruth.txt";
pub const LOG_DIR: &str = "log";
pub const RUN_META_FILE: &str = "run.json";
pub const CONFIG_FILE: &str = "config.yaml";
pub const RESULTS_DIR: &str = "results";
pub const TRAJECTORY_FILE: &str = "traj.txt";
pub const PROFILING_FILE: &str = "profiling.csv";
pub const CPU_PLOT_FILE: &str = "cpu.csv";
pub const MEM_PLOT_FILE: &str = "mem.csv";
pub const SENTINEL_FILE: &str = "finished";
pub const ADAPTER_LOG_FILE: &str = "adapter.log";
pub const SUBTASK_FILE: &str = "subTask.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn datasets_root(&self) -> PathBuf {
        self.root.join("datasets")
    }

    pub fn sequence_dir(&self, dataset: DatasetId, sequence: &str) -> PathBuf {
        self.datasets_root().join(dataset.to_string()).join(sequence)
    }

    pub fn ground_truth_path(&self, dataset: DatasetId, sequence: &str) -> PathBuf {
        self.sequence_dir(dataset, sequence).join(GROUND_TRUTH_FILE)
    }

    pub fn prepared_root(&self) -> PathBuf {
        self.root.join("prepared")
    }

    pub fn run_dir(&self, run: RunId) -> PathBuf {
        self.root.join("mapping_results").join(run.to_string())
    }

    pub fn evaluation_dir(&self, run: RunId) -> PathBuf {
        self.root.join("evaluation_results").join(run.to_string())
    }

    pub fn analyses_root(&self) -> PathBuf {
        self.root.join("analyses")
    }

    pub fn store_path(&self) -> PathBuf {
        self.root.join("store.json")
    }

    pub fn subtask_path(&self) -> PathBuf {
        self.root.join(SUBTASK_FILE)
    }

    /// Loads the reference trajectory of one dataset sequence.
    pub fn ground_truth(
        &self,
        dataset: DatasetId,
        sequence: &str,
    ) -> Result<Trajectory, GroundTruthError> {
        let path = self.ground_truth_path(dataset, sequence);
        let text = std::fs::read_to_string(&path).map_err(|e| GroundTruthError::Io {
            path: path.clone(),
            source: e,
        })?;
        trajeval::parse_trajectory(&text).map_err(|e| GroundTruthError::Parse { path, source: e })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GroundTruthError {
    #[error("cannot read ground truth {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed ground truth {path}: {source}")]
    Parse {
        path: PathBuf,
        source: trajeval::TrajError,
    },
}
