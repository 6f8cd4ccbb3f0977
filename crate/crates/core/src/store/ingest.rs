use std::fs;
use std::path::Path;

use crate::dataprep;
use crate::executor::{RunResult, RunStatus};
use crate::ids::ConfigId;
use crate::layout::{Layout, LOG_DIR, SENTINEL_FILE, TRAJECTORY_FILE, RESULTS_DIR};
use crate::mock::nearest;
use crate::trajeval::{self, traj_length_factor_with, Trajectory, DEFAULT_MAX_TIME_DIFF};

use super::{RunRecord, Store, StoreError};

/// Ground-truth poses at the played camera frames: for each frame time the
/// nearest reference pose within `max_time_diff`, each pose used once.
pub fn frame_reference(gt: &Trajectory, frames: &[f64], max_time_diff: f64) -> Option<Trajectory> {
    let mut poses = Vec::with_capacity(frames.len());
    for &t in frames {
        let p = nearest(gt.poses(), t);
        if (p.t - t).abs() <= max_time_diff && poses.last().is_none_or(|q: &trajeval::Pose| q.t < p.t) {
            poses.push(p.clone());
        }
    }
    Trajectory::new(poses).ok()
}

fn corrupt(run_dir: &Path, what: impl std::fmt::Display) -> StoreError {
    StoreError::CorruptResults(format!("{}: {what}", run_dir.display()))
}

impl Store {
    /// Records a completed run directory. Re-ingesting a run returns the
    /// stored record unchanged; the flag tells whether this call created it.
    pub fn ingest(&self, run_dir: &Path, config_id: ConfigId, layout: &Layout) -> Result<(RunRecord, bool), StoreError> {
        let meta = RunResult::load(run_dir).map_err(|e| corrupt(run_dir, e))?;
        if meta.config_id != config_id {
            return Err(corrupt(
                run_dir,
                format!("run belongs to configuration {}, not {config_id}", meta.config_id),
            ));
        }
        if let Some(existing) = self.snapshot().runs.get(&meta.run_id) {
            return Ok((existing.clone(), false));
        }
        let config = self.snapshot().config(config_id)?.clone();
        let results = run_dir.join(RESULTS_DIR);
        let traj_text = fs::read_to_string(results.join(TRAJECTORY_FILE)).ok();
        if meta.status == RunStatus::Finished && !results.join(SENTINEL_FILE).exists() {
            return Err(corrupt(run_dir, "finished run without sentinel"));
        }
        let estimate = match (&traj_text, meta.status) {
            (Some(text), _) => match trajeval::parse_trajectory(text) {
                Ok(t) => Some(t),
                Err(e) if meta.status == RunStatus::Finished => return Err(corrupt(run_dir, e)),
                Err(_) => None,
            },
            (None, RunStatus::Finished) => return Err(corrupt(run_dir, "missing trajectory")),
            (None, _) => None,
        };
        let traj_length = match &estimate {
            None => None,
            Some(est) => {
                let gt = layout
                    .ground_truth(config.dataset_id, &config.sequence)
                    .map_err(|e| corrupt(run_dir, e))?;
                let frames = dataprep::read_log(&meta.dataset_mount.join(LOG_DIR))
                    .map(|log| log.frame_times())
                    .unwrap_or_default();
                let reference = frame_reference(&gt, &frames, DEFAULT_MAX_TIME_DIFF).unwrap_or(gt);
                Some(traj_length_factor_with(est, &reference, DEFAULT_MAX_TIME_DIFF))
            }
        };
        let record = RunRecord {
            run_id: meta.run_id,
            config_id,
            node_id: meta.node_id,
            cpu_type: meta.cpu_type,
            core_count: meta.core_count,
            status: meta.status,
            reason: meta.reason.map(|r| r.to_string()),
            cpu_mean: meta.cpu_mean,
            cpu_max: meta.cpu_max,
            ram_max: meta.ram_max,
            traj_length,
            started_at: meta.started_at,
            finished_at: meta.finished_at,
            time_scale: meta.time_scale,
            run_dir: run_dir.to_path_buf(),
            prep_key: meta.prep_key,
            map: meta.map,
        };
        self.transact(|d| {
            if let Some(existing) = d.runs.get(&record.run_id) {
                return Ok((existing.clone(), false));
            }
            d.counters.run = d.counters.run.max(record.run_id.0 + 1);
            d.runs.insert(record.run_id, record.clone());
            Ok((record, true))
        })
    }
}
