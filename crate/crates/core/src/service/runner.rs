use std::collections::BTreeMap;
use std::fs;

use serde::Serialize;

use crate::executor::{Executor, ExecutorOptions, RunTask};
use crate::ids::{NodeId, RunId, TaskId};
use crate::scheduler::{plan_cluster, render_manifests, PlanTask};
use crate::store::RunRecord;

use super::{DeploymentMode, Service};

/// What happened to one started task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskOutcome {
    pub task_id: TaskId,
    pub run_id: RunId,
    pub node: NodeId,
    pub record: Option<RunRecord>,
    pub error: Option<String>,
}

impl Service {
    /// Executes tasks already marked running and ingests their results.
    ///
    /// Workstation deployments run them through one local queue. Cluster and
    /// cloud deployments split them with the scheduler, write the manifest
    /// file, and drive one queue per controller node.
    pub fn execute_started(&self, started: Vec<(TaskId, RunTask)>) -> Vec<TaskOutcome> {
        if started.is_empty() {
            return Vec::new();
        }
        let cfg = self.config();
        let batches: Vec<(NodeId, Vec<(TaskId, RunTask)>)> = if cfg.mode.needs_nodes() {
            match self.split_over_nodes(&started) {
                Ok(b) => b,
                Err(e) => return self.fail_all(&started, NodeId(0), &e),
            }
        } else {
            vec![(NodeId(0), started)]
        };
        let mut outcomes: Vec<TaskOutcome> = std::thread::scope(|s| {
            let handles: Vec<_> = batches
                .iter()
                .map(|(node, batch)| s.spawn(move || self.run_batch(*node, batch)))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("controller thread panicked"))
                .collect()
        });
        outcomes.sort_by_key(|o| o.task_id);
        outcomes
    }

    fn split_over_nodes(
        &self,
        started: &[(TaskId, RunTask)],
    ) -> Result<Vec<(NodeId, Vec<(TaskId, RunTask)>)>, String> {
        let tasks: Vec<PlanTask> = started
            .iter()
            .map(|(id, rt)| PlanTask {
                id: *id,
                algorithm: rt.config.algorithm_id,
                dataset: rt.config.dataset_id,
            })
            .collect();
        let m = self.config().nodes.len().max(1);
        let plan = plan_cluster(&tasks, m, self.config().seed).map_err(|e| e.to_string())?;
        fs::write(self.layout().subtask_path(), render_manifests(&plan)).map_err(|e| e.to_string())?;
        let by_id: BTreeMap<TaskId, &RunTask> = started.iter().map(|(t, rt)| (*t, rt)).collect();
        Ok(plan
            .manifests
            .iter()
            .map(|(node, ids)| (*node, ids.iter().map(|t| (*t, by_id[t].clone())).collect()))
            .collect())
    }

    fn run_batch(&self, node: NodeId, batch: &[(TaskId, RunTask)]) -> Vec<TaskOutcome> {
        let cfg = self.config();
        let executor = Executor::new(
            self.layout().clone(),
            cfg.adapters.clone(),
            ExecutorOptions {
                node,
                ..cfg.executor_options()
            },
        );
        let catalog = self.store().snapshot().catalog.clone();
        let run_tasks: Vec<RunTask> = batch.iter().map(|(_, rt)| rt.clone()).collect();
        let parallel = if cfg.mode == DeploymentMode::Workstation { cfg.max_parallel } else { 1 };
        let results = match executor.run_queue(&catalog, &run_tasks, parallel.max(1)) {
            Ok(r) => r,
            Err(e) => return self.fail_all(batch, node, &e.to_string()),
        };
        batch
            .iter()
            .zip(results)
            .map(|((task, rt), res)| {
                let ingested = self.store().ingest(&res.run_dir, rt.config.id, self.layout());
                let completed = self.store().complete_task(*task);
                let (record, error) = match (ingested, completed) {
                    (Ok((rec, _)), Ok(())) => (Some(rec), None),
                    (Err(e), _) | (_, Err(e)) => (None, Some(e.to_string())),
                };
                TaskOutcome {
                    task_id: *task,
                    run_id: rt.run_id,
                    node,
                    record,
                    error,
                }
            })
            .collect()
    }

    fn fail_all(&self, batch: &[(TaskId, RunTask)], node: NodeId, error: &str) -> Vec<TaskOutcome> {
        log::error!("run batch on node {node} failed: {error}");
        batch
            .iter()
            .map(|(task, rt)| TaskOutcome {
                task_id: *task,
                run_id: rt.run_id,
                node,
                record: None,
                error: Some(error.to_string()),
            })
            .collect()
    }
}
