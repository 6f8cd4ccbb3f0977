use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{AlgorithmId, DatasetId, NodeId, TaskId};

use super::{ClusterPlan, Resource, SchedError};

pub const GB: u64 = 1_000_000_000;

/// Inputs of the transfer and timing model. The defaults are configuration
/// values: a 5 Gbit/s shared LAN, 60 s snapshot creation, 30 s clone and
/// node creation, 3 GB images, 2.5 GB datasets, 2 s of pre-processing per
/// GB of dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostModel {
    /// Shared LAN capacity in bytes per second.
    pub bandwidth: f64,
    pub snapshot_seconds: f64,
    pub clone_seconds: f64,
    pub node_create_seconds: f64,
    pub prep_seconds_per_gb: f64,
    pub default_image_bytes: Option<u64>,
    pub default_dataset_bytes: Option<u64>,
    pub image_bytes: BTreeMap<AlgorithmId, u64>,
    pub dataset_bytes: BTreeMap<DatasetId, u64>,
    pub default_task_seconds: Option<f64>,
    pub task_durations: BTreeMap<TaskId, f64>,
    /// Resources already present on a node before the campaign.
    pub preloaded: BTreeSet<(NodeId, Resource)>,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            bandwidth: 5e9 / 8.0,
            snapshot_seconds: 60.0,
            clone_seconds: 30.0,
            node_create_seconds: 30.0,
            prep_seconds_per_gb: 2.0,
            default_image_bytes: Some(3 * GB),
            default_dataset_bytes: Some(5 * GB / 2),
            image_bytes: BTreeMap::new(),
            dataset_bytes: BTreeMap::new(),
            default_task_seconds: None,
            task_durations: BTreeMap::new(),
            preloaded: BTreeSet::new(),
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<(), SchedError> {
        let positive = [
            ("bandwidth", self.bandwidth),
            ("snapshot_seconds", self.snapshot_seconds),
            ("clone_seconds", self.clone_seconds),
            ("node_create_seconds", self.node_create_seconds),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(SchedError::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.prep_seconds_per_gb >= 0.0) {
            return Err(SchedError::InvalidArgument("prep_seconds_per_gb must not be negative".into()));
        }
        let durations = self.task_durations.values().chain(&self.default_task_seconds);
        if let Some(d) = durations.into_iter().find(|d| !(**d >= 0.0) || !d.is_finite()) {
            return Err(SchedError::InvalidArgument(format!("task duration {d} is invalid")));
        }
        Ok(())
    }

    pub fn size(&self, r: Resource) -> Result<u64, SchedError> {
        match r {
            Resource::Image(a) => self.image_bytes.get(&a).copied().or(self.default_image_bytes),
            Resource::Dataset(d) => self.dataset_bytes.get(&d).copied().or(self.default_dataset_bytes),
        }
        .ok_or(SchedError::MissingSize(r))
    }

    pub fn task_seconds(&self, id: TaskId) -> Option<f64> {
        self.task_durations.get(&id).copied().or(self.default_task_seconds)
    }

    pub fn transfer_seconds(&self, bytes: u64) -> f64 {
        bytes as f64 / self.bandwidth
    }

    pub fn prep_seconds(&self, bytes: u64) -> f64 {
        self.prep_seconds_per_gb * bytes as f64 / GB as f64
    }

    pub fn is_preloaded(&self, node: NodeId, r: Resource) -> bool {
        self.preloaded.contains(&(node, r))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferCost {
    pub total: u64,
    pub per_node: BTreeMap<NodeId, u64>,
}

/// Bytes moved by the plan's transfer schedule; preloaded resources are free.
pub fn transfer_cost(plan: &ClusterPlan, model: &CostModel) -> Result<TransferCost, SchedError> {
    let mut out = TransferCost::default();
    for t in &plan.transfers {
        let bytes = if model.is_preloaded(t.node, t.resource) {
            0
        } else {
            model.size(t.resource)?
        };
        out.total += bytes;
        *out.per_node.entry(t.node).or_default() += bytes;
    }
    Ok(out)
}
