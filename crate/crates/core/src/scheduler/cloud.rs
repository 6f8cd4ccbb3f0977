use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::NodeId;

use super::sim::{Interval, IntervalKind};
use super::{CostModel, Resource, SchedError, MASTER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The master copies the static resources to every node.
    Direct,
    /// One template node receives the resources, is snapshotted, and the
    /// remaining nodes are cloned from the snapshot in parallel.
    Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ProvisionStep {
    CreateNode { node: NodeId },
    Transfer { from: NodeId, to: NodeId, bytes: u64 },
    Snapshot { node: NodeId },
    Clone { node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisionPlan {
    pub strategy: Strategy,
    pub n: usize,
    pub resources: Vec<Resource>,
    pub bytes_per_node: u64,
    pub steps: Vec<ProvisionStep>,
}

/// Provisioning of `n` worker nodes that each end up holding `resources`.
///
/// Snapshot plans follow the "1 + 1 + (n-1)" shape: the master, one
/// template node, then `n - 1` clones. With `n = 1` no snapshot is taken.
pub fn plan_cloud(
    n: usize,
    strategy: Strategy,
    resources: &[Resource],
    model: &CostModel,
) -> Result<ProvisionPlan, SchedError> {
    if n == 0 {
        return Err(SchedError::InvalidArgument("at least one node is required".into()));
    }
    let mut resources = resources.to_vec();
    resources.sort();
    resources.dedup();
    let bytes = resources.iter().map(|r| model.size(*r)).sum::<Result<u64, _>>()?;
    let nodes = (1..=n as u64).map(NodeId);
    let mut steps = Vec::new();
    match strategy {
        Strategy::Direct => {
            steps.extend(nodes.clone().map(|node| ProvisionStep::CreateNode { node }));
            steps.extend(nodes.map(|to| ProvisionStep::Transfer { from: MASTER, to, bytes }));
        }
        Strategy::Snapshot => {
            let template = NodeId(1);
            steps.push(ProvisionStep::CreateNode { node: template });
            steps.push(ProvisionStep::Transfer {
                from: MASTER,
                to: template,
                bytes,
            });
            if n > 1 {
                steps.push(ProvisionStep::Snapshot { node: template });
                steps.extend(nodes.skip(1).map(|node| ProvisionStep::Clone { node }));
            }
        }
    }
    Ok(ProvisionPlan {
        strategy,
        n,
        resources,
        bytes_per_node: bytes,
        steps,
    })
}

impl ProvisionPlan {
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.n as u64).map(NodeId)
    }

    pub fn network_transfers(&self) -> usize {
        self.steps
            .iter()
            .filter(|s| matches!(s, ProvisionStep::Transfer { .. }))
            .count()
    }

    pub fn network_bytes(&self) -> u64 {
        self.steps
            .iter()
            .map(|s| match s {
                ProvisionStep::Transfer { bytes, .. } => *bytes,
                _ => 0,
            })
            .sum()
    }

    /// Node creations and clones run in parallel, transfers queue on the
    /// shared link. Returns the intervals, each node's ready time and the
    /// time the link becomes free.
    pub fn schedule(&self, model: &CostModel) -> (Vec<Interval>, BTreeMap<NodeId, f64>, f64) {
        let mut intervals = Vec::new();
        let mut created: BTreeMap<NodeId, f64> = BTreeMap::new();
        let mut ready: BTreeMap<NodeId, f64> = BTreeMap::new();
        let mut link = 0.0f64;
        let mut snapshot_done = 0.0f64;
        let mut push = |node, kind, start: f64, end: f64| {
            intervals.push(Interval { node, kind, task: None, start, end });
        };
        for step in &self.steps {
            match *step {
                ProvisionStep::CreateNode { node } => {
                    let end = model.node_create_seconds;
                    push(node, IntervalKind::Provision, 0.0, end);
                    created.insert(node, end);
                    ready.insert(node, end);
                }
                ProvisionStep::Transfer { to, bytes, .. } => {
                    let start = link.max(created.get(&to).copied().unwrap_or(0.0));
                    let end = start + model.transfer_seconds(bytes);
                    push(to, IntervalKind::Transfer, start, end);
                    link = end;
                    ready.insert(to, end);
                }
                ProvisionStep::Snapshot { node } => {
                    let start = ready.get(&node).copied().unwrap_or(0.0);
                    snapshot_done = start + model.snapshot_seconds;
                    push(node, IntervalKind::Provision, start, snapshot_done);
                    ready.insert(node, snapshot_done);
                }
                ProvisionStep::Clone { node } => {
                    let end = snapshot_done + model.clone_seconds;
                    push(node, IntervalKind::Provision, snapshot_done, end);
                    ready.insert(node, end);
                }
            }
        }
        (intervals, ready, link)
    }

    /// Time until every node is ready.
    pub fn makespan(&self, model: &CostModel) -> f64 {
        self.schedule(model).1.values().copied().fold(0.0, f64::max)
    }
}
