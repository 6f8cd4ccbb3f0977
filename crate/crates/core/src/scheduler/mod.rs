//! Multi-node planning: task classes, controller assignment, per-node
//! manifests, static-resource transfers, cloud provisioning and a
//! discrete-event campaign simulator.
//!
//! Node numbering: [`MASTER`] (node 0) holds every static resource and
//! serves transfers; worker nodes are numbered from 1.

mod cloud;
mod cost;
mod sim;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ids::{AlgorithmId, DatasetId, NodeId, TaskId};
use crate::store::StoreData;

pub use cloud::{plan_cloud, ProvisionPlan, ProvisionStep, Strategy};
pub use cost::{transfer_cost, CostModel, TransferCost, GB};
pub use sim::{simulate, Interval, IntervalKind, Timeline};

pub const MASTER: NodeId = NodeId(0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchedError {
    #[error("no size known for {0}")]
    MissingSize(Resource),
    #[error("inconsistent plan: {0}")]
    InconsistentPlan(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A static resource: an algorithm image or a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    Image(AlgorithmId),
    Dataset(DatasetId),
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resource::Image(a) => write!(f, "image:{a}"),
            Resource::Dataset(d) => write!(f, "dataset:{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanTask {
    pub id: TaskId,
    pub algorithm: AlgorithmId,
    pub dataset: DatasetId,
}

impl PlanTask {
    pub fn class(&self) -> ClassKey {
        ClassKey {
            algorithm: self.algorithm,
            dataset: self.dataset,
        }
    }

    pub fn resources(&self) -> [Resource; 2] {
        [Resource::Image(self.algorithm), Resource::Dataset(self.dataset)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassKey {
    pub algorithm: AlgorithmId,
    pub dataset: DatasetId,
}

impl fmt::Display for ClassKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.algorithm, self.dataset)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskClass {
    pub key: ClassKey,
    pub tasks: Vec<TaskId>,
}

/// Groups tasks by (algorithm, dataset); classes ordered by key, members by id.
pub fn classify(tasks: &[PlanTask]) -> Vec<TaskClass> {
    let mut map: BTreeMap<ClassKey, Vec<TaskId>> = BTreeMap::new();
    for t in tasks {
        map.entry(t.class()).or_default().push(t.id);
    }
    map.into_iter()
        .map(|(key, mut tasks)| {
            tasks.sort();
            tasks.dedup();
            TaskClass { key, tasks }
        })
        .collect()
}

/// Looks task identities up in the store.
pub fn tasks_from_store(data: &StoreData, ids: &[TaskId]) -> Result<Vec<PlanTask>, SchedError> {
    ids.iter()
        .map(|id| {
            let task = data
                .tasks
                .get(id)
                .ok_or_else(|| SchedError::InvalidArgument(format!("unknown task {id}")))?;
            let config = data
                .configurations
                .get(&task.config_id)
                .ok_or_else(|| SchedError::InvalidArgument(format!("task {id} has no configuration")))?;
            Ok(PlanTask {
                id: *id,
                algorithm: config.algorithm_id,
                dataset: config.dataset_id,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentPolicy {
    /// Seeded uniform choice of a controller per class.
    Random { seed: u64 },
    /// Extension: largest class (by modeled duration) to the least loaded
    /// controller.
    LargestClassFirst,
    /// Manifests given by the caller; classes may be split.
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transfer {
    pub node: NodeId,
    pub resource: Resource,
    /// Task whose start triggers the fetch.
    pub first_needed_by: TaskId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub n: usize,
    pub m: usize,
    pub policy: AssignmentPolicy,
    pub controllers: Vec<NodeId>,
    pub classes: Vec<TaskClass>,
    /// Controller of each class; absent for manual plans that split it.
    /// Serialized as `[[class, node], ...]`.
    #[serde(with = "assignment_pairs")]
    pub assignment: BTreeMap<ClassKey, NodeId>,
    pub manifests: BTreeMap<NodeId, Vec<TaskId>>,
    pub transfers: Vec<Transfer>,
    pub tasks: Vec<PlanTask>,
}

mod assignment_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::ClassKey;
    use crate::ids::NodeId;

    pub fn serialize<S: Serializer>(map: &BTreeMap<ClassKey, NodeId>, s: S) -> Result<S::Ok, S::Error> {
        map.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<ClassKey, NodeId>, D::Error> {
        Ok(Vec::<(ClassKey, NodeId)>::deserialize(d)?.into_iter().collect())
    }
}

fn controllers(m: usize, n: usize) -> Vec<NodeId> {
    (1..=m.min(n) as u64).map(NodeId).collect()
}

fn check_m(m: usize) -> Result<(), SchedError> {
    if m == 0 {
        return Err(SchedError::InvalidArgument("at least one node is required".into()));
    }
    Ok(())
}

fn unique_tasks(tasks: &[PlanTask]) -> Result<(), SchedError> {
    let mut seen = BTreeSet::new();
    for t in tasks {
        if !seen.insert(t.id) {
            return Err(SchedError::InvalidArgument(format!("task {} listed twice", t.id)));
        }
    }
    Ok(())
}

impl ClusterPlan {
    /// Builds the manifests and transfer schedule for a class assignment.
    fn assemble(
        tasks: &[PlanTask],
        m: usize,
        policy: AssignmentPolicy,
        classes: Vec<TaskClass>,
        assignment: BTreeMap<ClassKey, NodeId>,
    ) -> Self {
        let ctrl = controllers(m, tasks.len());
        let mut manifests: BTreeMap<NodeId, Vec<TaskId>> = ctrl.iter().map(|c| (*c, Vec::new())).collect();
        for class in &classes {
            let node = assignment[&class.key];
            manifests.entry(node).or_default().extend(&class.tasks);
        }
        let mut plan = Self {
            n: tasks.len(),
            m,
            policy,
            controllers: ctrl,
            classes,
            assignment,
            manifests,
            transfers: Vec::new(),
            tasks: tasks.to_vec(),
        };
        plan.transfers = plan.schedule_transfers();
        plan
    }

    /// One transfer per (node, resource) at its first use in manifest order.
    fn schedule_transfers(&self) -> Vec<Transfer> {
        let by_id: BTreeMap<TaskId, &PlanTask> = self.tasks.iter().map(|t| (t.id, t)).collect();
        let mut out = Vec::new();
        for (node, ids) in &self.manifests {
            let mut have = BTreeSet::new();
            for id in ids {
                for r in by_id[id].resources() {
                    if have.insert(r) {
                        out.push(Transfer {
                            node: *node,
                            resource: r,
                            first_needed_by: *id,
                        });
                    }
                }
            }
        }
        out
    }

    /// Plan with caller-supplied manifests over `m` nodes. Nodes must lie in
    /// `1..=m` and the manifests must partition the tasks.
    pub fn from_manifests(
        tasks: &[PlanTask],
        m: usize,
        manifests: BTreeMap<NodeId, Vec<TaskId>>,
    ) -> Result<Self, SchedError> {
        check_m(m)?;
        unique_tasks(tasks)?;
        let known: BTreeSet<TaskId> = tasks.iter().map(|t| t.id).collect();
        let mut listed = BTreeSet::new();
        for (node, ids) in &manifests {
            if node.0 == 0 || node.0 as usize > m {
                return Err(SchedError::InconsistentPlan(format!("node {node} is outside 1..={m}")));
            }
            for id in ids {
                if !known.contains(id) || !listed.insert(*id) {
                    return Err(SchedError::InconsistentPlan(format!("task {id} is unknown or listed twice")));
                }
            }
        }
        if listed != known {
            return Err(SchedError::InconsistentPlan("manifests do not cover every task".into()));
        }
        let classes = classify(tasks);
        let node_of: BTreeMap<TaskId, NodeId> = manifests
            .iter()
            .flat_map(|(n, ids)| ids.iter().map(move |id| (*id, *n)))
            .collect();
        let assignment = classes
            .iter()
            .filter_map(|c| {
                let nodes: BTreeSet<NodeId> = c.tasks.iter().map(|t| node_of[t]).collect();
                (nodes.len() == 1).then(|| (c.key, *nodes.first().unwrap()))
            })
            .collect();
        let mut plan = Self {
            n: tasks.len(),
            m,
            policy: AssignmentPolicy::Manual,
            controllers: manifests.keys().copied().filter(|n| !manifests[n].is_empty()).collect(),
            classes,
            assignment,
            manifests,
            transfers: Vec::new(),
            tasks: tasks.to_vec(),
        };
        plan.transfers = plan.schedule_transfers();
        Ok(plan)
    }

    pub fn node_of(&self, task: TaskId) -> Option<NodeId> {
        self.manifests
            .iter()
            .find_map(|(n, ids)| ids.contains(&task).then_some(*n))
    }

    pub fn task(&self, id: TaskId) -> Option<&PlanTask> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

/// Seeded random assignment of whole classes to `min(m, n)` controllers.
pub fn plan_cluster(tasks: &[PlanTask], m: usize, seed: u64) -> Result<ClusterPlan, SchedError> {
    check_m(m)?;
    unique_tasks(tasks)?;
    let classes = classify(tasks);
    let ctrl = controllers(m, tasks.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment = classes
        .iter()
        .map(|c| (c.key, ctrl[rng.random_range(0..ctrl.len())]))
        .collect();
    Ok(ClusterPlan::assemble(tasks, m, AssignmentPolicy::Random { seed }, classes, assignment))
}

/// Extension to the random policy: classes sorted by modeled work
/// (descending) each go to the controller with the least work so far.
pub fn plan_cluster_balanced(tasks: &[PlanTask], m: usize, model: &CostModel) -> Result<ClusterPlan, SchedError> {
    check_m(m)?;
    unique_tasks(tasks)?;
    let classes = classify(tasks);
    let ctrl = controllers(m, tasks.len());
    let work = |c: &TaskClass| -> f64 {
        c.tasks
            .iter()
            .map(|t| model.task_seconds(*t).unwrap_or(1.0))
            .sum()
    };
    let mut order: Vec<&TaskClass> = classes.iter().collect();
    order.sort_by(|a, b| work(b).total_cmp(&work(a)).then(a.key.cmp(&b.key)));
    let mut load: Vec<f64> = vec![0.0; ctrl.len()];
    let mut assignment = BTreeMap::new();
    for c in order {
        let (i, _) = load
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("at least one controller");
        load[i] += work(c);
        assignment.insert(c.key, ctrl[i]);
    }
    Ok(ClusterPlan::assemble(tasks, m, AssignmentPolicy::LargestClassFirst, classes, assignment))
}

/// `subTask.txt`: a `[node <id>]` header per controller followed by one task
/// id per line.
pub fn render_manifests(plan: &ClusterPlan) -> String {
    let mut out = String::new();
    for (node, ids) in &plan.manifests {
        out.push_str(&format!("[node {node}]\n"));
        for id in ids {
            out.push_str(&format!("{id}\n"));
        }
    }
    out
}

pub fn parse_manifests(text: &str) -> Result<BTreeMap<NodeId, Vec<TaskId>>, SchedError> {
    let bad = |n: usize, l: &str| SchedError::InconsistentPlan(format!("manifest line {n}: {l:?}"));
    let mut out: BTreeMap<NodeId, Vec<TaskId>> = BTreeMap::new();
    let mut current = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("[node ").and_then(|r| r.strip_suffix(']')) {
            let node = NodeId(rest.trim().parse().map_err(|_| bad(i + 1, line))?);
            out.entry(node).or_default();
            current = Some(node);
        } else {
            let node = current.ok_or_else(|| bad(i + 1, line))?;
            let id = line.parse().map_err(|_| bad(i + 1, line))?;
            out.entry(node).or_default().push(TaskId(id));
        }
    }
    Ok(out)
}
