use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{NodeId, TaskId};

use super::{ClusterPlan, CostModel, ProvisionPlan, Resource, SchedError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Provision,
    Transfer,
    Prep,
    Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub node: NodeId,
    pub kind: IntervalKind,
    pub task: Option<TaskId>,
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub intervals: Vec<Interval>,
    pub makespan: f64,
    /// Bytes moved over the shared link, provisioning included.
    pub bytes: u64,
}

impl Timeline {
    pub fn task_time(&self, node: NodeId) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.node == node && i.kind == IntervalKind::Task)
            .map(Interval::duration)
            .sum()
    }

    pub fn total_task_time(&self) -> f64 {
        self.intervals
            .iter()
            .filter(|i| i.kind == IntervalKind::Task)
            .map(Interval::duration)
            .sum()
    }
}

struct NodeState<'a> {
    id: NodeId,
    time: f64,
    queue: &'a [TaskId],
    next: usize,
    have: BTreeSet<Resource>,
    prepared: BTreeSet<Resource>,
}

/// Discrete-event run of a cluster plan, optionally preceded by cloud
/// provisioning.
///
/// Each controller works through its manifest in order. Before a task it
/// fetches missing resources from the master over one shared FIFO link,
/// pre-processes a dataset on first use, then runs the task. Events are
/// processed in time order with ties broken by node id, so the result is
/// deterministic.
pub fn simulate(
    plan: &ClusterPlan,
    provision: Option<&ProvisionPlan>,
    model: &CostModel,
) -> Result<Timeline, SchedError> {
    model.validate()?;
    let by_id: BTreeMap<TaskId, _> = plan.tasks.iter().map(|t| (t.id, t)).collect();
    let mut intervals = Vec::new();
    let mut link = 0.0f64;
    let mut bytes = 0u64;
    let mut ready: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut provisioned: Vec<Resource> = Vec::new();
    if let Some(p) = provision {
        let (iv, r, l) = p.schedule(model);
        intervals.extend(iv);
        ready = r;
        link = l;
        bytes += p.network_bytes();
        provisioned = p.resources.clone();
    }

    let mut nodes = Vec::new();
    for (node, queue) in &plan.manifests {
        if queue.is_empty() {
            continue;
        }
        let start = match provision {
            Some(_) => *ready.get(node).ok_or_else(|| {
                SchedError::InconsistentPlan(format!("controller {node} is not provisioned"))
            })?,
            None => 0.0,
        };
        for id in queue {
            if !by_id.contains_key(id) {
                return Err(SchedError::InconsistentPlan(format!("task {id} has no identity")));
            }
            if model.task_seconds(*id).is_none() {
                return Err(SchedError::InconsistentPlan(format!("task {id} has no duration")));
            }
        }
        let mut have: BTreeSet<Resource> = provisioned.iter().copied().collect();
        have.extend(model.preloaded.iter().filter(|(n, _)| n == node).map(|(_, r)| *r));
        nodes.push(NodeState {
            id: *node,
            time: start,
            queue,
            next: 0,
            have,
            prepared: BTreeSet::new(),
        });
    }

    loop {
        let Some(state) = nodes
            .iter_mut()
            .filter(|s| s.next < s.queue.len())
            .min_by(|a, b| a.time.total_cmp(&b.time).then(a.id.cmp(&b.id)))
        else {
            break;
        };
        let id = state.queue[state.next];
        let task = by_id[&id];
        if let Some(r) = task.resources().into_iter().find(|r| !state.have.contains(r)) {
            let size = model.size(r)?;
            let start = state.time.max(link);
            let end = start + model.transfer_seconds(size);
            intervals.push(Interval {
                node: state.id,
                kind: IntervalKind::Transfer,
                task: Some(id),
                start,
                end,
            });
            link = end;
            bytes += size;
            state.time = end;
            state.have.insert(r);
            continue;
        }
        let dataset = task.resources()[1];
        if state.prepared.insert(dataset) {
            let d = model.prep_seconds(model.size(dataset)?);
            if d > 0.0 {
                intervals.push(Interval {
                    node: state.id,
                    kind: IntervalKind::Prep,
                    task: Some(id),
                    start: state.time,
                    end: state.time + d,
                });
                state.time += d;
            }
            continue;
        }
        let d = model.task_seconds(id).expect("checked above");
        intervals.push(Interval {
            node: state.id,
            kind: IntervalKind::Task,
            task: Some(id),
            start: state.time,
            end: state.time + d,
        });
        state.time += d;
        state.next += 1;
    }

    let makespan = intervals
        .iter()
        .map(|i| i.end)
        .chain(ready.values().copied())
        .fold(0.0, f64::max);
    Ok(Timeline {
        intervals,
        makespan,
        bytes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{AlgorithmId, DatasetId};
    use crate::scheduler::{plan_cloud, plan_cluster, plan_cluster_balanced, PlanTask, Strategy};

    fn tasks(classes: u64, per: u64) -> Vec<PlanTask> {
        let mut out = Vec::new();
        for c in 0..classes {
            for k in 0..per {
                out.push(PlanTask {
                    id: TaskId(c * per + k + 1),
                    algorithm: AlgorithmId(c + 1),
                    dataset: DatasetId(1),
                });
            }
        }
        out
    }

    fn model(task: f64) -> CostModel {
        CostModel {
            default_task_seconds: Some(task),
            prep_seconds_per_gb: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn sequential_tasks_without_transfer() {
        let t = tasks(1, 3);
        let mut m = model(10.0);
        m.preloaded.insert((NodeId(1), Resource::Image(AlgorithmId(1))));
        m.preloaded.insert((NodeId(1), Resource::Dataset(DatasetId(1))));
        let plan = plan_cluster(&t, 1, 0).unwrap();
        let tl = simulate(&plan, None, &m).unwrap();
        assert_eq!(tl.makespan, 30.0);
        assert_eq!(tl.bytes, 0);

        let prov = plan_cloud(1, Strategy::Direct, &[], &m).unwrap();
        let tl = simulate(&plan, Some(&prov), &m).unwrap();
        assert_eq!(tl.makespan, 30.0 + m.node_create_seconds);
    }

    #[test]
    fn more_nodes_shorter_makespan() {
        let t = tasks(2, 3);
        let m = model(100.0);
        let one = simulate(&plan_cluster_balanced(&t, 1, &m).unwrap(), None, &m).unwrap();
        let two = simulate(&plan_cluster_balanced(&t, 2, &m).unwrap(), None, &m).unwrap();
        assert!(two.makespan < one.makespan);
    }

    #[test]
    fn transfers_share_the_link() {
        let t = tasks(2, 1);
        let m = model(1.0);
        let plan = plan_cluster_balanced(&t, 2, &m).unwrap();
        let tl = simulate(&plan, None, &m).unwrap();
        let mut transfers: Vec<_> = tl.intervals.iter().filter(|i| i.kind == IntervalKind::Transfer).collect();
        transfers.sort_by(|a, b| a.start.total_cmp(&b.start));
        assert_eq!(transfers.len(), 4);
        for w in transfers.windows(2) {
            assert!(w[1].start >= w[0].end - 1e-9);
        }
    }

    #[test]
    fn missing_duration_is_inconsistent() {
        let t = tasks(1, 1);
        let plan = plan_cluster(&t, 1, 0).unwrap();
        assert!(matches!(
            simulate(&plan, None, &CostModel::default()),
            Err(SchedError::InconsistentPlan(_))
        ));
    }
}
