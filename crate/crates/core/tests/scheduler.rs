use std::collections::{BTreeMap, BTreeSet};

use mapbench_core::scheduler::{
    classify, plan_cloud, plan_cluster, plan_cluster_balanced, simulate, transfer_cost, ClusterPlan, CostModel,
    IntervalKind, PlanTask, Resource, Strategy, GB,
};
use mapbench_core::{AlgorithmId, DatasetId, NodeId, TaskId};
use proptest::prelude::{any, prop, prop_assert, prop_assert_eq, proptest, ProptestConfig, TestCaseError};
use proptest::strategy::Strategy as _;

fn task_set() -> impl proptest::strategy::Strategy<Value = Vec<PlanTask>> {
    prop::collection::vec((1u64..5, 1u64..5), 0..40).prop_map(|pairs| {
        pairs
            .into_iter()
            .enumerate()
            .map(|(i, (a, d))| PlanTask {
                id: TaskId(i as u64 + 1),
                algorithm: AlgorithmId(a),
                dataset: DatasetId(d),
            })
            .collect()
    })
}

fn check_partition(plan: &ClusterPlan, tasks: &[PlanTask]) -> Result<(), TestCaseError> {
    let mut seen = BTreeSet::new();
    for ids in plan.manifests.values() {
        for id in ids {
            prop_assert!(seen.insert(*id), "task {} in two manifests", id);
        }
    }
    let all: BTreeSet<TaskId> = tasks.iter().map(|t| t.id).collect();
    prop_assert_eq!(seen, all);
    for class in classify(tasks) {
        let nodes: BTreeSet<NodeId> = class.tasks.iter().map(|t| plan.node_of(*t).unwrap()).collect();
        prop_assert_eq!(nodes.len(), 1, "class {} split", class.key);
        prop_assert_eq!(plan.assignment[&class.key], *nodes.first().unwrap());
    }
    Ok(())
}

/// Counts unique (node, resource) pairs directly from the manifests.
fn brute_force_bytes(plan: &ClusterPlan, tasks: &[PlanTask], model: &CostModel) -> u64 {
    let mut pairs = BTreeSet::new();
    for (node, ids) in &plan.manifests {
        for id in ids {
            let t = tasks.iter().find(|t| t.id == *id).unwrap();
            pairs.insert((*node, Resource::Image(t.algorithm)));
            pairs.insert((*node, Resource::Dataset(t.dataset)));
        }
    }
    pairs
        .into_iter()
        .filter(|p| !model.preloaded.contains(p))
        .map(|(_, r)| match r {
            Resource::Image(a) => model.image_bytes.get(&a).copied().unwrap_or(3 * GB),
            Resource::Dataset(_) => 5 * GB / 2,
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]
    #[test]
    fn random_plans_are_well_formed(tasks in task_set(), m in 1usize..30, seed in any::<u64>()) {
        let plan = plan_cluster(&tasks, m, seed).unwrap();
        prop_assert_eq!(plan.controllers.len(), m.min(tasks.len()));
        check_partition(&plan, &tasks)?;
        prop_assert_eq!(plan_cluster(&tasks, m, seed).unwrap(), plan);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]
    #[test]
    fn balanced_plans_are_well_formed(tasks in task_set(), m in 1usize..10) {
        let plan = plan_cluster_balanced(&tasks, m, &CostModel::default()).unwrap();
        prop_assert_eq!(plan.controllers.len(), m.min(tasks.len()));
        check_partition(&plan, &tasks)?;
    }

    #[test]
    fn transfer_cost_matches_accounting(
        tasks in task_set(),
        m in 1usize..6,
        picks in prop::collection::vec(any::<prop::sample::Index>(), 40),
        preload in prop::collection::vec((1u64..6, 1u64..5), 0..6),
        big_image in 1u64..5,
    ) {
        let mut model = CostModel::default();
        model.image_bytes.insert(AlgorithmId(big_image), 7 * GB);
        for (n, a) in preload {
            model.preloaded.insert((NodeId(n), Resource::Image(AlgorithmId(a))));
        }
        // arbitrary (possibly class-splitting) manifests
        let mut manifests: BTreeMap<NodeId, Vec<TaskId>> = BTreeMap::new();
        for (t, p) in tasks.iter().zip(&picks) {
            manifests.entry(NodeId(p.index(m) as u64 + 1)).or_default().push(t.id);
        }
        let plan = ClusterPlan::from_manifests(&tasks, m, manifests).unwrap();
        let cost = transfer_cost(&plan, &model).unwrap();
        prop_assert_eq!(cost.total, brute_force_bytes(&plan, &tasks, &model));
        prop_assert_eq!(cost.per_node.values().sum::<u64>(), cost.total);
    }

    #[test]
    fn simulation_conserves_task_time(tasks in task_set(), m in 1usize..6, seed in any::<u64>(), secs in prop::collection::vec(1u32..500, 40)) {
        let mut model = CostModel::default();
        for (t, s) in tasks.iter().zip(&secs) {
            model.task_durations.insert(t.id, *s as f64);
        }
        let plan = plan_cluster(&tasks, m, seed).unwrap();
        let tl = simulate(&plan, None, &model).unwrap();
        let want: f64 = tasks.iter().map(|t| model.task_durations[&t.id]).sum();
        prop_assert!((tl.total_task_time() - want).abs() <= 1e-6 * want.max(1.0));
        prop_assert_eq!(tl.bytes, transfer_cost(&plan, &model).unwrap().total);
        for node in plan.controllers.iter() {
            let mut own: Vec<_> = tl.intervals.iter().filter(|i| i.node == *node).collect();
            own.sort_by(|a, b| a.start.total_cmp(&b.start));
            for w in own.windows(2) {
                prop_assert!(w[1].start >= w[0].end - 1e-9);
            }
        }
        prop_assert_eq!(simulate(&plan, None, &model).unwrap(), tl);
    }
}

/// Static resources of a campaign over four algorithm images and four
/// datasets (22 GB at the default sizes).
pub fn campaign_resources() -> Vec<Resource> {
    (1..=4)
        .flat_map(|i| [Resource::Image(AlgorithmId(i)), Resource::Dataset(DatasetId(i))])
        .collect()
}

#[test]
fn snapshot_transfers_once() {
    let model = CostModel::default();
    for n in 1..=32 {
        let snap = plan_cloud(n, Strategy::Snapshot, &campaign_resources(), &model).unwrap();
        let direct = plan_cloud(n, Strategy::Direct, &campaign_resources(), &model).unwrap();
        assert_eq!(snap.network_transfers(), 1);
        assert_eq!(direct.network_transfers(), n);
        assert_eq!(direct.network_bytes(), n as u64 * snap.network_bytes());
    }
}

/// Every node runs three tasks of one class drawn from the 4 x 4 campaign
/// grid, so per-node work is identical and only provisioning differs.
fn uniform_plan(n: usize) -> ClusterPlan {
    let mut tasks = Vec::new();
    let mut manifests = BTreeMap::new();
    for k in 0..n as u64 {
        let ids: Vec<TaskId> = (0..3).map(|j| TaskId(k * 3 + j + 1)).collect();
        for id in &ids {
            tasks.push(PlanTask {
                id: *id,
                algorithm: AlgorithmId(k % 4 + 1),
                dataset: DatasetId(k / 4 % 4 + 1),
            });
        }
        manifests.insert(NodeId(k + 1), ids);
    }
    ClusterPlan::from_manifests(&tasks, n, manifests).unwrap()
}

#[test]
fn snapshot_faster_from_four_nodes() {
    let mut model = CostModel::default();
    model.default_task_seconds = Some(300.0);
    for n in 4..=64usize {
        let plan = uniform_plan(n);
        let run = |s| {
            let p = plan_cloud(n, s, &campaign_resources(), &model).unwrap();
            simulate(&plan, Some(&p), &model).unwrap()
        };
        let (snap, direct) = (run(Strategy::Snapshot), run(Strategy::Direct));
        assert!(snap.makespan < direct.makespan, "n={n}: {} vs {}", snap.makespan, direct.makespan);
        // provisioned nodes never fetch during the campaign
        assert!(snap.intervals.iter().all(|i| i.kind != IntervalKind::Transfer || i.task.is_none()));
        assert!(direct.intervals.iter().all(|i| i.kind != IntervalKind::Transfer || i.task.is_none()));
    }
}

#[test]
fn direct_wins_below_the_crossover() {
    // 5.5 GB per node: transfers take 8.8 s each, snapshot + clone 90 s
    let model = CostModel::default();
    let small = [Resource::Image(AlgorithmId(1)), Resource::Dataset(DatasetId(1))];
    let at = |n, s| plan_cloud(n, s, &small, &model).unwrap().makespan(&model);
    assert!(at(4, Strategy::Direct) < at(4, Strategy::Snapshot));
    assert!(at(16, Strategy::Snapshot) < at(16, Strategy::Direct));
}
