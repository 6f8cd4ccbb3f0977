//! Deterministic inputs for the benchmarks.

use std::collections::BTreeMap;

use mapbench_core::config::{CombinationSpec, MappingConfiguration, ParamPath, ParamValue};
use mapbench_core::ids::{AlgorithmId, CombId, DatasetId, TaskId};
use mapbench_core::scheduler::PlanTask;
use mapbench_core::trajeval::{Pose, Trajectory};
use nalgebra::{UnitQuaternion, Vector3};

/// A helix sampled at 20 Hz.
pub fn helix(n: usize) -> Trajectory {
    let poses = (0..n)
        .map(|i| {
            let t = i as f64 * 0.05;
            Pose::new(
                t,
                Vector3::new(t.cos() * 3.0, t.sin() * 3.0, 0.1 * t),
                UnitQuaternion::from_euler_angles(0.0, 0.0, t),
            )
        })
        .collect();
    Trajectory::new(poses).expect("ordered timestamps")
}

/// `reference` with a small rigid offset and a bounded wobble.
pub fn perturbed(reference: &Trajectory) -> Trajectory {
    let rot = UnitQuaternion::from_euler_angles(0.01, -0.02, 0.3);
    let poses = reference
        .poses()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let wobble = Vector3::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos(), (i as f64 * 0.4).sin()) * 0.02;
            Pose::new(p.t + 0.003, rot * p.position + Vector3::new(1.0, -2.0, 0.5) + wobble, rot * p.orientation)
        })
        .collect();
    Trajectory::new(poses).expect("ordered timestamps")
}

/// `keys` integer parameters with `values` values each.
pub fn sweep(keys: usize, values: usize) -> CombinationSpec {
    let mut base = MappingConfiguration::new(AlgorithmId(1), DatasetId(1), "seq0");
    let mut multi = BTreeMap::new();
    for k in 0..keys {
        let key = format!("p{k}");
        base = base.with_algorithm_param(&key, 0i64);
        multi.insert(
            ParamPath::algorithm_param(&key),
            (0..values as i64).map(ParamValue::Int).collect(),
        );
    }
    CombinationSpec {
        id: CombId(1),
        name: "bench".into(),
        base,
        multi_values: multi,
        linked_groups: Vec::new(),
    }
}

/// `algorithms` × `datasets` classes of `per_class` tasks each.
pub fn campaign(algorithms: u64, datasets: u64, per_class: u64) -> Vec<PlanTask> {
    let mut out = Vec::new();
    for a in 1..=algorithms {
        for d in 1..=datasets {
            for _ in 0..per_class {
                out.push(PlanTask {
                    id: TaskId(out.len() as u64 + 1),
                    algorithm: AlgorithmId(a),
                    dataset: DatasetId(d),
                });
            }
        }
    }
    out
}
