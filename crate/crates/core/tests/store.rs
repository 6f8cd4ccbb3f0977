mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{all_finished, fixture};
use mapbench_core::config::MappingConfiguration;
use mapbench_core::executor::RunStatus;
use mapbench_core::store::{
    export_runs_csv, search, EvalOptions, MetricBound, SearchQuery, SearchTarget, StoreError,
    RUN_COLUMNS,
};
use mapbench_core::ConfigId;

#[test]
fn ingest_coverage_and_idempotency() {
    let fx = fixture(1, 2.0);
    let store = fx.store();
    let full = store.add_configuration(fx.config(1, 1)).unwrap();
    let half = store
        .add_configuration(fx.config(1, 1).with_algorithm_param("coverage", 0.5))
        .unwrap();
    let recs = fx.run_configs(&store, &[full, half], 2, 10.0);
    assert!(all_finished(&recs));
    assert_eq!(recs[0].traj_length, Some(1.0));
    assert!((recs[1].traj_length.unwrap() - 0.5).abs() < 0.03, "{:?}", recs[1].traj_length);

    let (again, fresh) = store.ingest(&recs[0].run_dir, full, &fx.layout).unwrap();
    assert!(!fresh);
    assert_eq!(again, recs[0]);
    assert!(matches!(
        store.ingest(&recs[0].run_dir, half, &fx.layout),
        Err(StoreError::CorruptResults(_))
    ));
}

#[test]
fn concurrent_ingest_creates_one_record() {
    let fx = fixture(1, 1.0);
    let store = fx.store();
    let c = store.add_configuration(fx.config(1, 1)).unwrap();
    let tasks = store.create_tasks(&[c]).unwrap();
    let started = store.start_tasks(&tasks).unwrap();
    let task = started[0].1.clone();
    let result = fx.executor(10.0).execute(&task, &store.snapshot().catalog);
    let fresh: usize = std::thread::scope(|s| {
        let handles: Vec<_> = (0..8)
            .map(|_| s.spawn(|| store.ingest(&result.run_dir, c, &fx.layout).unwrap().1))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap() as usize).sum()
    });
    assert_eq!(fresh, 1);
    assert_eq!(store.snapshot().runs.len(), 1);
}

#[test]
fn evaluation_offsets_failures_and_batches() {
    let fx = fixture(1, 3.0);
    let store = fx.store();
    let offset = store
        .add_configuration(
            fx.config(1, 1)
                .with_algorithm_param("noise", 0.0)
                .with_algorithm_param("offset", 0.1),
        )
        .unwrap();
    let failing = store
        .add_configuration(fx.config(1, 1).with_algorithm_param("exit_code", 3i64))
        .unwrap();
    let plain = store.add_configuration(fx.config(2, 1)).unwrap();
    let recs = fx.run_configs(&store, &[offset, failing, plain, plain, plain, plain], 2, 10.0);
    assert_eq!(recs[1].status, RunStatus::Failed);

    let raw = EvalOptions {
        align: false,
        ..Default::default()
    };
    let e = store.evaluate(recs[0].run_id, &raw, &fx.layout).unwrap();
    assert!((e.ate.rmse - 0.1).abs() < 1e-12);
    assert!(e.ate.std.abs() < 1e-9);
    assert!(matches!(
        store.evaluate(recs[0].run_id, &raw, &fx.layout),
        Err(StoreError::AlreadyEvaluated(_))
    ));
    let forced = EvalOptions { force: true, ..raw };
    store.evaluate(recs[0].run_id, &forced, &fx.layout).unwrap();
    assert!(matches!(
        store.evaluate(recs[1].run_id, &raw, &fx.layout),
        Err(StoreError::RunNotFinished(_))
    ));
    store.evaluate(recs[2].run_id, &EvalOptions::default(), &fx.layout).unwrap();

    // five finished runs, two already evaluated
    let batch = store.evaluate_all_unevaluated(&EvalOptions::default(), &fx.layout);
    assert_eq!(batch.evaluated.len(), 3, "{batch:?}");
    assert!(batch.errors.is_empty());
    let snap = store.snapshot();
    for (id, e) in &snap.evaluations {
        assert_eq!(snap.runs[id].status, RunStatus::Finished);
        for f in mapbench_core::store::BUNDLE_FILES {
            assert!(e.bundle_dir.join(f).is_file(), "{f}");
        }
    }
    let csv = export_runs_csv(&snap, &snap.runs.keys().copied().collect::<Vec<_>>()).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, RUN_COLUMNS.join(","));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn search_examples() {
    let fx = fixture(1, 1.0);
    let store = fx.store();
    let mut ids = BTreeMap::new();
    for n in [1500i64, 2000, 2500] {
        ids.insert(n, store.add_configuration(fx.config(1, 1).with_algorithm_param("nFeatures", n)).unwrap());
    }
    let q = SearchQuery::parse("nFeatures => 2000").unwrap();
    assert_eq!(
        store.search(&q, SearchTarget::Configurations).unwrap(),
        vec![ids[&2000].0, ids[&2500].0]
    );
    let bad = SearchQuery::parse("nFeatures => abc").unwrap();
    assert!(matches!(
        store.search(&bad, SearchTarget::Configurations),
        Err(StoreError::TypeMismatch(_))
    ));
    let unknown = SearchQuery::parse("nothing = 1").unwrap();
    assert!(matches!(
        store.search(&unknown, SearchTarget::Configurations),
        Err(StoreError::UnknownKey(_))
    ));
    let text_lt = SearchQuery::parse("sequence < a").unwrap();
    assert!(matches!(
        store.search(&text_lt, SearchTarget::Configurations),
        Err(StoreError::TypeMismatch(_))
    ));
}

#[test]
fn metric_bound_on_evaluations() {
    let fx = fixture(1, 3.0);
    let store = fx.store();
    let a = store
        .add_configuration(fx.config(1, 1).with_algorithm_param("noise", 0.0).with_algorithm_param("offset", 0.5))
        .unwrap();
    let b = store
        .add_configuration(fx.config(1, 1).with_algorithm_param("noise", 0.0).with_algorithm_param("offset", 1.2))
        .unwrap();
    let recs = fx.run_configs(&store, &[a, b], 1, 10.0);
    let raw = EvalOptions {
        align: false,
        ..Default::default()
    };
    store.evaluate_all_unevaluated(&raw, &fx.layout);
    let q = SearchQuery {
        metric_bounds: vec![MetricBound {
            metric: "ate_rmse".into(),
            min: None,
            max: Some(1.0),
        }],
        ..Default::default()
    };
    assert_eq!(store.search(&q, SearchTarget::Evaluations).unwrap(), vec![recs[0].run_id.0]);
    let q = SearchQuery::parse("traj_length > 0.75").unwrap();
    assert_eq!(store.search(&q, SearchTarget::Evaluations).unwrap().len(), 2);
    assert!(matches!(
        store.search(&q, SearchTarget::Configurations),
        Err(StoreError::UnknownKey(_))
    ));
}

mod linear_scan {
    use super::*;
    use mapbench_core::config::{Catalog, ValueKind};
    use mapbench_core::store::{config_value, CmpOp, Predicate, StoreData};
    use proptest::prelude::*;

    fn corpus(values: &[(u64, u64, i64, f64)]) -> StoreData {
        let mut data = StoreData {
            catalog: Catalog::default(),
            ..Default::default()
        };
        for a in 1..=3 {
            data.catalog
                .add_algorithm(common::mock_algorithm(a, &format!("a{a}"), "img"))
                .unwrap();
        }
        for d in 1..=3 {
            let spec = mapbench_core::synthetic::dataset_spec(
                mapbench_core::DatasetId(d),
                "d",
                &["seq0"],
                &Default::default(),
            );
            data.catalog.add_dataset(spec).unwrap();
        }
        for (i, (a, d, n, noise)) in values.iter().enumerate() {
            let mut c = MappingConfiguration::new((*a).into(), (*d).into(), "seq0")
                .with_algorithm_param("nFeatures", *n)
                .with_algorithm_param("noise", *noise);
            c.id = ConfigId(i as u64 + 1);
            data.configurations.insert(c.id, c);
        }
        data
    }

    fn oracle(data: &StoreData, q: &SearchQuery) -> Vec<u64> {
        let mut out = Vec::new();
        for c in data.configurations.values() {
            let mut ok = q.algorithms.is_empty() || q.algorithms.contains(&c.algorithm_id);
            ok &= q.datasets.is_empty() || q.datasets.contains(&c.dataset_id);
            for p in &q.predicates {
                let actual = config_value(data, c, &p.key).unwrap().as_f64().unwrap();
                let want: f64 = p.value.parse().unwrap();
                ok &= match p.op {
                    CmpOp::Eq => actual == want,
                    CmpOp::Lt => actual < want,
                    CmpOp::Gt => actual > want,
                    CmpOp::Le => actual <= want,
                    CmpOp::Ge => actual >= want,
                };
            }
            if ok {
                out.push(c.id.0);
            }
        }
        out
    }

    fn op() -> impl Strategy<Value = CmpOp> {
        prop_oneof![Just(CmpOp::Eq), Just(CmpOp::Lt), Just(CmpOp::Gt), Just(CmpOp::Le), Just(CmpOp::Ge)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn search_equals_linear_scan(
            values in prop::collection::vec((1u64..=3, 1u64..=3, 0i64..5, 0u8..4), 1000),
            algs in prop::collection::btree_set(1u64..=3, 0..3),
            dss in prop::collection::btree_set(1u64..=3, 0..3),
            preds in prop::collection::vec((any::<bool>(), op(), 0i64..5), 0..3),
        ) {
            let values: Vec<(u64, u64, i64, f64)> = values
                .into_iter()
                .map(|(a, d, n, z)| (a, d, 1000 + 500 * n, z as f64 * 0.05))
                .collect();
            let data = corpus(&values);
            let q = SearchQuery {
                algorithms: algs.into_iter().map(Into::into).collect::<BTreeSet<_>>(),
                datasets: dss.into_iter().map(Into::into).collect(),
                predicates: preds
                    .into_iter()
                    .map(|(which, op, k)| if which {
                        Predicate { key: "nFeatures".into(), op, value: (1000 + 500 * k).to_string() }
                    } else {
                        Predicate { key: "noise".into(), op, value: format!("{:?}", k as f64 * 0.05) }
                    })
                    .collect(),
                metric_bounds: vec![],
            };
            prop_assume!(!q.is_empty());
            assert_eq!(data.catalog.param_kind("nFeatures"), Some(ValueKind::Integer));
            prop_assert_eq!(search(&data, &q, SearchTarget::Configurations).unwrap(), oracle(&data, &q));
        }
    }

    #[test]
    fn real_literal_for_integer_key_is_mismatch() {
        let data = corpus(&[(1, 1, 1500, 0.1)]);
        let q = SearchQuery {
            predicates: vec![Predicate { key: "nFeatures".into(), op: CmpOp::Eq, value: "1500.5".into() }],
            ..Default::default()
        };
        assert!(matches!(search(&data, &q, SearchTarget::Configurations), Err(StoreError::TypeMismatch(_))));
    }
}
