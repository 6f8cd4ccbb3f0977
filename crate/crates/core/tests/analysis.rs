mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use common::{all_finished, fixture, mock_algorithm, MOCK_IMAGE_A};
use mapbench_core::analysis::{
    create_analysis, export_raw, load_report, parse_analysis_spec, publish, resolve_selection, run_analysis,
    AnalysisError, LimitationRules, Mode, RuleGroup, SelectionSpec, SetOp, FAILED_PLACEMENT,
};
use mapbench_core::executor::RunStatus;
use mapbench_core::store::{parse_predicate, EvalOptions, RunRecord, StoreData};
use mapbench_core::trajeval::MetricStats;
use mapbench_core::{AlgorithmId, CombId, ConfigId, DatasetId, NodeId, RunId};
use proptest::prelude::*;

fn record(run: u64, config: u64) -> RunRecord {
    RunRecord {
        run_id: RunId(run),
        config_id: ConfigId(config),
        node_id: NodeId(1),
        cpu_type: "test".into(),
        core_count: 1,
        status: RunStatus::Finished,
        reason: None,
        cpu_mean: 0.0,
        cpu_max: 0.0,
        ram_max: 0.0,
        traj_length: Some(1.0),
        started_at: 0.0,
        finished_at: 1.0,
        time_scale: 1.0,
        run_dir: PathBuf::new(),
        prep_key: None,
        map: None,
    }
}

/// Configurations: (algorithm, nFeatures, comb parent), runs: config index.
fn materialize(configs: &[(u64, i64, Option<u64>)], runs: &[usize]) -> StoreData {
    let mut data = StoreData::default();
    data.catalog.add_algorithm(mock_algorithm(1, "a", MOCK_IMAGE_A)).unwrap();
    data.catalog.add_algorithm(mock_algorithm(2, "b", MOCK_IMAGE_A)).unwrap();
    for (i, (alg, nf, comb)) in configs.iter().enumerate() {
        let mut c = mapbench_core::config::MappingConfiguration::new(AlgorithmId(*alg), DatasetId(1), "seq0")
            .with_algorithm_param("nFeatures", *nf);
        c.id = ConfigId(i as u64 + 1);
        c.comb_parent = comb.map(CombId);
        data.configurations.insert(c.id, c);
    }
    for (i, c) in runs.iter().enumerate() {
        let r = record(i as u64 + 1, *c as u64 + 1);
        data.runs.insert(r.run_id, r);
    }
    data
}

/// Independent evaluation: materialize each source by scanning runs, then
/// evaluate the rule as an explicit expression over sorted vectors.
fn brute_force(data: &StoreData, spec: &SelectionSpec, limit_alg: u64, limit_nf: i64) -> Vec<u64> {
    let mut src: [Vec<u64>; 3] = Default::default();
    for r in data.runs.values() {
        let c = &data.configurations[&r.config_id];
        if spec.config_ids.contains(&c.id) {
            src[0].push(r.run_id.0);
        }
        if c.comb_parent.is_some_and(|p| spec.comb_ids.contains(&p)) {
            src[1].push(r.run_id.0);
        }
        let nf = c.algorithm_params["nFeatures"].as_i64().unwrap();
        if spec.limitation.is_some() && c.algorithm_id.0 == limit_alg && nf < limit_nf {
            src[2].push(r.run_id.0);
        }
    }
    let op = |o: SetOp, a: &Vec<u64>, b: &Vec<u64>| -> Vec<u64> {
        let mut out: Vec<u64> = match o {
            SetOp::Union => a.iter().chain(b).copied().collect(),
            SetOp::Intersection => a.iter().filter(|x| b.contains(x)).copied().collect(),
            SetOp::Difference => a.iter().filter(|x| !b.contains(x)).copied().collect(),
        };
        out.sort();
        out.dedup();
        out
    };
    let groups = spec.rule.as_ref().unwrap();
    let mut results = Vec::new();
    for g in groups {
        let mut v = src[g.sources[0] as usize].clone();
        for k in 1..g.sources.len() {
            v = op(g.ops[k - 1], &v, &src[g.sources[k] as usize]);
        }
        results.push(v);
    }
    let mut acc = results[0].clone();
    for i in 1..groups.len() {
        let join = *groups[i - 1].ops.last().unwrap();
        acc = op(join, &acc, &results[i]);
    }
    acc.sort();
    acc.dedup();
    acc
}

fn set_op() -> impl Strategy<Value = SetOp> {
    prop_oneof![Just(SetOp::Union), Just(SetOp::Intersection), Just(SetOp::Difference)]
}

fn rule() -> impl Strategy<Value = Vec<RuleGroup>> {
    prop::collection::vec((prop::collection::vec(0u8..3, 1..4), prop::collection::vec(set_op(), 4)), 1..4).prop_map(
        |raw| {
            let n = raw.len();
            raw.into_iter()
                .enumerate()
                .map(|(i, (sources, ops))| {
                    let want = sources.len() - 1 + usize::from(i + 1 < n);
                    RuleGroup {
                        ops: ops[..want].to_vec(),
                        sources,
                    }
                })
                .collect()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]
    #[test]
    fn selection_matches_brute_force(
        configs in prop::collection::vec((1u64..3, 500i64..2000, prop::option::of(1u64..4)), 1..12),
        run_picks in prop::collection::vec(any::<prop::sample::Index>(), 0..30),
        explicit in prop::collection::vec(1u64..14, 0..6),
        combs in prop::collection::vec(1u64..4, 0..3),
        limit_alg in 1u64..3,
        limit_nf in 500i64..2000,
        rule in rule(),
    ) {
        let runs: Vec<usize> = run_picks.iter().map(|i| i.index(configs.len())).collect();
        let data = materialize(&configs, &runs);
        let spec = SelectionSpec {
            config_ids: explicit.into_iter().map(ConfigId).collect(),
            comb_ids: combs.into_iter().map(CombId).collect(),
            limitation: Some(LimitationRules {
                algorithm_ids: BTreeSet::from([AlgorithmId(limit_alg)]),
                parameters: vec![parse_predicate(&format!("nFeatures < {limit_nf}")).unwrap()],
                ..Default::default()
            }),
            rule: Some(rule),
        };
        let got: Vec<u64> = resolve_selection(&spec, &data).unwrap().into_iter().map(|r| r.0).collect();
        prop_assert_eq!(got, brute_force(&data, &spec, limit_alg, limit_nf));
    }
}

#[test]
fn listing_rule_on_materialized_store() {
    // (1 U 2) - (3) over configs 1,2 (explicit), comb 1 children, limitation alg 2
    let data = materialize(&[(1, 1000, None), (1, 1000, Some(1)), (2, 1000, Some(1))], &[0, 1, 2, 2]);
    let doc = r#"
group_name: g
evaluation_form:
  3_accuracy_metrics_comparison: { choose: 1 }
configuration_choose:
  configuration_id: [1]
  comb_configuration_id: [1]
  limitation_rules:
    algorithm_id: [2]
  combination_rule:
    first_one: [0, 1]
    first_rule: ["U", "-"]
    second_one: [2]
"#;
    let spec = parse_analysis_spec(doc).unwrap();
    let got = resolve_selection(&spec.selection, &data).unwrap();
    assert_eq!(got, BTreeSet::from([RunId(1), RunId(2)]));
}

fn doc(modes: &str, configs: &[ConfigId]) -> String {
    let ids: Vec<String> = configs.iter().map(|c| c.0.to_string()).collect();
    format!(
        "group_name: test\ngroup_description: d\nevaluation_form:\n{modes}\nconfiguration_choose:\n  configuration_id: [{}]\n",
        ids.join(", ")
    )
}

#[test]
fn modes_over_a_small_campaign() {
    let fx = fixture(2, 3.0);
    let store = fx.store();
    let a1 = store.add_configuration(fx.config(1, 1)).unwrap();
    let b1 = store
        .add_configuration(fx.config(2, 1).with_algorithm_param("noise", 0.03))
        .unwrap();
    let weak = store
        .add_configuration(fx.config(1, 1).with_algorithm_param("coverage", 0.5))
        .unwrap();
    let a2 = store.add_configuration(fx.config(1, 2)).unwrap();
    let recs = fx.run_configs(&store, &[a1, b1, weak, a2], 2, 10.0);
    assert!(all_finished(&recs));
    let batch = store.evaluate_all_unevaluated(&EvalOptions::default(), &fx.layout);
    assert_eq!(batch.evaluated.len(), 4, "{:?}", batch.errors);
    let data = store.snapshot();

    // mode 1 refuses mixed datasets
    let mixed = parse_analysis_spec(&doc("  1_trajectory_comparison: { choose: 1 }", &[a1, a2])).unwrap();
    assert!(matches!(
        run_analysis(&mixed, &data, &fx.layout),
        Err(AnalysisError::MixedDatasetTrajectoryComparison(_))
    ));

    let spec = parse_analysis_spec(&doc(
        "  1_trajectory_comparison: { choose: 1 }\n  2_accuracy_metric_diagrams: 1\n  4_accuracy_histograms: { choose: 1, bins: 10 }\n  5_cpu_ram_comparison: 1\n  7_3d_scatter: { choose: 1, x: nFeatures, y: noise, z: ate_rmse }",
        &[a1, b1, weak],
    ))
    .unwrap();
    let report = run_analysis(&spec, &data, &fx.layout).unwrap();
    assert_eq!(report.selection.len(), 3);

    let traj = report.output(Mode::TrajectoryComparison).unwrap();
    assert!(!traj.table("reference").unwrap().rows.is_empty());
    assert!(!traj.table("estimates").unwrap().rows.is_empty());
    assert_eq!(traj.table("summary").unwrap().rows.len(), 3);

    let hist = report.output(Mode::AccuracyHistograms).unwrap().table("histogram").unwrap();
    assert_eq!(hist.rows.len(), 30);
    let resources = report.output(Mode::CpuRamComparison).unwrap();
    assert_eq!(resources.table("resources").unwrap().rows.len(), 3);
    assert!(!resources.table("series").unwrap().rows.is_empty());

    // the half-coverage run fails and is drawn 20% above the worst success
    let points = report.output(Mode::Scatter3d).unwrap().table("points").unwrap();
    assert_eq!(points.columns, ["x", "y", "z", "run_id", "status"]);
    let ate = |r: RunId| data.evaluations[&r].ate.rmse;
    let weak_run = recs[2].run_id;
    let max_good = ate(recs[0].run_id).max(ate(recs[1].run_id));
    for row in &points.rows {
        let id = RunId(row[3].as_u64().unwrap());
        if id == weak_run {
            assert_eq!(row[4], "failed");
            assert_eq!(row[2].as_f64().unwrap(), FAILED_PLACEMENT * max_good);
        } else {
            assert_eq!(row[4], "success");
            assert_eq!(row[2].as_f64().unwrap(), ate(id));
        }
    }
    assert_eq!(points.rows.len(), 3);

    // publishing is immutable and tokens are reachable
    let first = publish(&store, &fx.layout, report.clone(), true).unwrap();
    let second = publish(&store, &fx.layout, report, false).unwrap();
    assert_ne!(first.id, second.id);
    assert_ne!(first.token, second.token);
    assert_eq!(load_report(&fx.layout, &first.token).unwrap(), first);
    assert!(!store.snapshot().reports[&second.id].listed);
    assert!(matches!(load_report(&fx.layout, "../../etc"), Err(AnalysisError::NotFound(_))));
}

#[test]
fn scatter_without_successes_omits_failures() {
    let fx = fixture(1, 2.0);
    let store = fx.store();
    let weak = store
        .add_configuration(fx.config(1, 1).with_algorithm_param("coverage", 0.5))
        .unwrap();
    fx.run_configs(&store, &[weak], 1, 10.0);
    store.evaluate_all_unevaluated(&EvalOptions::default(), &fx.layout);
    let spec = parse_analysis_spec(&doc("  6_2d_scatter: { choose: 1, x: coverage, y: ate_rmse }", &[weak])).unwrap();
    let report = run_analysis(&spec, &store.snapshot(), &fx.layout).unwrap();
    assert!(report.output(Mode::Scatter2d).unwrap().tables[0].rows.is_empty());
    assert!(report.notices.iter().any(|n| n.contains("omitted")));
}

#[test]
fn empty_selection_exports_headers_only() {
    let fx = fixture(1, 1.0);
    let store = fx.store();
    let text = doc(
        "  3_accuracy_metrics_comparison: 1\n  7_3d_scatter: 1\n  repeatability_analysis: 1",
        &[ConfigId(99)],
    );
    let report = create_analysis(&store, &fx.layout, &text, true).unwrap();
    assert!(!report.notices.is_empty());
    let files = export_raw(&report);
    assert_eq!(files.len(), 3);
    let find = |name: &str| files.iter().find(|(f, _)| f == name).unwrap().1.clone();
    assert_eq!(find("3_accuracy_metrics_comparison__statistics.csv"), "config_id,metric,mean,std,n\n");
    assert_eq!(find("7_3d_scatter__points.csv"), "x,y,z,run_id,status\n");
    assert!(fx.layout.analyses_root().join(&report.token).join("7_3d_scatter__points.csv").exists());
}

#[test]
fn bad_axis_rejected() {
    let fx = fixture(1, 1.0);
    let store = fx.store();
    let text = doc("  6_2d_scatter: { choose: 1, x: sequence }", &[]);
    let spec = parse_analysis_spec(&text).unwrap();
    assert!(matches!(run_analysis(&spec, &store.snapshot(), &fx.layout), Err(AnalysisError::BadAxis(_))));
}

#[test]
fn repeated_runs_use_mean_and_std() {
    let fx = fixture(1, 2.0);
    let store = fx.store();
    let c = store
        .add_configuration(fx.config(1, 1).with_algorithm_param("noise", 0.05))
        .unwrap();
    let recs = fx.run_configs(&store, &[c; 5], 2, 10.0);
    assert!(all_finished(&recs));
    store.evaluate_all_unevaluated(&EvalOptions::default(), &fx.layout);
    let data = store.snapshot();
    let spec = parse_analysis_spec(&doc("  3_accuracy_metrics_comparison: { choose: 1, metrics: [ate_rmse] }", &[c])).unwrap();
    let report = run_analysis(&spec, &data, &fx.layout).unwrap();
    let table = &report.output(Mode::AccuracyMetricsComparison).unwrap().tables[0];
    assert_eq!(table.rows.len(), 1);
    let values: Vec<f64> = recs.iter().map(|r| data.evaluations[&r.run_id].ate.rmse).collect();
    let distinct: BTreeSet<u64> = values.iter().map(|v| v.to_bits()).collect();
    assert!(distinct.len() > 1, "mock runs should differ");
    let mean = values.iter().sum::<f64>() / 5.0;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0).sqrt();
    let row = &table.rows[0];
    assert!((row[2].as_f64().unwrap() - mean).abs() <= 1e-12);
    assert!((row[3].as_f64().unwrap() - std).abs() <= 1e-12);
    assert_eq!(row[4].as_u64(), Some(5));
    let direct = MetricStats::from_errors(&values).unwrap();
    assert_eq!((row[2].as_f64().unwrap(), row[3].as_f64().unwrap()), (direct.mean, direct.std));
}
