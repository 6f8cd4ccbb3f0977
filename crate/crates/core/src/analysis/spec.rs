//! Analysis request documents.
//!
//! ```yaml
//! group_name: "name"
//! group_description: "description"
//! evaluation_form:
//!   algorithm_dataset_type: 0
//!   1_trajectory_comparison:
//!     choose: 1
//!   7_3d_scatter: { choose: 1, x: frame_rate, y: resolution_factor, z: ate_rmse }
//! configuration_choose:
//!   configuration_id: [1, 2, 3]
//!   comb_configuration_id: [5]
//!   limitation_rules:
//!     algorithm_id: [12]
//!     dataset_id: [15]
//!     parameters_value: ["nFeatures < 1200"]
//!     evaluation_value:
//!       ate_rmse_nolimitation: 0
//!       ate_rmse_minimum:
//!       ate_rmse_maximum: 1.0
//!   combination_rule:
//!     first_one: [2]
//!     first_rule: ["I"]
//!     second_one: [0, 1]
//!     second_rule: ["U"]
//! ```
//!
//! Sources of the combination rule: 0 = `configuration_id`,
//! 1 = `comb_configuration_id`, 2 = `limitation_rules`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_yaml::Value;

use crate::ids::{AlgorithmId, CombId, ConfigId, DatasetId};
use crate::store::{parse_predicate, MetricBound, Predicate};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    TrajectoryComparison,
    AccuracyMetricDiagrams,
    AccuracyMetricsComparison,
    AccuracyHistograms,
    CpuRamComparison,
    Scatter2d,
    Scatter3d,
    /// Grouped per-configuration statistics of mode 3 under its own name.
    Repeatability,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::TrajectoryComparison,
        Mode::AccuracyMetricDiagrams,
        Mode::AccuracyMetricsComparison,
        Mode::AccuracyHistograms,
        Mode::CpuRamComparison,
        Mode::Scatter2d,
        Mode::Scatter3d,
        Mode::Repeatability,
    ];

    /// Document key.
    pub fn key(self) -> &'static str {
        match self {
            Mode::TrajectoryComparison => "1_trajectory_comparison",
            Mode::AccuracyMetricDiagrams => "2_accuracy_metric_diagrams",
            Mode::AccuracyMetricsComparison => "3_accuracy_metrics_comparison",
            Mode::AccuracyHistograms => "4_accuracy_histograms",
            Mode::CpuRamComparison => "5_cpu_ram_comparison",
            Mode::Scatter2d => "6_2d_scatter",
            Mode::Scatter3d => "7_3d_scatter",
            Mode::Repeatability => "repeatability_analysis",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Mode::ALL.into_iter().find(|m| m.key() == key)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeOptions {
    pub x: Option<String>,
    pub y: Option<String>,
    pub z: Option<String>,
    pub bins: Option<usize>,
    pub metrics: Option<Vec<String>>,
    /// Additional failure bound on ATE RMSE for scatter classification.
    pub max_ate: Option<f64>,
    pub min_traj_length: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
}

impl SetOp {
    pub fn parse(token: &str) -> Option<Self> {
        Some(match token.trim() {
            "U" | "u" | "union" | "∪" => SetOp::Union,
            "I" | "i" | "in" | "intersection" | "∩" => SetOp::Intersection,
            "-" | "D" | "d" | "C" | "c" | "difference" | "complement" | "\\" => SetOp::Difference,
            _ => return None,
        })
    }
}

/// One `<ordinal>_one` / `<ordinal>_rule` pair.
///
/// Within a group the sources are folded left to right with the listed
/// operators. A group that is followed by another carries one extra
/// operator joining its result to the next group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleGroup {
    pub sources: Vec<u8>,
    pub ops: Vec<SetOp>,
}

pub const SOURCE_CONFIG_IDS: u8 = 0;
pub const SOURCE_COMB_IDS: u8 = 1;
pub const SOURCE_LIMITATION: u8 = 2;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LimitationRules {
    pub algorithm_ids: BTreeSet<AlgorithmId>,
    pub dataset_ids: BTreeSet<DatasetId>,
    pub parameters: Vec<Predicate>,
    pub evaluation: Vec<MetricBound>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub config_ids: Vec<ConfigId>,
    pub comb_ids: Vec<CombId>,
    pub limitation: Option<LimitationRules>,
    /// `None` means: union of the declared id sources, intersected with the
    /// limitation rules when present.
    pub rule: Option<Vec<RuleGroup>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSpec {
    pub group_name: String,
    pub group_description: String,
    pub modes: Vec<(Mode, ModeOptions)>,
    pub selection: SelectionSpec,
}

const ORDINALS: [&str; 10] = [
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];

fn doc_err(msg: impl Into<String>) -> AnalysisError {
    AnalysisError::Document(msg.into())
}

fn as_str(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn get<'a>(map: &'a serde_yaml::Mapping, key: &str) -> Option<&'a Value> {
    map.get(Value::String(key.to_string())).filter(|v| !v.is_null())
}

/// Accepts `[1, 2]`, a scalar, or null.
fn list(v: Option<&Value>) -> Vec<Value> {
    match v {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Sequence(s)) => s.clone(),
        Some(other) => vec![other.clone()],
    }
}

fn ids(v: Option<&Value>, what: &str) -> Result<Vec<u64>, AnalysisError> {
    list(v)
        .iter()
        .map(|x| match x {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
        .ok_or_else(|| doc_err(format!("{what}: {x:?} is not an id"))))
        .collect()
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Bool(b) => *b,
        Value::Number(n) => n.as_f64().is_some_and(|x| x != 0.0),
        Value::String(s) => matches!(s.trim(), "1" | "true" | "yes"),
        _ => false,
    }
}

fn parse_mode(mode: Mode, v: &Value) -> Result<Option<ModeOptions>, AnalysisError> {
    let Value::Mapping(m) = v else {
        return Ok(truthy(v).then(ModeOptions::default));
    };
    if !get(m, "choose").is_some_and(truthy) {
        return Ok(None);
    }
    let text = |k: &str| get(m, k).and_then(as_str);
    let num = |k: &str| -> Result<Option<f64>, AnalysisError> {
        get(m, k)
            .map(|v| as_f64(v).ok_or_else(|| doc_err(format!("{mode}.{k} must be a number"))))
            .transpose()
    };
    Ok(Some(ModeOptions {
        x: text("x"),
        y: text("y"),
        z: text("z"),
        bins: num("bins")?.map(|b| b.max(1.0) as usize),
        metrics: get(m, "metrics").map(|v| list(Some(v)).iter().filter_map(as_str).collect()),
        max_ate: num("max_ate")?,
        min_traj_length: num("min_traj_length")?,
    }))
}

fn parse_evaluation_bounds(v: Option<&Value>) -> Result<Vec<MetricBound>, AnalysisError> {
    let Some(Value::Mapping(m)) = v else {
        return Ok(Vec::new());
    };
    let mut metrics: BTreeMap<String, (bool, Option<f64>, Option<f64>)> = BTreeMap::new();
    for (k, val) in m {
        let key = as_str(k).ok_or_else(|| doc_err("evaluation_value keys must be text"))?;
        let (metric, field) = ["_nolimitation", "_minimum", "_maximum", "_maximun"]
            .iter()
            .find_map(|suffix| key.strip_suffix(suffix).map(|m| (m.to_string(), *suffix)))
            .ok_or_else(|| doc_err(format!("unknown evaluation_value key {key:?}")))?;
        let entry = metrics.entry(metric).or_default();
        if val.is_null() {
            continue;
        }
        match field {
            "_nolimitation" => entry.0 = truthy(val),
            "_minimum" => entry.1 = Some(as_f64(val).ok_or_else(|| doc_err(format!("{key} must be a number")))?),
            _ => entry.2 = Some(as_f64(val).ok_or_else(|| doc_err(format!("{key} must be a number")))?),
        }
    }
    Ok(metrics
        .into_iter()
        .filter(|(_, (unlimited, min, max))| !unlimited && (min.is_some() || max.is_some()))
        .map(|(metric, (_, min, max))| MetricBound { metric, min, max })
        .collect())
}

fn parse_rule(m: &serde_yaml::Mapping) -> Result<Vec<RuleGroup>, AnalysisError> {
    let bad = |msg: String| AnalysisError::BadCombinationRule(msg);
    for k in m.keys() {
        let key = as_str(k).unwrap_or_default();
        let known = ORDINALS
            .iter()
            .any(|o| key == format!("{o}_one") || key == format!("{o}_rule"));
        if !known {
            return Err(bad(format!("unknown key {key:?}")));
        }
    }
    let mut groups = Vec::new();
    for (i, ord) in ORDINALS.iter().enumerate() {
        let one = get(m, &format!("{ord}_one"));
        let rule = get(m, &format!("{ord}_rule"));
        if one.is_none() && rule.is_none() {
            if ORDINALS[i..].iter().any(|o| get(m, &format!("{o}_one")).is_some()) {
                return Err(bad(format!("{ord}_one is missing")));
            }
            break;
        }
        let sources = list(one)
            .iter()
            .map(|v| match v {
                Value::Number(n) => n.as_u64().filter(|s| *s <= u64::from(SOURCE_LIMITATION)).map(|s| s as u8),
                _ => None,
            }
            .ok_or_else(|| bad(format!("{ord}_one: {v:?} is not a source (0, 1 or 2)"))))
            .collect::<Result<Vec<u8>, _>>()?;
        if sources.is_empty() {
            return Err(bad(format!("{ord}_one is empty")));
        }
        let ops = list(rule)
            .iter()
            .map(|v| {
                as_str(v)
                    .and_then(|s| SetOp::parse(&s))
                    .ok_or_else(|| bad(format!("{ord}_rule: unknown operator {v:?}")))
            })
            .collect::<Result<Vec<SetOp>, _>>()?;
        groups.push(RuleGroup { sources, ops });
    }
    if groups.is_empty() {
        return Err(bad("no groups".into()));
    }
    let last = groups.len() - 1;
    for (i, g) in groups.iter_mut().enumerate() {
        let k = g.sources.len();
        let want = if i == last { k - 1 } else { k };
        if g.ops.len() == want {
            continue;
        }
        // one operator may stand for every internal step of a group
        let internal = k - 1;
        if g.ops.len() == 1 + usize::from(i != last) && internal > 1 {
            let op = g.ops[0];
            let join = g.ops.last().copied();
            g.ops = vec![op; internal];
            if i != last {
                g.ops.extend(join);
            }
            continue;
        }
        return Err(bad(format!(
            "{}_rule has {} operators for {} sources (expected {want})",
            ORDINALS[i],
            g.ops.len(),
            k
        )));
    }
    Ok(groups)
}

/// Parses a YAML analysis document.
pub fn parse_analysis_spec(text: &str) -> Result<AnalysisSpec, AnalysisError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| doc_err(e.to_string()))?;
    let Value::Mapping(root) = doc else {
        return Err(doc_err("top level must be a mapping"));
    };
    let group_name = get(&root, "group_name").and_then(as_str).unwrap_or_default();
    if group_name.trim().is_empty() {
        return Err(doc_err("group_name must not be empty"));
    }
    let group_description = get(&root, "group_description").and_then(as_str).unwrap_or_default();

    let mut modes = Vec::new();
    if let Some(Value::Mapping(form)) = get(&root, "evaluation_form") {
        for (k, v) in form {
            let key = as_str(k).unwrap_or_default();
            if key == "algorithm_dataset_type" {
                continue;
            }
            let mode = Mode::from_key(&key).ok_or_else(|| AnalysisError::UnknownMode(key.clone()))?;
            if let Some(opts) = parse_mode(mode, v)? {
                modes.push((mode, opts));
            }
        }
    }
    if modes.is_empty() {
        return Err(AnalysisError::NoModes);
    }
    modes.sort_by_key(|(m, _)| *m);

    let mut selection = SelectionSpec::default();
    if let Some(Value::Mapping(choose)) = get(&root, "configuration_choose") {
        selection.config_ids = ids(get(choose, "configuration_id"), "configuration_id")?
            .into_iter()
            .map(ConfigId)
            .collect();
        selection.comb_ids = ids(get(choose, "comb_configuration_id"), "comb_configuration_id")?
            .into_iter()
            .map(CombId)
            .collect();
        if let Some(Value::Mapping(lim)) = get(choose, "limitation_rules") {
            let parameters = list(get(lim, "parameters_value"))
                .iter()
                .map(|v| {
                    let text = as_str(v).ok_or_else(|| doc_err("parameters_value entries must be text"))?;
                    parse_predicate(&text).map_err(AnalysisError::Store)
                })
                .collect::<Result<Vec<_>, _>>()?;
            selection.limitation = Some(LimitationRules {
                algorithm_ids: ids(get(lim, "algorithm_id"), "algorithm_id")?
                    .into_iter()
                    .map(AlgorithmId)
                    .collect(),
                dataset_ids: ids(get(lim, "dataset_id"), "dataset_id")?
                    .into_iter()
                    .map(DatasetId)
                    .collect(),
                parameters,
                evaluation: parse_evaluation_bounds(get(lim, "evaluation_value"))?,
            });
        }
        if let Some(Value::Mapping(rule)) = get(choose, "combination_rule") {
            selection.rule = Some(parse_rule(rule)?);
        }
    }
    Ok(AnalysisSpec {
        group_name,
        group_description,
        modes,
        selection,
    })
}
