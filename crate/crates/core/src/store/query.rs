//! Search over configurations and evaluated runs.
//!
//! Predicates read `key OP value` with OP one of `=`, `<`, `>`, `<=`, `=>`
//! (`=>` means "at least"; `>=` is accepted as an alias). The value kind of
//! a key comes from the algorithm parameter templates, the well-known
//! dataset parameters, or the run metrics; text and flag keys allow `=`
//! only.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{
    dataset_param_kind, MappingConfiguration, ParamValue, ValueKind, FRAME_RATE, RESOLUTION_FACTOR,
    SAVE_MAP,
};
use crate::ids::{AlgorithmId, DatasetId};
use crate::trajeval::MetricStats;

use super::{RunRecord, StoreData, StoreError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=>")]
    Ge,
}

impl CmpOp {
    fn from_token(tok: &str) -> Option<Self> {
        Some(match tok {
            "=" => CmpOp::Eq,
            "<" => CmpOp::Lt,
            ">" => CmpOp::Gt,
            "<=" => CmpOp::Le,
            "=>" | ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => "=>",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Predicate {
    pub key: String,
    pub op: CmpOp,
    /// Raw value text; typed against the key's kind at evaluation time.
    pub value: String,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.key, self.op, self.value)
    }
}

fn is_op_char(c: char) -> bool {
    matches!(c, '<' | '>' | '=' | '!')
}

pub fn parse_predicate(text: &str) -> Result<Predicate, StoreError> {
    let malformed = || StoreError::MalformedPredicate(text.to_string());
    let t = text.trim();
    let key_end = t.find(|c: char| c.is_whitespace() || is_op_char(c)).ok_or_else(malformed)?;
    let key = &t[..key_end];
    if key.is_empty() || !key.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.') {
        return Err(malformed());
    }
    let rest = t[key_end..].trim_start();
    let op_end = rest.find(|c: char| !is_op_char(c)).unwrap_or(rest.len());
    let op = CmpOp::from_token(&rest[..op_end]).ok_or_else(malformed)?;
    let value = rest[op_end..].trim();
    if value.is_empty() {
        return Err(malformed());
    }
    Ok(Predicate {
        key: key.to_string(),
        op,
        value: value.to_string(),
    })
}

/// Inclusive bounds on one run metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBound {
    pub metric: String,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchQuery {
    #[serde(default)]
    pub algorithms: BTreeSet<AlgorithmId>,
    #[serde(default)]
    pub datasets: BTreeSet<DatasetId>,
    #[serde(default)]
    pub predicates: Vec<Predicate>,
    #[serde(default)]
    pub metric_bounds: Vec<MetricBound>,
}

impl SearchQuery {
    pub fn is_empty(&self) -> bool {
        self.algorithms.is_empty()
            && self.datasets.is_empty()
            && self.predicates.is_empty()
            && self.metric_bounds.is_empty()
    }

    /// Parses clauses separated by `;` or `,`. `algorithm = 1|2` and
    /// `dataset = 3` fill the id sets; everything else is a predicate.
    pub fn parse(text: &str) -> Result<Self, StoreError> {
        let mut q = SearchQuery::default();
        for clause in text.split([';', ',']).map(str::trim).filter(|c| !c.is_empty()) {
            let p = parse_predicate(clause)?;
            let ids = || -> Result<Vec<u64>, StoreError> {
                p.value
                    .split('|')
                    .map(|v| {
                        v.trim()
                            .parse::<u64>()
                            .map_err(|_| StoreError::TypeMismatch(format!("{}: {v:?} is not an id", p.key)))
                    })
                    .collect()
            };
            match (p.key.as_str(), p.op) {
                ("algorithm" | "algorithm_id", CmpOp::Eq) => q.algorithms.extend(ids()?.into_iter().map(AlgorithmId)),
                ("dataset" | "dataset_id", CmpOp::Eq) => q.datasets.extend(ids()?.into_iter().map(DatasetId)),
                _ => q.predicates.push(p),
            }
        }
        if q.is_empty() {
            return Err(StoreError::EmptyQuery);
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchTarget {
    /// Returns configuration ids.
    Configurations,
    /// Returns ids of evaluated runs.
    Evaluations,
}

/// Run-level keys available on the evaluation target (besides `ate_<stat>`
/// and `rpe_<stat>`).
pub const METRIC_KEYS: [&str; 4] = ["traj_length", "cpu_mean", "cpu_max", "ram_max"];

fn is_metric_key(key: &str) -> bool {
    METRIC_KEYS.contains(&key)
        || key
            .split_once('_')
            .is_some_and(|(fam, stat)| matches!(fam, "ate" | "rpe") && MetricStats::NAMES.contains(&stat))
}

/// Value kind of a search key for a target.
pub fn key_kind(data: &StoreData, key: &str, target: SearchTarget) -> Result<ValueKind, StoreError> {
    match key {
        "algorithm" | "algorithm_id" | "dataset" | "dataset_id" | "config_id" => return Ok(ValueKind::Integer),
        "sequence" => return Ok(ValueKind::Text),
        _ => {}
    }
    if target == SearchTarget::Evaluations && is_metric_key(key) {
        return Ok(ValueKind::Real);
    }
    data.catalog
        .param_kind(key)
        .ok_or_else(|| StoreError::UnknownKey(key.to_string()))
}

/// Effective value of a key on a configuration: explicit values first, then
/// template defaults, then the dataset's native settings.
pub fn config_value(data: &StoreData, config: &MappingConfiguration, key: &str) -> Option<ParamValue> {
    match key {
        "algorithm" | "algorithm_id" => return Some(ParamValue::Int(config.algorithm_id.0 as i64)),
        "dataset" | "dataset_id" => return Some(ParamValue::Int(config.dataset_id.0 as i64)),
        "config_id" => return Some(ParamValue::Int(config.id.0 as i64)),
        "sequence" => return Some(ParamValue::Text(config.sequence.clone())),
        _ => {}
    }
    if let Some(v) = config.algorithm_params.get(key) {
        return Some(v.clone());
    }
    if dataset_param_kind(key).is_some() {
        if let Some(v) = config.dataset_params.get(key) {
            return Some(v.clone());
        }
        let dataset = data.catalog.datasets.get(&config.dataset_id);
        return match key {
            FRAME_RATE => dataset.map(|d| ParamValue::Real(d.native_rate)),
            RESOLUTION_FACTOR => Some(ParamValue::Real(1.0)),
            SAVE_MAP => Some(ParamValue::Flag(false)),
            _ => None,
        };
    }
    data.catalog
        .algorithms
        .get(&config.algorithm_id)
        .and_then(|a| a.param(key))
        .map(|p| p.default.clone())
}

/// Effective value of a key on a run: run metrics, evaluation statistics,
/// else the run's configuration.
pub fn run_value(data: &StoreData, run: &RunRecord, key: &str) -> Option<ParamValue> {
    let real = |v: Option<f64>| v.map(ParamValue::Real);
    match key {
        "traj_length" => return real(run.traj_length),
        "cpu_mean" => return Some(ParamValue::Real(run.cpu_mean)),
        "cpu_max" => return Some(ParamValue::Real(run.cpu_max)),
        "ram_max" => return Some(ParamValue::Real(run.ram_max)),
        "run_id" => return Some(ParamValue::Int(run.run_id.0 as i64)),
        _ => {}
    }
    if is_metric_key(key) {
        return real(data.evaluations.get(&run.run_id).and_then(|e| e.metric(key)));
    }
    config_value(data, data.configurations.get(&run.config_id)?, key)
}

/// A predicate with its value typed against the key's kind.
struct Typed<'a> {
    key: &'a str,
    op: CmpOp,
    value: ParamValue,
}

fn type_predicate<'a>(data: &StoreData, p: &'a Predicate, target: SearchTarget) -> Result<Typed<'a>, StoreError> {
    let kind = key_kind(data, &p.key, target)?;
    if !kind.is_numeric() && p.op != CmpOp::Eq {
        return Err(StoreError::TypeMismatch(format!(
            "{} is a {kind} key and supports '=' only",
            p.key
        )));
    }
    let value = ParamValue::parse_as(kind, &p.value)
        .map_err(|_| StoreError::TypeMismatch(format!("{:?} is not a valid {kind} value for {}", p.value, p.key)))?;
    Ok(Typed {
        key: &p.key,
        op: p.op,
        value,
    })
}

fn holds(actual: Option<ParamValue>, t: &Typed<'_>) -> bool {
    actual
        .and_then(|a| a.compare(&t.value))
        .is_some_and(|ord| t.op.holds(ord))
}

fn within(v: Option<f64>, b: &MetricBound) -> bool {
    v.is_some_and(|v| b.min.is_none_or(|m| v >= m) && b.max.is_none_or(|m| v <= m))
}

fn check_bounds(data: &StoreData, q: &SearchQuery, target: SearchTarget) -> Result<(), StoreError> {
    for b in &q.metric_bounds {
        if target == SearchTarget::Configurations || !is_metric_key(&b.metric) {
            return Err(StoreError::UnknownKey(b.metric.clone()));
        }
    }
    let _ = data;
    Ok(())
}

/// True when a run satisfies every clause (metric keys read its evaluation).
pub fn run_matches(data: &StoreData, run: &RunRecord, q: &SearchQuery) -> Result<bool, StoreError> {
    check_bounds(data, q, SearchTarget::Evaluations)?;
    let typed: Vec<Typed<'_>> = q
        .predicates
        .iter()
        .map(|p| type_predicate(data, p, SearchTarget::Evaluations))
        .collect::<Result<_, _>>()?;
    Ok(run_matches_typed(data, run, q, &typed))
}

fn run_matches_typed(data: &StoreData, run: &RunRecord, q: &SearchQuery, typed: &[Typed<'_>]) -> bool {
    let Some(config) = data.configurations.get(&run.config_id) else {
        return false;
    };
    (q.algorithms.is_empty() || q.algorithms.contains(&config.algorithm_id))
        && (q.datasets.is_empty() || q.datasets.contains(&config.dataset_id))
        && typed.iter().all(|t| holds(run_value(data, run, t.key), t))
        && q.metric_bounds.iter().all(|b| {
            within(run_value(data, run, &b.metric).and_then(|v| v.as_f64()), b)
        })
}

/// Conjunction of all clauses; id sets are disjunctive within themselves.
/// Ids come back ascending.
pub fn search(data: &StoreData, q: &SearchQuery, target: SearchTarget) -> Result<Vec<u64>, StoreError> {
    if q.is_empty() {
        return Err(StoreError::EmptyQuery);
    }
    check_bounds(data, q, target)?;
    let typed: Vec<Typed<'_>> = q
        .predicates
        .iter()
        .map(|p| type_predicate(data, p, target))
        .collect::<Result<_, _>>()?;
    Ok(match target {
        SearchTarget::Configurations => data
            .configurations
            .values()
            .filter(|c| {
                (q.algorithms.is_empty() || q.algorithms.contains(&c.algorithm_id))
                    && (q.datasets.is_empty() || q.datasets.contains(&c.dataset_id))
                    && typed.iter().all(|t| holds(config_value(data, c, t.key), t))
            })
            .map(|c| c.id.0)
            .collect(),
        SearchTarget::Evaluations => data
            .evaluations
            .keys()
            .filter_map(|id| data.runs.get(id))
            .filter(|r| run_matches_typed(data, r, q, &typed))
            .map(|r| r.run_id.0)
            .collect(),
    })
}

impl super::Store {
    pub fn search(&self, q: &SearchQuery, target: SearchTarget) -> Result<Vec<u64>, StoreError> {
        search(&self.snapshot(), q, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_forms() {
        let p = parse_predicate("nFeatures => 2000").unwrap();
        assert_eq!((p.key.as_str(), p.op, p.value.as_str()), ("nFeatures", CmpOp::Ge, "2000"));
        let p = parse_predicate("traj_length > 0.75").unwrap();
        assert_eq!((p.key.as_str(), p.op, p.value.as_str()), ("traj_length", CmpOp::Gt, "0.75"));
        assert_eq!(parse_predicate("a>=1").unwrap().op, CmpOp::Ge);
        assert_eq!(parse_predicate("a<=1").unwrap().op, CmpOp::Le);
        assert_eq!(parse_predicate("a = x").unwrap().op, CmpOp::Eq);
        for bad in ["nFeatures >> 5", "nFeatures 5", "=> 5", "a =", "a == 1", "a != 1"] {
            assert!(
                matches!(parse_predicate(bad), Err(StoreError::MalformedPredicate(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn query_sets_and_predicates() {
        let q = SearchQuery::parse("algorithm = 1|2; nFeatures => 2000, dataset = 3").unwrap();
        assert_eq!(q.algorithms.len(), 2);
        assert_eq!(q.datasets.len(), 1);
        assert_eq!(q.predicates.len(), 1);
        assert!(matches!(SearchQuery::parse(" ; "), Err(StoreError::EmptyQuery)));
    }

    #[test]
    fn op_semantics() {
        assert!(CmpOp::Ge.holds(Ordering::Equal) && CmpOp::Ge.holds(Ordering::Greater));
        assert!(!CmpOp::Gt.holds(Ordering::Equal));
        assert!(CmpOp::Le.holds(Ordering::Less) && !CmpOp::Le.holds(Ordering::Greater));
    }
}
