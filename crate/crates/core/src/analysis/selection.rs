use std::collections::BTreeSet;

use crate::ids::RunId;
use crate::store::{run_matches, SearchQuery, StoreData};

use super::spec::{RuleGroup, SelectionSpec, SetOp, SOURCE_COMB_IDS, SOURCE_CONFIG_IDS, SOURCE_LIMITATION};
use super::AnalysisError;

pub type RunSet = BTreeSet<RunId>;

pub fn apply(op: SetOp, a: &RunSet, b: &RunSet) -> RunSet {
    match op {
        SetOp::Union => a.union(b).copied().collect(),
        SetOp::Intersection => a.intersection(b).copied().collect(),
        SetOp::Difference => a.difference(b).copied().collect(),
    }
}

/// Folds rule groups over materialized sources.
///
/// Each group is folded left to right with its internal operators; the
/// group results are then folded in order, joined by the trailing operator
/// of the preceding group.
pub fn fold_rule(groups: &[RuleGroup], sources: &[RunSet; 3]) -> Result<RunSet, AnalysisError> {
    let bad = |m: String| AnalysisError::BadCombinationRule(m);
    let mut acc: Option<RunSet> = None;
    let mut join: Option<SetOp> = None;
    for (i, g) in groups.iter().enumerate() {
        let last = i + 1 == groups.len();
        let internal = g.sources.len().saturating_sub(1);
        let expected = if last { internal } else { internal + 1 };
        if g.sources.is_empty() || g.ops.len() != expected {
            return Err(bad(format!("group {} has {} operators for {} sources", i + 1, g.ops.len(), g.sources.len())));
        }
        let source = |s: u8| sources.get(s as usize).ok_or_else(|| bad(format!("unknown source {s}")));
        let mut value = source(g.sources[0])?.clone();
        for (op, s) in g.ops.iter().zip(&g.sources[1..]) {
            value = apply(*op, &value, source(*s)?);
        }
        acc = Some(match (acc, join) {
            (Some(a), Some(op)) => apply(op, &a, &value),
            _ => value,
        });
        join = (!last).then(|| g.ops[internal]);
    }
    acc.ok_or_else(|| bad("no groups".into()))
}

/// Run ids of each source: explicit configurations, combination children,
/// limitation rules.
pub fn source_sets(spec: &SelectionSpec, data: &StoreData) -> Result<[RunSet; 3], AnalysisError> {
    let runs_of = |ids: &mut dyn Iterator<Item = crate::ids::ConfigId>| -> RunSet {
        ids.flat_map(|c| data.runs_of_config(c).map(|r| r.run_id)).collect()
    };
    let explicit = runs_of(&mut spec.config_ids.iter().copied());
    let comb = runs_of(
        &mut spec
            .comb_ids
            .iter()
            .flat_map(|c| data.configs_of_comb(*c).map(|cfg| cfg.id)),
    );
    let limited = match &spec.limitation {
        None => RunSet::new(),
        Some(lim) => {
            let q = SearchQuery {
                algorithms: lim.algorithm_ids.clone(),
                datasets: lim.dataset_ids.clone(),
                predicates: lim.parameters.clone(),
                metric_bounds: lim.evaluation.clone(),
            };
            let mut out = RunSet::new();
            for run in data.runs.values() {
                if run_matches(data, run, &q)? {
                    out.insert(run.run_id);
                }
            }
            out
        }
    };
    Ok([explicit, comb, limited])
}

/// The combination used when a document has no `combination_rule`.
pub fn default_rule(spec: &SelectionSpec) -> Vec<RuleGroup> {
    if spec.limitation.is_some() {
        vec![
            RuleGroup {
                sources: vec![SOURCE_CONFIG_IDS, SOURCE_COMB_IDS],
                ops: vec![SetOp::Union, SetOp::Intersection],
            },
            RuleGroup {
                sources: vec![SOURCE_LIMITATION],
                ops: vec![],
            },
        ]
    } else {
        vec![RuleGroup {
            sources: vec![SOURCE_CONFIG_IDS, SOURCE_COMB_IDS],
            ops: vec![SetOp::Union],
        }]
    }
}

/// Resolves a selection to run ids. With no limitation rules and no rule,
/// an empty limitation source would make every intersection empty, so the
/// id sources are simply united.
pub fn resolve_selection(spec: &SelectionSpec, data: &StoreData) -> Result<RunSet, AnalysisError> {
    let sources = source_sets(spec, data)?;
    let rule = spec.rule.clone().unwrap_or_else(|| default_rule(spec));
    let no_ids = spec.config_ids.is_empty() && spec.comb_ids.is_empty();
    if spec.rule.is_none() && no_ids && spec.limitation.is_some() {
        return Ok(sources[SOURCE_LIMITATION as usize].clone());
    }
    fold_rule(&rule, &sources)
}
