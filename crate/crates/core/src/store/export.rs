//! CSV exports and the full catalog dump.

use crate::config::ParamValue;
use crate::ids::{ConfigId, RunId};
use crate::trajeval::MetricStats;

use super::{StoreData, StoreError};

pub const CONFIGURATION_COLUMNS: [&str; 7] = [
    "config_id",
    "algorithm_id",
    "dataset_id",
    "sequence",
    "comb_id",
    "algorithm_params",
    "dataset_params",
];

/// Run columns: identity, status, profiling, then ATE and RPE statistics
/// (`ate_rmse` … `ate_sse`, `rpe_rmse` … `rpe_sse`).
pub const RUN_COLUMNS: [&str; 28] = [
    "run_id",
    "config_id",
    "algorithm_id",
    "dataset_id",
    "sequence",
    "node_id",
    "status",
    "traj_length",
    "cpu_mean",
    "cpu_max",
    "ram_max",
    "started_at",
    "finished_at",
    "time_scale",
    "ate_rmse",
    "ate_mean",
    "ate_median",
    "ate_std",
    "ate_min",
    "ate_max",
    "ate_sse",
    "rpe_rmse",
    "rpe_mean",
    "rpe_median",
    "rpe_std",
    "rpe_min",
    "rpe_max",
    "rpe_sse",
];

fn params_cell<'a>(params: impl Iterator<Item = (&'a String, &'a ParamValue)>) -> String {
    params.map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, StoreError> {
    let bytes = w.into_inner().map_err(|e| StoreError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| StoreError::Io(e.to_string()))
}

pub fn export_configurations_csv(data: &StoreData, ids: &[ConfigId]) -> Result<String, StoreError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CONFIGURATION_COLUMNS).map_err(|e| StoreError::Io(e.to_string()))?;
    for id in ids {
        let c = data.config(*id)?;
        w.write_record([
            c.id.to_string(),
            c.algorithm_id.to_string(),
            c.dataset_id.to_string(),
            c.sequence.clone(),
            c.comb_parent.map(|p| p.to_string()).unwrap_or_default(),
            params_cell(c.algorithm_params.iter()),
            params_cell(c.dataset_params.iter()),
        ])
        .map_err(|e| StoreError::Io(e.to_string()))?;
    }
    finish(w)
}

fn stats_cells(stats: Option<&MetricStats>) -> Vec<String> {
    MetricStats::NAMES
        .iter()
        .map(|n| stats.and_then(|s| s.get(n)).map(|v| v.to_string()).unwrap_or_default())
        .collect()
}

pub fn export_runs_csv(data: &StoreData, ids: &[RunId]) -> Result<String, StoreError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUN_COLUMNS).map_err(|e| StoreError::Io(e.to_string()))?;
    for id in ids {
        let r = data.run(*id)?;
        let c = data.config(r.config_id)?;
        let eval = data.evaluations.get(id);
        let mut row = vec![
            r.run_id.to_string(),
            r.config_id.to_string(),
            c.algorithm_id.to_string(),
            c.dataset_id.to_string(),
            c.sequence.clone(),
            r.node_id.to_string(),
            r.status.to_string(),
            r.traj_length.map(|v| v.to_string()).unwrap_or_default(),
            r.cpu_mean.to_string(),
            r.cpu_max.to_string(),
            r.ram_max.to_string(),
            r.started_at.to_string(),
            r.finished_at.to_string(),
            r.time_scale.to_string(),
        ];
        row.extend(stats_cells(eval.map(|e| &e.ate)));
        row.extend(stats_cells(eval.and_then(|e| e.rpe.as_ref())));
        w.write_record(row).map_err(|e| StoreError::Io(e.to_string()))?;
    }
    finish(w)
}

/// Everything in the store as one JSON document.
pub fn catalog_dump(data: &StoreData) -> serde_json::Value {
    serde_json::to_value(data).unwrap_or(serde_json::Value::Null)
}
