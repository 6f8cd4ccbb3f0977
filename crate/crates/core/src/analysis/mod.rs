//! Multi-run analysis: selection of runs, the analysis modes and report
//! publishing.
//!
//! Reports are immutable. Each one lives under `analyses/<token>/` as
//! `report.json` plus one CSV per table (`<mode>__<table>.csv`).

mod modes;
mod selection;
mod spec;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::ids::RunId;
use crate::layout::Layout;
use crate::store::{ReportMeta, Store, StoreData, StoreError};

pub use modes::{
    default_metrics, histogram, repeatability_stats, run_mode, table_columns, ModeInput, DEFAULT_BINS,
    FAILED_PLACEMENT,
};
pub use selection::{apply, default_rule, fold_rule, resolve_selection, source_sets, RunSet};
pub use spec::{
    parse_analysis_spec, AnalysisSpec, LimitationRules, Mode, ModeOptions, RuleGroup, SelectionSpec, SetOp,
    SOURCE_COMB_IDS, SOURCE_CONFIG_IDS, SOURCE_LIMITATION,
};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("unknown analysis mode {0:?}")]
    UnknownMode(String),
    #[error("bad combination rule: {0}")]
    BadCombinationRule(String),
    #[error("malformed analysis document: {0}")]
    Document(String),
    #[error("no analysis mode chosen")]
    NoModes,
    #[error("{0:?} is not a numeric axis")]
    BadAxis(String),
    #[error("trajectory comparison needs runs of one dataset sequence: {0}")]
    MixedDatasetTrajectoryComparison(String),
    #[error("report {0} not found")]
    NotFound(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("i/o error: {0}")]
    Io(String),
}

fn io_err(e: impl std::fmt::Display) -> AnalysisError {
    AnalysisError::Io(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::Null => String::new(),
                    Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeOutput {
    pub mode: Mode,
    pub parameters: ModeOptions,
    pub tables: Vec<Table>,
}

impl ModeOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    /// Zero until published.
    pub id: u64,
    /// Empty until published.
    pub token: String,
    pub group_name: String,
    pub group_description: String,
    pub created_at: f64,
    pub listed: bool,
    pub spec: AnalysisSpec,
    pub selection: Vec<RunId>,
    pub notices: Vec<String>,
    pub outputs: Vec<ModeOutput>,
}

impl AnalysisReport {
    pub fn output(&self, mode: Mode) -> Option<&ModeOutput> {
        self.outputs.iter().find(|o| o.mode == mode)
    }
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Resolves the selection and runs every chosen mode over one snapshot.
pub fn run_analysis(spec: &AnalysisSpec, data: &StoreData, layout: &Layout) -> Result<AnalysisReport, AnalysisError> {
    let selection = resolve_selection(&spec.selection, data)?;
    let mut notices = Vec::new();
    if selection.is_empty() {
        notices.push("the selection resolved to no runs".to_string());
    }
    let input = ModeInput {
        data,
        layout,
        selection: &selection,
    };
    let mut outputs = Vec::with_capacity(spec.modes.len());
    for (mode, opts) in &spec.modes {
        let tables = run_mode(*mode, opts, &input, &mut notices)?;
        outputs.push(ModeOutput {
            mode: *mode,
            parameters: opts.clone(),
            tables,
        });
    }
    Ok(AnalysisReport {
        id: 0,
        token: String::new(),
        group_name: spec.group_name.clone(),
        group_description: spec.group_description.clone(),
        created_at: now(),
        listed: true,
        spec: spec.clone(),
        selection: selection.into_iter().collect(),
        notices,
        outputs,
    })
}

/// One file per table: `<mode key>__<table>.csv`.
pub fn export_raw(report: &AnalysisReport) -> Vec<(String, String)> {
    report
        .outputs
        .iter()
        .flat_map(|o| {
            o.tables
                .iter()
                .map(move |t| (format!("{}__{}.csv", o.mode.key(), t.name), t.to_csv()))
        })
        .collect()
}

fn report_dir(layout: &Layout, token: &str) -> PathBuf {
    layout.analyses_root().join(token)
}

fn valid_token(token: &str) -> bool {
    !token.is_empty() && token.len() <= 64 && token.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Assigns an id and URL token, writes the report and registers it.
/// `listed: false` keeps it out of report listings.
pub fn publish(
    store: &Store,
    layout: &Layout,
    mut report: AnalysisReport,
    listed: bool,
) -> Result<AnalysisReport, AnalysisError> {
    let root = layout.analyses_root();
    fs::create_dir_all(&root).map_err(io_err)?;
    let nonce: [u8; 16] = rand::random();
    let out = store.transact(|d| {
        report.id = d.counters.report;
        report.listed = listed;
        let mut h = Sha256::new();
        h.update(report.id.to_le_bytes());
        h.update(nonce);
        h.update(report.created_at.to_le_bytes());
        h.update(report.group_name.as_bytes());
        report.token = hex::encode(&h.finalize()[..16]);

        let staging = root.join(format!(".staging-{}", report.token));
        let write = || -> std::io::Result<()> {
            fs::create_dir(&staging)?;
            fs::write(staging.join(REPORT_FILE), serde_json::to_vec_pretty(&report)?)?;
            for (name, csv) in export_raw(&report) {
                fs::write(staging.join(name), csv)?;
            }
            fs::rename(&staging, report_dir(layout, &report.token))
        };
        if let Err(e) = write() {
            let _ = fs::remove_dir_all(&staging);
            return Err(StoreError::Io(e.to_string()));
        }
        d.counters.report += 1;
        d.reports.insert(
            report.id,
            ReportMeta {
                id: report.id,
                token: report.token.clone(),
                group_name: report.group_name.clone(),
                created_at: report.created_at,
                listed,
            },
        );
        Ok(report)
    })?;
    Ok(out)
}

pub fn load_report(layout: &Layout, token: &str) -> Result<AnalysisReport, AnalysisError> {
    if !valid_token(token) {
        return Err(AnalysisError::NotFound(token.to_string()));
    }
    let text = fs::read(report_dir(layout, token).join(REPORT_FILE))
        .map_err(|_| AnalysisError::NotFound(token.to_string()))?;
    serde_json::from_slice(&text).map_err(io_err)
}

/// Parses, runs and publishes in one step.
pub fn create_analysis(
    store: &Store,
    layout: &Layout,
    document: &str,
    listed: bool,
) -> Result<AnalysisReport, AnalysisError> {
    let spec = parse_analysis_spec(document)?;
    let report = run_analysis(&spec, &store.snapshot(), layout)?;
    publish(store, layout, report, listed)
}
