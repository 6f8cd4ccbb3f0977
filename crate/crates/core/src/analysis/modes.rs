use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::executor::{read_profile, RunStatus};
use crate::ids::{ConfigId, RunId};
use crate::layout::{Layout, PROFILING_FILE, RESULTS_DIR};
use crate::store::{key_kind, run_value, RunRecord, SearchTarget, StoreData, BUNDLE_FILES};
use crate::trajeval::{classify_run, FailureRule, MetricStats, RunOutcome, DEFAULT_MIN_TRAJ_LENGTH};

use super::selection::RunSet;
use super::spec::{Mode, ModeOptions};
use super::{AnalysisError, Table};

/// Plotted value of a failed run on an accuracy axis, relative to the
/// largest value among successful runs.
pub const FAILED_PLACEMENT: f64 = 1.2;

pub const DEFAULT_BINS: usize = 20;

pub fn default_metrics() -> Vec<String> {
    ["ate", "rpe"]
        .iter()
        .flat_map(|f| MetricStats::NAMES.iter().map(move |s| format!("{f}_{s}")))
        .collect()
}

/// Column layout of every table a mode emits.
pub fn table_columns(mode: Mode) -> Vec<(&'static str, Vec<&'static str>)> {
    match mode {
        Mode::TrajectoryComparison => vec![
            ("reference", vec!["t", "x", "y", "z"]),
            ("estimates", vec!["run_id", "t", "x", "y", "z"]),
            ("summary", vec!["run_id", "config_id", "ate_rmse", "traj_length"]),
        ],
        Mode::AccuracyMetricDiagrams => vec![("metrics", vec!["run_id", "config_id", "metric", "value"])],
        Mode::AccuracyMetricsComparison | Mode::Repeatability => {
            vec![("statistics", vec!["config_id", "metric", "mean", "std", "n"])]
        }
        Mode::AccuracyHistograms => vec![("histogram", vec!["run_id", "bin_lo", "bin_hi", "count"])],
        Mode::CpuRamComparison => vec![
            ("resources", vec!["run_id", "config_id", "cpu_mean", "cpu_max", "ram_max"]),
            ("series", vec!["run_id", "t", "cpu_cores", "ram_mb"]),
        ],
        Mode::Scatter2d => vec![("points", vec!["x", "y", "run_id", "status"])],
        Mode::Scatter3d => vec![("points", vec!["x", "y", "z", "run_id", "status"])],
    }
}

fn tables(mode: Mode) -> Vec<Table> {
    table_columns(mode)
        .into_iter()
        .map(|(name, cols)| Table::new(name, &cols))
        .collect()
}

/// Context shared by all modes of one analysis.
pub struct ModeInput<'a> {
    pub data: &'a StoreData,
    pub layout: &'a Layout,
    pub selection: &'a RunSet,
}

impl ModeInput<'_> {
    fn runs(&self) -> impl Iterator<Item = &RunRecord> + '_ {
        self.selection.iter().filter_map(|id| self.data.runs.get(id))
    }

    /// Lowest run id of every selected configuration.
    pub fn first_runs(&self) -> Vec<&RunRecord> {
        let mut first: BTreeMap<ConfigId, &RunRecord> = BTreeMap::new();
        for r in self.runs() {
            first.entry(r.config_id).or_insert(r);
        }
        let mut out: Vec<_> = first.into_values().collect();
        out.sort_by_key(|r| r.run_id);
        out
    }

    fn metric(&self, run: &RunRecord, key: &str) -> Option<f64> {
        run_value(self.data, run, key).and_then(|v| v.as_f64())
    }
}

/// Population mean, std and count of each metric per configuration.
pub fn repeatability_stats(
    groups: &BTreeMap<ConfigId, Vec<f64>>,
) -> BTreeMap<ConfigId, (f64, f64, usize)> {
    groups
        .iter()
        .filter_map(|(c, v)| MetricStats::from_errors(v).ok().map(|s| (*c, (s.mean, s.std, s.n))))
        .collect()
}

pub fn run_mode(
    mode: Mode,
    opts: &ModeOptions,
    input: &ModeInput<'_>,
    notices: &mut Vec<String>,
) -> Result<Vec<Table>, AnalysisError> {
    let mut out = tables(mode);
    match mode {
        Mode::TrajectoryComparison => trajectory_comparison(input, &mut out, notices)?,
        Mode::AccuracyMetricDiagrams => {
            let metrics = metric_list(input, opts)?;
            for r in input.first_runs() {
                for m in &metrics {
                    if let Some(v) = input.metric(r, m) {
                        out[0].push(vec![json!(r.run_id.0), json!(r.config_id.0), json!(m), json!(v)]);
                    }
                }
            }
        }
        Mode::AccuracyMetricsComparison | Mode::Repeatability => {
            let metrics = metric_list(input, opts)?;
            for m in &metrics {
                let mut groups: BTreeMap<ConfigId, Vec<f64>> = BTreeMap::new();
                for r in input.runs() {
                    if let Some(v) = input.metric(r, m) {
                        groups.entry(r.config_id).or_default().push(v);
                    }
                }
                for (c, (mean, std, n)) in repeatability_stats(&groups) {
                    out[0].push(vec![json!(c.0), json!(m), json!(mean), json!(std), json!(n)]);
                }
            }
            out[0].rows.sort_by_key(|row| row[0].as_u64());
        }
        Mode::AccuracyHistograms => histograms(input, opts, &mut out[0], notices),
        Mode::CpuRamComparison => resources(input, &mut out, notices),
        Mode::Scatter2d | Mode::Scatter3d => scatter(mode, input, opts, &mut out[0], notices)?,
    }
    Ok(out)
}

fn check_numeric(input: &ModeInput<'_>, key: &str) -> Result<(), AnalysisError> {
    match key_kind(input.data, key, SearchTarget::Evaluations) {
        Ok(kind) if kind.is_numeric() => Ok(()),
        _ => Err(AnalysisError::BadAxis(key.to_string())),
    }
}

fn metric_list(input: &ModeInput<'_>, opts: &ModeOptions) -> Result<Vec<String>, AnalysisError> {
    let metrics = opts.metrics.clone().unwrap_or_else(default_metrics);
    for m in &metrics {
        check_numeric(input, m)?;
    }
    Ok(metrics)
}

fn read_rows(path: &Path) -> Option<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).ok()?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|p| p.trim().parse().ok()).collect())
        .collect()
}

fn trajectory_comparison(
    input: &ModeInput<'_>,
    out: &mut [Table],
    notices: &mut Vec<String>,
) -> Result<(), AnalysisError> {
    let runs = input.first_runs();
    let mut source = None;
    for r in &runs {
        let cfg = input.data.config(r.config_id)?;
        let key = (cfg.dataset_id, cfg.sequence.clone());
        match &source {
            None => source = Some(key),
            Some(s) if *s != key => {
                return Err(AnalysisError::MixedDatasetTrajectoryComparison(format!(
                    "dataset {} sequence {} vs dataset {} sequence {}",
                    s.0, s.1, key.0, key.1
                )))
            }
            _ => {}
        }
    }
    let Some((dataset, sequence)) = source else {
        return Ok(());
    };
    match input.layout.ground_truth(dataset, &sequence) {
        Ok(gt) => {
            for p in gt.poses() {
                out[0].push(vec![json!(p.t), json!(p.position.x), json!(p.position.y), json!(p.position.z)]);
            }
        }
        Err(e) => notices.push(format!("reference trajectory unavailable: {e}")),
    }
    for r in runs {
        let Some(eval) = input.data.evaluations.get(&r.run_id) else {
            notices.push(format!("run {} has no evaluation and is left out of the trajectory comparison", r.run_id));
            continue;
        };
        match read_rows(&eval.bundle_dir.join(BUNDLE_FILES[4])) {
            Some(rows) => {
                for row in rows.iter().filter(|row| row.len() >= 4) {
                    out[1].push(vec![json!(r.run_id.0), json!(row[0]), json!(row[1]), json!(row[2]), json!(row[3])]);
                }
            }
            None => notices.push(format!("aligned trajectory of run {} is unreadable", r.run_id)),
        }
        out[2].push(vec![json!(r.run_id.0), json!(r.config_id.0), json!(eval.ate.rmse), json!(r.traj_length)]);
    }
    Ok(())
}

fn histograms(input: &ModeInput<'_>, opts: &ModeOptions, table: &mut Table, notices: &mut Vec<String>) {
    let bins = opts.bins.unwrap_or(DEFAULT_BINS).max(1);
    for r in input.first_runs() {
        let Some(eval) = input.data.evaluations.get(&r.run_id) else {
            continue;
        };
        let Some(rows) = read_rows(&eval.bundle_dir.join(BUNDLE_FILES[2])) else {
            notices.push(format!("error samples of run {} are unreadable", r.run_id));
            continue;
        };
        let errors: Vec<f64> = rows.iter().filter_map(|row| row.get(1).copied()).collect();
        for (lo, hi, count) in histogram(&errors, bins) {
            table.push(vec![json!(r.run_id.0), json!(lo), json!(hi), json!(count)]);
        }
    }
}

/// Equal-width bins over `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in values {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

fn resources(input: &ModeInput<'_>, out: &mut [Table], notices: &mut Vec<String>) {
    for r in input.first_runs() {
        out[0].push(vec![
            json!(r.run_id.0),
            json!(r.config_id.0),
            json!(r.cpu_mean),
            json!(r.cpu_max),
            json!(r.ram_max),
        ]);
        match read_profile(&r.run_dir.join(RESULTS_DIR).join(PROFILING_FILE)) {
            Ok(samples) => {
                for s in samples {
                    out[1].push(vec![json!(r.run_id.0), json!(s.t), json!(s.cpu), json!(s.ram)]);
                }
            }
            Err(e) => notices.push(format!("profile of run {} unavailable: {e}", r.run_id)),
        }
    }
}

fn is_accuracy_axis(key: &str) -> bool {
    key.starts_with("ate_") || key.starts_with("rpe_")
}

fn scatter(
    mode: Mode,
    input: &ModeInput<'_>,
    opts: &ModeOptions,
    table: &mut Table,
    notices: &mut Vec<String>,
) -> Result<(), AnalysisError> {
    let mut axes = vec![
        opts.x.clone().unwrap_or_else(|| "frame_rate".into()),
        opts.y.clone().unwrap_or_else(|| {
            if mode == Mode::Scatter2d { "ate_rmse" } else { "resolution_factor" }.into()
        }),
    ];
    if mode == Mode::Scatter3d {
        axes.push(opts.z.clone().unwrap_or_else(|| "ate_rmse".into()));
    }
    for a in &axes {
        check_numeric(input, a)?;
    }
    let rule = FailureRule {
        min_factor: opts.min_traj_length.unwrap_or(DEFAULT_MIN_TRAJ_LENGTH),
        max_ate: opts.max_ate,
    };
    let runs = input.first_runs();
    let success = |r: &RunRecord| -> bool {
        r.status == RunStatus::Finished
            && input.data.evaluations.get(&r.run_id).is_some_and(|e| {
                classify_run(&e.ate, r.traj_length.unwrap_or(0.0), &rule) == RunOutcome::Success
            })
    };
    let (good, failed): (Vec<&RunRecord>, Vec<&RunRecord>) = runs.into_iter().partition(|r| success(r));

    let mut placement: BTreeMap<&str, f64> = BTreeMap::new();
    for a in axes.iter().filter(|a| is_accuracy_axis(a)) {
        let max = good.iter().filter_map(|r| input.metric(r, a)).fold(f64::NEG_INFINITY, f64::max);
        if max.is_finite() {
            placement.insert(a, FAILED_PLACEMENT * max);
        }
    }
    let point = |r: &RunRecord, ok: bool| -> Option<Vec<Value>> {
        let mut row = Vec::with_capacity(axes.len() + 2);
        for a in &axes {
            let v = if !ok && is_accuracy_axis(a) {
                placement.get(a.as_str()).copied()
            } else {
                input.metric(r, a)
            }?;
            row.push(json!(v));
        }
        row.push(json!(r.run_id.0));
        row.push(json!(if ok { "success" } else { "failed" }));
        Some(row)
    };

    let mut rows: Vec<(RunId, Vec<Value>)> = Vec::new();
    for r in &good {
        match point(r, true) {
            Some(row) => rows.push((r.run_id, row)),
            None => notices.push(format!("run {} lacks a value for one of {axes:?}", r.run_id)),
        }
    }
    let accuracy = axes.iter().any(|a| is_accuracy_axis(a));
    if accuracy && good.is_empty() && !failed.is_empty() {
        notices.push(format!("{} failed runs omitted: no successful run to place them against", failed.len()));
    } else {
        for r in &failed {
            match point(r, false) {
                Some(row) => rows.push((r.run_id, row)),
                None => notices.push(format!("run {} lacks a value for one of {axes:?}", r.run_id)),
            }
        }
    }
    rows.sort_by_key(|(id, _)| *id);
    table.rows.extend(rows.into_iter().map(|(_, row)| row));
    Ok(())
}
