use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::executor::RunStatus;
use crate::ids::RunId;
use crate::layout::{Layout, RESULTS_DIR, TRAJECTORY_FILE};
use crate::trajeval::{
    align, ape_errors, associate, rpe_windows, MetricStats, PairedTrajectory, Pose, RpeWindow,
    SimilarityTransform, TrajError, Trajectory, DEFAULT_MAX_TIME_DIFF,
};

use super::{io_err, EvaluationRecord, Store, StoreError};

pub const EVALUATOR_VERSION: &str = concat!("mapbench-trajeval/", env!("CARGO_PKG_VERSION"));

/// Files written into each evaluation directory.
pub const BUNDLE_FILES: [&str; 5] = [
    "stats.json",
    "transform.json",
    "ape_errors.csv",
    "rpe_errors.csv",
    "trajectory_aligned.csv",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalOptions {
    /// Register the estimate onto the reference before computing errors.
    pub align: bool,
    /// Allow a scale factor in the registration (monocular runs).
    pub with_scale: bool,
    pub max_time_diff: f64,
    /// RPE window length in meters.
    pub rpe_delta: f64,
    /// Re-evaluate runs that already have a record.
    pub force: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            align: true,
            with_scale: false,
            max_time_diff: DEFAULT_MAX_TIME_DIFF,
            rpe_delta: 1.0,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationOutput {
    pub pairs: PairedTrajectory,
    pub transform: SimilarityTransform,
    pub ape_errors: Vec<f64>,
    pub ate: MetricStats,
    pub rpe_windows: Vec<RpeWindow>,
    pub rpe: Option<MetricStats>,
}

/// Association, registration, ATE and RPE for one estimate.
pub fn evaluate_pair(est: &Trajectory, reference: &Trajectory, opts: &EvalOptions) -> Result<EvaluationOutput, TrajError> {
    let pairs = associate(est, reference, opts.max_time_diff)?;
    let transform = if opts.align {
        align(&pairs, opts.with_scale)?
    } else {
        SimilarityTransform::identity()
    };
    let errors = ape_errors(&pairs, &transform);
    let ate = MetricStats::from_errors(&errors)?;
    let rotation = nalgebra::UnitQuaternion::from_matrix(&transform.rotation);
    let aligned = PairedTrajectory {
        pairs: pairs
            .pairs
            .iter()
            .map(|(e, r)| {
                (
                    Pose::new(e.t, transform.apply(&e.position), rotation * e.orientation),
                    r.clone(),
                )
            })
            .collect(),
        max_time_diff: pairs.max_time_diff,
    };
    let (windows, rpe) = match rpe_windows(&aligned, opts.rpe_delta) {
        Ok(w) => {
            let errs: Vec<f64> = w.iter().map(|w| w.error).collect();
            let stats = MetricStats::from_errors(&errs)?;
            (w, Some(stats))
        }
        Err(TrajError::TrajectoryTooShort { .. }) => (Vec::new(), None),
        Err(e) => return Err(e),
    };
    Ok(EvaluationOutput {
        pairs: aligned,
        transform,
        ape_errors: errors,
        ate,
        rpe_windows: windows,
        rpe,
    })
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    run_id: RunId,
    ate: &'a MetricStats,
    rpe: &'a Option<MetricStats>,
    options: &'a EvalOptions,
    evaluator_version: &'static str,
}

fn write_bundle(dir: &Path, run_id: RunId, out: &EvaluationOutput, opts: &EvalOptions) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let stats = StatsDoc {
        run_id,
        ate: &out.ate,
        rpe: &out.rpe,
        options: opts,
        evaluator_version: EVALUATOR_VERSION,
    };
    fs::write(dir.join(BUNDLE_FILES[0]), serde_json::to_vec_pretty(&stats)?)?;
    fs::write(dir.join(BUNDLE_FILES[1]), serde_json::to_vec_pretty(&out.transform)?)?;

    let mut ape = String::from("t,error\n");
    for ((e, _), err) in out.pairs.pairs.iter().zip(&out.ape_errors) {
        let _ = writeln!(ape, "{},{}", e.t, err);
    }
    fs::write(dir.join(BUNDLE_FILES[2]), ape)?;

    let mut rpe = String::from("start_t,end_t,path_length,error\n");
    for w in &out.rpe_windows {
        let (s, e) = (&out.pairs.pairs[w.start].1, &out.pairs.pairs[w.end].1);
        let _ = writeln!(rpe, "{},{},{},{}", s.t, e.t, w.path_length, w.error);
    }
    fs::write(dir.join(BUNDLE_FILES[3]), rpe)?;

    let mut traj = String::from("t,x,y,z,ref_x,ref_y,ref_z\n");
    for (e, r) in &out.pairs.pairs {
        let _ = writeln!(
            traj,
            "{},{},{},{},{},{},{}",
            e.t, e.position.x, e.position.y, e.position.z, r.position.x, r.position.y, r.position.z
        );
    }
    fs::write(dir.join(BUNDLE_FILES[4]), traj)
}

/// Outcome of a batch evaluation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchEvaluation {
    pub evaluated: Vec<RunId>,
    pub errors: Vec<(RunId, String)>,
}

impl Store {
    /// Evaluates one finished run against its ground truth and stores the
    /// record plus the result bundle.
    pub fn evaluate(&self, run_id: RunId, opts: &EvalOptions, layout: &Layout) -> Result<EvaluationRecord, StoreError> {
        let snap = self.snapshot();
        let run = snap.run(run_id)?;
        if run.status != RunStatus::Finished {
            return Err(StoreError::RunNotFinished(run_id));
        }
        if !opts.force && snap.evaluations.contains_key(&run_id) {
            return Err(StoreError::AlreadyEvaluated(run_id));
        }
        let config = snap.config(run.config_id)?;
        let text = fs::read_to_string(run.run_dir.join(RESULTS_DIR).join(TRAJECTORY_FILE))
            .map_err(|e| StoreError::CorruptResults(format!("run {run_id}: {e}")))?;
        let est = crate::trajeval::parse_trajectory(&text)
            .map_err(|e| StoreError::CorruptResults(format!("run {run_id}: {e}")))?;
        let gt = layout
            .ground_truth(config.dataset_id, &config.sequence)
            .map_err(|e| StoreError::CorruptResults(e.to_string()))?;
        let out = evaluate_pair(&est, &gt, opts).map_err(|e| StoreError::Evaluation(format!("run {run_id}: {e}")))?;

        let dir = layout.evaluation_dir(run_id);
        let staging = dir.with_extension(format!("staging-{}", std::process::id()));
        let _ = fs::remove_dir_all(&staging);
        write_bundle(&staging, run_id, &out, opts).map_err(io_err)?;
        let record = EvaluationRecord {
            run_id,
            ate: out.ate,
            rpe: out.rpe,
            aligned: opts.align,
            with_scale: opts.with_scale,
            max_time_diff: opts.max_time_diff,
            rpe_delta: opts.rpe_delta,
            pairs: out.pairs.len(),
            evaluator_version: EVALUATOR_VERSION.to_string(),
            bundle_dir: dir.clone(),
        };
        let result = self.transact(|d| {
            match d.runs.get(&run_id) {
                Some(r) if r.status == RunStatus::Finished => {}
                Some(_) => return Err(StoreError::RunNotFinished(run_id)),
                None => return Err(StoreError::NotFound(format!("run {run_id}"))),
            }
            if !opts.force && d.evaluations.contains_key(&run_id) {
                return Err(StoreError::AlreadyEvaluated(run_id));
            }
            if dir.exists() {
                fs::remove_dir_all(&dir).map_err(io_err)?;
            }
            fs::rename(&staging, &dir).map_err(io_err)?;
            d.evaluations.insert(run_id, record.clone());
            Ok(record)
        });
        if result.is_err() {
            let _ = fs::remove_dir_all(&staging);
        }
        result
    }

    /// Evaluates every finished run that has no evaluation record yet.
    pub fn evaluate_all_unevaluated(&self, opts: &EvalOptions, layout: &Layout) -> BatchEvaluation {
        let mut batch = BatchEvaluation::default();
        for run_id in self.snapshot().unevaluated() {
            match self.evaluate(run_id, opts, layout) {
                Ok(_) => batch.evaluated.push(run_id),
                Err(StoreError::AlreadyEvaluated(_)) => {}
                Err(e) => batch.errors.push((run_id, e.to_string())),
            }
        }
        batch
    }
}
