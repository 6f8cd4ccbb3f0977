use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{associate, PairedTrajectory, Pose, SimilarityTransform, TrajError, Trajectory};
use super::DEFAULT_MAX_TIME_DIFF;

/// Runs whose trajectory covers less than this fraction of the reference
/// frames are classified as failed.
pub const DEFAULT_MIN_TRAJ_LENGTH: f64 = 0.75;

/// Slack when testing whether an accumulated path length reached the window
/// length, so that e.g. ten 0.1 m steps close a 1 m window.
const WINDOW_EPS: f64 = 1e-9;

/// Seven-statistic summary of an error sample.
///
/// `std` is the population standard deviation; `median` averages the two
/// middle samples for even counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub rmse: f64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub sse: f64,
    pub n: usize,
}

impl MetricStats {
    /// Summarizes a non-empty sample.
    pub fn from_errors(errors: &[f64]) -> Result<Self, TrajError> {
        if errors.is_empty() {
            return Err(TrajError::InvalidArgument("empty error sample".into()));
        }
        let n = errors.len();
        let nf = n as f64;
        let sum: f64 = errors.iter().sum();
        let sse: f64 = errors.iter().map(|e| e * e).sum();
        let mean = sum / nf;
        let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / nf;
        let mut sorted = errors.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 0 {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        } else {
            sorted[n / 2]
        };
        Ok(Self {
            rmse: (sse / nf).sqrt(),
            mean,
            median,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[n - 1],
            sse,
            n,
        })
    }

    /// Looks a statistic up by name (`rmse`, `mean`, `median`, `std`, `min`, `max`, `sse`).
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "rmse" => self.rmse,
            "mean" => self.mean,
            "median" => self.median,
            "std" => self.std,
            "min" => self.min,
            "max" => self.max,
            "sse" => self.sse,
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 7] = ["rmse", "mean", "median", "std", "min", "max", "sse"];
}

/// Per-pair translational errors after applying `transform` to the estimate.
pub fn ape_errors(pairs: &PairedTrajectory, transform: &SimilarityTransform) -> Vec<f64> {
    pairs
        .pairs
        .iter()
        .map(|(e, r)| (transform.apply(&e.position) - r.position).norm())
        .collect()
}

/// Absolute trajectory error statistics.
pub fn ape(pairs: &PairedTrajectory, transform: &SimilarityTransform) -> Result<MetricStats, TrajError> {
    if pairs.is_empty() {
        return Err(TrajError::InvalidArgument("no pairs to evaluate".into()));
    }
    MetricStats::from_errors(&ape_errors(pairs, transform))
}

/// One relative-error window: pair indices and the normalized error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpeWindow {
    pub start: usize,
    pub end: usize,
    /// Reference path length covered by the window (m).
    pub path_length: f64,
    /// Translational error divided by `path_length` (m/m).
    pub error: f64,
}

fn relative_translation(from: &Pose, to: &Pose) -> Vector3<f64> {
    from.orientation.inverse() * (to.position - from.position)
}

/// Computes the RPE windows: for every start pair `i`, the first `j > i`
/// whose accumulated reference path length reaches `delta_meters`.
pub fn rpe_windows(pairs: &PairedTrajectory, delta_meters: f64) -> Result<Vec<RpeWindow>, TrajError> {
    if pairs.is_empty() {
        return Err(TrajError::InvalidArgument("no pairs to evaluate".into()));
    }
    if !(delta_meters > 0.0) || !delta_meters.is_finite() {
        return Err(TrajError::InvalidArgument(format!(
            "delta_meters must be positive, got {delta_meters}"
        )));
    }
    let p = &pairs.pairs;
    let mut cumulative = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    cumulative.push(0.0);
    for w in p.windows(2) {
        acc += (w[1].1.position - w[0].1.position).norm();
        cumulative.push(acc);
    }
    let threshold = delta_meters - WINDOW_EPS * delta_meters.max(1.0);

    let mut windows = Vec::new();
    let mut j = 0;
    for i in 0..p.len() {
        j = j.max(i + 1);
        while j < p.len() && cumulative[j] - cumulative[i] < threshold {
            j += 1;
        }
        if j >= p.len() {
            break;
        }
        let length = cumulative[j] - cumulative[i];
        let (est_i, ref_i) = &p[i];
        let (est_j, ref_j) = &p[j];
        let diff = relative_translation(est_i, est_j) - relative_translation(ref_i, ref_j);
        windows.push(RpeWindow {
            start: i,
            end: j,
            path_length: length,
            error: diff.norm() / length,
        });
    }
    if windows.is_empty() {
        return Err(TrajError::TrajectoryTooShort {
            path_length: acc,
            delta: delta_meters,
        });
    }
    Ok(windows)
}

/// Relative pose error (translation per meter of reference motion).
pub fn rpe(pairs: &PairedTrajectory, delta_meters: f64) -> Result<MetricStats, TrajError> {
    let errors: Vec<f64> = rpe_windows(pairs, delta_meters)?
        .into_iter()
        .map(|w| w.error)
        .collect();
    MetricStats::from_errors(&errors)
}

/// Fraction of reference frames matched by an estimated pose, in `[0, 1]`.
pub fn traj_length_factor(est: &Trajectory, reference: &Trajectory) -> f64 {
    traj_length_factor_with(est, reference, DEFAULT_MAX_TIME_DIFF)
}

pub fn traj_length_factor_with(est: &Trajectory, reference: &Trajectory, max_time_diff: f64) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    match associate(est, reference, max_time_diff) {
        Ok(pairs) => (pairs.len() as f64 / reference.len() as f64).clamp(0.0, 1.0),
        Err(_) => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Success,
    Failed,
}

/// Thresholds that turn a finished run into success or failure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FailureRule {
    pub min_factor: f64,
    /// Optional upper bound on ATE RMSE (m).
    pub max_ate: Option<f64>,
}

impl Default for FailureRule {
    fn default() -> Self {
        Self {
            min_factor: DEFAULT_MIN_TRAJ_LENGTH,
            max_ate: None,
        }
    }
}

/// A run fails when its coverage factor is strictly below `min_factor`, or
/// when an ATE bound is set and the RMSE exceeds it.
pub fn classify_run(stats: &MetricStats, factor: f64, rule: &FailureRule) -> RunOutcome {
    if factor < rule.min_factor {
        return RunOutcome::Failed;
    }
    match rule.max_ate {
        Some(bound) if stats.rmse > bound => RunOutcome::Failed,
        _ => RunOutcome::Success,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_with_rmse(rmse: f64) -> MetricStats {
        MetricStats::from_errors(&[rmse]).unwrap()
    }

    #[test]
    fn stats_of_single_value() {
        let s = MetricStats::from_errors(&[0.5]).unwrap();
        assert_eq!((s.rmse, s.mean, s.median, s.std, s.min, s.max, s.sse, s.n), (0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.25, 1));
    }

    #[test]
    fn even_count_median_averages() {
        let s = MetricStats::from_errors(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.min, 1.0);
        assert_eq!(s.max, 4.0);
        assert_eq!(s.sse, 30.0);
    }

    #[test]
    fn empty_sample_rejected() {
        assert!(MetricStats::from_errors(&[]).is_err());
    }

    #[test]
    fn classify_boundaries() {
        let rule = FailureRule::default();
        let s = stats_with_rmse(0.05);
        assert_eq!(classify_run(&s, 0.80, &rule), RunOutcome::Success);
        assert_eq!(classify_run(&s, 0.75, &rule), RunOutcome::Success);
        assert_eq!(classify_run(&s, 0.74, &rule), RunOutcome::Failed);
        let bounded = FailureRule {
            max_ate: Some(1.0),
            ..rule
        };
        assert_eq!(classify_run(&stats_with_rmse(1.2), 0.80, &bounded), RunOutcome::Failed);
        assert_eq!(classify_run(&stats_with_rmse(1.0), 0.80, &bounded), RunOutcome::Success);
        assert_eq!(classify_run(&stats_with_rmse(1.2), 0.80, &rule), RunOutcome::Success);
    }

    fn line(ts: &[f64]) -> Trajectory {
        Trajectory::new(
            ts.iter()
                .map(|&t| Pose::at_identity(t, Vector3::new(t, 0.0, 0.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn traj_length_full_and_half() {
        let ts: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
        let reference = line(&ts);
        assert_eq!(traj_length_factor(&reference, &reference), 1.0);
        let half: Vec<f64> = ts.iter().step_by(2).copied().collect();
        assert_eq!(traj_length_factor(&line(&half), &reference), 0.5);
    }

    #[test]
    fn traj_length_disjoint_is_zero() {
        let reference = line(&[0.0, 1.0, 2.0]);
        assert_eq!(traj_length_factor(&line(&[10.0, 11.0]), &reference), 0.0);
    }

    #[test]
    fn rpe_too_short() {
        let ts: Vec<f64> = (0..6).map(|i| i as f64 * 0.1).collect();
        let t = line(&ts); // 0.5 m of motion
        let pairs = associate(&t, &t, 0.02).unwrap();
        assert!(matches!(
            rpe(&pairs, 1.0),
            Err(TrajError::TrajectoryTooShort { .. })
        ));
    }

    #[test]
    fn rpe_self_is_zero() {
        let ts: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let t = line(&ts);
        let pairs = associate(&t, &t, 0.02).unwrap();
        let s = rpe(&pairs, 1.0).unwrap();
        assert_eq!(s.max, 0.0);
        assert_eq!(s.sse, 0.0);
    }

    #[test]
    fn rpe_rejects_nonpositive_delta() {
        let t = line(&[0.0, 1.0]);
        let pairs = associate(&t, &t, 0.02).unwrap();
        assert!(matches!(rpe(&pairs, 0.0), Err(TrajError::InvalidArgument(_))));
    }
}
