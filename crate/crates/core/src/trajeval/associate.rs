use serde::{Deserialize, Serialize};

use super::{Pose, TrajError, Trajectory};

/// Association tolerance used when the caller does not supply one (seconds).
pub const DEFAULT_MAX_TIME_DIFF: f64 = 0.02;

/// Estimated/reference pose pairs, ordered by estimated timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTrajectory {
    pub pairs: Vec<(Pose, Pose)>,
    pub max_time_diff: f64,
}

impl PairedTrajectory {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Builds pairs directly, e.g. for synthetic data where correspondences are known.
    pub fn from_pairs(pairs: Vec<(Pose, Pose)>) -> Self {
        Self {
            pairs,
            max_time_diff: 0.0,
        }
    }
}

/// Greedy nearest-timestamp matching.
///
/// All (estimated, reference) candidates within `max_time_diff` are visited in
/// order of increasing time difference; a candidate is accepted when neither
/// side has been used yet. The result is injective in both directions.
pub fn associate(
    est: &Trajectory,
    reference: &Trajectory,
    max_time_diff: f64,
) -> Result<PairedTrajectory, TrajError> {
    if !(max_time_diff >= 0.0) || !max_time_diff.is_finite() {
        return Err(TrajError::InvalidArgument(format!(
            "max_time_diff must be finite and non-negative, got {max_time_diff}"
        )));
    }
    let ref_poses = reference.poses();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, e) in est.poses().iter().enumerate() {
        let lo = ref_poses.partition_point(|r| r.t < e.t - max_time_diff);
        for (j, r) in ref_poses.iter().enumerate().skip(lo) {
            let dt = (r.t - e.t).abs();
            if r.t > e.t + max_time_diff {
                break;
            }
            if dt <= max_time_diff {
                candidates.push((dt, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut est_used = vec![false; est.len()];
    let mut ref_used = vec![false; reference.len()];
    let mut matched: Vec<(usize, usize)> = Vec::new();
    for (_, i, j) in candidates {
        if !est_used[i] && !ref_used[j] {
            est_used[i] = true;
            ref_used[j] = true;
            matched.push((i, j));
        }
    }
    if matched.is_empty() {
        return Err(TrajError::NoMatches);
    }
    matched.sort_unstable();
    Ok(PairedTrajectory {
        pairs: matched
            .into_iter()
            .map(|(i, j)| (est.poses()[i], ref_poses[j]))
            .collect(),
        max_time_diff,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector3;

    use super::*;

    fn traj(ts: &[f64]) -> Trajectory {
        Trajectory::new(
            ts.iter()
                .map(|&t| Pose::at_identity(t, Vector3::new(t, 0.0, 0.0)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_timestamps_all_paired() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let a = traj(&ts);
        let pairs = associate(&a, &a, 0.02).unwrap();
        assert_eq!(pairs.len(), 50);
        for (e, r) in &pairs.pairs {
            assert_eq!(e.t, r.t);
        }
    }

    #[test]
    fn shifted_beyond_tolerance_has_no_matches() {
        let ts: Vec<f64> = (0..20).map(|i| i as f64 * 1.0).collect();
        let shifted: Vec<f64> = ts.iter().map(|t| t + 0.3).collect();
        let err = associate(&traj(&shifted), &traj(&ts), 0.02).unwrap_err();
        assert_eq!(err, TrajError::NoMatches);
    }

    #[test]
    fn reference_used_at_most_once() {
        // two estimates both closest to reference 1.0
        let est = traj(&[0.995, 1.004]);
        let reference = traj(&[1.0, 5.0]);
        let pairs = associate(&est, &reference, 0.02).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs.pairs[0].0.t, 1.004);
    }

    #[test]
    fn negative_tolerance_rejected() {
        let a = traj(&[0.0]);
        assert!(matches!(
            associate(&a, &a, -1.0),
            Err(TrajError::InvalidArgument(_))
        ));
    }
}
