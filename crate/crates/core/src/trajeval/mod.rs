//! Trajectory evaluation: TUM parsing, timestamp association, least-squares
//! alignment, absolute and relative error statistics, and run classification.
//!
//! Every function here is pure over immutable inputs.

mod align;
mod associate;
mod metrics;
mod tum;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub use align::{align, SimilarityTransform};
pub use associate::{associate, PairedTrajectory, DEFAULT_MAX_TIME_DIFF};
pub use metrics::{
    ape, ape_errors, classify_run, rpe, rpe_windows, traj_length_factor,
    traj_length_factor_with, FailureRule, MetricStats, RpeWindow, RunOutcome,
    DEFAULT_MIN_TRAJ_LENGTH,
};
pub use tum::{parse_trajectory, write_trajectory};

/// A single timestamped pose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    /// Seconds.
    pub t: f64,
    /// Meters.
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(t: f64, position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            t,
            position,
            orientation,
        }
    }

    pub fn at_identity(t: f64, position: Vector3<f64>) -> Self {
        Self::new(t, position, UnitQuaternion::identity())
    }
}

/// Poses ordered by strictly increasing timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    /// Builds a trajectory, checking the ordering invariant.
    pub fn new(poses: Vec<Pose>) -> Result<Self, TrajError> {
        if poses.is_empty() {
            return Err(TrajError::EmptyTrajectory);
        }
        for (i, w) in poses.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(TrajError::NonMonotonicTimestamps { line: i + 2 });
            }
        }
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.poses.iter().map(|p| p.t)
    }

    /// First-to-last time span in seconds.
    pub fn duration(&self) -> f64 {
        match (self.poses.first(), self.poses.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrajError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: timestamp not strictly increasing")]
    NonMonotonicTimestamps { line: usize },
    #[error("line {line}: degenerate quaternion (norm below 1e-9)")]
    DegenerateQuaternion { line: usize },
    #[error("trajectory contains no poses")]
    EmptyTrajectory,
    #[error("no estimated pose lies within the association tolerance of a reference pose")]
    NoMatches,
    #[error("alignment needs at least 3 pairs, got {found}")]
    TooFewPairs { found: usize },
    #[error("positions are degenerate (collinear or coincident); alignment is not unique")]
    DegenerateGeometry,
    #[error("reference path length {path_length:.3} m never reaches the {delta} m window")]
    TrajectoryTooShort { path_length: f64, delta: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
