//! Synthetic sequences: a smooth ground-truth path plus a camera/IMU
//! message log, laid out like a recorded dataset.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::io;

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::DatasetSpec;
use crate::dataprep::{self, Message, Payload, SequenceLog};
use crate::ids::DatasetId;
use crate::layout::{Layout, LOG_DIR};
use crate::trajeval::{self, Pose, Trajectory};

pub const CAMERA_TOPIC: &str = "/cam0/image_raw";
pub const IMU_TOPIC: &str = "/imu0";

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Seconds.
    pub duration: f64,
    pub camera_rate: f64,
    pub imu_rate: f64,
    pub ground_truth_rate: f64,
    pub resolution: (u32, u32),
    /// Approximate platform speed in m/s.
    pub speed: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            duration: 20.0,
            camera_rate: 20.0,
            imu_rate: 200.0,
            ground_truth_rate: 200.0,
            resolution: (752, 480),
            speed: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub ground_truth: Trajectory,
    pub log: SequenceLog,
}

fn ticks(duration: f64, rate: f64) -> impl Iterator<Item = f64> {
    let n = (duration * rate).floor() as usize + 1;
    (0..n).map(move |i| i as f64 / rate)
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let radius: f64 = rng.random_range(3.0..6.0);
    let phase: f64 = rng.random_range(0.0..TAU);
    let height: f64 = rng.random_range(0.2..0.6);
    let omega = spec.speed / radius;
    let origin = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0);

    let position = |t: f64| {
        let a = omega * t + phase;
        origin + Vector3::new(radius * a.cos(), radius * a.sin(), height * (2.0 * a).sin())
    };
    let poses = ticks(spec.duration, spec.ground_truth_rate)
        .map(|t| {
            let a = omega * t + phase;
            let yaw = a + std::f64::consts::FRAC_PI_2;
            Pose::new(t, position(t), UnitQuaternion::from_euler_angles(0.0, 0.0, yaw))
        })
        .collect();
    let ground_truth = Trajectory::new(poses).expect("ticks are strictly increasing");

    let (w, h) = spec.resolution;
    let mut messages: Vec<Message> = ticks(spec.duration, spec.camera_rate)
        .map(|t| Message {
            t,
            topic: CAMERA_TOPIC.into(),
            payload: Payload::Image { width: w, height: h },
        })
        .chain(ticks(spec.duration, spec.imu_rate).map(|t| Message {
            t,
            topic: IMU_TOPIC.into(),
            payload: Payload::Imu,
        }))
        .collect();
    messages.sort_by(|a, b| a.t.total_cmp(&b.t));
    let log = SequenceLog::new(messages).expect("per-topic timestamps are sorted");
    SyntheticSequence { ground_truth, log }
}

/// Catalog entry matching what [`install_dataset`] writes.
pub fn dataset_spec(id: DatasetId, name: &str, sequences: &[&str], spec: &SyntheticSpec) -> DatasetSpec {
    DatasetSpec {
        id,
        name: name.to_string(),
        sequences: sequences.iter().map(|s| s.to_string()).collect(),
        topics: BTreeMap::from([
            ("cam0".to_string(), CAMERA_TOPIC.to_string()),
            ("imu0".to_string(), IMU_TOPIC.to_string()),
        ]),
        ground_truth_ref: crate::layout::GROUND_TRUTH_FILE.to_string(),
        native_rate: spec.camera_rate,
        native_resolution: spec.resolution,
    }
}

pub fn install_sequence(
    layout: &Layout,
    dataset: DatasetId,
    sequence: &str,
    seq: &SyntheticSequence,
) -> io::Result<()> {
    let dir = layout.sequence_dir(dataset, sequence);
    fs::create_dir_all(&dir)?;
    fs::write(
        layout.ground_truth_path(dataset, sequence),
        trajeval::write_trajectory(&seq.ground_truth),
    )?;
    dataprep::write_log(&dir.join(LOG_DIR), &seq.log).map_err(io::Error::other)
}

/// Generates every sequence (seeded by `spec.seed` plus its index) and
/// returns the matching catalog entry.
pub fn install_dataset(
    layout: &Layout,
    id: DatasetId,
    name: &str,
    sequences: &[&str],
    spec: &SyntheticSpec,
) -> io::Result<DatasetSpec> {
    for (i, sequence) in sequences.iter().enumerate() {
        let seq_spec = SyntheticSpec {
            seed: spec.seed.wrapping_add(i as u64),
            ..spec.clone()
        };
        install_sequence(layout, id, sequence, &generate(&seq_spec))?;
    }
    Ok(dataset_spec(id, name, sequences, spec))
}
