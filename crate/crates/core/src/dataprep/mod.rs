//! Derived datasets with reduced frame rate and/or image resolution.
//!
//! Payloads only carry descriptors (image dimensions, blob bytes); a real
//! deployment plugs an image resampler in behind [`rescale`].

mod cache;
mod logio;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{DatasetSpec, MappingConfiguration};
use crate::ids::DatasetId;

pub use cache::PrepCache;
pub use logio::{read_log, write_log, INDEX_FILE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Image { width: u32, height: u32 },
    Imu,
    Blob { data: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    /// Seconds.
    pub t: f64,
    pub topic: String,
    pub payload: Payload,
}

/// A recorded sequence: messages in playback order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceLog {
    pub messages: Vec<Message>,
}

impl SequenceLog {
    pub fn new(messages: Vec<Message>) -> Result<Self, PrepError> {
        let log = Self { messages };
        log.check()?;
        Ok(log)
    }

    /// Timestamps must be non-decreasing per topic.
    pub fn check(&self) -> Result<(), PrepError> {
        let mut last: BTreeMap<&str, f64> = BTreeMap::new();
        for m in &self.messages {
            if !m.t.is_finite() {
                return Err(PrepError::Malformed(format!("non-finite timestamp on {}", m.topic)));
            }
            if let Some(prev) = last.insert(m.topic.as_str(), m.t) {
                if m.t < prev {
                    return Err(PrepError::Malformed(format!(
                        "timestamps decrease on topic {}",
                        m.topic
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn topic_messages<'a>(&'a self, topic: &'a str) -> impl Iterator<Item = &'a Message> + 'a {
        self.messages.iter().filter(move |m| m.topic == topic)
    }

    /// Timestamps of the first image topic in the log.
    pub fn frame_times(&self) -> Vec<f64> {
        let Some(topic) = self
            .messages
            .iter()
            .find(|m| matches!(m.payload, Payload::Image { .. }))
            .map(|m| m.topic.as_str())
        else {
            return Vec::new();
        };
        self.topic_messages(topic).map(|m| m.t).collect()
    }

    pub fn count(&self, topic: &str) -> usize {
        self.topic_messages(topic).count()
    }

    /// Wall-clock span of the recording in seconds.
    pub fn duration(&self) -> f64 {
        let (lo, hi) = self
            .messages
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| (lo.min(m.t), hi.max(m.t)));
        if lo.is_finite() {
            hi - lo
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepParams {
    /// Hz; `None` keeps the source rate.
    pub target_rate: Option<f64>,
    /// In (0, 1]; `None` keeps the source resolution.
    pub resolution_factor: Option<f64>,
    pub topics: BTreeSet<String>,
}

impl PrepParams {
    /// Preparation required by a configuration, or `None` when the dataset
    /// is used as recorded. Only image topics are affected.
    pub fn for_config(config: &MappingConfiguration, dataset: &DatasetSpec) -> Option<Self> {
        let rate = config
            .frame_rate()
            .filter(|r| (r - dataset.native_rate).abs() > 1e-9);
        let factor = config.resolution_factor().filter(|f| (f - 1.0).abs() > 1e-12);
        if rate.is_none() && factor.is_none() {
            return None;
        }
        Some(Self {
            target_rate: rate,
            resolution_factor: factor,
            topics: dataset.image_topics(),
        })
    }

    pub fn validate(&self, source_rate: f64) -> Result<(), PrepError> {
        if let Some(rate) = self.target_rate {
            check_rate(source_rate, rate)?;
        }
        if let Some(f) = self.resolution_factor {
            check_factor(f)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrepError {
    #[error("target rate {target} Hz is above the source rate {source_rate} Hz")]
    RateAboveSource { source_rate: f64, target: f64 },
    #[error("invalid rate: {0}")]
    InvalidRate(String),
    #[error("resolution factor {0} outside (0, 1]")]
    FactorOutOfRange(f64),
    #[error("malformed sequence log: {0}")]
    Malformed(String),
    #[error("i/o error: {0}")]
    Io(String),
}

fn check_rate(source_rate: f64, target: f64) -> Result<(), PrepError> {
    if !(source_rate > 0.0) || !source_rate.is_finite() || !(target > 0.0) || !target.is_finite() {
        return Err(PrepError::InvalidRate(format!(
            "source {source_rate} Hz, target {target} Hz"
        )));
    }
    if target > source_rate * (1.0 + 1e-12) {
        return Err(PrepError::RateAboveSource {
            source_rate,
            target,
        });
    }
    Ok(())
}

fn check_factor(factor: f64) -> Result<(), PrepError> {
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(PrepError::FactorOutOfRange(factor));
    }
    Ok(())
}

/// Keep-every-n rule for a rate reduction.
pub fn decimation_step(source_rate: f64, target_rate: f64) -> Result<usize, PrepError> {
    check_rate(source_rate, target_rate)?;
    Ok(((source_rate / target_rate).round() as usize).max(1))
}

/// Keeps every `n`-th message (starting with the first) of each affected topic.
pub fn decimate_every(log: &SequenceLog, n: usize, topics: &BTreeSet<String>) -> SequenceLog {
    let n = n.max(1);
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let messages = log
        .messages
        .iter()
        .filter(|m| {
            if !topics.contains(&m.topic) {
                return true;
            }
            let idx = seen.entry(m.topic.as_str()).or_insert(0);
            let keep = *idx % n == 0;
            *idx += 1;
            keep
        })
        .cloned()
        .collect();
    SequenceLog { messages }
}

/// Reduces the frame rate of the affected topics.
pub fn decimate(
    log: &SequenceLog,
    source_rate: f64,
    target_rate: f64,
    topics: &BTreeSet<String>,
) -> Result<SequenceLog, PrepError> {
    let n = decimation_step(source_rate, target_rate)?;
    Ok(decimate_every(log, n, topics))
}

/// `(round(w·f), round(h·f))`, never below one pixel.
pub fn scaled_dimensions(width: u32, height: u32, factor: f64) -> (u32, u32) {
    let scale = |v: u32| ((v as f64 * factor).round() as u32).max(1);
    (scale(width), scale(height))
}

/// Scales image payload dimensions of the affected topics.
pub fn rescale(
    log: &SequenceLog,
    factor: f64,
    topics: &BTreeSet<String>,
) -> Result<SequenceLog, PrepError> {
    check_factor(factor)?;
    let messages = log
        .messages
        .iter()
        .map(|m| match &m.payload {
            Payload::Image { width, height } if topics.contains(&m.topic) => {
                let (w, h) = scaled_dimensions(*width, *height, factor);
                Message {
                    t: m.t,
                    topic: m.topic.clone(),
                    payload: Payload::Image {
                        width: w,
                        height: h,
                    },
                }
            }
            _ => m.clone(),
        })
        .collect();
    Ok(SequenceLog { messages })
}

/// Applies rate reduction then rescaling.
pub fn prepare(log: &SequenceLog, source_rate: f64, params: &PrepParams) -> Result<SequenceLog, PrepError> {
    params.validate(source_rate)?;
    let mut out = match params.target_rate {
        Some(rate) => decimate(log, source_rate, rate, &params.topics)?,
        None => log.clone(),
    };
    if let Some(f) = params.resolution_factor {
        out = rescale(&out, f, &params.topics)?;
    }
    Ok(out)
}

/// Content key of a prepared variant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrepKey(pub String);

impl std::fmt::Display for PrepKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn canonical_number(v: Option<f64>) -> String {
    match v {
        // `{:?}` is the shortest round-trip form, so 0.5 and 0.50 agree
        Some(x) => format!("{x:?}"),
        None => "-".into(),
    }
}

/// Deterministic key: identical (dataset, sequence, params) give identical keys.
pub fn prep_cache_key(dataset: DatasetId, sequence: &str, params: &PrepParams) -> PrepKey {
    let topics: Vec<&str> = params.topics.iter().map(String::as_str).collect();
    let canonical = format!(
        "dataset={dataset}\nsequence={sequence}\nrate={}\nfactor={}\ntopics={}\n",
        canonical_number(params.target_rate),
        canonical_number(params.resolution_factor),
        topics.join(",")
    );
    let digest = Sha256::digest(canonical.as_bytes());
    PrepKey(hex::encode(&digest[..12]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam_log(n: usize, rate: f64) -> SequenceLog {
        let mut messages = Vec::new();
        for i in 0..n {
            let t = i as f64 / rate;
            messages.push(Message {
                t,
                topic: "/cam0".into(),
                payload: Payload::Image {
                    width: 752,
                    height: 480,
                },
            });
            messages.push(Message {
                t,
                topic: "/imu0".into(),
                payload: Payload::Imu,
            });
        }
        SequenceLog::new(messages).unwrap()
    }

    fn cams() -> BTreeSet<String> {
        ["/cam0".to_string()].into()
    }

    #[test]
    fn same_rate_is_identity() {
        let log = cam_log(40, 20.0);
        assert_eq!(decimate(&log, 20.0, 20.0, &cams()).unwrap(), log);
    }

    #[test]
    fn twenty_to_five_keeps_every_fourth() {
        let log = cam_log(40, 20.0);
        let out = decimate(&log, 20.0, 5.0, &cams()).unwrap();
        let kept: Vec<f64> = out.topic_messages("/cam0").map(|m| m.t).collect();
        let expected: Vec<f64> = (0..40).step_by(4).map(|i| i as f64 / 20.0).collect();
        assert_eq!(kept, expected);
        assert_eq!(out.count("/imu0"), 40);
    }

    #[test]
    fn rate_above_source() {
        assert!(matches!(
            decimate(&cam_log(4, 20.0), 20.0, 25.0, &cams()),
            Err(PrepError::RateAboveSource { .. })
        ));
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(scaled_dimensions(752, 480, 0.2), (150, 96));
        assert_eq!(scaled_dimensions(752, 480, 0.5), (376, 240));
        let log = cam_log(5, 20.0);
        assert_eq!(rescale(&log, 1.0, &cams()).unwrap(), log);
        assert!(matches!(rescale(&log, 0.0, &cams()), Err(PrepError::FactorOutOfRange(_))));
        assert!(matches!(rescale(&log, 1.5, &cams()), Err(PrepError::FactorOutOfRange(_))));
    }

    #[test]
    fn cache_key_normalization() {
        let p = |rate: Option<f64>, factor: Option<f64>| PrepParams {
            target_rate: rate,
            resolution_factor: factor,
            topics: cams(),
        };
        let a = prep_cache_key(DatasetId(1), "MH_01", &p(Some(5.0), Some(0.5)));
        let b = prep_cache_key(DatasetId(1), "MH_01", &p(Some(5.0), Some("0.50".parse().unwrap())));
        assert_eq!(a, b);
        assert_eq!(a, prep_cache_key(DatasetId(1), "MH_01", &p(Some(5.0), Some(0.5))));
        assert_ne!(a, prep_cache_key(DatasetId(1), "MH_01", &p(Some(10.0), Some(0.5))));
        assert_ne!(a, prep_cache_key(DatasetId(2), "MH_01", &p(Some(5.0), Some(0.5))));
    }

    #[test]
    fn decreasing_timestamps_rejected() {
        let msgs = vec![
            Message { t: 1.0, topic: "a".into(), payload: Payload::Imu },
            Message { t: 0.5, topic: "a".into(), payload: Payload::Imu },
        ];
        assert!(SequenceLog::new(msgs).is_err());
    }
}
