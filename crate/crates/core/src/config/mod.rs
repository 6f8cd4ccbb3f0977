//! Algorithms, datasets and mapping configurations, plus expansion of
//! multi-value combination specifications and rendering of the unified
//! per-run configuration document.

mod expand;
mod render;
mod value;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ids::{AlgorithmId, CombId, ConfigId, DatasetId};

pub use expand::{
    apply_linked_group, combination_count, expand_combinations, split_multi_values,
    ExpandOptions, DEFAULT_PRODUCT_CAP,
};
pub use render::{render_unified_config, AlgorithmSection, DatasetSection, UnifiedConfig};
pub use value::{ParamPath, ParamValue, ValueKind};

/// Dataset parameter holding the playback frame rate (Hz).
pub const FRAME_RATE: &str = "frame_rate";
/// Dataset parameter holding the image resolution factor in (0, 1].
pub const RESOLUTION_FACTOR: &str = "resolution_factor";
/// Dataset parameter enabling map export.
pub const SAVE_MAP: &str = "save_map";

/// Dataset parameters whose change alters the recorded data in a way that
/// other parameters (camera intrinsics) must follow; sweeping them requires
/// a [`LinkedParameterGroup`].
pub const DATASET_MODIFYING_KEYS: &[&str] = &[RESOLUTION_FACTOR];

/// Kind of the well-known dataset parameters.
pub fn dataset_param_kind(key: &str) -> Option<ValueKind> {
    match key {
        FRAME_RATE | RESOLUTION_FACTOR | "fx" | "fy" | "cx" | "cy" => Some(ValueKind::Real),
        SAVE_MAP => Some(ValueKind::Flag),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("empty item in multi-value list {0:?}")]
    EmptyItem(String),
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("{value:?} is not a valid {kind} value")]
    InvalidValue { value: String, kind: ValueKind },
    #[error("combination product {size} exceeds cap {cap}")]
    ProductTooLarge { size: u128, cap: u64 },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("driver value {value} is not an option of linked group {driver}")]
    UnknownDriverValue { driver: String, value: String },
    #[error("duplicate value {value} for {key}")]
    DuplicateValue { key: String, value: String },
    #[error("{0} has an empty value list")]
    EmptyOptions(String),
    #[error("{0} modifies the dataset and must be swept through a linked parameter group")]
    RequiresLinkedGroup(String),
    #[error("{0} is swept more than once")]
    DuplicateKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("document error: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorMode {
    Mono,
    MonoImu,
    Stereo,
    StereoImu,
    Rgbd,
    Lidar,
    LidarImu,
}

/// One entry of an algorithm's parameter template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub key: String,
    pub default: ParamValue,
    pub kind: ValueKind,
}

impl ParamSpec {
    pub fn new(key: &str, default: impl Into<ParamValue>, kind: ValueKind) -> Self {
        Self {
            key: key.to_string(),
            default: default.into(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub id: AlgorithmId,
    pub name: String,
    pub sensor_modes: BTreeSet<SensorMode>,
    /// Identifier of the sandbox image (resolved by the adapter registry).
    pub image_ref: String,
    #[serde(default)]
    pub parameter_template: Vec<ParamSpec>,
}

impl AlgorithmSpec {
    pub fn param(&self, key: &str) -> Option<&ParamSpec> {
        self.parameter_template.iter().find(|p| p.key == key)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut seen = BTreeSet::new();
        for p in &self.parameter_template {
            if !seen.insert(p.key.as_str()) {
                return Err(ConfigError::DuplicateKey(p.key.clone()));
            }
            if p.default.kind() != p.kind
                && !(p.kind == ValueKind::Real && p.default.kind() == ValueKind::Integer)
            {
                return Err(ConfigError::InvalidValue {
                    value: p.default.to_string(),
                    kind: p.kind,
                });
            }
        }
        Ok(())
    }

    /// Default parameter values from the template.
    pub fn default_params(&self) -> BTreeMap<String, ParamValue> {
        self.parameter_template
            .iter()
            .map(|p| (p.key.clone(), p.default.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub id: DatasetId,
    pub name: String,
    pub sequences: Vec<String>,
    /// Sensor name → topic id. Sensors named `cam*` or `image*` carry images.
    pub topics: BTreeMap<String, String>,
    pub ground_truth_ref: String,
    /// Hz.
    pub native_rate: f64,
    /// (width, height) in pixels.
    pub native_resolution: (u32, u32),
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.native_rate > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "dataset {}: native_rate must be positive",
                self.id
            )));
        }
        if self.native_resolution.0 == 0 || self.native_resolution.1 == 0 {
            return Err(ConfigError::Invalid(format!(
                "dataset {}: native resolution must be positive",
                self.id
            )));
        }
        Ok(())
    }

    pub fn image_topics(&self) -> BTreeSet<String> {
        self.topics
            .iter()
            .filter(|(sensor, _)| sensor.starts_with("cam") || sensor.starts_with("image"))
            .map(|(_, topic)| topic.clone())
            .collect()
    }
}

/// Registered algorithms and datasets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub algorithms: BTreeMap<AlgorithmId, AlgorithmSpec>,
    pub datasets: BTreeMap<DatasetId, DatasetSpec>,
}

impl Catalog {
    pub fn add_algorithm(&mut self, spec: AlgorithmSpec) -> Result<(), ConfigError> {
        spec.validate()?;
        if self.algorithms.contains_key(&spec.id) {
            return Err(ConfigError::DuplicateKey(format!("algorithm {}", spec.id)));
        }
        self.algorithms.insert(spec.id, spec);
        Ok(())
    }

    pub fn add_dataset(&mut self, spec: DatasetSpec) -> Result<(), ConfigError> {
        spec.validate()?;
        if self.datasets.contains_key(&spec.id) {
            return Err(ConfigError::DuplicateKey(format!("dataset {}", spec.id)));
        }
        self.datasets.insert(spec.id, spec);
        Ok(())
    }

    /// Kind of a bare parameter key as declared by any algorithm template or
    /// as a well-known dataset parameter.
    pub fn param_kind(&self, key: &str) -> Option<ValueKind> {
        self.algorithms
            .values()
            .find_map(|a| a.param(key).map(|p| p.kind))
            .or_else(|| dataset_param_kind(key))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Remap {
    pub from: String,
    pub to: String,
}

/// One fully bound run recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingConfiguration {
    #[serde(default)]
    pub id: ConfigId,
    pub algorithm_id: AlgorithmId,
    pub dataset_id: DatasetId,
    pub sequence: String,
    #[serde(default)]
    pub algorithm_params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub dataset_params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    pub remap: Vec<Remap>,
    #[serde(default)]
    pub comb_parent: Option<CombId>,
}

impl MappingConfiguration {
    pub fn new(algorithm_id: AlgorithmId, dataset_id: DatasetId, sequence: &str) -> Self {
        Self {
            id: ConfigId(0),
            algorithm_id,
            dataset_id,
            sequence: sequence.to_string(),
            algorithm_params: BTreeMap::new(),
            dataset_params: BTreeMap::new(),
            remap: Vec::new(),
            comb_parent: None,
        }
    }

    pub fn with_algorithm_param(mut self, key: &str, v: impl Into<ParamValue>) -> Self {
        self.algorithm_params.insert(key.to_string(), v.into());
        self
    }

    pub fn with_dataset_param(mut self, key: &str, v: impl Into<ParamValue>) -> Self {
        self.dataset_params.insert(key.to_string(), v.into());
        self
    }

    pub fn frame_rate(&self) -> Option<f64> {
        self.dataset_params.get(FRAME_RATE).and_then(ParamValue::as_f64)
    }

    pub fn resolution_factor(&self) -> Option<f64> {
        self.dataset_params
            .get(RESOLUTION_FACTOR)
            .and_then(ParamValue::as_f64)
    }

    pub fn save_map(&self) -> bool {
        self.dataset_params
            .get(SAVE_MAP)
            .and_then(ParamValue::as_bool)
            .unwrap_or(false)
    }

    /// Reads a path; `None` when the parameter is not set.
    pub fn get(&self, path: &ParamPath) -> Option<ParamValue> {
        match path {
            ParamPath::Algorithm => Some(ParamValue::Int(self.algorithm_id.0 as i64)),
            ParamPath::Dataset => Some(ParamValue::Int(self.dataset_id.0 as i64)),
            ParamPath::Sequence => Some(ParamValue::Text(self.sequence.clone())),
            ParamPath::AlgorithmParam(k) => self.algorithm_params.get(k).cloned(),
            ParamPath::DatasetParam(k) => self.dataset_params.get(k).cloned(),
        }
    }

    /// Writes a path.
    pub fn set(&mut self, path: &ParamPath, value: ParamValue) -> Result<(), ConfigError> {
        let id_value = |v: &ParamValue| match v {
            ParamValue::Int(i) if *i >= 0 => Ok(*i as u64),
            other => Err(ConfigError::InvalidValue {
                value: other.to_string(),
                kind: ValueKind::Integer,
            }),
        };
        match path {
            ParamPath::Algorithm => self.algorithm_id = AlgorithmId(id_value(&value)?),
            ParamPath::Dataset => self.dataset_id = DatasetId(id_value(&value)?),
            ParamPath::Sequence => self.sequence = value.to_string(),
            ParamPath::AlgorithmParam(k) => {
                self.algorithm_params.insert(k.clone(), value);
            }
            ParamPath::DatasetParam(k) => {
                self.dataset_params.insert(k.clone(), value);
            }
        }
        Ok(())
    }

    /// True when `path` can be addressed on this configuration.
    pub fn has(&self, path: &ParamPath) -> bool {
        match path {
            ParamPath::DatasetParam(k) => {
                self.dataset_params.contains_key(k) || dataset_param_kind(k).is_some()
            }
            _ => self.get(path).is_some(),
        }
    }

    /// Checks references and dataset-parameter ranges against the catalog.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), ConfigError> {
        let algorithm = catalog.algorithms.get(&self.algorithm_id).ok_or_else(|| {
            ConfigError::DanglingReference(format!("algorithm {}", self.algorithm_id))
        })?;
        let dataset = catalog.datasets.get(&self.dataset_id).ok_or_else(|| {
            ConfigError::DanglingReference(format!("dataset {}", self.dataset_id))
        })?;
        if !dataset.sequences.iter().any(|s| s == &self.sequence) {
            return Err(ConfigError::DanglingReference(format!(
                "sequence {:?} of dataset {}",
                self.sequence, dataset.id
            )));
        }
        for (key, value) in &self.algorithm_params {
            if let Some(spec) = algorithm.param(key) {
                let ok = value.kind() == spec.kind
                    || (spec.kind == ValueKind::Real && value.kind() == ValueKind::Integer);
                if !ok {
                    return Err(ConfigError::InvalidValue {
                        value: value.to_string(),
                        kind: spec.kind,
                    });
                }
            }
        }
        if let Some(v) = self.dataset_params.get(FRAME_RATE) {
            let rate = v.as_f64().ok_or_else(|| ConfigError::InvalidValue {
                value: v.to_string(),
                kind: ValueKind::Real,
            })?;
            if !(rate > 0.0) || rate > dataset.native_rate + 1e-9 {
                return Err(ConfigError::Invalid(format!(
                    "frame rate {rate} outside (0, {}]",
                    dataset.native_rate
                )));
            }
        }
        if let Some(v) = self.dataset_params.get(RESOLUTION_FACTOR) {
            let f = v.as_f64().ok_or_else(|| ConfigError::InvalidValue {
                value: v.to_string(),
                kind: ValueKind::Real,
            })?;
            if !(f > 0.0 && f <= 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "resolution factor {f} outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// One option of a linked group: the driver value plus the dependent
/// parameters that must change with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedOption {
    pub value: ParamValue,
    #[serde(default)]
    pub overrides: BTreeMap<ParamPath, ParamValue>,
}

/// Parameters that change together with a dataset-modifying driver key,
/// e.g. camera intrinsics following the resolution factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedParameterGroup {
    pub driver: ParamPath,
    pub options: Vec<LinkedOption>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationSpec {
    #[serde(default)]
    pub id: CombId,
    #[serde(default)]
    pub name: String,
    pub base: MappingConfiguration,
    #[serde(default)]
    pub multi_values: BTreeMap<ParamPath, Vec<ParamValue>>,
    #[serde(default)]
    pub linked_groups: Vec<LinkedParameterGroup>,
}
