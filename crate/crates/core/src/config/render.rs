use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ids::{AlgorithmId, DatasetId};

use super::{Catalog, ConfigError, MappingConfiguration, ParamValue, Remap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSection {
    pub id: AlgorithmId,
    pub name: String,
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSection {
    pub id: DatasetId,
    pub name: String,
    pub sequence: String,
}

/// The per-run configuration document handed to the algorithm adapter.
///
/// Field order is fixed and parameter maps are sorted, so equal
/// configurations render to byte-identical YAML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifiedConfig {
    pub algorithm: AlgorithmSection,
    pub dataset: DatasetSection,
    pub algorithm_params: BTreeMap<String, ParamValue>,
    pub dataset_params: BTreeMap<String, ParamValue>,
    pub remap: Vec<Remap>,
}

impl UnifiedConfig {
    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("unified config is always representable")
    }

    pub fn from_yaml(text: &str) -> Result<Self, ConfigError> {
        serde_yaml::from_str(text).map_err(|e| ConfigError::Document(e.to_string()))
    }

    pub fn algorithm_param(&self, key: &str) -> Option<&ParamValue> {
        self.algorithm_params.get(key)
    }
}

/// Binds a configuration to its catalog entries.
pub fn render_unified_config(
    config: &MappingConfiguration,
    catalog: &Catalog,
) -> Result<UnifiedConfig, ConfigError> {
    let algorithm = catalog.algorithms.get(&config.algorithm_id).ok_or_else(|| {
        ConfigError::DanglingReference(format!("algorithm {}", config.algorithm_id))
    })?;
    let dataset = catalog.datasets.get(&config.dataset_id).ok_or_else(|| {
        ConfigError::DanglingReference(format!("dataset {}", config.dataset_id))
    })?;
    let mut algorithm_params = algorithm.default_params();
    algorithm_params.extend(config.algorithm_params.clone());
    Ok(UnifiedConfig {
        algorithm: AlgorithmSection {
            id: algorithm.id,
            name: algorithm.name.clone(),
            image: algorithm.image_ref.clone(),
        },
        dataset: DatasetSection {
            id: dataset.id,
            name: dataset.name.clone(),
            sequence: config.sequence.clone(),
        },
        algorithm_params,
        dataset_params: config.dataset_params.clone(),
        remap: config.remap.clone(),
    })
}
