use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::ids::ConfigId;

use super::{
    CombinationSpec, ConfigError, LinkedParameterGroup, MappingConfiguration, ParamPath,
    ParamValue, DATASET_MODIFYING_KEYS,
};

/// Default upper bound on the number of configurations one spec may produce.
pub const DEFAULT_PRODUCT_CAP: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpandOptions {
    pub cap: u64,
    /// Id given to the first generated configuration; later ones count up.
    pub first_id: ConfigId,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_PRODUCT_CAP,
            first_id: ConfigId(1),
        }
    }
}

/// Splits a `value1 | value2 | value3` multi-value entry.
pub fn split_multi_values(text: &str) -> Result<Vec<String>, ConfigError> {
    let items: Vec<String> = text.split('|').map(|s| s.trim().to_string()).collect();
    if items.iter().any(String::is_empty) {
        return Err(ConfigError::EmptyItem(text.to_string()));
    }
    Ok(items)
}

fn same_value(a: &ParamValue, b: &ParamValue) -> bool {
    a == b || a.compare(b) == Some(Ordering::Equal)
}

fn check_distinct(key: &ParamPath, values: &[ParamValue]) -> Result<(), ConfigError> {
    for (i, a) in values.iter().enumerate() {
        if values[..i].iter().any(|b| same_value(a, b)) {
            return Err(ConfigError::DuplicateValue {
                key: key.to_string(),
                value: a.to_string(),
            });
        }
    }
    Ok(())
}

fn is_dataset_modifying(path: &ParamPath) -> bool {
    matches!(path, ParamPath::DatasetParam(k) if DATASET_MODIFYING_KEYS.contains(&k.as_str()))
}

fn validate(spec: &CombinationSpec) -> Result<(), ConfigError> {
    let base = &spec.base;
    for (key, values) in &spec.multi_values {
        if values.is_empty() {
            return Err(ConfigError::EmptyOptions(key.to_string()));
        }
        if !base.has(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if is_dataset_modifying(key) {
            return Err(ConfigError::RequiresLinkedGroup(key.to_string()));
        }
        check_distinct(key, values)?;
    }
    let mut drivers = BTreeSet::new();
    for group in &spec.linked_groups {
        if group.options.is_empty() {
            return Err(ConfigError::EmptyOptions(group.driver.to_string()));
        }
        if !base.has(&group.driver) {
            return Err(ConfigError::UnknownKey(group.driver.to_string()));
        }
        if spec.multi_values.contains_key(&group.driver) || !drivers.insert(&group.driver) {
            return Err(ConfigError::DuplicateKey(group.driver.to_string()));
        }
        let values: Vec<ParamValue> = group.options.iter().map(|o| o.value.clone()).collect();
        check_distinct(&group.driver, &values)?;
        for option in &group.options {
            if let Some(missing) = option.overrides.keys().find(|k| !base.has(k)) {
                return Err(ConfigError::UnknownKey(missing.to_string()));
            }
        }
    }
    Ok(())
}

/// Number of configurations a spec expands to (without validating it).
pub fn combination_count(spec: &CombinationSpec) -> u128 {
    spec.multi_values
        .values()
        .map(|v| v.len() as u128)
        .chain(spec.linked_groups.iter().map(|g| g.options.len() as u128))
        .fold(1u128, |acc, n| acc.saturating_mul(n))
}

enum Dim<'a> {
    Multi(&'a ParamPath, &'a [ParamValue]),
    Linked(&'a LinkedParameterGroup),
}

impl Dim<'_> {
    fn key(&self) -> &ParamPath {
        match self {
            Dim::Multi(k, _) => k,
            Dim::Linked(g) => &g.driver,
        }
    }

    fn len(&self) -> usize {
        match self {
            Dim::Multi(_, v) => v.len(),
            Dim::Linked(g) => g.options.len(),
        }
    }

    fn apply(&self, config: &mut MappingConfiguration, index: usize) -> Result<(), ConfigError> {
        match self {
            Dim::Multi(k, values) => config.set(k, values[index].clone()),
            Dim::Linked(group) => {
                let option = &group.options[index];
                config.set(&group.driver, option.value.clone())?;
                for (k, v) in &option.overrides {
                    config.set(k, v.clone())?;
                }
                Ok(())
            }
        }
    }
}

/// Cartesian product over the multi-value keys and linked groups.
///
/// Dimensions are ordered by key; the first key varies slowest and values
/// keep their declared order. Every output has `comb_parent` set and ids
/// counting up from `opts.first_id`.
pub fn expand_combinations(
    spec: &CombinationSpec,
    opts: &ExpandOptions,
) -> Result<Vec<MappingConfiguration>, ConfigError> {
    validate(spec)?;
    let size = combination_count(spec);
    if size > opts.cap as u128 {
        return Err(ConfigError::ProductTooLarge {
            size,
            cap: opts.cap,
        });
    }
    let mut dims: Vec<Dim<'_>> = spec
        .multi_values
        .iter()
        .map(|(k, v)| Dim::Multi(k, v.as_slice()))
        .chain(spec.linked_groups.iter().map(Dim::Linked))
        .collect();
    dims.sort_by(|a, b| a.key().cmp(b.key()));

    let total = size as usize;
    let mut out = Vec::with_capacity(total);
    let mut index = vec![0usize; dims.len()];
    for n in 0..total {
        let mut config = spec.base.clone();
        for (dim, &i) in dims.iter().zip(&index) {
            dim.apply(&mut config, i)?;
        }
        config.id = ConfigId(opts.first_id.0 + n as u64);
        config.comb_parent = Some(spec.id);
        out.push(config);

        for d in (0..dims.len()).rev() {
            index[d] += 1;
            if index[d] < dims[d].len() {
                break;
            }
            index[d] = 0;
        }
    }
    Ok(out)
}

/// Applies one option of a linked group: the driver value and all of its
/// dependent overrides together.
pub fn apply_linked_group(
    config: &MappingConfiguration,
    group: &LinkedParameterGroup,
    driver_value: &ParamValue,
) -> Result<MappingConfiguration, ConfigError> {
    let option = group
        .options
        .iter()
        .find(|o| same_value(&o.value, driver_value))
        .ok_or_else(|| ConfigError::UnknownDriverValue {
            driver: group.driver.to_string(),
            value: driver_value.to_string(),
        })?;
    let mut out = config.clone();
    out.set(&group.driver, option.value.clone())?;
    for (k, v) in &option.overrides {
        out.set(k, v.clone())?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::config::{LinkedOption, FRAME_RATE, RESOLUTION_FACTOR};
    use crate::ids::{AlgorithmId, CombId, DatasetId};

    fn base() -> MappingConfiguration {
        MappingConfiguration::new(AlgorithmId(1), DatasetId(1), "MH_01")
            .with_algorithm_param("nFeatures", 1000i64)
            .with_algorithm_param("scaleFactor", 1.2)
            .with_algorithm_param("nLevels", 8i64)
            .with_algorithm_param("iniThFAST", 20i64)
            .with_dataset_param(FRAME_RATE, 20.0)
            .with_dataset_param(RESOLUTION_FACTOR, 1.0)
            .with_dataset_param("fx", 458.0)
            .with_dataset_param("fy", 457.0)
            .with_dataset_param("cx", 367.0)
            .with_dataset_param("cy", 248.0)
    }

    fn spec() -> CombinationSpec {
        CombinationSpec {
            id: CombId(7),
            name: String::new(),
            base: base(),
            multi_values: BTreeMap::new(),
            linked_groups: Vec::new(),
        }
    }

    fn ints(vals: &[i64]) -> Vec<ParamValue> {
        vals.iter().map(|&v| ParamValue::Int(v)).collect()
    }

    fn resolution_group(factors: &[f64]) -> LinkedParameterGroup {
        LinkedParameterGroup {
            driver: ParamPath::dataset_param(RESOLUTION_FACTOR),
            options: factors
                .iter()
                .map(|&f| LinkedOption {
                    value: ParamValue::Real(f),
                    overrides: [
                        (ParamPath::dataset_param("fx"), ParamValue::Real(458.0 * f)),
                        (ParamPath::dataset_param("fy"), ParamValue::Real(457.0 * f)),
                        (ParamPath::dataset_param("cx"), ParamValue::Real(367.0 * f)),
                        (ParamPath::dataset_param("cy"), ParamValue::Real(248.0 * f)),
                    ]
                    .into(),
                })
                .collect(),
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_multi_values("2000").unwrap(), vec!["2000"]);
        assert_eq!(
            split_multi_values("20 | 10 | 5 | 2 | 1").unwrap(),
            vec!["20", "10", "5", "2", "1"]
        );
        assert!(matches!(split_multi_values("a || b"), Err(ConfigError::EmptyItem(_))));
        assert!(matches!(split_multi_values(""), Err(ConfigError::EmptyItem(_))));
        assert!(matches!(split_multi_values("a |"), Err(ConfigError::EmptyItem(_))));
    }

    #[test]
    fn four_by_five_is_625() {
        let mut s = spec();
        for key in ["nFeatures", "nLevels", "iniThFAST"] {
            s.multi_values
                .insert(ParamPath::algorithm_param(key), ints(&[1, 2, 3, 4, 5]));
        }
        s.multi_values.insert(
            ParamPath::dataset_param(FRAME_RATE),
            [20.0, 10.0, 5.0, 2.0, 1.0].map(ParamValue::Real).to_vec(),
        );
        let out = expand_combinations(&s, &ExpandOptions::default()).unwrap();
        assert_eq!(out.len(), 625);
        assert!(out.iter().all(|c| c.comb_parent == Some(CombId(7))));
        assert_eq!(out[0].id, ConfigId(1));
        assert_eq!(out[624].id, ConfigId(625));
    }

    #[test]
    fn table_v_monocular_row_is_60() {
        let mut s = spec();
        s.multi_values.insert(ParamPath::Algorithm, ints(&[1, 2]));
        s.multi_values.insert(
            ParamPath::dataset_param(FRAME_RATE),
            [20.0, 10.0, 5.0, 2.0, 1.0].map(ParamValue::Real).to_vec(),
        );
        s.linked_groups.push(resolution_group(&[1.0, 0.8, 0.6, 0.5, 0.4, 0.2]));
        assert_eq!(expand_combinations(&s, &ExpandOptions::default()).unwrap().len(), 60);
    }

    #[test]
    fn no_multi_values_gives_base() {
        let out = expand_combinations(&spec(), &ExpandOptions::default()).unwrap();
        assert_eq!(out.len(), 1);
        let mut expected = base();
        expected.id = ConfigId(1);
        expected.comb_parent = Some(CombId(7));
        assert_eq!(out[0], expected);
    }

    #[test]
    fn ordering_first_key_slowest() {
        let mut s = spec();
        s.multi_values.insert(ParamPath::algorithm_param("nFeatures"), ints(&[10, 20]));
        s.multi_values.insert(ParamPath::algorithm_param("nLevels"), ints(&[3, 2, 1]));
        let out = expand_combinations(&s, &ExpandOptions::default()).unwrap();
        let got: Vec<(i64, i64)> = out
            .iter()
            .map(|c| {
                (
                    c.algorithm_params["nFeatures"].as_i64().unwrap(),
                    c.algorithm_params["nLevels"].as_i64().unwrap(),
                )
            })
            .collect();
        assert_eq!(got, vec![(10, 3), (10, 2), (10, 1), (20, 3), (20, 2), (20, 1)]);
    }

    #[test]
    fn cap_enforced() {
        let mut s = spec();
        s.multi_values.insert(ParamPath::algorithm_param("nFeatures"), ints(&[1, 2, 3]));
        s.multi_values.insert(ParamPath::algorithm_param("nLevels"), ints(&[1, 2, 3]));
        let opts = ExpandOptions {
            cap: 8,
            ..Default::default()
        };
        assert!(matches!(
            expand_combinations(&s, &opts),
            Err(ConfigError::ProductTooLarge { size: 9, cap: 8 })
        ));
    }

    #[test]
    fn resolution_sweep_needs_linked_group() {
        let mut s = spec();
        s.multi_values.insert(
            ParamPath::dataset_param(RESOLUTION_FACTOR),
            vec![ParamValue::Real(1.0), ParamValue::Real(0.5)],
        );
        assert!(matches!(
            expand_combinations(&s, &ExpandOptions::default()),
            Err(ConfigError::RequiresLinkedGroup(_))
        ));
    }

    #[test]
    fn unknown_multi_key_rejected() {
        let mut s = spec();
        s.multi_values.insert(ParamPath::algorithm_param("missing"), ints(&[1]));
        assert!(matches!(
            expand_combinations(&s, &ExpandOptions::default()),
            Err(ConfigError::UnknownKey(_))
        ));
    }

    #[test]
    fn duplicate_values_rejected() {
        let mut s = spec();
        s.multi_values.insert(ParamPath::algorithm_param("nFeatures"), ints(&[5, 5]));
        assert!(matches!(
            expand_combinations(&s, &ExpandOptions::default()),
            Err(ConfigError::DuplicateValue { .. })
        ));
    }

    #[test]
    fn linked_group_applies_all_overrides() {
        let group = resolution_group(&[1.0, 0.5]);
        let out = apply_linked_group(&base(), &group, &ParamValue::Real(0.5)).unwrap();
        assert_eq!(out.resolution_factor(), Some(0.5));
        assert_eq!(out.dataset_params["fx"], ParamValue::Real(229.0));
        assert_eq!(out.dataset_params["fy"], ParamValue::Real(228.5));
        assert_eq!(out.dataset_params["cx"], ParamValue::Real(183.5));
        assert_eq!(out.dataset_params["cy"], ParamValue::Real(124.0));
    }

    #[test]
    fn linked_group_unknown_value() {
        let group = resolution_group(&[1.0, 0.5]);
        assert!(matches!(
            apply_linked_group(&base(), &group, &ParamValue::Real(0.3)),
            Err(ConfigError::UnknownDriverValue { .. })
        ));
    }

    #[test]
    fn linked_identity_option_changes_only_driver() {
        let group = LinkedParameterGroup {
            driver: ParamPath::dataset_param(RESOLUTION_FACTOR),
            options: vec![LinkedOption {
                value: ParamValue::Real(1.0),
                overrides: BTreeMap::new(),
            }],
        };
        let mut start = base();
        start.dataset_params.remove(RESOLUTION_FACTOR);
        let out = apply_linked_group(&start, &group, &ParamValue::Int(1)).unwrap();
        let mut expected = start.clone();
        expected
            .dataset_params
            .insert(RESOLUTION_FACTOR.into(), ParamValue::Real(1.0));
        assert_eq!(out, expected);
    }
}
