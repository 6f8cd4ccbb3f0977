use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ConfigError;

/// Declared kind of a parameter, used for typed comparison in search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    Integer,
    Real,
    Text,
    Flag,
}

impl ValueKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueKind::Integer | ValueKind::Real)
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueKind::Integer => "integer",
            ValueKind::Real => "real",
            ValueKind::Text => "text",
            ValueKind::Flag => "flag",
        })
    }
}

/// A parameter value. Serializes as a bare YAML/JSON scalar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Flag(bool),
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            ParamValue::Flag(_) => ValueKind::Flag,
            ParamValue::Int(_) => ValueKind::Integer,
            ParamValue::Real(_) => ValueKind::Real,
            ParamValue::Text(_) => ValueKind::Text,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            ParamValue::Flag(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    /// Parses `text` as a value of the given kind.
    pub fn parse_as(kind: ValueKind, text: &str) -> Result<Self, ConfigError> {
        let t = text.trim();
        let bad = || ConfigError::InvalidValue {
            value: t.to_string(),
            kind,
        };
        Ok(match kind {
            ValueKind::Integer => ParamValue::Int(t.parse().map_err(|_| bad())?),
            ValueKind::Real => {
                let v: f64 = t.parse().map_err(|_| bad())?;
                if !v.is_finite() {
                    return Err(bad());
                }
                ParamValue::Real(v)
            }
            ValueKind::Flag => match t.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => ParamValue::Flag(true),
                "false" | "0" | "no" => ParamValue::Flag(false),
                _ => return Err(bad()),
            },
            ValueKind::Text => ParamValue::Text(t.to_string()),
        })
    }

    /// Infers the narrowest kind: integer, then real, then flag, then text.
    pub fn infer(text: &str) -> Self {
        let t = text.trim();
        if let Ok(v) = t.parse::<i64>() {
            return ParamValue::Int(v);
        }
        if let Ok(v) = t.parse::<f64>() {
            if v.is_finite() {
                return ParamValue::Real(v);
            }
        }
        match t {
            "true" => ParamValue::Flag(true),
            "false" => ParamValue::Flag(false),
            _ => ParamValue::Text(t.to_string()),
        }
    }

    /// Value comparison across numeric kinds; `None` for incomparable kinds.
    pub fn compare(&self, other: &ParamValue) -> Option<Ordering> {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a.partial_cmp(&b),
            _ => match (self, other) {
                (ParamValue::Text(a), ParamValue::Text(b)) => Some(a.cmp(b)),
                (ParamValue::Flag(a), ParamValue::Flag(b)) => Some(a.cmp(b)),
                _ => None,
            },
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Flag(b) => write!(f, "{b}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v:?}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Flag(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_string())
    }
}

/// Address of a sweepable field of a [`MappingConfiguration`](super::MappingConfiguration).
///
/// String forms: `algorithm`, `dataset`, `sequence`, `algorithm_params.<key>`,
/// `dataset_params.<key>`. Paths order by their string form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ParamPath {
    Algorithm,
    Dataset,
    Sequence,
    AlgorithmParam(String),
    DatasetParam(String),
}

impl ParamPath {
    pub fn algorithm_param(key: &str) -> Self {
        ParamPath::AlgorithmParam(key.to_string())
    }

    pub fn dataset_param(key: &str) -> Self {
        ParamPath::DatasetParam(key.to_string())
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPath::Algorithm => f.write_str("algorithm"),
            ParamPath::Dataset => f.write_str("dataset"),
            ParamPath::Sequence => f.write_str("sequence"),
            ParamPath::AlgorithmParam(k) => write!(f, "algorithm_params.{k}"),
            ParamPath::DatasetParam(k) => write!(f, "dataset_params.{k}"),
        }
    }
}

impl FromStr for ParamPath {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let key_ok = |k: &str| !k.is_empty() && !k.chars().any(char::is_whitespace);
        match s {
            "algorithm" => Ok(ParamPath::Algorithm),
            "dataset" => Ok(ParamPath::Dataset),
            "sequence" => Ok(ParamPath::Sequence),
            _ => {
                if let Some(k) = s.strip_prefix("algorithm_params.").filter(|k| key_ok(k)) {
                    Ok(ParamPath::AlgorithmParam(k.to_string()))
                } else if let Some(k) = s.strip_prefix("dataset_params.").filter(|k| key_ok(k)) {
                    Ok(ParamPath::DatasetParam(k.to_string()))
                } else {
                    Err(ConfigError::UnknownKey(s.to_string()))
                }
            }
        }
    }
}

impl TryFrom<String> for ParamPath {
    type Error = ConfigError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ParamPath> for String {
    fn from(p: ParamPath) -> Self {
        p.to_string()
    }
}

impl PartialOrd for ParamPath {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ParamPath {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_string().cmp(&other.to_string())
    }
}
