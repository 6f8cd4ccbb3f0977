use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::executor::{AdapterRegistry, ExecutorOptions};
use crate::scheduler::CostModel;

use super::ServiceError;

pub const ENV_BIND: &str = "MAPBENCH_BIND";
pub const ENV_MODE: &str = "MAPBENCH_MODE";
pub const ENV_NO_NEW_ANALYSIS: &str = "MAPBENCH_NO_NEW_ANALYSIS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentMode {
    /// Serves stored results; rejects every change except (optionally)
    /// analysis creation.
    ViewOnly,
    /// One machine, runs executed locally one at a time by default.
    Workstation,
    /// Runs spread over the node inventory, one controller per node.
    Cluster,
    /// Like cluster, with nodes provisioned on demand.
    Cloud,
}

impl DeploymentMode {
    pub fn needs_nodes(self) -> bool {
        matches!(self, DeploymentMode::Cluster | DeploymentMode::Cloud)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DeploymentMode::ViewOnly => "view_only",
            DeploymentMode::Workstation => "workstation",
            DeploymentMode::Cluster => "cluster",
            DeploymentMode::Cloud => "cloud",
        }
    }
}

impl fmt::Display for DeploymentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeploymentMode {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "view_only" | "viewonly" => DeploymentMode::ViewOnly,
            "workstation" => DeploymentMode::Workstation,
            "cluster" => DeploymentMode::Cluster,
            "cloud" => DeploymentMode::Cloud,
            other => return Err(ServiceError::BadRequest(format!("unknown mode {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub host: String,
    /// Address on the internal network.
    pub address: String,
}

/// Deployment file (TOML):
///
/// ```toml
/// mode = "cluster"
/// no_new_analysis = false
/// bind = "127.0.0.1:8080"
/// data_root = "/srv/mapbench"
/// max_parallel = 1
/// time_scale = 1.0
///
/// [[nodes]]
/// host = "node1"
/// address = "10.0.0.11"
///
/// [adapters]
/// "orbslam2:mono" = { program = "/opt/adapters/orbslam2.sh" }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeploymentConfig {
    pub mode: DeploymentMode,
    pub no_new_analysis: bool,
    pub nodes: Vec<NodeInfo>,
    pub bind: String,
    pub data_root: PathBuf,
    /// Link placed in every API response.
    pub docs_url: String,
    /// Concurrent runs per node.
    pub max_parallel: usize,
    pub time_scale: f64,
    pub profile_period_ms: u64,
    pub timeout_floor_s: u64,
    pub seed: u64,
    pub adapters: AdapterRegistry,
    pub cost_model: CostModel,
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            mode: DeploymentMode::Workstation,
            no_new_analysis: false,
            nodes: Vec::new(),
            bind: "127.0.0.1:8080".into(),
            data_root: PathBuf::from("mapbench-data"),
            docs_url: "/docs".into(),
            max_parallel: 1,
            time_scale: 1.0,
            profile_period_ms: 500,
            timeout_floor_s: 10,
            seed: 0,
            adapters: AdapterRegistry::new(),
            cost_model: CostModel::default(),
        }
    }
}

impl DeploymentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ServiceError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `MAPBENCH_BIND`, `MAPBENCH_MODE` and `MAPBENCH_NO_NEW_ANALYSIS`.
    pub fn apply_env(&mut self, env: &BTreeMap<String, String>) -> Result<(), ServiceError> {
        if let Some(b) = env.get(ENV_BIND) {
            self.bind = b.clone();
        }
        if let Some(m) = env.get(ENV_MODE) {
            self.mode = m.parse()?;
        }
        if let Some(v) = env.get(ENV_NO_NEW_ANALYSIS) {
            self.no_new_analysis = matches!(v.trim(), "1" | "true" | "yes");
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        let bad = |m: String| Err(ServiceError::BadRequest(m));
        if self.mode.needs_nodes() && self.nodes.is_empty() {
            return bad(format!("{} mode needs a node inventory", self.mode));
        }
        if !self.mode.needs_nodes() && !self.nodes.is_empty() {
            return bad(format!("{} mode takes no node inventory", self.mode));
        }
        if self.max_parallel == 0 {
            return bad("max_parallel must be at least 1".into());
        }
        if !(self.time_scale > 0.0) || !self.time_scale.is_finite() {
            return bad(format!("time_scale must be positive, got {}", self.time_scale));
        }
        self.cost_model
            .validate()
            .map_err(|e| ServiceError::BadRequest(e.to_string()))
    }

    pub fn executor_options(&self) -> ExecutorOptions {
        ExecutorOptions {
            time_scale: self.time_scale,
            profile_period: Duration::from_millis(self.profile_period_ms.max(1)),
            timeout_floor: Duration::from_secs(self.timeout_floor_s),
            ..Default::default()
        }
    }
}
