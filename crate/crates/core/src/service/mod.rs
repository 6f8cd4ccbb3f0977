//! Deployment modes and the request surface shared by the HTTP API and the
//! command line.
//!
//! Requests are plain values ([`ApiRequest`]) routed through the endpoint
//! table in [`ENDPOINTS`]; the HTTP server and the CLI are thin transports
//! over [`Service::handle`].

mod api;
mod config;
mod runner;
mod schema;

use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::AnalysisError;
use crate::config::ConfigError;
use crate::executor::ExecError;
use crate::layout::Layout;
use crate::scheduler::SchedError;
use crate::store::{Store, StoreError};

pub use api::{match_path, Access, ApiRequest, ApiResponse, Endpoint, Method, ResponseBody, ENDPOINTS};
pub use config::{DeploymentConfig, DeploymentMode, NodeInfo, ENV_BIND, ENV_MODE, ENV_NO_NEW_ANALYSIS};
pub use runner::TaskOutcome;
pub use schema::{api_markdown, api_schema, resource_fields, RESOURCES, SCHEMA_VERSION};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error("mode violation: {0}")]
    ModeViolation(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("cannot bind {0}")]
    BindFailure(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::ModeViolation(_) => 403,
            ServiceError::NotFound(_) => 404,
            ServiceError::BadRequest(_) => 400,
            ServiceError::Conflict(_) => 409,
            ServiceError::Invalid(_) => 422,
            ServiceError::BindFailure(_) | ServiceError::Internal(_) => 500,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::ModeViolation(_) => "ModeViolation",
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Conflict(_) => "Conflict",
            ServiceError::Invalid(_) => "Invalid",
            ServiceError::BindFailure(_) => "BindFailure",
            ServiceError::Internal(_) => "Internal",
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::NotFound(what) => ServiceError::NotFound(what),
            StoreError::AlreadyEvaluated(_) | StoreError::RunNotFinished(_) => ServiceError::Conflict(msg),
            StoreError::UnknownKey(_)
            | StoreError::TypeMismatch(_)
            | StoreError::MalformedPredicate(_)
            | StoreError::EmptyQuery => ServiceError::BadRequest(msg),
            StoreError::Config(_) | StoreError::CorruptResults(_) | StoreError::Evaluation(_) => {
                ServiceError::Invalid(msg)
            }
            StoreError::Io(_) => ServiceError::Internal(msg),
        }
    }
}

impl From<AnalysisError> for ServiceError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::NotFound(t) => ServiceError::NotFound(format!("analysis {t}")),
            AnalysisError::Store(s) => s.into(),
            AnalysisError::Io(m) => ServiceError::Internal(m),
            other => ServiceError::Invalid(other.to_string()),
        }
    }
}

impl From<ConfigError> for ServiceError {
    fn from(e: ConfigError) -> Self {
        ServiceError::Invalid(e.to_string())
    }
}

impl From<SchedError> for ServiceError {
    fn from(e: SchedError) -> Self {
        ServiceError::Invalid(e.to_string())
    }
}

impl From<ExecError> for ServiceError {
    fn from(e: ExecError) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

/// Mode information every client needs to decide what it may offer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeInfo {
    pub mode: DeploymentMode,
    pub no_new_analysis: bool,
    /// True when mutating endpoints are rejected.
    pub read_only: bool,
    /// True when analysis creation is accepted.
    pub analysis_allowed: bool,
    pub nodes: Vec<NodeInfo>,
    pub docs_url: String,
}

struct Inner {
    config: DeploymentConfig,
    layout: Layout,
    store: Store,
    jobs: Mutex<Vec<JoinHandle<()>>>,
}

/// A deployment: configuration, storage layout and store.
#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service")
            .field("mode", &self.inner.config.mode)
            .field("root", &self.inner.layout.root())
            .finish()
    }
}

impl Service {
    /// Opens (or creates) the store under `config.data_root`.
    pub fn open(config: DeploymentConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let layout = Layout::new(&config.data_root);
        let store = Store::open(layout.store_path())?;
        Ok(Self::with_store(config, layout, store))
    }

    pub fn with_store(config: DeploymentConfig, layout: Layout, store: Store) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                layout,
                store,
                jobs: Mutex::new(Vec::new()),
            }),
        }
    }

    pub fn config(&self) -> &DeploymentConfig {
        &self.inner.config
    }

    pub fn layout(&self) -> &Layout {
        &self.inner.layout
    }

    pub fn store(&self) -> &Store {
        &self.inner.store
    }

    pub fn mode_info(&self) -> ModeInfo {
        let c = &self.inner.config;
        ModeInfo {
            mode: c.mode,
            no_new_analysis: c.no_new_analysis,
            read_only: c.mode == DeploymentMode::ViewOnly,
            analysis_allowed: !c.no_new_analysis,
            nodes: c.nodes.clone(),
            docs_url: c.docs_url.clone(),
        }
    }

    /// Rejects a request its endpoint's access class does not allow here.
    pub fn check_access(&self, access: Access) -> Result<(), ServiceError> {
        let c = &self.inner.config;
        match access {
            Access::Read => Ok(()),
            Access::Write if c.mode == DeploymentMode::ViewOnly => Err(ServiceError::ModeViolation(
                "the deployment is view-only; changes are disabled".into(),
            )),
            Access::Write => Ok(()),
            Access::Analysis if c.no_new_analysis => Err(ServiceError::ModeViolation(
                "creation of new analyses is disabled".into(),
            )),
            Access::Analysis => Ok(()),
        }
    }

    /// Routes one request. Unknown paths give 404, known paths with another
    /// method give 405.
    pub fn handle(&self, req: &ApiRequest) -> ApiResponse {
        let docs = self.inner.config.docs_url.clone();
        let Some((endpoint, params)) = api::route(req.method, &req.path) else {
            let allowed = ENDPOINTS.iter().any(|e| match_path(e.path, &req.path).is_some());
            let (status, kind) = if allowed { (405, "MethodNotAllowed") } else { (404, "NotFound") };
            return ApiResponse::error(status, kind, &format!("{} {}", req.method, req.path), &docs);
        };
        let docs = format!("{docs}#{}", endpoint.name);
        let result = self
            .check_access(endpoint.access)
            .and_then(|_| api::dispatch(self, endpoint, &params, req));
        match result {
            Ok((status, body)) => ApiResponse::ok(status, body, &docs),
            Err(e) => ApiResponse::error(e.status(), e.kind(), &e.to_string(), &docs),
        }
    }

    pub(crate) fn spawn_job(&self, f: impl FnOnce() + Send + 'static) {
        let handle = std::thread::spawn(f);
        let mut jobs = self.inner.jobs.lock().expect("job list poisoned");
        jobs.retain(|h| !h.is_finished());
        jobs.push(handle);
    }

    /// Waits for background run batches to finish.
    pub fn wait_idle(&self) {
        loop {
            let next = self.inner.jobs.lock().expect("job list poisoned").pop();
            match next {
                Some(h) => {
                    let _ = h.join();
                }
                None => break,
            }
        }
    }
}

pub(crate) fn to_json(v: impl Serialize) -> Result<Value, ServiceError> {
    serde_json::to_value(v).map_err(|e| ServiceError::Internal(e.to_string()))
}

pub(crate) fn empty() -> Value {
    json!({})
}
