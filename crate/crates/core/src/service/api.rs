use std::collections::BTreeMap;
use std::fmt;
use std::fs;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{create_analysis, export_raw, load_report};
use crate::config::{
    combination_count, dataset_param_kind, expand_combinations, split_multi_values, AlgorithmSpec, Catalog,
    CombinationSpec, DatasetSpec, ExpandOptions, MappingConfiguration, ParamPath, ParamValue, ValueKind,
};
use crate::executor::read_profile;
use crate::ids::{ConfigId, RunId, TaskId};
use crate::layout::{PROFILING_FILE, RESULTS_DIR, TRAJECTORY_FILE};
use crate::scheduler::{
    plan_cloud, plan_cluster, plan_cluster_balanced, render_manifests, simulate, tasks_from_store, transfer_cost,
    CostModel, PlanTask, Resource, Strategy,
};
use crate::store::{
    export_configurations_csv, export_runs_csv, EvalOptions, SearchQuery, SearchTarget, StoreData,
};
use crate::trajeval::parse_trajectory;

use super::{api_schema, empty, to_json, Service, ServiceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Get,
    Post,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Get => "GET",
            Method::Post => "POST",
        })
    }
}

/// What an endpoint does to stored state, which decides mode gating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Read,
    /// Rejected in view-only mode.
    Write,
    /// Allowed in every mode unless new analyses are disabled.
    Analysis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Endpoint {
    pub name: &'static str,
    pub method: Method,
    pub path: &'static str,
    pub access: Access,
    pub request: Option<&'static str>,
    pub response: &'static str,
    pub summary: &'static str,
}

const fn ep(
    name: &'static str,
    method: Method,
    path: &'static str,
    access: Access,
    request: Option<&'static str>,
    response: &'static str,
    summary: &'static str,
) -> Endpoint {
    Endpoint {
        name,
        method,
        path,
        access,
        request,
        response,
        summary,
    }
}

use Access::{Analysis, Read, Write};
use Method::{Get, Post};

pub const ENDPOINTS: &[Endpoint] = &[
    ep("mode", Get, "/api/mode", Read, None, "ModeInfo", "Deployment mode and what it permits"),
    ep("schema", Get, "/api/schema", Read, None, "Schema", "This API description"),
    ep("list_algorithms", Get, "/api/algorithms", Read, None, "AlgorithmSpec[]", "Registered algorithms"),
    ep("create_algorithm", Post, "/api/algorithms", Write, Some("AlgorithmSpec"), "Created", "Register an algorithm"),
    ep("list_datasets", Get, "/api/datasets", Read, None, "DatasetSpec[]", "Registered datasets"),
    ep("create_dataset", Post, "/api/datasets", Write, Some("DatasetSpec"), "Created", "Register a dataset"),
    ep("list_configurations", Get, "/api/configurations", Read, None, "MappingConfiguration[]", "All configurations"),
    ep("create_configuration", Post, "/api/configurations", Write, Some("MappingConfiguration"), "Created", "Store one configuration"),
    ep("get_configuration", Get, "/api/configurations/{id}", Read, None, "MappingConfiguration", "One configuration"),
    ep("export_configurations", Get, "/api/configurations.csv", Read, None, "text/csv", "Configurations as CSV"),
    ep("list_combinations", Get, "/api/combinations", Read, None, "CombinationSpec[]", "Stored combination specs"),
    ep("preview_combination", Post, "/api/combinations/preview", Read, Some("CombinationRequest"), "CombinationPreview", "Expansion count and configurations without storing them"),
    ep("create_combination", Post, "/api/combinations", Write, Some("CombinationRequest"), "CombinationCreated", "Expand and store a combination spec"),
    ep("list_tasks", Get, "/api/tasks", Read, None, "TaskRecord[]", "Mapping tasks"),
    ep("create_tasks", Post, "/api/tasks", Write, Some("CreateTasks"), "TaskIds", "Queue one task per configuration"),
    ep("run_tasks", Post, "/api/tasks/run", Write, Some("RunTasks"), "RunStarted", "Execute queued tasks"),
    ep("list_runs", Get, "/api/runs", Read, None, "RunRecord[]", "Mapping runs"),
    ep("export_runs", Get, "/api/runs.csv", Read, None, "text/csv", "Runs with metrics as CSV"),
    ep("get_run", Get, "/api/runs/{id}", Read, None, "RunRecord", "One run"),
    ep("run_trajectory", Get, "/api/runs/{id}/trajectory", Read, None, "RunTrajectory", "Estimated and reference positions"),
    ep("run_profile", Get, "/api/runs/{id}/profile", Read, None, "ResourceSample[]", "CPU and RAM samples"),
    ep("run_map", Get, "/api/runs/{id}/map", Read, None, "application/octet-stream", "Saved map artifact"),
    ep("list_evaluations", Get, "/api/evaluations", Read, None, "EvaluationRecord[]", "Evaluation records"),
    ep("get_evaluation", Get, "/api/evaluations/{id}", Read, None, "EvaluationRecord", "Evaluation of one run"),
    ep("evaluate", Post, "/api/evaluations", Write, Some("EvaluateRequest"), "BatchEvaluation", "Evaluate runs or all un-evaluated runs"),
    ep("search", Get, "/api/search", Read, None, "SearchResult", "Predicate search (?q=...&target=configurations|evaluations)"),
    ep("list_analyses", Get, "/api/analyses", Read, None, "ReportMeta[]", "Listed analysis reports"),
    ep("create_analysis", Post, "/api/analyses", Analysis, Some("CreateAnalysis"), "AnalysisReport", "Run and publish an analysis"),
    ep("get_analysis", Get, "/api/analyses/{token}", Read, None, "AnalysisReport", "Report at its URL token"),
    ep("list_analysis_files", Get, "/api/analyses/{token}/files", Read, None, "string[]", "Raw data files of a report"),
    ep("get_analysis_file", Get, "/api/analyses/{token}/files/{file}", Read, None, "text/csv", "One raw data file"),
    ep("plan_cluster", Post, "/api/plans/cluster", Read, Some("ClusterPlanRequest"), "ClusterPlanResponse", "Plan and simulate a cluster campaign"),
    ep("plan_cloud", Post, "/api/plans/cloud", Read, Some("CloudPlanRequest"), "CloudPlanResponse", "Plan and simulate cloud provisioning"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiRequest {
    pub method: Method,
    pub path: String,
    #[serde(default)]
    pub query: BTreeMap<String, String>,
    #[serde(default)]
    pub body: Option<Value>,
}

impl ApiRequest {
    pub fn get(path: &str) -> Self {
        Self {
            method: Method::Get,
            path: path.to_string(),
            query: BTreeMap::new(),
            body: None,
        }
    }

    pub fn post(path: &str, body: Value) -> Self {
        Self {
            method: Method::Post,
            path: path.to_string(),
            query: BTreeMap::new(),
            body: Some(body),
        }
    }

    pub fn with_query(mut self, key: &str, value: &str) -> Self {
        self.query.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseBody {
    Json(Value),
    Raw { content_type: &'static str, bytes: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiResponse {
    pub status: u16,
    pub body: ResponseBody,
    pub docs_url: String,
}

impl ApiResponse {
    pub(super) fn ok(status: u16, body: ResponseBody, docs: &str) -> Self {
        let body = match body {
            ResponseBody::Json(data) => ResponseBody::Json(json!({ "data": data, "docs_url": docs })),
            raw => raw,
        };
        Self {
            status,
            body,
            docs_url: docs.to_string(),
        }
    }

    pub(super) fn error(status: u16, kind: &str, message: &str, docs: &str) -> Self {
        Self {
            status,
            body: ResponseBody::Json(json!({
                "error": { "kind": kind, "message": message },
                "docs_url": docs,
            })),
            docs_url: docs.to_string(),
        }
    }

    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// The `data` member of a successful JSON response.
    pub fn data(&self) -> Option<&Value> {
        match &self.body {
            ResponseBody::Json(v) => v.get("data"),
            ResponseBody::Raw { .. } => None,
        }
    }

    pub fn error_kind(&self) -> Option<&str> {
        match &self.body {
            ResponseBody::Json(v) => v.pointer("/error/kind").and_then(Value::as_str),
            ResponseBody::Raw { .. } => None,
        }
    }

    pub fn text(&self) -> String {
        match &self.body {
            ResponseBody::Json(v) => serde_json::to_string_pretty(v).unwrap_or_default(),
            ResponseBody::Raw { bytes, .. } => String::from_utf8_lossy(bytes).into_owned(),
        }
    }
}

/// Matches `/a/{x}/b` style patterns, returning the captured segments.
pub fn match_path(pattern: &str, path: &str) -> Option<BTreeMap<String, String>> {
    let path = path.split('?').next().unwrap_or("");
    let p: Vec<&str> = pattern.trim_end_matches('/').split('/').collect();
    let s: Vec<&str> = path.trim_end_matches('/').split('/').collect();
    if p.len() != s.len() {
        return None;
    }
    let mut out = BTreeMap::new();
    for (a, b) in p.iter().zip(&s) {
        if let Some(name) = a.strip_prefix('{').and_then(|n| n.strip_suffix('}')) {
            if b.is_empty() {
                return None;
            }
            out.insert(name.to_string(), b.to_string());
        } else if a != b {
            return None;
        }
    }
    Some(out)
}

pub(super) fn route(method: Method, path: &str) -> Option<(&'static Endpoint, BTreeMap<String, String>)> {
    ENDPOINTS
        .iter()
        .filter(|e| e.method == method)
        .find_map(|e| match_path(e.path, path).map(|p| (e, p)))
}

type Reply = Result<(u16, ResponseBody), ServiceError>;

fn json_reply(status: u16, v: impl Serialize) -> Reply {
    Ok((status, ResponseBody::Json(to_json(v)?)))
}

fn body<T: DeserializeOwned>(req: &ApiRequest) -> Result<T, ServiceError> {
    let v = req.body.clone().unwrap_or_else(empty);
    serde_json::from_value(v).map_err(|e| ServiceError::BadRequest(format!("request body: {e}")))
}

fn id_param<T: std::str::FromStr>(params: &BTreeMap<String, String>, name: &str) -> Result<T, ServiceError> {
    params
        .get(name)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| ServiceError::BadRequest(format!("{name} must be an id")))
}

#[derive(Debug, Clone, Deserialize)]
pub(super) struct CombinationRequest {
    #[serde(flatten)]
    spec: CombinationSpec,
    /// `path -> "v1 | v2 | v3"` entries typed against the catalog.
    #[serde(default)]
    multi_text: BTreeMap<String, String>,
}

fn path_kind(catalog: &Catalog, base: &MappingConfiguration, path: &ParamPath) -> Option<ValueKind> {
    match path {
        ParamPath::Algorithm | ParamPath::Dataset => Some(ValueKind::Integer),
        ParamPath::Sequence => Some(ValueKind::Text),
        ParamPath::AlgorithmParam(k) => catalog
            .algorithms
            .get(&base.algorithm_id)
            .and_then(|a| a.param(k))
            .map(|p| p.kind),
        ParamPath::DatasetParam(k) => dataset_param_kind(k),
    }
}

/// Fills unset algorithm parameters of the base from the template so that
/// sweeps may name any declared parameter.
fn combination_spec(data: &StoreData, req: CombinationRequest) -> Result<CombinationSpec, ServiceError> {
    let mut spec = req.spec;
    if let Some(alg) = data.catalog.algorithms.get(&spec.base.algorithm_id) {
        for (k, v) in alg.default_params() {
            spec.base.algorithm_params.entry(k).or_insert(v);
        }
    }
    for (key, text) in req.multi_text {
        let path: ParamPath = key.parse()?;
        let kind = path_kind(&data.catalog, &spec.base, &path);
        let values = split_multi_values(&text)?
            .iter()
            .map(|v| match kind {
                Some(k) => ParamValue::parse_as(k, v),
                None => Ok(ParamValue::infer(v)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        spec.multi_values.insert(path, values);
    }
    Ok(spec)
}

#[derive(Debug, Clone, Deserialize)]
struct CreateTasks {
    config_ids: Vec<ConfigId>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct RunTasks {
    /// Absent: every queued task.
    task_ids: Option<Vec<TaskId>>,
    /// Block until the runs are ingested.
    wait: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct EvaluateRequest {
    run_ids: Vec<RunId>,
    all_unevaluated: bool,
    options: EvalOptions,
}

#[derive(Debug, Clone, Deserialize)]
struct CreateAnalysis {
    document: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum PolicyChoice {
    #[default]
    Random,
    Balanced,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
struct ClusterPlanRequest {
    task_ids: Option<Vec<TaskId>>,
    tasks: Option<Vec<PlanTask>>,
    m: Option<usize>,
    seed: Option<u64>,
    policy: PolicyChoice,
    cost_model: Option<CostModel>,
    simulate: bool,
}

#[derive(Debug, Clone, Deserialize)]
struct CloudPlanRequest {
    n: usize,
    strategy: Strategy,
    #[serde(default)]
    resources: Option<Vec<Resource>>,
    #[serde(default)]
    task_ids: Option<Vec<TaskId>>,
    #[serde(default)]
    tasks: Option<Vec<PlanTask>>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    cost_model: Option<CostModel>,
}

fn plan_tasks(
    data: &StoreData,
    ids: &Option<Vec<TaskId>>,
    tasks: &Option<Vec<PlanTask>>,
) -> Result<Vec<PlanTask>, ServiceError> {
    match (ids, tasks) {
        (Some(_), Some(_)) => Err(ServiceError::BadRequest("give task_ids or tasks, not both".into())),
        (Some(ids), None) => Ok(tasks_from_store(data, ids)?),
        (None, Some(t)) => Ok(t.clone()),
        (None, None) => {
            let ids: Vec<TaskId> = data.tasks.keys().copied().collect();
            Ok(tasks_from_store(data, &ids)?)
        }
    }
}

fn not_found(what: String) -> ServiceError {
    ServiceError::NotFound(what)
}

pub(super) fn dispatch(
    svc: &Service,
    endpoint: &Endpoint,
    params: &BTreeMap<String, String>,
    req: &ApiRequest,
) -> Reply {
    let store = svc.store();
    let data = store.snapshot();
    match endpoint.name {
        "mode" => json_reply(200, svc.mode_info()),
        "schema" => json_reply(200, api_schema()),
        "list_algorithms" => json_reply(200, data.catalog.algorithms.values().collect::<Vec<_>>()),
        "create_algorithm" => {
            let spec: AlgorithmSpec = body(req)?;
            json_reply(201, json!({ "id": store.add_algorithm(spec)? }))
        }
        "list_datasets" => json_reply(200, data.catalog.datasets.values().collect::<Vec<_>>()),
        "create_dataset" => {
            let spec: DatasetSpec = body(req)?;
            json_reply(201, json!({ "id": store.add_dataset(spec)? }))
        }
        "list_configurations" => json_reply(200, data.configurations.values().collect::<Vec<_>>()),
        "create_configuration" => {
            let cfg: MappingConfiguration = body(req)?;
            json_reply(201, json!({ "id": store.add_configuration(cfg)? }))
        }
        "get_configuration" => {
            let id: ConfigId = id_param(params, "id")?;
            json_reply(200, data.config(id)?)
        }
        "export_configurations" => {
            let ids: Vec<ConfigId> = data.configurations.keys().copied().collect();
            csv_reply(export_configurations_csv(&data, &ids)?)
        }
        "list_combinations" => json_reply(200, data.combinations.values().collect::<Vec<_>>()),
        "preview_combination" => {
            let spec = combination_spec(&data, body(req)?)?;
            let configs = expand_combinations(&spec, &ExpandOptions::default())?;
            for c in &configs {
                c.validate(&data.catalog)?;
            }
            json_reply(200, json!({ "count": combination_count(&spec) as u64, "configurations": to_json(&configs)? }))
        }
        "create_combination" => {
            let spec = combination_spec(&data, body(req)?)?;
            let (id, config_ids) = store.add_combination(spec)?;
            json_reply(201, json!({ "id": id, "count": config_ids.len(), "config_ids": config_ids }))
        }
        "list_tasks" => json_reply(200, data.tasks.values().collect::<Vec<_>>()),
        "create_tasks" => {
            let r: CreateTasks = body(req)?;
            json_reply(201, json!({ "task_ids": store.create_tasks(&r.config_ids)? }))
        }
        "run_tasks" => {
            let r: RunTasks = body(req)?;
            let ids = r.task_ids.unwrap_or_else(|| store.queued_tasks());
            let started = store.start_tasks(&ids)?;
            let pairs: Vec<Value> = started
                .iter()
                .map(|(t, rt)| json!({ "task_id": t, "run_id": rt.run_id }))
                .collect();
            if r.wait {
                let outcomes = svc.execute_started(started);
                json_reply(200, json!({ "started": pairs, "outcomes": to_json(&outcomes)? }))
            } else {
                let worker = svc.clone();
                svc.spawn_job(move || {
                    worker.execute_started(started);
                });
                json_reply(202, json!({ "started": pairs }))
            }
        }
        "list_runs" => json_reply(200, data.runs.values().collect::<Vec<_>>()),
        "export_runs" => {
            let ids: Vec<RunId> = data.runs.keys().copied().collect();
            csv_reply(export_runs_csv(&data, &ids)?)
        }
        "get_run" => {
            let id: RunId = id_param(params, "id")?;
            json_reply(200, data.run(id)?)
        }
        "run_trajectory" => {
            let id: RunId = id_param(params, "id")?;
            let run = data.run(id)?;
            let cfg = data.config(run.config_id)?;
            let xyz = |t: &crate::Trajectory| -> Vec<[f64; 4]> {
                t.poses()
                    .iter()
                    .map(|p| [p.t, p.position.x, p.position.y, p.position.z])
                    .collect()
            };
            let estimate = fs::read_to_string(run.run_dir.join(RESULTS_DIR).join(TRAJECTORY_FILE))
                .ok()
                .and_then(|t| parse_trajectory(&t).ok())
                .map(|t| xyz(&t));
            let reference = svc
                .layout()
                .ground_truth(cfg.dataset_id, &cfg.sequence)
                .ok()
                .map(|t| xyz(&t));
            json_reply(200, json!({ "run_id": id, "estimate": estimate, "reference": reference }))
        }
        "run_profile" => {
            let id: RunId = id_param(params, "id")?;
            let run = data.run(id)?;
            let samples = read_profile(&run.run_dir.join(RESULTS_DIR).join(PROFILING_FILE))
                .map_err(|_| not_found(format!("profile of run {id}")))?;
            json_reply(200, samples)
        }
        "run_map" => {
            let id: RunId = id_param(params, "id")?;
            let run = data.run(id)?;
            let path = run.map.as_ref().ok_or_else(|| not_found(format!("map of run {id}")))?;
            let bytes = fs::read(path).map_err(|_| not_found(format!("map of run {id}")))?;
            Ok((200, ResponseBody::Raw { content_type: "application/octet-stream", bytes }))
        }
        "list_evaluations" => json_reply(200, data.evaluations.values().collect::<Vec<_>>()),
        "get_evaluation" => {
            let id: RunId = id_param(params, "id")?;
            let e = data
                .evaluations
                .get(&id)
                .ok_or_else(|| not_found(format!("evaluation of run {id}")))?;
            json_reply(200, e)
        }
        "evaluate" => {
            let r: EvaluateRequest = body(req)?;
            if r.all_unevaluated {
                if !r.run_ids.is_empty() {
                    return Err(ServiceError::BadRequest("give run_ids or all_unevaluated, not both".into()));
                }
                return json_reply(200, store.evaluate_all_unevaluated(&r.options, svc.layout()));
            }
            if r.run_ids.is_empty() {
                return Err(ServiceError::BadRequest("no runs to evaluate".into()));
            }
            let mut evaluated = Vec::new();
            for id in &r.run_ids {
                store.evaluate(*id, &r.options, svc.layout())?;
                evaluated.push(*id);
            }
            json_reply(200, json!({ "evaluated": evaluated, "errors": [] }))
        }
        "search" => {
            let q = req.query.get("q").map(String::as_str).unwrap_or("");
            let target = match req.query.get("target").map(String::as_str) {
                None | Some("configurations") => SearchTarget::Configurations,
                Some("evaluations") | Some("runs") => SearchTarget::Evaluations,
                Some(other) => return Err(ServiceError::BadRequest(format!("unknown search target {other:?}"))),
            };
            let query = SearchQuery::parse(q)?;
            let ids = crate::store::search(&data, &query, target)?;
            json_reply(200, json!({ "target": target, "ids": ids }))
        }
        "list_analyses" => json_reply(200, data.reports.values().filter(|r| r.listed).collect::<Vec<_>>()),
        "create_analysis" => {
            let r: CreateAnalysis = body(req)?;
            let listed = svc.mode_info().mode != super::DeploymentMode::ViewOnly;
            json_reply(201, create_analysis(store, svc.layout(), &r.document, listed)?)
        }
        "get_analysis" => json_reply(200, load_report(svc.layout(), &params["token"])?),
        "list_analysis_files" => {
            let report = load_report(svc.layout(), &params["token"])?;
            json_reply(200, export_raw(&report).into_iter().map(|(n, _)| n).collect::<Vec<_>>())
        }
        "get_analysis_file" => {
            let report = load_report(svc.layout(), &params["token"])?;
            let file = &params["file"];
            let (_, csv) = export_raw(&report)
                .into_iter()
                .find(|(n, _)| n == file)
                .ok_or_else(|| not_found(format!("file {file}")))?;
            csv_reply(csv)
        }
        "plan_cluster" => {
            let r: ClusterPlanRequest = body(req)?;
            let tasks = plan_tasks(&data, &r.task_ids, &r.tasks)?;
            let model = r.cost_model.unwrap_or_else(|| svc.config().cost_model.clone());
            let m = r.m.unwrap_or_else(|| svc.config().nodes.len().max(1));
            let plan = match r.policy {
                PolicyChoice::Random => plan_cluster(&tasks, m, r.seed.unwrap_or(svc.config().seed))?,
                PolicyChoice::Balanced => plan_cluster_balanced(&tasks, m, &model)?,
            };
            let cost = transfer_cost(&plan, &model)?;
            let timeline = if r.simulate { Some(simulate(&plan, None, &model)?) } else { None };
            json_reply(
                200,
                json!({
                    "manifest": render_manifests(&plan),
                    "transfer_cost": to_json(&cost)?,
                    "timeline": to_json(&timeline)?,
                    "plan": to_json(&plan)?,
                }),
            )
        }
        "plan_cloud" => {
            let r: CloudPlanRequest = body(req)?;
            let model = r.cost_model.unwrap_or_else(|| svc.config().cost_model.clone());
            let tasks = if r.task_ids.is_some() || r.tasks.is_some() {
                Some(plan_tasks(&data, &r.task_ids, &r.tasks)?)
            } else {
                None
            };
            let resources = match (&r.resources, &tasks) {
                (Some(res), _) => res.clone(),
                (None, Some(t)) => t.iter().flat_map(PlanTask::resources).collect(),
                (None, None) => return Err(ServiceError::BadRequest("give resources or tasks".into())),
            };
            let provision = plan_cloud(r.n, r.strategy, &resources, &model)?;
            let timeline = match &tasks {
                Some(t) => {
                    let plan = plan_cluster(t, r.n, r.seed.unwrap_or(svc.config().seed))?;
                    Some(simulate(&plan, Some(&provision), &model)?)
                }
                None => None,
            };
            json_reply(
                200,
                json!({
                    "provision": to_json(&provision)?,
                    "network_transfers": provision.network_transfers(),
                    "network_bytes": provision.network_bytes(),
                    "provision_makespan": provision.makespan(&model),
                    "timeline": to_json(&timeline)?,
                }),
            )
        }
        other => Err(ServiceError::Internal(format!("endpoint {other} has no handler"))),
    }
}

fn csv_reply(text: String) -> Reply {
    Ok((
        200,
        ResponseBody::Raw {
            content_type: "text/csv",
            bytes: text.into_bytes(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_matching() {
        let p = match_path("/api/runs/{id}/profile", "/api/runs/7/profile").unwrap();
        assert_eq!(p["id"], "7");
        assert!(match_path("/api/runs/{id}", "/api/runs/").is_none());
        assert!(match_path("/api/runs", "/api/runs/1").is_none());
        assert!(match_path("/api/runs", "/api/runs?x=1").is_some());
    }

    #[test]
    fn endpoint_names_unique_and_routable() {
        let mut names: Vec<_> = ENDPOINTS.iter().map(|e| e.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), ENDPOINTS.len());
        for e in ENDPOINTS {
            let concrete = e.path.replace("{id}", "1").replace("{token}", "ab").replace("{file}", "f.csv");
            assert_eq!(route(e.method, &concrete).unwrap().0.name, e.name);
        }
    }
}
