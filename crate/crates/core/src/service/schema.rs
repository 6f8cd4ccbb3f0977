use std::fmt::Write as _;

use serde_json::{json, Value};

use super::api::ENDPOINTS;

/// Schema format revision; bump when a field or endpoint changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Top-level fields of every JSON resource the API returns or accepts.
pub const RESOURCES: &[(&str, &[&str])] = &[
    ("ModeInfo", &["mode", "no_new_analysis", "read_only", "analysis_allowed", "nodes", "docs_url"]),
    ("AlgorithmSpec", &["id", "name", "sensor_modes", "image_ref", "parameter_template"]),
    (
        "DatasetSpec",
        &["id", "name", "sequences", "topics", "ground_truth_ref", "native_rate", "native_resolution"],
    ),
    (
        "MappingConfiguration",
        &["id", "algorithm_id", "dataset_id", "sequence", "algorithm_params", "dataset_params", "remap", "comb_parent"],
    ),
    ("CombinationSpec", &["id", "name", "base", "multi_values", "linked_groups"]),
    ("CombinationRequest", &["id", "name", "base", "multi_values", "linked_groups", "multi_text"]),
    ("CombinationPreview", &["count", "configurations"]),
    ("CombinationCreated", &["id", "count", "config_ids"]),
    ("TaskRecord", &["id", "config_id", "state", "run_id"]),
    ("CreateTasks", &["config_ids"]),
    ("TaskIds", &["task_ids"]),
    ("RunTasks", &["task_ids", "wait"]),
    ("RunStarted", &["started", "outcomes"]),
    ("TaskOutcome", &["task_id", "run_id", "node", "record", "error"]),
    (
        "RunRecord",
        &[
            "run_id", "config_id", "node_id", "cpu_type", "core_count", "status", "reason", "cpu_mean", "cpu_max",
            "ram_max", "traj_length", "started_at", "finished_at", "time_scale", "run_dir", "prep_key", "map",
        ],
    ),
    ("RunTrajectory", &["run_id", "estimate", "reference"]),
    ("ResourceSample", &["t", "cpu", "ram"]),
    ("MetricStats", &["rmse", "mean", "median", "std", "min", "max", "sse", "n"]),
    (
        "EvaluationRecord",
        &[
            "run_id", "ate", "rpe", "aligned", "with_scale", "max_time_diff", "rpe_delta", "pairs",
            "evaluator_version", "bundle_dir",
        ],
    ),
    ("EvaluateRequest", &["run_ids", "all_unevaluated", "options"]),
    ("BatchEvaluation", &["evaluated", "errors"]),
    ("SearchResult", &["target", "ids"]),
    ("ReportMeta", &["id", "token", "group_name", "created_at", "listed"]),
    ("CreateAnalysis", &["document"]),
    (
        "AnalysisReport",
        &[
            "id", "token", "group_name", "group_description", "created_at", "listed", "spec", "selection", "notices",
            "outputs",
        ],
    ),
    ("ClusterPlanRequest", &["task_ids", "tasks", "m", "seed", "policy", "cost_model", "simulate"]),
    ("ClusterPlanResponse", &["manifest", "transfer_cost", "timeline", "plan"]),
    ("CloudPlanRequest", &["n", "strategy", "resources", "task_ids", "tasks", "seed", "cost_model"]),
    (
        "CloudPlanResponse",
        &["provision", "network_transfers", "network_bytes", "provision_makespan", "timeline"],
    ),
    ("Created", &["id"]),
    ("Envelope", &["data", "docs_url"]),
    ("ErrorEnvelope", &["error", "docs_url"]),
];

/// Fields of one resource type in [`RESOURCES`].
pub fn resource_fields(name: &str) -> Option<&'static [&'static str]> {
    RESOURCES.iter().find(|(n, _)| *n == name).map(|(_, f)| *f)
}

/// Machine-readable description of the request surface.
pub fn api_schema() -> Value {
    let resources: serde_json::Map<String, Value> = RESOURCES
        .iter()
        .map(|(name, fields)| (name.to_string(), json!(fields)))
        .collect();
    json!({
        "version": SCHEMA_VERSION,
        "error_kinds": ["ModeViolation", "NotFound", "MethodNotAllowed", "BadRequest", "Conflict", "Invalid", "BindFailure", "Internal"],
        "endpoints": ENDPOINTS,
        "resources": resources,
    })
}

/// Human-readable endpoint reference. Each endpoint has an anchor named
/// after it, which is what `docs_url` in responses points at.
pub fn api_markdown() -> String {
    let mut out = String::from("# HTTP API\n\n");
    out.push_str(
        "Every JSON response is either `{\"data\": ..., \"docs_url\": ...}` or \
         `{\"error\": {\"kind\": ..., \"message\": ...}, \"docs_url\": ...}`.\n\
         Requests rejected by the deployment mode get status 403 with kind `ModeViolation`.\n\n",
    );
    out.push_str("| Method | Path | Access | Request | Response |\n|---|---|---|---|---|\n");
    for e in ENDPOINTS {
        let _ = writeln!(
            out,
            "| {} | `{}` | {} | {} | {} |",
            e.method,
            e.path,
            access_name(e.access),
            e.request.unwrap_or("-"),
            e.response
        );
    }
    out.push('\n');
    for e in ENDPOINTS {
        let _ = writeln!(out, "<a id=\"{}\"></a>\n### {} `{}`\n\n{}.\n", e.name, e.method, e.path, e.summary);
    }
    out.push_str("## Resources\n\n");
    for (name, fields) in RESOURCES {
        let _ = writeln!(out, "- **{name}**: {}", fields.join(", "));
    }
    out
}

fn access_name(a: super::Access) -> &'static str {
    match a {
        super::Access::Read => "read",
        super::Access::Write => "write",
        super::Access::Analysis => "analysis",
    }
}
