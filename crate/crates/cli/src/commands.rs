use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use mapbench_core::service::{
    api_markdown, api_schema, ApiRequest, ApiResponse, DeploymentConfig, DeploymentMode, Method, Service,
};
use mapbench_core::synthetic::{self, SyntheticSpec};
use mapbench_core::{DatasetId, Layout};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "mapbench", version, about = "Mapping benchmark campaigns: configure, run, evaluate, analyze")]
pub struct Cli {
    /// Deployment file (TOML).
    #[arg(long, global = true, env = "MAPBENCH_CONFIG")]
    pub config: Option<PathBuf>,
    /// Data directory; overrides the deployment file.
    #[arg(long, global = true, env = "MAPBENCH_DATA_ROOT")]
    pub data_root: Option<PathBuf>,
    /// view_only, workstation, cluster or cloud.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchOver {
    Configurations,
    Evaluations,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP API.
    Serve,
    /// Send one raw API request, e.g. `request GET /api/runs`.
    Request {
        method: String,
        path: String,
        /// JSON body file, `-` for stdin.
        #[arg(long)]
        body: Option<PathBuf>,
        /// key=value query parameters.
        #[arg(long = "query", short = 'q')]
        query: Vec<String>,
    },
    /// Register an algorithm from a JSON file.
    ImportAlgorithm { file: PathBuf },
    /// Register a dataset from a JSON file.
    ImportDataset { file: PathBuf },
    /// Generate a synthetic dataset under the data root and register it.
    SynthDataset {
        #[arg(long)]
        id: u64,
        #[arg(long)]
        name: String,
        #[arg(long, value_delimiter = ',', default_value = "seq0")]
        sequences: Vec<String>,
        /// Seconds per sequence.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Expand a combination file (JSON); prints the count, stores with --store.
    Expand {
        file: PathBuf,
        #[arg(long)]
        store: bool,
    },
    /// Queue one task per configuration id.
    Tasks {
        #[arg(required = true)]
        config_ids: Vec<u64>,
    },
    /// Execute tasks (default: all queued) and wait for them.
    Run {
        #[arg(long, value_delimiter = ',')]
        task_ids: Vec<u64>,
        /// Queue these configurations first and run only their tasks.
        #[arg(long, value_delimiter = ',')]
        configs: Vec<u64>,
    },
    /// Evaluate runs by id, or every finished run not yet evaluated.
    Evaluate {
        run_ids: Vec<u64>,
        #[arg(long)]
        all_unevaluated: bool,
        /// Compare raw trajectories without alignment.
        #[arg(long)]
        no_align: bool,
        #[arg(long)]
        force: bool,
    },
    /// Search with predicates such as `nFeatures => 2000; algorithm = 1`.
    Search {
        query: String,
        #[arg(long, value_enum, default_value_t = SearchOver::Configurations)]
        target: SearchOver,
    },
    /// Run and publish an analysis document (YAML).
    Analyze { file: PathBuf },
    /// Plan a cluster campaign from a JSON request file.
    PlanCluster { file: PathBuf },
    /// Plan cloud provisioning from a JSON request file.
    PlanCloud { file: PathBuf },
    /// Print the API schema (JSON) or the endpoint reference (--markdown).
    Schema {
        #[arg(long)]
        markdown: bool,
    },
    /// Built-in mock mapping adapter, started by the executor inside a sandbox.
    #[command(hide = true)]
    MockAdapter {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

/// Deployment settings from the file, the environment, then flags.
pub fn load_config(cli: &Cli) -> anyhow::Result<DeploymentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            DeploymentConfig::from_toml(&text)?
        }
        None => DeploymentConfig::default(),
    };
    let env: BTreeMap<String, String> = std::env::vars().collect();
    cfg.apply_env(&env)?;
    if let Some(root) = &cli.data_root {
        cfg.data_root = root.clone();
    }
    if let Some(mode) = &cli.mode {
        cfg.mode = mode.parse::<DeploymentMode>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_json(path: &Path) -> anyhow::Result<Value> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        s
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))
}

fn call(service: &Service, req: ApiRequest) -> anyhow::Result<ApiResponse> {
    let resp = service.handle(&req);
    if resp.is_success() {
        Ok(resp)
    } else {
        bail!("{} {} failed ({}): {}", req.method, req.path, resp.status, resp.text())
    }
}

fn print_data(out: &mut dyn Write, resp: &ApiResponse) -> anyhow::Result<()> {
    match resp.data() {
        Some(d) => writeln!(out, "{}", serde_json::to_string_pretty(d)?)?,
        None => write!(out, "{}", resp.text())?,
    }
    Ok(())
}

fn ids(v: &Value, key: &str) -> Vec<u64> {
    v[key].as_array().map(|a| a.iter().filter_map(Value::as_u64).collect()).unwrap_or_default()
}

/// Runs every command except `serve`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    if let Command::Schema { markdown } = &cli.command {
        if *markdown {
            write!(out, "{}", api_markdown())?;
        } else {
            writeln!(out, "{}", serde_json::to_string_pretty(&api_schema())?)?;
        }
        return Ok(());
    }
    let service = Service::open(load_config(cli)?)?;
    let resp = match &cli.command {
        Command::Serve | Command::Schema { .. } | Command::MockAdapter { .. } => unreachable!("handled by the caller"),
        Command::Request { method, path, body, query } => {
            let method = match method.to_ascii_uppercase().as_str() {
                "GET" => Method::Get,
                "POST" => Method::Post,
                other => bail!("unsupported method {other}"),
            };
            let mut q = BTreeMap::new();
            for kv in query {
                let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("query must be key=value: {kv}"))?;
                q.insert(k.to_string(), v.to_string());
            }
            let body = body.as_deref().map(read_json).transpose()?;
            let resp = call(&service, ApiRequest { method, path: path.clone(), query: q, body })?;
            service.wait_idle();
            resp
        }
        Command::ImportAlgorithm { file } => call(&service, ApiRequest::post("/api/algorithms", read_json(file)?))?,
        Command::ImportDataset { file } => call(&service, ApiRequest::post("/api/datasets", read_json(file)?))?,
        Command::SynthDataset { id, name, sequences, duration, seed } => {
            let spec = SyntheticSpec { duration: *duration, seed: *seed, ..Default::default() };
            let seqs: Vec<&str> = sequences.iter().map(String::as_str).collect();
            let layout = Layout::new(&service.config().data_root);
            let ds = synthetic::install_dataset(&layout, DatasetId(*id), name, &seqs, &spec)?;
            call(&service, ApiRequest::post("/api/datasets", serde_json::to_value(ds)?))?
        }
        Command::Expand { file, store } => {
            let body = read_json(file)?;
            if *store {
                call(&service, ApiRequest::post("/api/combinations", body))?
            } else {
                let resp = call(&service, ApiRequest::post("/api/combinations/preview", body))?;
                writeln!(out, "{}", resp.data().map(|d| d["count"].clone()).unwrap_or(Value::Null))?;
                return Ok(());
            }
        }
        Command::Tasks { config_ids } => {
            call(&service, ApiRequest::post("/api/tasks", json!({ "config_ids": config_ids })))?
        }
        Command::Run { task_ids, configs } => {
            let mut task_ids = task_ids.clone();
            if !configs.is_empty() {
                let created = call(&service, ApiRequest::post("/api/tasks", json!({ "config_ids": configs })))?;
                task_ids.extend(ids(created.data().unwrap_or(&Value::Null), "task_ids"));
            }
            let body = if task_ids.is_empty() {
                json!({ "wait": true })
            } else {
                json!({ "task_ids": task_ids, "wait": true })
            };
            let resp = call(&service, ApiRequest::post("/api/tasks/run", body))?;
            let failed: Vec<Value> = resp
                .data()
                .and_then(|d| d["outcomes"].as_array())
                .map(|a| a.iter().filter(|o| !o["error"].is_null()).cloned().collect())
                .unwrap_or_default();
            print_data(out, &resp)?;
            if !failed.is_empty() {
                bail!("{} task(s) could not be ingested", failed.len());
            }
            return Ok(());
        }
        Command::Evaluate { run_ids, all_unevaluated, no_align, force } => {
            let body = json!({
                "run_ids": run_ids,
                "all_unevaluated": all_unevaluated,
                "options": { "align": !no_align, "force": force },
            });
            let resp = call(&service, ApiRequest::post("/api/evaluations", body))?;
            print_data(out, &resp)?;
            let errors = resp.data().and_then(|d| d["errors"].as_array()).map_or(0, Vec::len);
            if errors > 0 {
                bail!("{errors} run(s) could not be evaluated");
            }
            return Ok(());
        }
        Command::Search { query, target } => {
            let target = match target {
                SearchOver::Configurations => "configurations",
                SearchOver::Evaluations => "evaluations",
            };
            call(&service, ApiRequest::get("/api/search").with_query("q", query).with_query("target", target))?
        }
        Command::Analyze { file } => {
            let document = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            call(&service, ApiRequest::post("/api/analyses", json!({ "document": document })))?
        }
        Command::PlanCluster { file } => call(&service, ApiRequest::post("/api/plans/cluster", read_json(file)?))?,
        Command::PlanCloud { file } => call(&service, ApiRequest::post("/api/plans/cloud", read_json(file)?))?,
    };
    print_data(out, &resp)
}
