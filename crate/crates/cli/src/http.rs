//! HTTP transport: every request under `/api` is forwarded to
//! [`Service::handle`]; `/docs` serves the endpoint reference.

use std::collections::BTreeMap;

use axum::body::{Body, Bytes};
use axum::extract::{Query, State};
use axum::http::{header, Method as HttpMethod, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use mapbench_core::service::{api_markdown, ApiRequest, Method, ResponseBody, Service};
use serde_json::{json, Value};

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/docs", get(docs))
        .fallback(forward)
        .with_state(service)
}

async fn docs() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "text/markdown; charset=utf-8")], api_markdown())
}

async fn forward(
    State(service): State<Service>,
    method: HttpMethod,
    uri: Uri,
    Query(query): Query<BTreeMap<String, String>>,
    body: Bytes,
) -> Response {
    let docs = service.config().docs_url.clone();
    let method = match method {
        HttpMethod::GET => Method::Get,
        HttpMethod::POST => Method::Post,
        other => {
            return error(StatusCode::METHOD_NOT_ALLOWED, "MethodNotAllowed", &format!("{other} not supported"), &docs)
        }
    };
    let body = if body.is_empty() {
        None
    } else {
        match serde_json::from_slice::<Value>(&body) {
            Ok(v) => Some(v),
            Err(e) => return error(StatusCode::BAD_REQUEST, "BadRequest", &format!("body is not JSON: {e}"), &docs),
        }
    };
    let req = ApiRequest {
        method,
        path: uri.path().to_string(),
        query,
        body,
    };
    let resp = match tokio::task::spawn_blocking(move || service.handle(&req)).await {
        Ok(r) => r,
        Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, "Internal", &e.to_string(), &docs),
    };
    let status = StatusCode::from_u16(resp.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    match resp.body {
        ResponseBody::Json(v) => (status, axum::Json(v)).into_response(),
        ResponseBody::Raw { content_type, bytes } => {
            (status, [(header::CONTENT_TYPE, content_type)], Body::from(bytes)).into_response()
        }
    }
}

fn error(status: StatusCode, kind: &str, message: &str, docs: &str) -> Response {
    let body = json!({ "error": { "kind": kind, "message": message }, "docs_url": docs });
    (status, axum::Json(body)).into_response()
}

/// Serves until ctrl-c.
pub async fn serve(service: Service) -> anyhow::Result<()> {
    let bind = service.config().bind.clone();
    let listener = tokio::net::TcpListener::bind(&bind)
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {bind}: {e}"))?;
    log::info!("listening on {} in {} mode", listener.local_addr()?, service.config().mode);
    axum::serve(listener, router(service.clone()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    service.wait_idle();
    Ok(())
}
