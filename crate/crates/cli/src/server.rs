//! Localhost HTTP advisor over one immutable model.
//!
//! Endpoints: `GET /api/v1/health`, `POST /api/v1/advise`, `POST /api/v1/validate`.
//! Bodies that are not JSON get 400; JSON of the wrong shape or breaking game
//! rules gets 422. Every response body carries `"api_version":"1"`.

use crate::CliError;
use assassin_core::advisor::{advise, AdviceError, AdviceResponse, LoadedModel, API_VERSION};
use assassin_core::game::{validate_view, AssassinView, Violation};
use assassin_core::ingest::parse_json_record;
use axum::body::Bytes;
use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::json;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

#[derive(Clone)]
struct AppState {
    model: Arc<LoadedModel>,
}

/// The exact JSON text returned by both `predict` and `/api/v1/advise`.
pub fn render_advice(response: &AdviceResponse) -> String {
    serde_json::to_string(response).expect("advice serializes")
}

pub fn router(model: Arc<LoadedModel>) -> Router {
    Router::new()
        .route("/api/v1/health", get(health))
        .route("/api/v1/advise", post(advise_handler))
        .route("/api/v1/validate", post(validate_handler))
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(middleware::from_fn(log_request))
        .with_state(AppState { model })
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(
    status: StatusCode,
    kind: &str,
    message: &str,
    field: Option<&str>,
    violations: &[Violation],
) -> Response {
    let mut error = json!({ "kind": kind, "message": message });
    if let Some(f) = field {
        error["field"] = json!(f);
    }
    if !violations.is_empty() {
        error["violations"] = json!(violations);
    }
    json_response(
        status,
        json!({ "api_version": API_VERSION, "error": error }).to_string(),
    )
}

async fn health(State(state): State<AppState>) -> Response {
    let body = json!({ "api_version": API_VERSION, "status": "ok", "model": state.model.meta() });
    json_response(StatusCode::OK, body.to_string())
}

#[allow(clippy::result_large_err)]
fn parse_view(body: &[u8]) -> Result<AssassinView, Response> {
    let text = std::str::from_utf8(body).map_err(|_| {
        error_response(
            StatusCode::BAD_REQUEST,
            "malformed_json",
            "body is not UTF-8",
            None,
            &[],
        )
    })?;
    parse_json_record(text).map_err(|e| {
        if e.syntax {
            error_response(
                StatusCode::BAD_REQUEST,
                "malformed_json",
                &e.message,
                None,
                &[],
            )
        } else {
            error_response(
                StatusCode::UNPROCESSABLE_ENTITY,
                "schema",
                &e.message,
                Some(&e.field),
                &[],
            )
        }
    })
}

async fn advise_handler(State(state): State<AppState>, body: Bytes) -> Response {
    let view = match parse_view(&body) {
        Ok(v) => v,
        Err(r) => return r,
    };
    match advise(&view, &state.model) {
        Ok(resp) => json_response(StatusCode::OK, render_advice(&resp)),
        Err(AdviceError::InvalidView(v)) => error_response(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_view",
            "the view breaks the game rules",
            v.first().map(|x| x.location.as_str()),
            &v,
        ),
        Err(e) => error_response(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            &e.to_string(),
            None,
            &[],
        ),
    }
}

async fn validate_handler(body: Bytes) -> Response {
    let view = match parse_view(&body) {
        Ok(v) => v,
        Err(r) => return r,
    };
    let violations = validate_view(&view);
    let body = json!({ "api_version": API_VERSION, "valid": violations.is_empty(), "violations": violations });
    json_response(StatusCode::OK, body.to_string())
}

async fn not_found() -> Response {
    error_response(
        StatusCode::NOT_FOUND,
        "not_found",
        "no such endpoint",
        None,
        &[],
    )
}

async fn method_not_allowed() -> Response {
    error_response(
        StatusCode::METHOD_NOT_ALLOWED,
        "method_not_allowed",
        "method not allowed",
        None,
        &[],
    )
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().to_string();
    let path = req.uri().path().to_string();
    let start = Instant::now();
    let resp = next.run(req).await;
    let line = json!({
        "method": method,
        "path": path,
        "status": resp.status().as_u16(),
        "micros": start.elapsed().as_micros() as u64,
    });
    eprintln!("{line}");
    resp
}

/// Serves on an already bound listener until ctrl-c.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    model: Arc<LoadedModel>,
) -> std::io::Result<()> {
    axum::serve(listener, router(model))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Binds 127.0.0.1:`port` and blocks serving requests.
pub fn serve(model: LoadedModel, port: u16) -> Result<(), CliError> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::internal)?;
    runtime.block_on(async {
        let addr = SocketAddr::from(([127, 0, 0, 1], port));
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Internal(format!("cannot bind {addr}: {e}")))?;
        let bound = listener.local_addr().map_err(CliError::internal)?;
        eprintln!(
            "{}",
            json!({ "event": "listening", "addr": bound.to_string(), "model": model.meta() })
        );
        serve_on(listener, Arc::new(model))
            .await
            .map_err(CliError::internal)
    })
}

/// Starts a server on an ephemeral localhost port in a background thread.
pub fn spawn_background(model: LoadedModel) -> std::io::Result<SocketAddr> {
    let std_listener = std::net::TcpListener::bind(("127.0.0.1", 0))?;
    std_listener.set_nonblocking(true)?;
    let addr = std_listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener");
            let _ = serve_on(listener, Arc::new(model)).await;
        })
    });
    Ok(addr)
}
