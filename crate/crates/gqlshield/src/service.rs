//! HTTP analysis service.
//!
//! The listener comes up first and answers 503 until the engine (including
//! model bundles) is loaded. Analyses run on the blocking pool, which waits
//! on the engine's bounded check pool, so the acceptor never runs inference.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::time::Instant;

use anyhow::{Context, Result};
use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gqlshield_core::config::validate_config;
use gqlshield_core::engine::{analyze_body, reject, AnalysisBody, EngineContext};
use gqlshield_graphql::Schema;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::logger::BatchLogger;
use crate::metrics::Metrics;
use crate::setup::EngineSources;

pub struct AppState {
    engine: RwLock<Option<EngineContext>>,
    pub metrics: Metrics,
    logger: Option<BatchLogger>,
    sources: Option<EngineSources>,
    schema: Option<Arc<Schema>>,
}

impl AppState {
    pub fn new(logger: Option<BatchLogger>, sources: Option<EngineSources>, schema: Option<Arc<Schema>>) -> Self {
        Self { engine: RwLock::new(None), metrics: Metrics::default(), logger, sources, schema }
    }

    pub fn set_engine(&self, ctx: EngineContext) {
        *self.engine.write().expect("engine lock") = Some(ctx);
    }

    pub fn engine(&self) -> Option<EngineContext> {
        self.engine.read().expect("engine lock").clone()
    }

    pub fn is_ready(&self) -> bool {
        self.engine.read().expect("engine lock").is_some()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/analyze", post(analyze_handler))
        .route("/healthz", get(healthz))
        .route("/metrics", get(metrics))
        .route("/admin/reload-config", post(reload_config))
        .with_state(state)
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

async fn analyze_handler(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    let start = Instant::now();
    let Some(ctx) = st.engine() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "engine is loading");
    };
    let value: serde_json::Value = match serde_json::from_slice(&body) {
        Ok(v) => v,
        Err(e) => {
            st.metrics.bad_request();
            return error(StatusCode::BAD_REQUEST, format!("body is not JSON: {e}"));
        }
    };
    let outcome = tokio::task::spawn_blocking(move || match serde_json::from_value::<AnalysisBody>(value) {
        Ok(b) => analyze_body(&b, &ctx),
        Err(e) => Ok(reject(format!("body is not an analysis request: {e}"), &ctx)),
    })
    .await;
    match outcome {
        Ok(Ok(report)) => {
            let micros = start.elapsed().as_micros() as u64;
            st.metrics.record(&report, micros);
            if let Some(log) = &st.logger {
                log.log(&json!({
                    "request_id": report.request_id,
                    "decision": report.decision,
                    "blocked": report.results.iter().filter(|r| r.is_blocked()).map(|r| r.check.as_str()).collect::<Vec<_>>(),
                    "malicious_sites": report.detections.iter().filter(|d| d.malicious).count(),
                    "degraded": report.degraded,
                    "total_micros": report.total_micros,
                }));
            }
            Json(report).into_response()
        }
        Ok(Err(e)) => {
            st.metrics.error();
            tracing::error!("analysis failed: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
        Err(e) => {
            st.metrics.error();
            error(StatusCode::INTERNAL_SERVER_ERROR, format!("analysis task failed: {e}"))
        }
    }
}

async fn healthz(State(st): State<Arc<AppState>>) -> Response {
    if st.is_ready() {
        Json(json!({ "status": "ready" })).into_response()
    } else {
        (StatusCode::SERVICE_UNAVAILABLE, Json(json!({ "status": "loading" }))).into_response()
    }
}

async fn metrics(State(st): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let engine = st.engine().map(|c| c.counters.snapshot());
    Json(st.metrics.snapshot(engine))
}

/// An empty body re-reads the config file given at startup; otherwise the
/// body is the new config document.
async fn reload_config(State(st): State<Arc<AppState>>, body: Bytes) -> Response {
    let Some(ctx) = st.engine() else {
        return error(StatusCode::SERVICE_UNAVAILABLE, "engine is loading");
    };
    let text = if body.iter().all(u8::is_ascii_whitespace) {
        let Some(src) = &st.sources else {
            return error(StatusCode::BAD_REQUEST, "no config file to re-read; send the config as the body");
        };
        match std::fs::read_to_string(&src.config) {
            Ok(t) => t,
            Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, format!("reading {}: {e}", src.config.display())),
        }
    } else {
        String::from_utf8_lossy(&body).into_owned()
    };
    let cfg = match validate_config(&text, st.schema.as_deref()) {
        Ok(c) => c,
        Err(e) => return (StatusCode::BAD_REQUEST, Json(json!({ "error": "invalid config", "violations": e.violations() }))).into_response(),
    };
    match ctx.with_config(cfg) {
        Ok(next) => {
            let enabled = crate::setup::enabled_names(&next.config);
            st.set_engine(next);
            tracing::info!("config reloaded");
            Json(json!({ "status": "reloaded", "enabled_checks": enabled })).into_response()
        }
        Err(e) => error(StatusCode::CONFLICT, e.to_string()),
    }
}

/// A service running on a background task.
pub struct Running {
    pub addr: SocketAddr,
    pub state: Arc<AppState>,
    shutdown: Option<oneshot::Sender<()>>,
    server: JoinHandle<std::io::Result<()>>,
    loader: JoinHandle<Result<()>>,
}

impl Running {
    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    /// Resolves when the engine is ready, or with the load error.
    pub async fn wait_ready(&mut self) -> Result<()> {
        (&mut self.loader).await.context("loader task panicked")?
    }

    /// Stops accepting, drains in-flight requests and flushes the log.
    pub async fn stop(mut self) -> Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.server.await.context("server task panicked")?.context("server error")?;
        if let Some(state) = Arc::into_inner(self.state) {
            if let Some(log) = state.logger {
                tokio::task::spawn_blocking(move || log.shutdown()).await?;
            }
        }
        Ok(())
    }
}

/// Binds `addr` and serves immediately; `load` builds the engine on the
/// blocking pool and flips readiness when it succeeds.
pub async fn start<F>(addr: SocketAddr, state: Arc<AppState>, load: F) -> Result<Running>
where
    F: FnOnce() -> Result<EngineContext> + Send + 'static,
{
    let listener = TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state.clone());
    let server = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async move {
                let _ = rx.await;
            })
            .await
    });
    let st = state.clone();
    let loader = tokio::spawn(async move {
        let ctx = tokio::task::spawn_blocking(load).await.context("engine loader panicked")??;
        st.set_engine(ctx);
        Ok(())
    });
    Ok(Running { addr, state, shutdown: Some(tx), server, loader })
}
