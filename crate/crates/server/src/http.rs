//! HTTP front end: `POST /api` for RPC, `GET /` for the web client.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use tokio::net::TcpListener;

use crate::service::Service;
use crate::store::Store;

const PLACEHOLDER: &str = "<!doctype html><title>gridmesh</title><p>gridmesh server. Clients talk to <code>POST /api</code>.</p>";

#[derive(Clone)]
struct AppState {
    service: Service,
    static_dir: Option<Arc<PathBuf>>,
}

async fn api(State(state): State<AppState>, body: Bytes) -> Response {
    let service = state.service.clone();
    let answer = tokio::task::spawn_blocking(move || service.handle_json(&body)).await;
    match answer {
        Ok(Some(resp)) => (
            StatusCode::OK,
            [(header::CONTENT_TYPE, "application/json")],
            serde_json::to_string(&resp).expect("responses serialize"),
        )
            .into_response(),
        Ok(None) => (StatusCode::BAD_REQUEST, "expected a JSON request envelope").into_response(),
        Err(_) => StatusCode::INTERNAL_SERVER_ERROR.into_response(),
    }
}

fn content_type(path: &str) -> &'static str {
    match path.rsplit('.').next() {
        Some("html") => "text/html; charset=utf-8",
        Some("js") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        _ => "application/octet-stream",
    }
}

async fn serve_file(state: &AppState, rel: &str) -> Response {
    let Some(dir) = &state.static_dir else {
        return if rel == "index.html" { Html(PLACEHOLDER).into_response() } else { StatusCode::NOT_FOUND.into_response() };
    };
    if rel.split('/').any(|part| part.is_empty() || part.starts_with('.')) {
        return StatusCode::NOT_FOUND.into_response();
    }
    match tokio::fs::read(dir.join(rel)).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(rel))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

async fn index(State(state): State<AppState>) -> Response {
    serve_file(&state, "index.html").await
}

async fn asset(State(state): State<AppState>, Path(rel): Path<String>) -> Response {
    serve_file(&state, &rel).await
}

pub fn router(service: Service, static_dir: Option<PathBuf>) -> Router {
    let state = AppState { service, static_dir: static_dir.map(Arc::new) };
    Router::new()
        .route("/api", post(api))
        .route("/", get(index))
        .route("/{*path}", get(asset))
        .with_state(state)
}

/// Runs due jobs and drops expired sessions every `every`, on its own thread.
pub fn spawn_ticker(store: Arc<Store>, every: Duration) -> thread::JoinHandle<()> {
    thread::spawn(move || loop {
        store.run_due_jobs();
        store.sweep_sessions();
        thread::sleep(every);
    })
}

/// A server listening on a background runtime.
pub struct RunningServer {
    pub addr: SocketAddr,
    runtime: tokio::runtime::Runtime,
}

impl RunningServer {
    /// Binds `addr` (port 0 picks a free port) and serves until dropped.
    pub fn start(service: Service, static_dir: Option<PathBuf>, addr: SocketAddr) -> std::io::Result<Self> {
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let listener = runtime.block_on(TcpListener::bind(addr))?;
        let addr = listener.local_addr()?;
        let app = router(service, static_dir);
        runtime.spawn(async move {
            let _ = axum::serve(listener, app).await;
        });
        Ok(Self { addr, runtime })
    }

    /// Blocks the calling thread forever.
    pub fn wait(self) -> ! {
        self.runtime.block_on(std::future::pending::<()>());
        unreachable!("pending never completes")
    }
}
