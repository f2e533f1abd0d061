use std::io::Write as _;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use spatial_core::toolproto::{register_catalog, HealthInfo, MediaTransfer, MockBackend, ToolResult, WireRequest};

use crate::{runtime, CliError, ServeArgs, Settings};

pub fn router(mock: Arc<MockBackend>) -> Router {
    Router::new().route("/healthz", get(healthz)).route("/invoke", post(invoke)).with_state(mock)
}

async fn healthz(State(mock): State<Arc<MockBackend>>) -> Json<HealthInfo> {
    let mut tools = mock.tool_names();
    tools.sort();
    Json(HealthInfo { tools, media_transfer: vec![MediaTransfer::Path, MediaTransfer::Base64] })
}

async fn invoke(State(mock): State<Arc<MockBackend>>, body: Bytes) -> (StatusCode, Json<ToolResult>) {
    match serde_json::from_slice::<WireRequest>(&body) {
        Ok(req) => (StatusCode::OK, Json(mock.handle(&req))),
        Err(e) => (StatusCode::BAD_REQUEST, Json(ToolResult::err(format!("malformed request: {e}")))),
    }
}

/// Blocks serving until the process is killed. The first stdout line is
/// `listening on http://ADDR`.
pub fn serve(args: &ServeArgs, settings: &Settings) -> Result<(), CliError> {
    let path = settings
        .tools
        .fixtures
        .clone()
        .ok_or_else(|| CliError::Usage("serve-mock-tools needs --fixtures".into()))?;
    let mock = MockBackend::load(&path, Some(register_catalog())).map_err(|e| CliError::Validation(e.to_string()))?;
    let rt = tokio::runtime::Runtime::new().map_err(runtime("starting runtime"))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&args.bind).await.map_err(runtime(format!("binding {}", args.bind)))?;
        let addr = listener.local_addr().map_err(runtime("reading bound address"))?;
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
        axum::serve(listener, router(Arc::new(mock))).await.map_err(runtime("serving"))
    })
}
