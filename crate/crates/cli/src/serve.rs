//! HTTP front for the explorer UI: the log at `/api/log`, a health probe,
//! and static assets everywhere else.

use std::path::PathBuf;
use std::sync::Arc;

use axum::http::{header, StatusCode};
use axum::response::Html;
use axum::routing::get;
use axum::{Json, Router};
use tower_http::services::ServeDir;

use crate::commands::read_log;
use crate::{CliError, ServeArgs};

const INDEX_HTML: &str = include_str!("index.html");

/// Builds the routes. `log_json` is served verbatim at `/api/log`.
pub fn router(log_json: Vec<u8>, static_dir: Option<PathBuf>) -> Router {
    let body: Arc<[u8]> = log_json.into();
    let api = Router::new()
        .route(
            "/api/log",
            get(move || {
                let body = body.clone();
                async move { ([(header::CONTENT_TYPE, "application/json")], body.to_vec()) }
            }),
        )
        .route("/api/health", get(|| async { Json(health_body()) }));
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api
            .route("/", get(|| async { Html(INDEX_HTML) }))
            .fallback(|| async { (StatusCode::NOT_FOUND, "not found") }),
    }
}

fn health_body() -> std::collections::BTreeMap<&'static str, &'static str> {
    [("status", "ok")].into()
}

pub fn run(args: &ServeArgs) -> Result<(), CliError> {
    let log = read_log(&args.log)?;
    if let Some(dir) = &args.static_dir {
        if !dir.is_dir() {
            return Err(CliError::io(format!("{} is not a directory", dir.display())));
        }
    }
    let app = router(log.to_json_bytes(), args.static_dir.clone());

    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::io(format!("cannot listen on {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::io(e.to_string()))?;
        println!("serving {} ({} records) on http://{local}", args.log.display(), log.len());
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::io(format!("server error: {e}")))?;
        println!("shut down");
        Ok(())
    })
}
