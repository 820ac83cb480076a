mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Child, Stdio};

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use common::*;
use gradhorizon::{train, GradientLog, TrainingConfig};
use gradhorizon_cli::serve::router;
use tower::ServiceExt;

fn small_log() -> GradientLog {
    let text = std::fs::read_to_string(corpus_path()).unwrap();
    let cfg = TrainingConfig { hidden_size: 8, max_batches: 201, ..TrainingConfig::default() };
    train(&text, cfg).unwrap().1
}

async fn get(app: axum::Router, uri: &str) -> (StatusCode, Option<String>, Vec<u8>) {
    let resp = app.oneshot(Request::get(uri).body(Body::empty()).unwrap()).await.unwrap();
    let status = resp.status();
    let ct = resp.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let body = to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec();
    (status, ct, body)
}

#[tokio::test]
async fn api_routes() {
    let log = small_log();
    let app = router(log.to_json_bytes(), None);

    let (status, ct, body) = get(app.clone(), "/api/log").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ct.as_deref(), Some("application/json"));
    assert_eq!(GradientLog::from_json_bytes(&body).unwrap(), log);

    let (status, ct, body) = get(app.clone(), "/api/health").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ct.as_deref(), Some("application/json"));
    assert_eq!(body, br#"{"status":"ok"}"#);

    let (status, ct, body) = get(app.clone(), "/").await;
    assert_eq!(status, StatusCode::OK);
    assert!(ct.unwrap().starts_with("text/html"));
    assert!(String::from_utf8(body).unwrap().contains("/api/log"));

    let (status, _, _) = get(app, "/no/such/path").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn static_directory_is_served_at_root() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("index.html"), "<p>ui</p>").unwrap();
    std::fs::create_dir(dir.path().join("assets")).unwrap();
    std::fs::write(dir.path().join("assets/app.js"), "console.log(1)").unwrap();
    let app = router(small_log().to_json_bytes(), Some(dir.path().to_path_buf()));

    let (status, _, body) = get(app.clone(), "/").await;
    assert_eq!((status, body.as_slice()), (StatusCode::OK, &b"<p>ui</p>"[..]));
    let (status, ct, _) = get(app.clone(), "/assets/app.js").await;
    assert_eq!(status, StatusCode::OK);
    assert!(ct.unwrap().contains("javascript"));
    let (status, _, _) = get(app.clone(), "/assets/missing.js").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _, _) = get(app, "/api/health").await;
    assert_eq!(status, StatusCode::OK);
}

fn http_get(addr: &str, path: &str) -> String {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut resp = String::new();
    stream.read_to_string(&mut resp).unwrap();
    resp
}

fn spawn_serve(log: &std::path::Path, port: &str) -> Child {
    bin()
        .args(["serve", "--log", log.to_str().unwrap(), "--port", port])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap()
}

#[test]
fn binary_serves_and_stops_on_interrupt() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.json");
    let log = small_log();
    std::fs::write(&path, log.to_json_bytes()).unwrap();

    let mut child = spawn_serve(&path, "0");
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let banner = lines.next().unwrap().unwrap();
    let addr = banner.rsplit("http://").next().unwrap().to_string();

    let health = http_get(&addr, "/api/health");
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.ends_with(r#"{"status":"ok"}"#));
    let body = http_get(&addr, "/api/log");
    let json = body.split("\r\n\r\n").nth(1).unwrap();
    assert_eq!(GradientLog::from_json_bytes(json.as_bytes()).unwrap(), log);
    assert!(http_get(&addr, "/missing").starts_with("HTTP/1.1 404"));

    let pid = child.id().to_string();
    assert!(std::process::Command::new("kill").args(["-INT", &pid]).status().unwrap().success());
    let status = child.wait().unwrap();
    assert_eq!(status.code(), Some(0));
}

#[test]
fn busy_port_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.json");
    std::fs::write(&path, small_log().to_json_bytes()).unwrap();
    let holder = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port().to_string();
    let o = spawn_serve(&path, &port).wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains(&port));
}

#[test]
fn invalid_log_is_rejected_before_listening() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.json");
    std::fs::write(&path, b"{\"schema_version\":1}").unwrap();
    let o = spawn_serve(&path, "0").wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}
