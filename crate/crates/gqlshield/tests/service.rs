//! HTTP contract, readiness, reload, logging and concurrency of the service.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use gqlshield::bench::{self, BenchOptions};
use gqlshield::logger::BatchLogger;
use gqlshield::service::{self, AppState, Running};
use gqlshield::setup::{self, EngineSources};
use gqlshield_core::report::CheckKind;
use serde_json::{json, Value};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn sources(config: &str) -> EngineSources {
    EngineSources {
        schema: Some(root().join("fixtures/schemas/social.graphql")),
        config: root().join("fixtures/configs").join(config),
        models: root().join("models"),
        workers: 2,
    }
}

async fn start_with(config: &str, logger: Option<BatchLogger>) -> Running {
    let src = sources(config);
    let schema = src.schema().unwrap();
    let cfg = setup::load_config(&src.config, schema.as_deref()).unwrap();
    let state = Arc::new(AppState::new(logger, Some(src.clone()), schema.clone()));
    let mut r = service::start("127.0.0.1:0".parse().unwrap(), state, move || src.build(schema, cfg)).await.unwrap();
    r.wait_ready().await.unwrap();
    r
}

async fn post(client: &reqwest::Client, url: &str, body: impl Into<reqwest::Body>) -> (u16, Value) {
    let r = client.post(url).header("content-type", "application/json").body(body).send().await.unwrap();
    let status = r.status().as_u16();
    (status, r.json().await.unwrap_or(Value::Null))
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn healthz_is_503_until_the_engine_loads() {
    let (tx, rx) = std::sync::mpsc::channel::<()>();
    let src = sources("social-static.json");
    let schema = src.schema().unwrap();
    let cfg = setup::load_config(&src.config, schema.as_deref()).unwrap();
    let state = Arc::new(AppState::new(None, None, schema.clone()));
    let mut r = service::start("127.0.0.1:0".parse().unwrap(), state, move || {
        rx.recv().unwrap();
        src.build(schema, cfg)
    })
    .await
    .unwrap();
    let client = reqwest::Client::new();
    assert_eq!(client.get(r.url("/healthz")).send().await.unwrap().status(), 503);
    let (status, _) = post(&client, &r.url("/analyze"), r#"{"query":"{ me { id } }"}"#).await;
    assert_eq!(status, 503);
    tx.send(()).unwrap();
    r.wait_ready().await.unwrap();
    assert_eq!(client.get(r.url("/healthz")).send().await.unwrap().status(), 200);
    r.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn analyze_contract() {
    let r = start_with("social-static.json", None).await;
    let client = reqwest::Client::new();
    let url = r.url("/analyze");

    let (status, report) = post(&client, &url, r#"{"query":"{ me { id } }"}"#).await;
    assert_eq!(status, 200);
    assert_eq!(report["decision"], "allow");
    assert_eq!(report["results"].as_array().unwrap().len(), 9);

    let (status, body) = post(&client, &url, "not json at all").await;
    assert_eq!(status, 400);
    assert!(body["error"].as_str().unwrap().contains("not JSON"));

    let (status, report) = post(&client, &url, r#"{"nope": 1}"#).await;
    assert_eq!(status, 200);
    assert_eq!(report["decision"], "block");
    assert_eq!(report["results"][0]["check"], "parse");

    let (status, report) = post(&client, &url, r#"{"query":"not graphql"}"#).await;
    assert_eq!(status, 200);
    assert_eq!(report["results"].as_array().unwrap().len(), 1);

    let aliases: String = (0..10_000).map(|i| format!("a{i}: me {{ id }} ")).collect();
    let (_, report) = post(&client, &url, json!({ "query": format!("{{ {aliases} }}") }).to_string()).await;
    assert_eq!(report["decision"], "block");
    let a = report["results"].as_array().unwrap().iter().find(|x| x["check"] == "aliases").unwrap();
    assert_eq!((a["status"].as_str(), a["score"].as_f64()), (Some("blocked"), Some(10_000.0)));

    let batch = Value::Array(vec![json!({ "query": "{ me { id } }" }); 6]).to_string();
    let (_, report) = post(&client, &url, batch).await;
    let b = report["results"].as_array().unwrap().iter().find(|x| x["check"] == "batch").unwrap();
    assert_eq!((b["status"].as_str(), b["score"].as_f64()), (Some("blocked"), Some(6.0)));

    let m: Value = client.get(r.url("/metrics")).send().await.unwrap().json().await.unwrap();
    assert_eq!(m["requests"], 5);
    assert_eq!(m["bad_requests"], 1);
    assert_eq!(m["blocks_by_check"]["aliases"], 1);
    assert_eq!(m["latency_histogram"]["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum::<u64>(), 5);
    r.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_get_intact_reports() {
    let r = start_with("social-static.json", None).await;
    let client = reqwest::Client::new();
    let url = r.url("/analyze");
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let (client, url) = (client.clone(), url.clone());
            tokio::spawn(async move {
                let aliases: String = (0..(i % 20)).map(|j| format!("x{j}: me {{ id }} ")).collect();
                let q = json!({ "query": format!("{{ {aliases} me {{ name }} }}") }).to_string();
                (i, post(&client, &url, q).await)
            })
        })
        .collect();
    let mut ids = HashSet::new();
    for h in handles {
        let (i, (status, report)) = h.await.unwrap();
        assert_eq!(status, 200);
        let a = report["results"].as_array().unwrap().iter().find(|x| x["check"] == "aliases").unwrap().clone();
        // Each report carries its own request's alias count.
        assert_eq!(a["score"].as_f64().unwrap(), f64::from(i % 20));
        assert!(ids.insert(report["request_id"].as_str().unwrap().to_string()));
    }
    let engine = r.state.engine().unwrap();
    let [requests, parses, expansions, extractions] = engine.counters.snapshot();
    assert_eq!((requests, parses, expansions, extractions), (100, 100, 100, 100));
    r.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn reload_config_swaps_thresholds() {
    let r = start_with("social-static.json", None).await;
    let client = reqwest::Client::new();
    let q = r#"{"query":"{ a: me { id } b: me { id } }"}"#;
    assert_eq!(post(&client, &r.url("/analyze"), q).await.1["decision"], "allow");

    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(root().join("fixtures/configs/social-static.json")).unwrap()).unwrap();
    cfg["max_aliases"] = json!(1);
    let (status, body) = post(&client, &r.url("/admin/reload-config"), cfg.to_string()).await;
    assert_eq!(status, 200, "{body}");
    assert_eq!(post(&client, &r.url("/analyze"), q).await.1["decision"], "block");

    let (status, body) = post(&client, &r.url("/admin/reload-config"), r#"{"max_depth": -1, "field_weights": {"User.nope": 1}}"#).await;
    assert_eq!(status, 400);
    assert_eq!(body["violations"].as_array().unwrap().len(), 2, "{body}");

    // Enabling ML on an engine built without bundles is refused.
    cfg["enabled_checks"] = json!(["depth", "sqli"]);
    assert_eq!(post(&client, &r.url("/admin/reload-config"), cfg.to_string()).await.0, 409);

    // An empty body re-reads the startup file.
    assert_eq!(post(&client, &r.url("/admin/reload-config"), "").await.0, 200);
    assert_eq!(post(&client, &r.url("/analyze"), q).await.1["decision"], "allow");
    r.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn every_analysis_is_logged() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.log");
    let logger = BatchLogger::open(&path, 100, Duration::from_secs(30)).unwrap();
    let r = start_with("social-static.json", Some(logger)).await;
    let client = reqwest::Client::new();
    for _ in 0..7 {
        post(&client, &r.url("/analyze"), r#"{"query":"{ me { id } }"}"#).await;
    }
    r.stop().await.unwrap();
    let lines: Vec<Value> = std::fs::read_to_string(&path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 7);
    assert!(lines.iter().all(|l| l["decision"] == "allow"));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn ml_checks_report_detections_and_timings() {
    let r = start_with("social.json", None).await;
    let client = reqwest::Client::new();
    let body = json!({
        "query": "query S($t: String!) { search(term: $t) { ... on User { name } } }",
        "variables": { "t": "1' UNION SELECT password FROM users--" }
    });
    let (status, report) = post(&client, &r.url("/analyze"), body.to_string()).await;
    assert_eq!(status, 200);
    assert_eq!(report["decision"], "block");
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), CheckKind::CONFIGURABLE.len());
    assert!(bench::has_timings(&report));
    let sqli = results.iter().find(|x| x["check"] == "sqli").unwrap();
    assert_eq!(sqli["status"], "blocked");
    assert_eq!(report["detections"].as_array().unwrap().len(), 3);
    r.stop().await.unwrap();
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn bench_smoke_against_local_serve() {
    let r = start_with("social-static.json", None).await;
    let dir = tempfile::tempdir().unwrap();
    let opts = BenchOptions {
        target: format!("http://{}", r.addr),
        users: 1,
        spawn_rate: 1.0,
        duration: Duration::from_secs(5),
        mix: bench::default_mix(),
        request_timeout: Duration::from_secs(10),
        seed: 1,
    };
    let report = bench::run(&opts).await.unwrap();
    assert!(report.requests >= 1);
    assert_eq!((report.failures, report.malformed_reports), (0, 0));
    assert!(report.blocked > 0 && report.allowed > 0);
    let csv = dir.path().join("series.csv");
    bench::write_csv(&report, &csv).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.starts_with("second,users,requests,failures,rps,p50_ms,p95_ms,p99_ms"));
    r.stop().await.unwrap();
}
