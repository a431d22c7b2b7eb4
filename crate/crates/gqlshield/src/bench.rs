//! Ramped load generator for `/analyze`.
//!
//! Simulated users start at `spawn_rate` per second up to `users`; each one
//! posts bodies drawn from a weighted mix back to back until the duration
//! ends. Every response is checked to be a report with a timing on every
//! result. Latencies are summarized overall and per one-second window.

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rand::distributions::{Distribution, WeightedIndex};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixEntry {
    #[serde(default = "one")]
    pub weight: u32,
    /// Posted verbatim as the request body.
    pub body: Value,
}

fn one() -> u32 {
    1
}

pub fn load_mix(path: &Path) -> Result<Vec<MixEntry>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading mix {}", path.display()))?;
    let mix: Vec<MixEntry> = serde_json::from_str(&text).with_context(|| format!("parsing mix {}", path.display()))?;
    if mix.is_empty() || mix.iter().all(|m| m.weight == 0) {
        bail!("mix {} has no weighted entries", path.display());
    }
    Ok(mix)
}

/// Benign and malicious queries against the bundled social schema.
pub fn default_mix() -> Vec<MixEntry> {
    let q = |weight: u32, query: &str, variables: Value| MixEntry { weight, body: serde_json::json!({ "query": query, "variables": variables }) };
    vec![
        q(4, "{ me { id name } }", Value::Null),
        q(3, "query U($id: ID!) { user(id: $id) { name friends(first: 5) { name } } }", serde_json::json!({ "id": "42" })),
        q(2, "query S($t: String!) { search(term: $t, limit: 5) { ... on Post { title } } }", serde_json::json!({ "t": "coffee menu" })),
        q(1, "query S($t: String!) { search(term: $t) { ... on User { name } } }", serde_json::json!({ "t": "1' UNION SELECT password FROM users--" })),
        q(1, "{ fetchPreview(url: \"http://169.254.169.254/latest/meta-data/\") { title } }", Value::Null),
        q(1, "{ a: me { id } b: me { id } c: me { id } d: me { id } e: me { id } f: me { id } g: me { id } h: me { id } i: me { id } j: me { id } k: me { id } }", Value::Null),
    ]
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Service base URL or the full `/analyze` URL.
    pub target: String,
    pub users: usize,
    pub spawn_rate: f64,
    pub duration: Duration,
    pub mix: Vec<MixEntry>,
    pub request_timeout: Duration,
    pub seed: u64,
}

impl BenchOptions {
    pub fn analyze_url(&self) -> String {
        let t = self.target.trim_end_matches('/');
        if t.ends_with("/analyze") {
            t.to_string()
        } else {
            format!("{t}/analyze")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRow {
    pub second: u64,
    pub users: usize,
    pub requests: u64,
    pub failures: u64,
    pub rps: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub target: String,
    pub users: usize,
    pub duration_secs: f64,
    pub requests: u64,
    pub failures: u64,
    pub error_rate: f64,
    pub rps: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub allowed: u64,
    pub blocked: u64,
    /// 200 responses that were not a report with a timing on every result.
    pub malformed_reports: u64,
    pub first_error: Option<String>,
    pub timeseries: Vec<WindowRow>,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    done_at: Duration,
    micros: u64,
    ok: bool,
}

#[derive(Default)]
struct Shared {
    samples: Vec<Sample>,
    allowed: u64,
    blocked: u64,
    malformed: u64,
    first_error: Option<String>,
}

/// Nearest-rank percentile of sorted values.
pub fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

fn ms(micros: u64) -> f64 {
    micros as f64 / 1000.0
}

/// True for a report whose every result carries an integer `duration_micros`.
pub fn has_timings(report: &Value) -> bool {
    match report.get("results").and_then(Value::as_array) {
        Some(rs) if !rs.is_empty() => rs.iter().all(|r| r.get("duration_micros").is_some_and(Value::is_u64)),
        _ => false,
    }
}

fn record(shared: &Mutex<Shared>, outcome: Result<Vec<u8>, String>, micros: u64, done_at: Duration) -> bool {
    let mut sh = shared.lock().expect("bench state");
    let ok = match outcome {
        Ok(bytes) => {
            match serde_json::from_slice::<Value>(&bytes) {
                Ok(v) if has_timings(&v) => match v["decision"].as_str() {
                    Some("block") => sh.blocked += 1,
                    _ => sh.allowed += 1,
                },
                _ => sh.malformed += 1,
            }
            true
        }
        Err(e) => {
            sh.first_error.get_or_insert(e);
            false
        }
    };
    sh.samples.push(Sample { done_at, micros, ok });
    ok
}

async fn user_loop(client: reqwest::Client, url: String, bodies: Arc<Vec<Vec<u8>>>, weights: WeightedIndex<u32>, seed: u64, start: Instant, end: Instant, shared: Arc<Mutex<Shared>>) {
    let mut rng = StdRng::seed_from_u64(seed);
    while Instant::now() < end {
        let body = bodies[weights.sample(&mut rng)].clone();
        let t = Instant::now();
        let res = client.post(&url).header("content-type", "application/json").body(body).send().await;
        let outcome = match res {
            Ok(r) if r.status().is_success() => r.bytes().await.map_err(|e| e.to_string()).map(|b| b.to_vec()),
            Ok(r) => Err(format!("HTTP {}", r.status())),
            Err(e) => Err(e.to_string()),
        };
        let micros = t.elapsed().as_micros() as u64;
        let ok = record(&shared, outcome, micros, start.elapsed());
        if !ok {
            // Back off briefly so a dead target does not spin.
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
    }
}

pub async fn run(opts: &BenchOptions) -> Result<BenchReport> {
    if opts.users == 0 || opts.spawn_rate <= 0.0 {
        bail!("users and spawn rate must be positive");
    }
    if opts.mix.is_empty() {
        bail!("empty request mix");
    }
    let weights = WeightedIndex::new(opts.mix.iter().map(|m| m.weight)).context("mix weights")?;
    let bodies: Arc<Vec<Vec<u8>>> = Arc::new(opts.mix.iter().map(|m| serde_json::to_vec(&m.body).expect("json")).collect());
    let client = reqwest::Client::builder().timeout(opts.request_timeout).pool_max_idle_per_host(opts.users).build()?;
    let url = opts.analyze_url();
    let shared = Arc::new(Mutex::new(Shared::default()));
    let start = Instant::now();
    let end = start + opts.duration;
    let mut tasks = Vec::with_capacity(opts.users);
    for i in 0..opts.users {
        let at = start + Duration::from_secs_f64(i as f64 / opts.spawn_rate);
        if at >= end {
            break;
        }
        let (client, url, bodies, weights, shared) = (client.clone(), url.clone(), bodies.clone(), weights.clone(), shared.clone());
        let seed = opts.seed.wrapping_add(i as u64);
        tasks.push(tokio::spawn(async move {
            tokio::time::sleep_until(at.into()).await;
            user_loop(client, url, bodies, weights, seed, start, end, shared).await;
        }));
    }
    for t in tasks {
        t.await.context("bench user panicked")?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let sh = Arc::try_unwrap(shared).map_err(|_| anyhow::anyhow!("bench users still running"))?.into_inner().expect("bench state");
    Ok(summarize(opts, sh, elapsed))
}

fn summarize(opts: &BenchOptions, sh: Shared, elapsed: f64) -> BenchReport {
    let mut lat: Vec<u64> = sh.samples.iter().map(|s| s.micros).collect();
    lat.sort_unstable();
    let failures = sh.samples.iter().filter(|s| !s.ok).count() as u64;
    let requests = sh.samples.len() as u64;
    let seconds = opts.duration.as_secs_f64().ceil().max(1.0) as u64;
    let timeseries = (0..seconds)
        .map(|sec| {
            let mut w: Vec<&Sample> = sh.samples.iter().filter(|s| s.done_at.as_secs() == sec || (sec == seconds - 1 && s.done_at.as_secs() >= sec)).collect();
            w.sort_unstable_by_key(|s| s.micros);
            let l: Vec<u64> = w.iter().map(|s| s.micros).collect();
            let users = ((sec as f64 + 1.0) * opts.spawn_rate).floor() as usize;
            WindowRow {
                second: sec + 1,
                users: users.min(opts.users),
                requests: l.len() as u64,
                failures: w.iter().filter(|s| !s.ok).count() as u64,
                rps: l.len() as f64,
                p50_ms: ms(percentile(&l, 50.0)),
                p95_ms: ms(percentile(&l, 95.0)),
                p99_ms: ms(percentile(&l, 99.0)),
            }
        })
        .collect();
    BenchReport {
        target: opts.analyze_url(),
        users: opts.users,
        duration_secs: elapsed,
        requests,
        failures,
        error_rate: if requests == 0 { 1.0 } else { failures as f64 / requests as f64 },
        rps: requests as f64 / elapsed.max(1e-9),
        p50_ms: ms(percentile(&lat, 50.0)),
        p95_ms: ms(percentile(&lat, 95.0)),
        p99_ms: ms(percentile(&lat, 99.0)),
        max_ms: ms(lat.last().copied().unwrap_or(0)),
        allowed: sh.allowed,
        blocked: sh.blocked,
        malformed_reports: sh.malformed,
        first_error: sh.first_error,
        timeseries,
    }
}

/// One row per second of the run.
pub fn write_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for row in &report.timeseries {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<u64> = (1..=100).collect();
        assert_eq!(percentile(&v, 50.0), 50);
        assert_eq!(percentile(&v, 95.0), 95);
        assert_eq!(percentile(&v, 99.0), 99);
        assert_eq!(percentile(&[7], 95.0), 7);
        assert_eq!(percentile(&[], 95.0), 0);
    }

    #[test]
    fn timing_shape() {
        assert!(has_timings(&serde_json::json!({"results": [{"duration_micros": 3}]})));
        assert!(!has_timings(&serde_json::json!({"results": [{"duration_micros": 3}, {}]})));
        assert!(!has_timings(&serde_json::json!({"results": []})));
    }

    #[test]
    fn target_normalization() {
        let mut o = BenchOptions {
            target: "http://h:1/".into(),
            users: 1,
            spawn_rate: 1.0,
            duration: Duration::from_secs(1),
            mix: default_mix(),
            request_timeout: Duration::from_secs(1),
            seed: 0,
        };
        assert_eq!(o.analyze_url(), "http://h:1/analyze");
        o.target = "http://h:1/analyze".into();
        assert_eq!(o.analyze_url(), "http://h:1/analyze");
    }

    #[tokio::test]
    async fn unreachable_target_is_all_errors() {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = l.local_addr().unwrap();
        drop(l);
        let o = BenchOptions {
            target: format!("http://{addr}"),
            users: 2,
            spawn_rate: 10.0,
            duration: Duration::from_millis(400),
            mix: default_mix(),
            request_timeout: Duration::from_secs(1),
            seed: 0,
        };
        let r = run(&o).await.unwrap();
        assert!(r.requests >= 1);
        assert_eq!(r.failures, r.requests);
        assert_eq!(r.error_rate, 1.0);
    }

    #[test]
    fn timeseries_has_one_row_per_second() {
        let o = BenchOptions {
            target: "x".into(),
            users: 500,
            spawn_rate: 10.0,
            duration: Duration::from_secs(120),
            mix: default_mix(),
            request_timeout: Duration::from_secs(1),
            seed: 0,
        };
        let r = summarize(&o, Shared::default(), 120.0);
        assert_eq!(r.timeseries.len(), 120);
        assert_eq!(r.timeseries[0].users, 10);
        assert_eq!(r.timeseries[119].users, 500);
    }
}
