//! Service counters exposed on `/metrics`.

use std::sync::atomic::{AtomicU64, Ordering};

use gqlshield_core::engine::{AnalysisReport, Decision};
use gqlshield_core::report::CheckKind;
use serde_json::{json, Value};

/// Upper bounds of the latency buckets in microseconds; a final bucket
/// collects everything slower.
pub const LATENCY_BUCKETS_MICROS: [u64; 13] =
    [100, 250, 500, 1_000, 2_500, 5_000, 10_000, 25_000, 50_000, 100_000, 250_000, 500_000, 1_000_000];

const KINDS: usize = CheckKind::CONFIGURABLE.len() + 1;

fn kind_index(k: CheckKind) -> usize {
    CheckKind::CONFIGURABLE.iter().position(|c| *c == k).unwrap_or(KINDS - 1)
}

fn kind_at(i: usize) -> CheckKind {
    CheckKind::CONFIGURABLE.get(i).copied().unwrap_or(CheckKind::Parse)
}

#[derive(Default)]
pub struct Metrics {
    requests: AtomicU64,
    allowed: AtomicU64,
    blocked: AtomicU64,
    flagged: AtomicU64,
    bad_requests: AtomicU64,
    errors: AtomicU64,
    blocks_by_check: [AtomicU64; KINDS],
    latency: [AtomicU64; LATENCY_BUCKETS_MICROS.len() + 1],
    latency_sum_micros: AtomicU64,
}

impl Metrics {
    pub fn record(&self, report: &AnalysisReport, micros: u64) {
        self.requests.fetch_add(1, Ordering::Relaxed);
        match report.decision {
            Decision::Allow => self.allowed.fetch_add(1, Ordering::Relaxed),
            Decision::Block => self.blocked.fetch_add(1, Ordering::Relaxed),
        };
        if report.flagged() {
            self.flagged.fetch_add(1, Ordering::Relaxed);
        }
        for r in report.results.iter().filter(|r| r.is_blocked()) {
            self.blocks_by_check[kind_index(r.check)].fetch_add(1, Ordering::Relaxed);
        }
        for d in report.detections.iter().filter(|d| d.malicious) {
            let k = CheckKind::from_name(d.detector.as_str()).unwrap_or(CheckKind::Parse);
            if !report.results.iter().any(|r| r.check == k && r.is_blocked()) {
                self.blocks_by_check[kind_index(k)].fetch_add(1, Ordering::Relaxed);
            }
        }
        let bucket = LATENCY_BUCKETS_MICROS.iter().position(|b| micros <= *b).unwrap_or(LATENCY_BUCKETS_MICROS.len());
        self.latency[bucket].fetch_add(1, Ordering::Relaxed);
        self.latency_sum_micros.fetch_add(micros, Ordering::Relaxed);
    }

    pub fn bad_request(&self) {
        self.bad_requests.fetch_add(1, Ordering::Relaxed);
    }

    pub fn error(&self) {
        self.errors.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self, engine: Option<[u64; 4]>) -> Value {
        let load = |a: &AtomicU64| a.load(Ordering::Relaxed);
        let by_check: serde_json::Map<String, Value> =
            (0..KINDS).map(|i| (kind_at(i).as_str().to_string(), json!(load(&self.blocks_by_check[i])))).collect();
        let counts: Vec<u64> = self.latency.iter().map(load).collect();
        let mut v = json!({
            "requests": load(&self.requests),
            "decisions": { "allow": load(&self.allowed), "block": load(&self.blocked) },
            "flagged": load(&self.flagged),
            "bad_requests": load(&self.bad_requests),
            "errors": load(&self.errors),
            "blocks_by_check": by_check,
            "latency_histogram": {
                "bucket_upper_micros": LATENCY_BUCKETS_MICROS,
                "counts": counts,
                "sum_micros": load(&self.latency_sum_micros),
            },
        });
        if let Some([requests, parses, expansions, extractions]) = engine {
            v["engine"] = json!({ "analyses": requests, "parses": parses, "expansions": expansions, "extractions": extractions });
        }
        v
    }
}
