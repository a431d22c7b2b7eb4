//! Request orchestration: one parse per request, every enabled check run in
//! parallel over the shared AST and payload sites, results OR-aggregated.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use gqlshield_graphql::{expand_fragments, extract_string_inputs, parse_query, validate, Document, PayloadSite, Schema};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Mode, SecurityConfig};
use crate::features::Detector;
use crate::infer::{Detection, DetectorSet, InferError};
use crate::report::{CheckKind, CheckResult};
use crate::ssrf::check_sites;
use crate::static_guard::static_check;

pub const DEFAULT_SCHEMA_ID: &str = "default";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(2);
pub const TIMEOUT_DETAIL: &str = "analysis timeout";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisRequest {
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variables: Option<serde_json::Map<String, serde_json::Value>>,
    #[serde(default, rename = "operationName", alias = "operation_name", skip_serializing_if = "Option::is_none")]
    pub operation_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_id: Option<String>,
}

impl AnalysisRequest {
    pub fn new(query: impl Into<String>) -> Self {
        Self { query: query.into(), ..Self::default() }
    }
}

/// An HTTP body: one request, or a JSON array treated as a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnalysisBody {
    Single(AnalysisRequest),
    Batch(Vec<AnalysisRequest>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Allow,
    Block,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub decision: Decision,
    /// One entry per enabled check in `CheckKind` order, or a lone `parse`.
    pub results: Vec<CheckResult>,
    pub detections: Vec<Detection>,
    pub total_micros: u64,
    /// An embedding provider failed and the hash provider stood in.
    pub degraded: bool,
    pub request_id: String,
}

impl AnalysisReport {
    /// True when any check blocked or any detection is malicious, regardless of mode.
    pub fn flagged(&self) -> bool {
        self.results.iter().any(CheckResult::is_blocked) || self.detections.iter().any(|d| d.malicious)
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("check {0} is enabled but no implementation is registered")]
    MissingCheck(&'static str),
    #[error("inference failed: {0}")]
    Inference(#[from] InferError),
    #[error("{0}")]
    Internal(String),
}

/// Shared per-request input: the document, parsed and expanded once.
#[derive(Debug)]
pub struct Prepared {
    pub doc: Document,
    pub sites: Vec<PayloadSite>,
    pub schema: Option<Arc<Schema>>,
}

/// What one check contributes to a report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub result: CheckResult,
    pub detections: Vec<Detection>,
    pub degraded: bool,
}

impl From<CheckResult> for CheckOutcome {
    fn from(result: CheckResult) -> Self {
        Self { result, detections: Vec::new(), degraded: false }
    }
}

pub trait Check: Send + Sync {
    fn kind(&self) -> CheckKind;
    fn run(&self, input: &Prepared, cfg: &SecurityConfig) -> Result<CheckOutcome, ServiceError>;
}

pub struct StaticCheck(pub CheckKind);

impl Check for StaticCheck {
    fn kind(&self) -> CheckKind {
        self.0
    }

    fn run(&self, input: &Prepared, cfg: &SecurityConfig) -> Result<CheckOutcome, ServiceError> {
        Ok(static_check(self.0, &input.doc, input.schema.as_deref(), cfg).into())
    }
}

pub struct SsrfCheck;

impl Check for SsrfCheck {
    fn kind(&self) -> CheckKind {
        CheckKind::Ssrf
    }

    fn run(&self, input: &Prepared, cfg: &SecurityConfig) -> Result<CheckOutcome, ServiceError> {
        Ok(check_sites(&input.sites, cfg).into())
    }
}

/// Scores every payload site with one detector. The check's score is the
/// highest probability seen; it blocks iff that reaches the threshold.
pub struct MlCheck {
    pub detector: Detector,
    pub models: Arc<DetectorSet>,
}

impl Check for MlCheck {
    fn kind(&self) -> CheckKind {
        match self.detector {
            Detector::Sqli => CheckKind::Sqli,
            Detector::Osi => CheckKind::Osi,
            Detector::Xss => CheckKind::Xss,
        }
    }

    fn run(&self, input: &Prepared, cfg: &SecurityConfig) -> Result<CheckOutcome, ServiceError> {
        let model = self.models.get(self.detector);
        let threshold = cfg.detector_thresholds.get(&self.detector).copied().unwrap_or_else(|| model.classifier.decision_threshold());
        let mut detections = Vec::with_capacity(input.sites.len());
        let mut degraded = false;
        for site in &input.sites {
            let (d, deg) = model.detect(&site.text, &site.path, threshold)?;
            degraded |= deg;
            detections.push(d);
        }
        let worst = detections.iter().max_by(|a, b| a.probability.total_cmp(&b.probability));
        let result = match worst {
            Some(d) => CheckResult::probability(self.kind(), d.probability, threshold, format!("{} sites, max at {}", detections.len(), d.site)),
            // Nothing was scored, so nothing can block, even at threshold 0.
            None => CheckResult::threshold(self.kind(), 0.0, threshold.max(0.0), "no payload sites"),
        };
        Ok(CheckOutcome { result, detections, degraded })
    }
}

/// Instrumentation proving the single-parse property.
#[derive(Debug, Default)]
pub struct EngineCounters {
    pub requests: AtomicU64,
    pub parses: AtomicU64,
    pub expansions: AtomicU64,
    pub extractions: AtomicU64,
}

impl EngineCounters {
    pub fn snapshot(&self) -> [u64; 4] {
        [&self.requests, &self.parses, &self.expansions, &self.extractions].map(|c| c.load(Ordering::Relaxed))
    }
}

/// Immutable state shared by all requests.
#[derive(Clone)]
pub struct EngineContext {
    pub config: Arc<SecurityConfig>,
    pub schemas: Arc<HashMap<String, Arc<Schema>>>,
    pub detectors: Option<Arc<DetectorSet>>,
    pub counters: Arc<EngineCounters>,
    pub timeout: Duration,
    checks: Arc<Vec<Arc<dyn Check>>>,
    pool: Arc<rayon::ThreadPool>,
}

/// The standard check for every configurable kind that can be built.
pub fn default_checks(detectors: Option<&Arc<DetectorSet>>) -> Vec<Arc<dyn Check>> {
    let mut out: Vec<Arc<dyn Check>> = CheckKind::STATIC.into_iter().map(|k| Arc::new(StaticCheck(k)) as Arc<dyn Check>).collect();
    if let Some(models) = detectors {
        for detector in Detector::ALL {
            out.push(Arc::new(MlCheck { detector, models: models.clone() }));
        }
    }
    out.push(Arc::new(SsrfCheck));
    out
}

impl EngineContext {
    /// Standard checks; ML checks exist only when `detectors` is given.
    pub fn new(
        config: SecurityConfig,
        schemas: HashMap<String, Arc<Schema>>,
        detectors: Option<Arc<DetectorSet>>,
        workers: usize,
    ) -> Result<Self, ServiceError> {
        let checks = default_checks(detectors.as_ref());
        Self::with_checks(config, schemas, detectors, checks, workers)
    }

    /// Fails when an enabled check has no implementation in `checks`.
    pub fn with_checks(
        config: SecurityConfig,
        schemas: HashMap<String, Arc<Schema>>,
        detectors: Option<Arc<DetectorSet>>,
        checks: Vec<Arc<dyn Check>>,
        workers: usize,
    ) -> Result<Self, ServiceError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .thread_name(|i| format!("gqlshield-check-{i}"))
            .build()
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let ctx = Self {
            config: Arc::new(config),
            schemas: Arc::new(schemas),
            detectors,
            counters: Arc::default(),
            timeout: DEFAULT_TIMEOUT,
            checks: Arc::new(checks),
            pool: Arc::new(pool),
        };
        ctx.ensure_complete(&ctx.config)?;
        Ok(ctx)
    }

    fn ensure_complete(&self, cfg: &SecurityConfig) -> Result<(), ServiceError> {
        for kind in CheckKind::CONFIGURABLE.into_iter().filter(|k| cfg.is_enabled(*k)) {
            if !self.checks.iter().any(|c| c.kind() == kind) {
                return Err(ServiceError::MissingCheck(kind.as_str()));
            }
        }
        Ok(())
    }

    /// Same schemas, checks and pool under a new config.
    pub fn with_config(&self, config: SecurityConfig) -> Result<Self, ServiceError> {
        self.ensure_complete(&config)?;
        Ok(Self { config: Arc::new(config), ..self.clone() })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

fn request_id() -> String {
    static SEQ: AtomicU64 = AtomicU64::new(0);
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_nanos() as u64);
    format!("{:016x}-{:x}", nanos, SEQ.fetch_add(1, Ordering::Relaxed))
}

/// Parses, expands, validates and extracts once for the whole body. Batch
/// elements become one document whose operations are concatenated in order;
/// their sites are prefixed with `batch[i].`.
pub fn prepare(reqs: &[AnalysisRequest], ctx: &EngineContext) -> Result<Prepared, CheckResult> {
    let parse_fail = |detail: String| CheckResult::blocked(CheckKind::Parse, detail);
    if reqs.is_empty() {
        return Err(parse_fail("empty batch".into()));
    }
    let schema_id = reqs[0].schema_id.as_deref().unwrap_or(DEFAULT_SCHEMA_ID);
    if reqs.iter().any(|r| r.schema_id.as_deref().unwrap_or(DEFAULT_SCHEMA_ID) != schema_id) {
        return Err(parse_fail("batch mixes schema_id values".into()));
    }
    let schema = match ctx.schemas.get(schema_id) {
        Some(s) => Some(s.clone()),
        None if reqs[0].schema_id.is_none() => None,
        None => return Err(parse_fail(format!("unknown schema_id {schema_id:?}"))),
    };
    let batch = reqs.len() > 1;
    let mut merged = Document::default();
    let mut sites = Vec::new();
    for (i, req) in reqs.iter().enumerate() {
        let at = |e: String| if batch { format!("batch[{i}]: {e}") } else { e };
        if req.query.trim().is_empty() {
            return Err(parse_fail(at("empty query".into())));
        }
        ctx.counters.parses.fetch_add(1, Ordering::Relaxed);
        let parsed = parse_query(&req.query).map_err(|e| parse_fail(at(e.to_string())))?;
        gqlshield_graphql::validate::select_operation(&parsed, req.operation_name.as_deref()).map_err(|e| parse_fail(at(e.to_string())))?;
        ctx.counters.expansions.fetch_add(1, Ordering::Relaxed);
        let doc = expand_fragments(&parsed).map_err(|e| parse_fail(at(e.to_string())))?;
        if let Some(s) = &schema {
            validate(&doc, s).map_err(|e| parse_fail(at(e.to_string())))?;
        }
        ctx.counters.extractions.fetch_add(1, Ordering::Relaxed);
        let empty = serde_json::Map::new();
        let offset = merged.operations.len();
        for mut site in extract_string_inputs(&doc, req.variables.as_ref().unwrap_or(&empty)) {
            site.operation_index += offset;
            if batch {
                site.path = format!("batch[{i}].{}", site.path);
            }
            sites.push(site);
        }
        merged.operations.extend(doc.operations);
    }
    Ok(Prepared { doc: merged, sites, schema })
}

/// Runs every enabled check on the worker pool and aggregates. Checks still
/// running when the timeout expires are reported blocked.
pub fn analyze_batch(reqs: &[AnalysisRequest], ctx: &EngineContext) -> Result<AnalysisReport, ServiceError> {
    let start = Instant::now();
    ctx.counters.requests.fetch_add(1, Ordering::Relaxed);
    let cfg = ctx.config.clone();
    let finish = |results: Vec<CheckResult>, detections: Vec<Detection>, degraded: bool| {
        let mut report = AnalysisReport {
            decision: Decision::Allow,
            results,
            detections,
            total_micros: start.elapsed().as_micros() as u64,
            degraded,
            request_id: request_id(),
        };
        if report.flagged() && cfg.mode == Mode::Enforce {
            report.decision = Decision::Block;
        }
        report
    };
    let prepared = match prepare(reqs, ctx) {
        Ok(p) => Arc::new(p),
        Err(parse) => return Ok(finish(vec![parse.with_duration(start.elapsed().as_micros() as u64)], Vec::new(), false)),
    };
    let enabled: Vec<Arc<dyn Check>> = ctx.checks.iter().filter(|c| cfg.is_enabled(c.kind())).cloned().collect();
    let (tx, rx) = mpsc::channel();
    for (slot, check) in enabled.iter().enumerate() {
        let (tx, check, input, cfg) = (tx.clone(), check.clone(), prepared.clone(), cfg.clone());
        ctx.pool.spawn(move || {
            let t = Instant::now();
            let out = check.run(&input, &cfg);
            let _ = tx.send((slot, out, t.elapsed().as_micros() as u64));
        });
    }
    drop(tx);
    let deadline = start + ctx.timeout;
    let mut outcomes: Vec<Option<CheckOutcome>> = vec![None; enabled.len()];
    for _ in 0..enabled.len() {
        let left = deadline.saturating_duration_since(Instant::now());
        match rx.recv_timeout(left) {
            Ok((slot, out, micros)) => {
                let mut out = out?;
                out.result.duration_micros = micros;
                outcomes[slot] = Some(out);
            }
            Err(_) => break,
        }
    }
    let mut results = Vec::with_capacity(enabled.len());
    let mut detections = Vec::new();
    let mut degraded = false;
    for (check, out) in enabled.iter().zip(outcomes) {
        match out {
            Some(o) => {
                results.push(o.result);
                detections.extend(o.detections);
                degraded |= o.degraded;
            }
            None => results.push(CheckResult::blocked(check.kind(), TIMEOUT_DETAIL).with_duration(ctx.timeout.as_micros() as u64)),
        }
    }
    results.sort_by_key(|r| r.check);
    Ok(finish(results, detections, degraded))
}

/// Report for a body that is JSON but not an analysis request.
pub fn reject(detail: impl Into<String>, ctx: &EngineContext) -> AnalysisReport {
    ctx.counters.requests.fetch_add(1, Ordering::Relaxed);
    let decision = if ctx.config.mode == Mode::Enforce { Decision::Block } else { Decision::Allow };
    AnalysisReport {
        decision,
        results: vec![CheckResult::blocked(CheckKind::Parse, detail)],
        detections: Vec::new(),
        total_micros: 0,
        degraded: false,
        request_id: request_id(),
    }
}

pub fn analyze(req: &AnalysisRequest, ctx: &EngineContext) -> Result<AnalysisReport, ServiceError> {
    analyze_batch(std::slice::from_ref(req), ctx)
}

pub fn analyze_body(body: &AnalysisBody, ctx: &EngineContext) -> Result<AnalysisReport, ServiceError> {
    match body {
        AnalysisBody::Single(r) => analyze(r, ctx),
        AnalysisBody::Batch(rs) => analyze_batch(rs, ctx),
    }
}
