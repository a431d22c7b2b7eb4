//! Single-parse, aggregation and check-independence properties of the engine.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::{Arc, Mutex};

use gqlshield_core::config::{Mode, SecurityConfig};
use gqlshield_core::engine::*;
use gqlshield_core::features::Detector;
use gqlshield_core::infer::{Detection, DetectorSet};
use gqlshield_core::report::{CheckKind, CheckResult, CheckStatus};
use gqlshield_graphql::{parse_schema, print_document, Schema};
use proptest::prelude::*;

fn social() -> Arc<Schema> {
    let sdl = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/schemas/social.graphql")).unwrap();
    Arc::new(parse_schema(&sdl).unwrap())
}

fn schemas() -> HashMap<String, Arc<Schema>> {
    HashMap::from([(DEFAULT_SCHEMA_ID.to_string(), social())])
}

/// Delegates to a real check and records which prepared input it was given.
struct Observed {
    inner: Arc<dyn Check>,
    seen: Arc<Mutex<Vec<(String, usize)>>>,
}

impl Check for Observed {
    fn kind(&self) -> CheckKind {
        self.inner.kind()
    }

    fn run(&self, input: &Prepared, cfg: &SecurityConfig) -> Result<CheckOutcome, ServiceError> {
        let key = print_document(&input.doc);
        self.seen.lock().unwrap().push((key, input as *const Prepared as usize));
        self.inner.run(input, cfg)
    }
}

#[test]
fn each_request_is_parsed_once_under_concurrency() {
    let models = Arc::new(DetectorSet::load_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models")).unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let checks: Vec<Arc<dyn Check>> =
        default_checks(Some(&models)).into_iter().map(|inner| Arc::new(Observed { inner, seen: seen.clone() }) as Arc<dyn Check>).collect();
    let ctx = EngineContext::with_checks(SecurityConfig::default(), schemas(), Some(models), checks, 4).unwrap();
    let handles: Vec<_> = (0..100)
        .map(|i| {
            let ctx = ctx.clone();
            std::thread::spawn(move || {
                let req = AnalysisRequest {
                    query: format!("query Q{i}($t: String!) {{ r{i}: search(term: $t) {{ ... on User {{ name }} }} }}"),
                    variables: Some(serde_json::json!({ "t": format!("term {i}") }).as_object().unwrap().clone()),
                    ..Default::default()
                };
                analyze(&req, &ctx).unwrap()
            })
        })
        .collect();
    for h in handles {
        let report = h.join().unwrap();
        assert_eq!(report.results.len(), CheckKind::CONFIGURABLE.len());
    }
    assert_eq!(ctx.counters.snapshot(), [100, 100, 100, 100]);
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 100 * CheckKind::CONFIGURABLE.len());
    let mut by_request: HashMap<&str, BTreeSet<usize>> = HashMap::new();
    for (key, ptr) in seen.iter() {
        by_request.entry(key).or_default().insert(*ptr);
    }
    assert_eq!(by_request.len(), 100);
    // Every check of a request consumed the same prepared document.
    assert!(by_request.values().all(|ptrs| ptrs.len() == 1));
}

#[derive(Debug, Clone)]
struct StubSpec {
    kind: CheckKind,
    blocked: bool,
    malicious: bool,
}

struct Stub(StubSpec);

impl Check for Stub {
    fn kind(&self) -> CheckKind {
        self.0.kind
    }

    fn run(&self, _: &Prepared, _: &SecurityConfig) -> Result<CheckOutcome, ServiceError> {
        let status = if self.0.blocked { CheckStatus::Blocked } else { CheckStatus::Pass };
        let result = CheckResult { check: self.0.kind, status, score: 0.0, threshold: 0.0, detail: "stub".into(), duration_micros: 0 };
        let detections = if self.0.malicious {
            vec![Detection { detector: Detector::Sqli, probability: 1.0, malicious: true, site: "s".into(), latency_micros: 0 }]
        } else {
            Vec::new()
        };
        Ok(CheckOutcome { result, detections, degraded: false })
    }
}

fn stubs() -> impl Strategy<Value = Vec<StubSpec>> {
    proptest::sample::subsequence(CheckKind::CONFIGURABLE.to_vec(), 1..=12).prop_flat_map(|kinds| {
        let n = kinds.len();
        (Just(kinds), proptest::collection::vec(any::<(bool, bool)>(), n))
            .prop_map(|(kinds, flags)| kinds.into_iter().zip(flags).map(|(kind, (blocked, m))| StubSpec { kind, blocked, malicious: m && kind.is_ml() }).collect())
    })
}

fn stub_ctx(specs: &[StubSpec], mode: Mode) -> EngineContext {
    let cfg = SecurityConfig { enabled_checks: specs.iter().map(|s| s.kind).collect(), mode, ..Default::default() };
    let checks = specs.iter().map(|s| Arc::new(Stub(s.clone())) as Arc<dyn Check>).collect();
    EngineContext::with_checks(cfg, schemas(), None, checks, 2).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn decision_is_or_of_stub_outcomes(specs in stubs()) {
        let report = analyze(&AnalysisRequest::new("{ me { id } }"), &stub_ctx(&specs, Mode::Enforce)).unwrap();
        let expected = specs.iter().any(|s| s.blocked || s.malicious);
        prop_assert_eq!(report.decision == Decision::Block, expected);
        let kinds: Vec<_> = report.results.iter().map(|r| r.check).collect();
        let mut sorted: Vec<_> = specs.iter().map(|s| s.kind).collect();
        sorted.sort();
        prop_assert_eq!(kinds, sorted);

        let monitored = analyze(&AnalysisRequest::new("{ me { id } }"), &stub_ctx(&specs, Mode::Monitor)).unwrap();
        prop_assert_eq!(monitored.decision, Decision::Allow);
        prop_assert_eq!(monitored.flagged(), expected);
    }

    #[test]
    fn disabling_a_check_leaves_other_scores_alone(drop_idx in 0usize..9, aliases in 0usize..20) {
        let all = [CheckKind::STATIC.as_slice(), &[CheckKind::Ssrf]].concat();
        let base = SecurityConfig { enabled_checks: all.iter().copied().collect(), ..Default::default() };
        let mut fewer = base.clone();
        fewer.enabled_checks.remove(&all[drop_idx]);
        let q: String = (0..aliases).map(|i| format!("a{i}: user(id: \"http://10.0.0.{i}/\") {{ friends(first: 3) {{ name }} }} ")).collect();
        let req = AnalysisRequest::new(format!("{{ {q} me {{ id }} }}"));
        let full = analyze(&req, &EngineContext::new(base, schemas(), None, 2).unwrap()).unwrap();
        let part = analyze(&req, &EngineContext::new(fewer, schemas(), None, 2).unwrap()).unwrap();
        prop_assert_eq!(part.results.len() + 1, full.results.len());
        for r in &part.results {
            let f = full.results.iter().find(|x| x.check == r.check).unwrap();
            prop_assert_eq!((f.score, f.status, &f.detail), (r.score, r.status, &r.detail));
        }
    }
}

#[test]
fn batch_elements_share_one_report() {
    let cfg = SecurityConfig { enabled_checks: [CheckKind::Batch, CheckKind::Ssrf].into(), max_batch: 3, ..Default::default() };
    let ctx = EngineContext::new(cfg, schemas(), None, 2).unwrap();
    let body: AnalysisBody = serde_json::from_value(serde_json::json!([
        { "query": "{ me { id } }" },
        { "query": "query A { me { id } } query B { me { name } }" },
        { "query": "query P($u: String!) { fetchPreview(url: $u) { title } }", "variables": { "u": "http://169.254.169.254/latest/meta-data/" } }
    ]))
    .unwrap();
    let r = analyze_body(&body, &ctx).unwrap();
    assert_eq!(r.decision, Decision::Block);
    assert_eq!((r.results[0].check, r.results[0].score, r.results[0].status), (CheckKind::Batch, 4.0, CheckStatus::Blocked));
    assert!(r.results[1].detail.contains("batch[2].op[0].fetchPreview.args.url"), "{}", r.results[1].detail);
    assert_eq!(ctx.counters.snapshot(), [1, 3, 3, 3]);
}
