//! Acceptance gate: one PASS/FAIL line per primary criterion, exit status 1
//! if any fails. Runs from committed fixtures and bundles only.

#[path = "../../core/tests/support/static_oracle.rs"]
mod static_oracle;

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use gqlshield::bench::{self, BenchOptions};
use gqlshield::service::{self, AppState};
use gqlshield::setup::{self, EngineSources};
use gqlshield_core::config::{Mode, SecurityConfig};
use gqlshield_core::engine::*;
use gqlshield_core::features::{osi_features, sqli_features, xss_features, Detector};
use gqlshield_core::infer::{Detection, DetectorSet, Model};
use gqlshield_core::report::{CheckKind, CheckResult, CheckStatus};
use gqlshield_core::ssrf::{flagged_vectors, Vector};
use gqlshield_core::static_guard::*;
use gqlshield_graphql::{expand_fragments, parse_query, parse_schema, print_document, validate, Schema};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::Value;

type Verdict = Result<String, String>;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(root().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn json(rel: &str) -> Value {
    serde_json::from_str(&read(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parser_round_trip() -> Verdict {
    let start = Instant::now();
    let corpus = read("fixtures/queries/corpus.txt");
    let docs: Vec<&str> = corpus.split("\n=====\n").map(str::trim).filter(|d| !d.is_empty()).collect();
    ensure(docs.len() == 100, || format!("corpus has {} documents", docs.len()))?;
    for (i, src) in docs.iter().enumerate() {
        let doc = parse_query(src).map_err(|e| format!("doc {i} does not parse: {e}"))?;
        let printed = print_document(&doc);
        let reparsed = parse_query(&printed).map_err(|e| format!("doc {i} reprint does not parse: {e}"))?;
        ensure(reparsed.eq_ignoring_spans(&doc), || format!("doc {i} reparse differs"))?;
        ensure(print_document(&reparsed) == printed, || format!("doc {i} print is not a fixpoint"))?;
    }
    let mut rng = StdRng::seed_from_u64(0xf022);
    let alphabet = b"{}()[]:@$!.=\"'#,&|-_ \n\t\\abcxyz019queryfragmentonmutation";
    let prev = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut crashes = Vec::new();
    for i in 0..100_000u32 {
        let bytes: Vec<u8> = match i % 3 {
            0 => (0..rng.gen_range(0..200)).map(|_| rng.gen()).collect(),
            1 => (0..rng.gen_range(0..200)).map(|_| *alphabet.choose(&mut rng).unwrap()).collect(),
            _ => {
                let mut b = docs.choose(&mut rng).unwrap().as_bytes().to_vec();
                for _ in 0..rng.gen_range(1..6) {
                    let at = rng.gen_range(0..=b.len());
                    match rng.gen_range(0..3) {
                        0 if at < b.len() => b[at] = rng.gen(),
                        1 => b.insert(at, *alphabet.choose(&mut rng).unwrap()),
                        _ => b.truncate(at),
                    }
                }
                b
            }
        };
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let ok = catch_unwind(|| {
            if let Ok(doc) = parse_query(&text) {
                let _ = parse_query(&print_document(&doc)).expect("reprint parses");
                let _ = expand_fragments(&doc);
            }
        });
        if ok.is_err() {
            crashes.push(text);
        }
    }
    std::panic::set_hook(prev);
    let secs = start.elapsed().as_secs_f64();
    ensure(crashes.is_empty(), || format!("{} fuzz crashes, first {:?}", crashes.len(), crashes[0]))?;
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("100 corpus docs round-trip; 100000 fuzz inputs, 0 crashes; {secs:.1}s"))
}

fn static_oracle_equivalence() -> Verdict {
    use static_oracle::{oracle, QueryGen, SOCIAL_SDL};
    let schema = parse_schema(SOCIAL_SDL).map_err(|e| e.to_string())?;
    let mut generator = QueryGen::new(&schema, 0xacce);
    let cfg = SecurityConfig {
        field_weights: [("User.friends", 20.0), ("Query.users", 5.0), ("Post.comments", 3.5), ("Comment.text", 0.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        ..Default::default()
    };
    for i in 0..200 {
        let src = generator.query();
        let doc = expand_fragments(&parse_query(&src).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        validate(&doc, &schema).map_err(|e| format!("query {i} invalid: {e}"))?;
        let w = oracle(&doc, &schema, &|k| cfg.weight(k), cfg.default_list_size);
        let got = (
            query_depth(&doc),
            count_aliases(&doc),
            batch_size(&doc),
            count_directives(&doc),
            max_type_revisits(&doc, &schema).map_err(|e| e.to_string())?,
            estimate_payload_size(&doc, &schema, &cfg),
            detect_introspection(&doc),
            complexity_directive(&doc, &schema, &cfg),
        );
        let want = (w.depth, w.aliases, w.batch, w.directives, w.revisits, w.payload, w.introspection, w.directive_complexity);
        ensure(got == want, || format!("query {i} got {got:?} want {want:?}: {src}"))?;
    }
    Ok("200 generated queries, all counters and estimators equal".into())
}

fn complexity_formulas() -> Verdict {
    let schema = parse_schema(static_oracle::SOCIAL_SDL).map_err(|e| e.to_string())?;
    let mut generator = static_oracle::QueryGen::new(&schema, 0xc057);
    let mut rng = StdRng::seed_from_u64(50);
    for i in 0..50 {
        let doc = expand_fragments(&parse_query(&generator.query()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let cost = f64::from(rng.gen_range(1..400u32)) / 8.0;
        let cfg = SecurityConfig { simple_field_cost: cost, ..Default::default() };
        let (got, want) = (complexity_simple(&doc, &cfg), cost * query_depth(&doc) as f64);
        ensure(got == want, || format!("pair {i}: {got} != {want}"))?;
    }
    let spec = json("fixtures/complexity/cases.json");
    let schema = parse_schema(&read(spec["schema"].as_str().unwrap())).map_err(|e| e.to_string())?;
    let cfg = SecurityConfig {
        default_list_size: spec["default_list_size"].as_u64().unwrap(),
        field_weights: serde_json::from_value(spec["field_weights"].clone()).map_err(|e| e.to_string())?,
        ..Default::default()
    };
    let cases = spec["cases"].as_array().unwrap();
    ensure(cases.len() == 10, || format!("{} fixtures", cases.len()))?;
    for c in cases {
        let doc = expand_fragments(&parse_query(c["query"].as_str().unwrap()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let got = complexity_directive(&doc, &schema, &cfg);
        ensure(got == c["expected"].as_f64().unwrap(), || format!("{}: got {got}, documented {}", c["name"], c["expected"]))?;
    }
    Ok("50 simple pairs exact; 10 directive fixtures exact".into())
}

fn feature_extraction() -> Verdict {
    let rows = json("fixtures/payloads/features_expected.json");
    let rows = rows.as_array().unwrap();
    ensure(rows.len() == 300, || format!("{} payloads", rows.len()))?;
    for r in rows {
        let p = r["payload"].as_str().unwrap();
        for (got, key) in [(sqli_features(p).values, "sqli"), (osi_features(p).values, "osi"), (xss_features(p).values, "xss")] {
            let want: Vec<u64> = serde_json::from_value(r[key].clone()).unwrap();
            ensure(got == want, || format!("{key} {p:?}: got {got:?} want {want:?}"))?;
        }
    }
    Ok("300 payloads x 3 detectors exact".into())
}

fn ssrf_table() -> Verdict {
    let cfg = SecurityConfig::default();
    let table = json("fixtures/ssrf/expected.json");
    let table = table.as_array().unwrap();
    ensure(table.len() == 60, || format!("{} curated urls", table.len()))?;
    for e in table {
        let url = e["url"].as_str().unwrap();
        let want: Vec<String> = serde_json::from_value(e["vectors"].clone()).unwrap();
        let got: Vec<&str> = flagged_vectors(url, &cfg.ssrf).into_iter().map(Vector::as_str).collect();
        ensure(got == want, || format!("{url}: got {got:?} want {want:?}"))?;
    }
    let benign = read("fixtures/ssrf/benign.txt");
    let benign: Vec<&str> = benign.lines().collect();
    ensure(benign.len() == 100, || format!("{} benign urls", benign.len()))?;
    let flagged: Vec<&&str> = benign.iter().filter(|u| !flagged_vectors(u, &cfg.ssrf).is_empty()).collect();
    ensure(flagged.is_empty(), || format!("benign flagged: {flagged:?}"))?;
    Ok("60 curated verdicts exact; 0 of 100 benign flagged".into())
}

fn floats(v: &Value) -> Vec<f32> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap() as f32).collect()
}

fn inference_correctness() -> Verdict {
    let mut worst = Vec::new();
    for (name, tol) in [("sqli_cnn", 1e-4), ("osi_cnn", 1e-4), ("xss_mlp", 1e-4), ("xss_forest", 1e-6)] {
        let model = Model::load(&root().join(format!("models/{name}.json"))).map_err(|e| e.to_string())?;
        let fx = json(&format!("fixtures/inference/{name}_reference.json"));
        let mut max = 0f64;
        for c in fx["cases"].as_array().unwrap() {
            let p = model.probability(&floats(&c["input"])).map_err(|e| e.to_string())?;
            max = max.max((p - c["expected"].as_f64().unwrap()).abs());
        }
        ensure(max <= tol, || format!("{name} deviates by {max:e} > {tol:e}"))?;
        worst.push(format!("{name} {max:.1e}"));
    }
    let toys = json("fixtures/inference/toy_models.json");
    let mut n = 0;
    for m in toys["models"].as_array().unwrap() {
        let model = Model::from_json(&m["bundle"].to_string()).map_err(|e| e.to_string())?;
        for c in m["cases"].as_array().unwrap() {
            let x = floats(&c["input"]);
            let p = model.probability(&x).map_err(|e| e.to_string())?;
            match c.get("logit") {
                Some(l) => {
                    let logit = model.logit(&x).map_err(|e| e.to_string())?;
                    ensure(logit == l.as_f64().unwrap(), || format!("{}: logit {logit} != {l}", m["name"]))?;
                    ensure((p - c["probability"].as_f64().unwrap()).abs() < 1e-15, || format!("{}: p {p}", m["name"]))?;
                }
                None => ensure(p == c["probability"].as_f64().unwrap(), || format!("{}: p {p}", m["name"]))?,
            }
            n += 1;
        }
    }
    Ok(format!("max deviation {}; {n} toy cases exact", worst.join(", ")))
}

fn social_schemas() -> HashMap<String, Arc<Schema>> {
    HashMap::from([(DEFAULT_SCHEMA_ID.to_string(), Arc::new(parse_schema(static_oracle::SOCIAL_SDL).unwrap()))])
}

struct Observed {
    inner: Arc<dyn Check>,
    seen: Arc<Mutex<Vec<(String, usize)>>>,
}

impl Check for Observed {
    fn kind(&self) -> CheckKind {
        self.inner.kind()
    }

    fn run(&self, input: &Prepared, cfg: &SecurityConfig) -> Result<CheckOutcome, ServiceError> {
        self.seen.lock().unwrap().push((print_document(&input.doc), input as *const Prepared as usize));
        self.inner.run(input, cfg)
    }
}

struct Stub(CheckKind, bool, bool);

impl Check for Stub {
    fn kind(&self) -> CheckKind {
        self.0
    }

    fn run(&self, _: &Prepared, _: &SecurityConfig) -> Result<CheckOutcome, ServiceError> {
        let status = if self.1 { CheckStatus::Blocked } else { CheckStatus::Pass };
        let detections = if self.2 {
            vec![Detection { detector: Detector::Xss, probability: 1.0, malicious: true, site: "s".into(), latency_micros: 0 }]
        } else {
            Vec::new()
        };
        let result = CheckResult { check: self.0, status, score: 0.0, threshold: 0.0, detail: "stub".into(), duration_micros: 0 };
        Ok(CheckOutcome { result, detections, degraded: false })
    }
}

fn orchestration() -> Verdict {
    let models = Arc::new(DetectorSet::load_dir(&root().join("models")).map_err(|e| e.to_string())?);
    let seen = Arc::new(Mutex::new(Vec::new()));
    let checks = default_checks(Some(&models)).into_iter().map(|inner| Arc::new(Observed { inner, seen: seen.clone() }) as Arc<dyn Check>).collect();
    let ctx = EngineContext::with_checks(SecurityConfig::default(), social_schemas(), Some(models), checks, 4).map_err(|e| e.to_string())?;
    let threads: Vec<_> = (0..100)
        .map(|i| {
            let ctx = ctx.clone();
            std::thread::spawn(move || {
                let req = AnalysisRequest {
                    query: format!("query Q{i}($t: String!) {{ r{i}: search(term: $t) {{ ... on Post {{ title }} }} }}"),
                    variables: serde_json::json!({ "t": format!("payload {i}") }).as_object().cloned(),
                    ..Default::default()
                };
                analyze(&req, &ctx)
            })
        })
        .collect();
    for t in threads {
        let r = t.join().map_err(|_| "analysis thread panicked".to_string())?.map_err(|e| e.to_string())?;
        ensure(r.results.len() == 12, || format!("report with {} results", r.results.len()))?;
    }
    let counters = ctx.counters.snapshot();
    ensure(counters == [100, 100, 100, 100], || format!("counters {counters:?}"))?;
    let mut per_request: HashMap<String, BTreeSet<usize>> = HashMap::new();
    for (k, p) in seen.lock().unwrap().iter() {
        per_request.entry(k.clone()).or_default().insert(*p);
    }
    ensure(per_request.len() == 100 && per_request.values().all(|s| s.len() == 1), || "a request was prepared more than once".into())?;

    let mut rng = StdRng::seed_from_u64(0x0a99);
    for round in 0..50 {
        let mut kinds = CheckKind::CONFIGURABLE.to_vec();
        kinds.shuffle(&mut rng);
        kinds.truncate(rng.gen_range(1..=12));
        let outcomes: Vec<(CheckKind, bool, bool)> = kinds.iter().map(|k| (*k, rng.gen_bool(0.15), k.is_ml() && rng.gen_bool(0.15))).collect();
        let cfg = SecurityConfig { enabled_checks: kinds.iter().copied().collect(), mode: Mode::Enforce, ..Default::default() };
        let checks = outcomes.iter().map(|&(k, b, m)| Arc::new(Stub(k, b, m)) as Arc<dyn Check>).collect();
        let ctx = EngineContext::with_checks(cfg, social_schemas(), None, checks, 2).map_err(|e| e.to_string())?;
        let r = analyze(&AnalysisRequest::new("{ me { id } }"), &ctx).map_err(|e| e.to_string())?;
        let expected = outcomes.iter().any(|&(_, b, m)| b || m);
        ensure((r.decision == Decision::Block) == expected, || format!("round {round}: {:?} for {outcomes:?}", r.decision))?;
    }
    Ok("100 concurrent requests: 100 parses/expansions/extractions, one prepared input each; 50 stub configs aggregate as OR".into())
}

fn throughput_run(config: &str, users: usize) -> Result<bench::BenchReport, String> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let src = EngineSources {
            schema: Some(root().join("fixtures/schemas/social.graphql")),
            config: root().join("fixtures/configs").join(config),
            models: root().join("models"),
            workers: setup::default_workers(),
        };
        let schema = src.schema().map_err(|e| e.to_string())?;
        let cfg = setup::load_config(&src.config, schema.as_deref()).map_err(|e| e.to_string())?;
        let state = Arc::new(AppState::new(None, Some(src.clone()), schema.clone()));
        let mut running = service::start("127.0.0.1:0".parse().unwrap(), state, move || src.build(schema, cfg)).await.map_err(|e| e.to_string())?;
        running.wait_ready().await.map_err(|e| e.to_string())?;
        let opts = BenchOptions {
            target: format!("http://{}", running.addr),
            users,
            spawn_rate: users as f64,
            duration: Duration::from_secs(60),
            mix: bench::default_mix(),
            request_timeout: Duration::from_secs(30),
            seed: 7,
        };
        let report = bench::run(&opts).await.map_err(|e| e.to_string());
        running.stop().await.map_err(|e| e.to_string())?;
        report
    })
}

fn throughput_smoke() -> Verdict {
    let cores = setup::default_workers();
    let fast = throughput_run("social-static.json", 16)?;
    let summary = |r: &bench::BenchReport| format!("{:.0} rps, p95 {:.1} ms, {} errors", r.rps, r.p95_ms, r.failures);
    ensure(fast.failures == 0 && fast.rps >= 300.0 && fast.p95_ms < 50.0, || format!("ML off: {} on {cores} cores", summary(&fast)))?;
    let full = throughput_run("social.json", 8)?;
    ensure(full.failures == 0 && full.malformed_reports == 0 && full.requests > 0, || {
        format!("all checks: {} and {} reports missing timings", summary(&full), full.malformed_reports)
    })?;
    Ok(format!(
        "{cores} cores; ML off: {}; all checks: {}, every report timed ({} requests)",
        summary(&fast),
        summary(&full),
        full.requests
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("parser round-trip and fuzz", parser_round_trip),
        ("static-check oracle equivalence", static_oracle_equivalence),
        ("complexity formulas", complexity_formulas),
        ("feature extraction", feature_extraction),
        ("ssrf verdict table", ssrf_table),
        ("inference correctness", inference_correctness),
        ("orchestration", orchestration),
        ("throughput smoke", throughput_smoke),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
