//! Per-API security configuration: loading, validation and generation from a
//! schema, either by a deterministic heuristic or through an LLM client.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use gqlshield_graphql::{parse_schema, Schema, SchemaError, TypeKind};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::features::Detector;
use crate::report::CheckKind;

/// JSON schema of the config file, shipped alongside the crate.
pub const CONFIG_JSON_SCHEMA: &str = include_str!("../../../docs/security-config.schema.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Simple,
    Directive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Blocked analyses are reported as `block`.
    Enforce,
    /// Every analysis is reported as `allow`; results still carry the verdicts.
    Monitor,
}

/// Additions to the built-in SSRF match lists.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsrfConfig {
    pub metadata_hosts: Vec<String>,
    pub metadata_paths: Vec<String>,
    pub param_names: Vec<String>,
    pub rebind_domains: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SecurityConfig {
    pub estimator: Estimator,
    pub simple_field_cost: f64,
    pub complexity_threshold: f64,
    pub max_depth: u64,
    pub max_aliases: u64,
    pub max_batch: u64,
    pub max_directives: u64,
    pub max_circular_revisits: u64,
    pub max_payload_estimate: u64,
    pub default_list_size: u64,
    pub allow_introspection: bool,
    pub field_weights: BTreeMap<String, f64>,
    pub enabled_checks: BTreeSet<CheckKind>,
    /// Overrides the bundle's decision threshold per detector.
    pub detector_thresholds: BTreeMap<Detector, f64>,
    pub ssrf: SsrfConfig,
    pub mode: Mode,
}

impl Default for SecurityConfig {
    fn default() -> Self {
        let r = RuleSet::default();
        Self {
            estimator: Estimator::Directive,
            simple_field_cost: r.simple_field_cost,
            complexity_threshold: 1000.0,
            max_depth: 10,
            max_aliases: r.max_aliases,
            max_batch: r.max_batch,
            max_directives: r.max_directives,
            max_circular_revisits: r.max_circular_revisits,
            max_payload_estimate: r.max_payload_estimate,
            default_list_size: r.default_list_size,
            allow_introspection: false,
            field_weights: BTreeMap::new(),
            enabled_checks: CheckKind::CONFIGURABLE.into_iter().collect(),
            detector_thresholds: BTreeMap::new(),
            ssrf: SsrfConfig::default(),
            mode: Mode::Enforce,
        }
    }
}

impl SecurityConfig {
    pub fn is_enabled(&self, check: CheckKind) -> bool {
        check == CheckKind::Parse || self.enabled_checks.contains(&check)
    }

    pub fn weight(&self, key: &str) -> f64 {
        self.field_weights.get(key).copied().unwrap_or(1.0)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("invalid config: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl ConfigError {
    pub fn violations(&self) -> Vec<String> {
        match self {
            ConfigError::Syntax(m) => vec![m.clone()],
            ConfigError::Invalid(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy)]
enum Bound {
    Positive,
    NonNegative,
    AtLeastOne,
}

impl Bound {
    fn check(self, x: f64) -> Option<&'static str> {
        match self {
            Bound::Positive if x <= 0.0 => Some("> 0"),
            Bound::NonNegative if x < 0.0 => Some(">= 0"),
            Bound::AtLeastOne if x < 1.0 => Some(">= 1"),
            _ => None,
        }
    }
}

fn check_int(key: &str, v: &Json, bound: Bound, out: &mut Vec<String>) {
    match v.as_f64() {
        Some(x) if x.fract() != 0.0 => out.push(format!("{key} must be an integer")),
        Some(x) => {
            if let Some(b) = bound.check(x) {
                out.push(format!("{key} must be {b}"));
            } else if v.as_u64().is_none() {
                out.push(format!("{key} is out of range"));
            }
        }
        None => out.push(format!("{key} must be an integer")),
    }
}

fn check_number(key: &str, v: &Json, bound: Bound, out: &mut Vec<String>) {
    match v.as_f64() {
        Some(x) => {
            if let Some(b) = bound.check(x) {
                out.push(format!("{key} must be {b}"));
            }
        }
        None => out.push(format!("{key} must be a number")),
    }
}

fn check_enum(key: &str, v: &Json, allowed: &[&str], out: &mut Vec<String>) {
    if !v.as_str().is_some_and(|s| allowed.contains(&s)) {
        let list: Vec<String> = allowed.iter().map(|a| format!("{a:?}")).collect();
        out.push(format!("{key} must be one of {}", list.join(", ")));
    }
}

fn check_string_list(key: &str, v: &Json, out: &mut Vec<String>) {
    if !v.as_array().is_some_and(|a| a.iter().all(Json::is_string)) {
        out.push(format!("{key} must be a list of strings"));
    }
}

/// Parses and checks a config document, collecting every violation.
/// Absent keys take their defaults. With a schema, `field_weights` keys must
/// name existing `Type.field` pairs.
pub fn validate_config(text: &str, schema: Option<&Schema>) -> Result<SecurityConfig, ConfigError> {
    let value: Json = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    validate_value(&value, schema)
}

pub fn validate_value(value: &Json, schema: Option<&Schema>) -> Result<SecurityConfig, ConfigError> {
    let Some(obj) = value.as_object() else {
        return Err(ConfigError::Invalid(vec!["config must be a JSON object".into()]));
    };
    let mut out = Vec::new();
    for (key, v) in obj {
        match key.as_str() {
            "estimator" => check_enum(key, v, &["simple", "directive"], &mut out),
            "mode" => check_enum(key, v, &["enforce", "monitor"], &mut out),
            "simple_field_cost" => check_number(key, v, Bound::NonNegative, &mut out),
            "complexity_threshold" => check_number(key, v, Bound::Positive, &mut out),
            "max_depth" | "max_payload_estimate" => check_int(key, v, Bound::Positive, &mut out),
            "max_aliases" | "max_directives" => check_int(key, v, Bound::NonNegative, &mut out),
            "max_batch" | "max_circular_revisits" | "default_list_size" => check_int(key, v, Bound::AtLeastOne, &mut out),
            "allow_introspection" => {
                if !v.is_boolean() {
                    out.push(format!("{key} must be a boolean"));
                }
            }
            "field_weights" => check_weights(v, schema, &mut out),
            "enabled_checks" => match v.as_array() {
                Some(items) => {
                    for item in items {
                        let known = item
                            .as_str()
                            .and_then(CheckKind::from_name)
                            .is_some_and(|k| k != CheckKind::Parse);
                        if !known {
                            out.push(format!("enabled_checks entry {item} is not a check name"));
                        }
                    }
                }
                None => out.push("enabled_checks must be a list of check names".into()),
            },
            "detector_thresholds" => match v.as_object() {
                Some(m) => {
                    for (d, t) in m {
                        if !Detector::ALL.iter().any(|x| x.as_str() == d) {
                            out.push(format!("detector_thresholds key {d:?} is not a detector"));
                        }
                        if !t.as_f64().is_some_and(|x| (0.0..=1.0).contains(&x)) {
                            out.push(format!("detector_thresholds[{d:?}] must be in [0, 1]"));
                        }
                    }
                }
                None => out.push("detector_thresholds must be an object".into()),
            },
            "ssrf" => match v.as_object() {
                Some(m) => {
                    for (k, list) in m {
                        match k.as_str() {
                            "metadata_hosts" | "metadata_paths" | "param_names" | "rebind_domains" => {
                                check_string_list(&format!("ssrf.{k}"), list, &mut out)
                            }
                            other => out.push(format!("unknown key \"ssrf.{other}\"")),
                        }
                    }
                }
                None => out.push("ssrf must be an object".into()),
            },
            other => out.push(format!("unknown key {other:?}")),
        }
    }
    if !out.is_empty() {
        return Err(ConfigError::Invalid(out));
    }
    serde_json::from_value(value.clone()).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))
}

fn check_weights(v: &Json, schema: Option<&Schema>, out: &mut Vec<String>) {
    let Some(m) = v.as_object() else {
        out.push("field_weights must be an object".into());
        return;
    };
    for (k, w) in m {
        if !w.as_f64().is_some_and(|x| x >= 0.0) {
            out.push(format!("field_weights[{k:?}] must be a number >= 0"));
        }
        if let Some(s) = schema {
            if !s.has_field_path(k) {
                out.push(format!("field_weights key {k:?} does not name a schema field"));
            }
        }
    }
}

/// Checks the invariants of an already-typed config (used on generated output).
pub fn check_config(cfg: &SecurityConfig, schema: Option<&Schema>) -> Result<(), ConfigError> {
    let value = serde_json::to_value(cfg).map_err(|e| ConfigError::Invalid(vec![e.to_string()]))?;
    validate_value(&value, schema).map(|_| ())
}

/// Rules for config generation. The prose goes to the LLM; the numbers drive
/// the heuristic and fill thresholds the schema says nothing about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleSet {
    pub prose: String,
    pub base_weight: f64,
    pub object_weight: f64,
    pub list_multiplier: f64,
    pub depth_margin: u64,
    pub max_aliases: u64,
    pub max_batch: u64,
    pub max_directives: u64,
    pub max_circular_revisits: u64,
    pub default_list_size: u64,
    pub max_payload_estimate: u64,
    pub simple_field_cost: f64,
}

impl Default for RuleSet {
    fn default() -> Self {
        Self {
            prose: DEFAULT_PROSE.to_string(),
            base_weight: 1.0,
            object_weight: 2.0,
            list_multiplier: 10.0,
            depth_margin: 2,
            max_aliases: 15,
            max_batch: 5,
            max_directives: 10,
            max_circular_revisits: 2,
            default_list_size: 10,
            max_payload_estimate: 10_000,
            simple_field_cost: 1.0,
        }
    }
}

const DEFAULT_PROSE: &str = "\
Assign every output field a complexity weight in field_weights keyed \"Type.field\". \
Scalar and enum fields are cheap, object fields cost more, and list fields cost \
proportionally to the number of items they can return. Set max_depth to the deepest \
legitimate query the schema supports plus a small margin. Keep alias, batch and \
directive limits tight; legitimate clients rarely need more than a handful. \
Disallow introspection in production.";

impl RuleSet {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut out = Vec::new();
        for (k, v) in [
            ("base_weight", self.base_weight),
            ("object_weight", self.object_weight),
            ("list_multiplier", self.list_multiplier),
            ("simple_field_cost", self.simple_field_cost),
        ] {
            if !(v >= 0.0) {
                out.push(format!("{k} must be >= 0"));
            }
        }
        if self.max_batch < 1 {
            out.push("max_batch must be >= 1".into());
        }
        if self.max_circular_revisits < 1 {
            out.push("max_circular_revisits must be >= 1".into());
        }
        if self.default_list_size < 1 {
            out.push("default_list_size must be >= 1".into());
        }
        if self.max_payload_estimate < 1 {
            out.push("max_payload_estimate must be > 0".into());
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(out))
        }
    }
}

/// Upper bound on DFS steps when measuring the longest acyclic path.
const PATH_SEARCH_BUDGET: usize = 1_000_000;

/// Composite types reachable through one field of `ty`, with unions replaced
/// by their members.
fn successors<'s>(schema: &'s Schema, ty: &str) -> Vec<&'s str> {
    let mut out = BTreeSet::new();
    if let Some(targets) = schema.adjacency.get(ty) {
        for t in targets {
            match schema.get(t) {
                Some(def) if def.kind == TypeKind::Union => out.extend(schema.possible_types(t)),
                Some(def) => {
                    out.insert(def.name.as_str());
                }
                None => {}
            }
        }
    }
    out.into_iter().collect()
}

/// Vertices on the longest path from the query root that visits each type at
/// most once.
pub fn longest_acyclic_path(schema: &Schema) -> u64 {
    fn dfs<'s>(schema: &'s Schema, ty: &'s str, on_path: &mut BTreeSet<&'s str>, budget: &mut usize) -> u64 {
        if *budget == 0 {
            return 1;
        }
        *budget -= 1;
        on_path.insert(ty);
        let mut best = 0;
        for next in successors(schema, ty) {
            if !on_path.contains(next) {
                best = best.max(dfs(schema, next, on_path, budget));
            }
        }
        on_path.remove(ty);
        best + 1
    }
    let mut budget = PATH_SEARCH_BUDGET;
    dfs(schema, &schema.query_type, &mut BTreeSet::new(), &mut budget)
}

fn heuristic_weights(schema: &Schema, rules: &RuleSet) -> BTreeMap<String, f64> {
    schema
        .output_fields()
        .map(|(t, f)| {
            let mut w = if schema.is_composite(f.ty.named()) { rules.object_weight } else { rules.base_weight };
            if f.ty.is_list() {
                w *= rules.list_multiplier;
            }
            (format!("{}.{}", t.name, f.name), w)
        })
        .collect()
}

/// Directive-estimator cost of the single-path query of depth `max_depth` that
/// greedily takes the heaviest field at each level (ties prefer object
/// fields, then name order) and ends on the heaviest scalar field.
pub fn greedy_path_cost(schema: &Schema, weights: &BTreeMap<String, f64>, max_depth: u64, list_size: u64) -> f64 {
    let mut ty = schema.query_type.clone();
    let (mut cost, mut mult) = (0.0f64, 1.0f64);
    for level in 1..=max_depth {
        let Some(def) = schema.get(&ty) else { break };
        let last = level == max_depth;
        let pick = def
            .fields
            .values()
            .map(|f| {
                let composite = schema.is_composite(f.ty.named());
                (f, composite, weights.get(&format!("{ty}.{}", f.name)).copied().unwrap_or(1.0))
            })
            .filter(|(_, composite, _)| !(last && *composite))
            .max_by(|a, b| {
                a.2.total_cmp(&b.2).then(a.1.cmp(&b.1)).then_with(|| b.0.name.cmp(&a.0.name))
            });
        let Some((field, composite, w)) = pick else { break };
        cost += w * mult;
        if !composite {
            break;
        }
        if field.ty.is_list() {
            mult *= list_size as f64;
        }
        let next = field.ty.named();
        ty = match schema.get(next) {
            Some(d) if d.kind == TypeKind::Union => match schema.possible_types(next).first() {
                Some(m) => m.to_string(),
                None => break,
            },
            _ => next.to_string(),
        };
    }
    cost
}

/// Deterministic config from the schema shape and rule defaults.
pub fn heuristic_generate(schema: &Schema, rules: &RuleSet) -> SecurityConfig {
    let field_weights = heuristic_weights(schema, rules);
    let max_depth = longest_acyclic_path(schema) + rules.depth_margin;
    let greedy = greedy_path_cost(schema, &field_weights, max_depth, rules.default_list_size);
    let max_weight = field_weights.values().copied().fold(0.0, f64::max);
    // The max-weight floor keeps the threshold above every single field weight.
    let complexity_threshold = (1.5 * greedy.max(max_weight)).ceil().max(1.0);
    SecurityConfig {
        estimator: Estimator::Directive,
        simple_field_cost: rules.simple_field_cost,
        complexity_threshold,
        max_depth,
        max_aliases: rules.max_aliases,
        max_batch: rules.max_batch,
        max_directives: rules.max_directives,
        max_circular_revisits: rules.max_circular_revisits,
        max_payload_estimate: rules.max_payload_estimate,
        default_list_size: rules.default_list_size,
        allow_introspection: false,
        field_weights,
        enabled_checks: CheckKind::CONFIGURABLE.into_iter().collect(),
        detector_thresholds: BTreeMap::new(),
        ssrf: SsrfConfig::default(),
        mode: Mode::Enforce,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigSource {
    Heuristic,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub source: ConfigSource,
    pub fallback: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedConfig {
    pub config: SecurityConfig,
    pub provenance: Provenance,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("malformed response: {0}")]
    Malformed(String),
}

/// One chat-style completion round trip.
pub trait LlmClient {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError>;
}

/// Chat-completions client: POSTs `{model, messages}` and reads the first
/// choice's message content. The bearer token comes from the environment
/// variable named by `api_key_env`.
#[derive(Debug, Clone)]
pub struct HttpLlmClient {
    pub endpoint: String,
    pub model: String,
    pub timeout: Duration,
    pub api_key_env: String,
}

impl HttpLlmClient {
    pub const DEFAULT_API_KEY_ENV: &'static str = "GQLSHIELD_LLM_API_KEY";

    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout: Duration::from_secs(60),
            api_key_env: Self::DEFAULT_API_KEY_ENV.to_string(),
        }
    }
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, system: &str, user: &str) -> Result<String, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut req = client.post(&self.endpoint).json(&body);
        if let Ok(key) = std::env::var(&self.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(LlmError::Status(status.as_u16()));
        }
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(completion_text(&text))
    }
}

/// Extracts the model's text from common chat response shapes, falling back
/// to the raw body.
fn completion_text(body: &str) -> String {
    let Ok(v) = serde_json::from_str::<Json>(body) else { return body.to_string() };
    let candidates = [
        v.pointer("/choices/0/message/content"),
        v.pointer("/content/0/text"),
        v.pointer("/message/content"),
        v.get("content"),
    ];
    let found = candidates.into_iter().flatten().find_map(|c| c.as_str().map(str::to_string));
    found.unwrap_or_else(|| body.to_string())
}

/// The first balanced `{...}` block in `text`, honoring JSON string quoting.
pub fn first_json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let (mut depth, mut in_str, mut escaped) = (0usize, false, false);
    for (i, c) in text[start..].char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

pub const LLM_SYSTEM_PROMPT: &str = "You are a GraphQL API security engineer. You produce security \
configurations for a GraphQL query firewall. Respond with only a JSON object matching the \
provided JSON schema, with no prose before or after it.";

pub fn llm_prompt(sdl: &str, rules: &RuleSet) -> String {
    let defaults = json!({
        "base_weight": rules.base_weight,
        "object_weight": rules.object_weight,
        "list_multiplier": rules.list_multiplier,
        "depth_margin": rules.depth_margin,
        "max_aliases": rules.max_aliases,
        "max_batch": rules.max_batch,
        "max_directives": rules.max_directives,
        "max_circular_revisits": rules.max_circular_revisits,
        "default_list_size": rules.default_list_size,
        "max_payload_estimate": rules.max_payload_estimate,
    });
    format!(
        "Rules:\n{}\n\nReference numeric defaults:\n{}\n\nSchema (SDL):\n{}\n\nConfig JSON schema:\n{}\n\n\
         Respond with only JSON matching this schema.",
        rules.prose, defaults, sdl, CONFIG_JSON_SCHEMA
    )
}

/// Asks the LLM for a config. Any transport, parse or validation failure
/// yields the heuristic config with `fallback = true`.
pub fn llm_generate(sdl: &str, rules: &RuleSet, client: &dyn LlmClient) -> Result<GeneratedConfig, SchemaError> {
    let schema = parse_schema(sdl)?;
    let attempt = client
        .complete(LLM_SYSTEM_PROMPT, &llm_prompt(sdl, rules))
        .map_err(|e| e.to_string())
        .and_then(|reply| first_json_object(&reply).map(str::to_string).ok_or_else(|| "no JSON object in reply".to_string()))
        .and_then(|block| validate_config(&block, Some(&schema)).map_err(|e| e.to_string()));
    Ok(match attempt {
        Ok(config) => GeneratedConfig { config, provenance: Provenance { source: ConfigSource::Llm, fallback: false, reason: None } },
        Err(reason) => GeneratedConfig {
            config: heuristic_generate(&schema, rules),
            provenance: Provenance { source: ConfigSource::Heuristic, fallback: true, reason: Some(reason) },
        },
    })
}
