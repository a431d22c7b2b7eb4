//! SSRF detection over URLs found in query payloads.
//!
//! Every string input is expanded into decoded variants, scanned for URLs, and
//! each URL is tested for local or private targets, cloud metadata endpoints,
//! SSRF-prone parameters carrying such URLs, and encoding used to hide them.
//! No DNS lookups are made; rebinding services are matched by name.

use std::collections::HashSet;
use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use base64::Engine as _;
use gqlshield_graphql::{extract_string_inputs, Document, PayloadSite};
use serde::Serialize;

use crate::config::{SecurityConfig, SsrfConfig};
use crate::report::{CheckKind, CheckResult};

pub const MAX_DECODE_DEPTH: usize = 3;
/// Variants kept per decode level.
const MAX_VARIANTS_PER_LEVEL: usize = 3;
const MIN_BASE64_LEN: usize = 12;

pub const SCHEMES: [&str; 6] = ["http", "https", "ftp", "gopher", "file", "dict"];
pub const METADATA_HOSTS: [&str; 5] =
    ["169.254.169.254", "metadata.google.internal", "metadata.goog", "169.254.170.2", "fd00:ec2::254"];
pub const METADATA_PATHS: [&str; 3] = ["/latest/meta-data", "/computeMetadata", "/metadata/instance"];
pub const PARAM_NAMES: [&str; 12] =
    ["url", "uri", "redirect", "redirect_uri", "next", "dest", "destination", "target", "callback", "link", "fetch", "proxy"];
pub const REBIND_DOMAINS: [&str; 3] = ["nip.io", "sslip.io", "xip.io"];

const PRIVATE_V4: [(Ipv4Addr, u32); 6] = [
    (Ipv4Addr::new(127, 0, 0, 0), 8),
    (Ipv4Addr::new(10, 0, 0, 0), 8),
    (Ipv4Addr::new(172, 16, 0, 0), 12),
    (Ipv4Addr::new(192, 168, 0, 0), 16),
    (Ipv4Addr::new(169, 254, 0, 0), 16),
    (Ipv4Addr::new(0, 0, 0, 0), 32),
];
const PRIVATE_V6: [(Ipv6Addr, u32); 3] = [
    (Ipv6Addr::LOCALHOST, 128),
    (Ipv6Addr::new(0xfc00, 0, 0, 0, 0, 0, 0, 0), 7),
    (Ipv6Addr::new(0xfe80, 0, 0, 0, 0, 0, 0, 0), 10),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeStep {
    UrlDecode,
    UnicodeEscape,
    Base64,
}

impl DecodeStep {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeStep::UrlDecode => "url_decode",
            DecodeStep::UnicodeEscape => "unicode_escape",
            DecodeStep::Base64 => "base64",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Vector {
    LocalIp,
    CloudMetadata,
    ParamBased,
    EncodedPayload,
}

impl Vector {
    pub const ALL: [Vector; 4] = [Vector::LocalIp, Vector::CloudMetadata, Vector::ParamBased, Vector::EncodedPayload];

    pub fn as_str(self) -> &'static str {
        match self {
            Vector::LocalIp => "local_ip",
            Vector::CloudMetadata => "cloud_metadata",
            Vector::ParamBased => "param_based",
            Vector::EncodedPayload => "encoded_payload",
        }
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UrlFinding {
    pub raw: String,
    pub scheme: String,
    /// Lowercased host without brackets, port, userinfo or trailing dot.
    pub normalized_host: String,
    /// Canonical address when the host is an IP literal in any notation.
    pub resolved_ip: Option<String>,
    pub path: String,
    /// Query parameters exactly as written, not percent-decoded.
    pub params: Vec<(String, String)>,
    pub source: String,
    pub decode_chain: Vec<DecodeStep>,
}

/// `flagged` implies a non-empty `evidence` naming the matched rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SsrfVerdict {
    pub flagged: bool,
    pub vector: Vector,
    pub evidence: String,
}

impl SsrfVerdict {
    fn hit(vector: Vector, evidence: String) -> Self {
        Self { flagged: true, vector, evidence }
    }

    fn miss(vector: Vector) -> Self {
        Self { flagged: false, vector, evidence: String::new() }
    }
}

// ---- decoding ----

/// The input plus decoded variants, breadth first. Each level applies
/// percent-decoding, `\uXXXX`/`\xXX` unescaping and base64 to every variant of
/// the previous level; only changed, unseen strings are kept, at most three
/// per level.
pub fn decode_layers(text: &str) -> Vec<(String, Vec<DecodeStep>)> {
    let mut out = vec![(text.to_string(), Vec::new())];
    let mut seen: HashSet<String> = HashSet::from([text.to_string()]);
    let mut frontier = 0..1;
    for _ in 0..MAX_DECODE_DEPTH {
        let mut level = Vec::new();
        'parents: for i in frontier.clone() {
            for step in [DecodeStep::UrlDecode, DecodeStep::UnicodeEscape, DecodeStep::Base64] {
                if level.len() == MAX_VARIANTS_PER_LEVEL {
                    break 'parents;
                }
                let (parent, chain) = &out[i];
                let decoded = match step {
                    DecodeStep::UrlDecode => percent_decode(parent),
                    DecodeStep::UnicodeEscape => unescape(parent),
                    DecodeStep::Base64 => base64_tokens(parent),
                };
                if let Some(d) = decoded {
                    if seen.insert(d.clone()) {
                        let mut c = chain.clone();
                        c.push(step);
                        level.push((d, c));
                    }
                }
            }
        }
        if level.is_empty() {
            break;
        }
        let start = out.len();
        out.extend(level);
        frontier = start..out.len();
    }
    out
}

fn percent_decode(s: &str) -> Option<String> {
    if !s.contains('%') {
        return None;
    }
    let d = percent_encoding::percent_decode_str(s).decode_utf8_lossy();
    (d != s).then(|| d.into_owned())
}

/// Resolves `\uXXXX` and `\xXX` escapes; other backslashes are kept.
fn unescape(s: &str) -> Option<String> {
    if !s.contains('\\') {
        return None;
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    let mut changed = false;
    while let Some(pos) = rest.find('\\') {
        out.push_str(&rest[..pos]);
        let tail = &rest[pos + 1..];
        let width = match tail.as_bytes().first() {
            Some(b'u') => 4,
            Some(b'x') => 2,
            _ => 0,
        };
        let code = (width > 0)
            .then(|| tail.get(1..1 + width))
            .flatten()
            .filter(|h| h.bytes().all(|b| b.is_ascii_hexdigit()))
            .and_then(|h| char::from_u32(u32::from_str_radix(h, 16).ok()?));
        match code {
            Some(c) => {
                out.push(c);
                rest = &tail[1 + width..];
                changed = true;
            }
            None => {
                out.push('\\');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    changed.then_some(out)
}

fn is_base64_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'+' | b'/' | b'=' | b'-' | b'_')
}

/// Replaces every base64 token that decodes to mostly printable text.
fn base64_tokens(s: &str) -> Option<String> {
    let bytes = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut last = 0;
    let mut i = 0;
    let mut changed = false;
    while i < bytes.len() {
        if !is_base64_byte(bytes[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < bytes.len() && is_base64_byte(bytes[i]) {
            i += 1;
        }
        if let Some(text) = decode_base64_token(&s[start..i]) {
            out.push_str(&s[last..start]);
            out.push_str(&text);
            last = i;
            changed = true;
        }
    }
    out.push_str(&s[last..]);
    changed.then_some(out)
}

fn decode_base64_token(token: &str) -> Option<String> {
    if token.len() < MIN_BASE64_LEN {
        return None;
    }
    let body = token.trim_end_matches('=');
    let pad = token.len() - body.len();
    // Padding is valid when absent or when it completes a 4-byte group.
    if body.contains('=') || pad > 2 || (pad > 0 && token.len() % 4 != 0) || body.len() % 4 == 1 {
        return None;
    }
    let url_safe = body.contains(['-', '_']);
    if url_safe && body.contains(['+', '/']) {
        return None;
    }
    let engine = if url_safe {
        base64::engine::general_purpose::URL_SAFE_NO_PAD
    } else {
        base64::engine::general_purpose::STANDARD_NO_PAD
    };
    let decoded = engine.decode(body).ok()?;
    let printable = decoded.iter().filter(|&&b| (0x20..0x7f).contains(&b) || matches!(b, b'\t' | b'\n' | b'\r')).count();
    if decoded.is_empty() || printable * 5 < decoded.len() * 4 {
        return None;
    }
    Some(String::from_utf8_lossy(&decoded).into_owned())
}

// ---- URL extraction ----

fn is_url_end(b: u8) -> bool {
    b.is_ascii_whitespace() || b.is_ascii_control() || matches!(b, b'"' | b'\'' | b'<' | b'>' | b'`' | b'\\')
}

/// Byte spans of URLs in `text`, left to right and non-overlapping, so a URL
/// nested in another URL's query is only seen through its parameter.
fn url_spans(text: &str) -> Vec<(usize, usize)> {
    let b = text.as_bytes();
    let mut spans = Vec::new();
    let mut i = 0;
    while let Some(off) = text[i..].find("//") {
        let p = i + off;
        let start = if p > 0 && b[p - 1] == b':' {
            let mut s = p - 1;
            while s > 0 && b[s - 1].is_ascii_alphabetic() {
                s -= 1;
            }
            let scheme = &text[s..p - 1];
            let bounded = s == 0 || !(b[s - 1].is_ascii_alphanumeric() || matches!(b[s - 1], b'+' | b'-' | b'.'));
            (bounded && SCHEMES.iter().any(|k| k.eq_ignore_ascii_case(scheme))).then_some(s)
        } else {
            let bounded = p == 0 || !(b[p - 1].is_ascii_alphanumeric() || matches!(b[p - 1], b'/' | b'.' | b'-' | b'_' | b'%'));
            let host_follows = b.get(p + 2).is_some_and(|&c| c.is_ascii_alphanumeric() || c == b'[');
            (bounded && host_follows).then_some(p)
        };
        let Some(start) = start else {
            i = p + 2;
            continue;
        };
        let mut end = p + 2;
        while end < b.len() && !is_url_end(b[end]) {
            end += 1;
        }
        while end > p + 2 && matches!(b[end - 1], b'.' | b',' | b';' | b')' | b']' | b'}' | b'!') {
            end -= 1;
        }
        spans.push((start, end));
        i = end.max(p + 2);
    }
    spans
}

fn parse_url(raw: &str) -> UrlFinding {
    let sep = raw.find("//").expect("span contains //");
    let scheme = raw[..sep].trim_end_matches(':').to_ascii_lowercase();
    let rest = &raw[sep + 2..];
    let auth_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let authority = &rest[..auth_end];
    let after = &rest[auth_end..];
    let host_port = authority.rsplit_once('@').map_or(authority, |(_, h)| h);
    let host = if let Some(inner) = host_port.strip_prefix('[') {
        inner.split(']').next().unwrap_or(inner)
    } else {
        match host_port.rsplit_once(':') {
            Some((h, port)) if port.bytes().all(|c| c.is_ascii_digit()) => h,
            _ => host_port,
        }
    };
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    let no_frag = after.split('#').next().unwrap_or("");
    let (path, query) = no_frag.split_once('?').unwrap_or((no_frag, ""));
    let params = query
        .split('&')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (k, v) = p.split_once('=').unwrap_or((p, ""));
            (k.to_string(), v.to_string())
        })
        .collect();
    UrlFinding {
        raw: raw.to_string(),
        resolved_ip: normalize_host(&host).map(|ip| ip.to_string()),
        scheme,
        normalized_host: host,
        path: path.to_string(),
        params,
        source: String::new(),
        decode_chain: Vec::new(),
    }
}

/// URLs in each site and in each of its decoded variants. A URL that
/// reappears in a later variant with the same scheme, host and path is kept
/// only once, with the shortest decode chain.
pub fn extract_urls(sites: &[PayloadSite]) -> Vec<UrlFinding> {
    let mut out = Vec::new();
    for site in sites {
        let mut seen = HashSet::new();
        for (variant, chain) in decode_layers(&site.text) {
            for (s, e) in url_spans(&variant) {
                let mut f = parse_url(&variant[s..e]);
                if seen.insert((f.scheme.clone(), f.normalized_host.clone(), f.path.clone())) {
                    f.source = site.path.clone();
                    f.decode_chain = chain.clone();
                    out.push(f);
                }
            }
        }
    }
    out
}

/// URLs in a bare string, tagged with `source`.
pub fn extract_urls_from_text(text: &str, source: &str) -> Vec<UrlFinding> {
    let site = PayloadSite {
        text: text.to_string(),
        origin: gqlshield_graphql::SiteOrigin::ArgumentLiteral,
        path: source.to_string(),
        operation_index: 0,
    };
    extract_urls(std::slice::from_ref(&site))
}

// ---- host normalization ----

/// One inet_aton component: `0x` hex, leading-zero octal, or decimal.
fn ipv4_part(s: &str) -> Option<u64> {
    let (digits, radix) = if let Some(h) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        (h, 16)
    } else if s.len() > 1 && s.starts_with('0') {
        (&s[1..], 8)
    } else {
        (s, 10)
    };
    if digits.is_empty() && radix == 16 {
        return None;
    }
    digits.chars().try_fold(0u64, |acc, c| {
        let d = c.to_digit(radix)?;
        acc.checked_mul(u64::from(radix))?.checked_add(u64::from(d))
    })
}

/// IPv4 in any notation inet_aton accepts: one to four dot-separated parts,
/// each decimal, octal or hex, where the last part fills the remaining bytes.
fn parse_ipv4_loose(host: &str) -> Option<Ipv4Addr> {
    let parts: Vec<&str> = host.split('.').collect();
    if parts.is_empty() || parts.len() > 4 || parts.iter().any(|p| p.is_empty()) {
        return None;
    }
    let values = parts.iter().map(|p| ipv4_part(p)).collect::<Option<Vec<u64>>>()?;
    let (last, leading) = values.split_last()?;
    if leading.iter().any(|&v| v > 255) || *last >= 1u64 << (8 * (4 - leading.len())) {
        return None;
    }
    let mut addr = *last;
    for (i, v) in leading.iter().enumerate() {
        addr |= v << (24 - 8 * i);
    }
    Some(Ipv4Addr::from(addr as u32))
}

/// The address named by an IP-literal host in any supported notation, or
/// `None` for ordinary hostnames. IPv4-mapped IPv6 collapses to IPv4; the
/// `Display` form of the result is canonical dotted-quad or RFC 5952 text.
pub fn normalize_host(host: &str) -> Option<IpAddr> {
    let h = host.trim();
    let h = h.strip_prefix('[').and_then(|x| x.strip_suffix(']')).unwrap_or(h);
    if h.contains(':') {
        let addr = h.split('%').next()?;
        let v6: Ipv6Addr = addr.parse().ok()?;
        return Some(match v6.to_ipv4_mapped() {
            Some(v4) => IpAddr::V4(v4),
            None => IpAddr::V6(v6),
        });
    }
    parse_ipv4_loose(h.strip_suffix('.').unwrap_or(h)).map(IpAddr::V4)
}

fn private_range(ip: IpAddr) -> Option<String> {
    match ip {
        IpAddr::V4(v4) => PRIVATE_V4.iter().find_map(|&(net, len)| {
            let mask = if len == 0 { 0 } else { u32::MAX << (32 - len) };
            (u32::from(v4) & mask == u32::from(net)).then(|| format!("{net}/{len}"))
        }),
        IpAddr::V6(v6) => PRIVATE_V6.iter().find_map(|&(net, len)| {
            let mask = if len == 0 { 0 } else { u128::MAX << (128 - len) };
            (u128::from(v6) & mask == u128::from(net)).then(|| format!("{net}/{len}"))
        }),
    }
}

fn merged<'a>(builtin: &'a [&'a str], extra: &'a [String]) -> impl Iterator<Item = &'a str> {
    builtin.iter().copied().chain(extra.iter().map(String::as_str))
}

/// A private address embedded in a rebinding-service hostname such as
/// `10.0.0.1.nip.io`, `app-192-168-1-1.sslip.io` or `7f000001.nip.io`.
fn rebind_target(host: &str, cfg: &SsrfConfig) -> Option<(String, IpAddr)> {
    for domain in merged(&REBIND_DOMAINS, &cfg.rebind_domains) {
        let domain = domain.to_ascii_lowercase();
        let Some(prefix) = host.strip_suffix(domain.as_str()).and_then(|p| p.strip_suffix('.')) else {
            continue;
        };
        let labels: Vec<&str> = prefix.split('.').collect();
        let last = labels.last().copied().unwrap_or("");
        let dashed: Vec<&str> = last.split('-').collect();
        let mut candidates = Vec::new();
        if labels.len() >= 4 {
            candidates.push(labels[labels.len() - 4..].join("."));
        }
        if dashed.len() >= 4 {
            candidates.push(dashed[dashed.len() - 4..].join("."));
        }
        if last.len() == 8 && last.bytes().all(|b| b.is_ascii_hexdigit()) {
            candidates.push(format!("0x{last}"));
        }
        for c in candidates {
            if let Some(ip) = parse_ipv4_loose(&c).map(IpAddr::V4) {
                if private_range(ip).is_some() {
                    return Some((domain, ip));
                }
            }
        }
    }
    None
}

// ---- vectors ----

pub fn is_local_or_private(f: &UrlFinding, cfg: &SsrfConfig) -> SsrfVerdict {
    let host = f.normalized_host.as_str();
    if let Some(ip) = normalize_host(host) {
        if let Some(range) = private_range(ip) {
            return SsrfVerdict::hit(Vector::LocalIp, format!("host {host} is {ip} in {range}"));
        }
    }
    if host == "localhost" || host.ends_with(".localhost") || host.ends_with(".local") {
        return SsrfVerdict::hit(Vector::LocalIp, format!("host {host} is a local name"));
    }
    if let Some((domain, ip)) = rebind_target(host, cfg) {
        return SsrfVerdict::hit(Vector::LocalIp, format!("host {host} rebinds to {ip} via {domain}"));
    }
    SsrfVerdict::miss(Vector::LocalIp)
}

pub fn is_cloud_metadata(f: &UrlFinding, cfg: &SsrfConfig) -> SsrfVerdict {
    let host = f.normalized_host.as_str();
    for known in merged(&METADATA_HOSTS, &cfg.metadata_hosts) {
        let known_ip = normalize_host(known);
        let by_ip = known_ip.is_some() && f.resolved_ip.as_deref() == known_ip.map(|ip| ip.to_string()).as_deref();
        if host.eq_ignore_ascii_case(known) || by_ip {
            return SsrfVerdict::hit(Vector::CloudMetadata, format!("metadata host {known}"));
        }
    }
    for prefix in merged(&METADATA_PATHS, &cfg.metadata_paths) {
        if f.path.len() >= prefix.len() && f.path.as_bytes()[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes()) {
            return SsrfVerdict::hit(Vector::CloudMetadata, format!("metadata path {prefix}"));
        }
    }
    SsrfVerdict::miss(Vector::CloudMetadata)
}

/// Flags a URL whose SSRF-prone parameter carries a URL that is itself local,
/// a metadata endpoint, or (recursively, below `MAX_DECODE_DEPTH`) carries one.
pub fn check_params(f: &UrlFinding, depth: usize, cfg: &SsrfConfig) -> SsrfVerdict {
    if depth >= MAX_DECODE_DEPTH {
        return SsrfVerdict::miss(Vector::ParamBased);
    }
    for (name, value) in &f.params {
        if !merged(&PARAM_NAMES, &cfg.param_names).any(|p| p.eq_ignore_ascii_case(name)) {
            continue;
        }
        for inner in extract_urls_from_text(value, &f.source) {
            let verdicts = [is_local_or_private(&inner, cfg), is_cloud_metadata(&inner, cfg), check_params(&inner, depth + 1, cfg)];
            if let Some(v) = verdicts.into_iter().find(|v| v.flagged) {
                return SsrfVerdict::hit(Vector::ParamBased, format!("parameter {name} carries {}: {}", v.vector, v.evidence));
            }
        }
    }
    SsrfVerdict::miss(Vector::ParamBased)
}

/// All four vectors for one finding, in `Vector::ALL` order. The encoded
/// vector flags when decoding revealed the URL and another vector flagged.
pub fn assess(f: &UrlFinding, cfg: &SsrfConfig) -> Vec<SsrfVerdict> {
    let mut v = vec![is_local_or_private(f, cfg), is_cloud_metadata(f, cfg), check_params(f, 0, cfg)];
    let encoded = if !f.decode_chain.is_empty() && v.iter().any(|x| x.flagged) {
        let chain: Vec<&str> = f.decode_chain.iter().map(|s| s.as_str()).collect();
        SsrfVerdict::hit(Vector::EncodedPayload, format!("revealed by {}", chain.join(" > ")))
    } else {
        SsrfVerdict::miss(Vector::EncodedPayload)
    };
    v.push(encoded);
    v
}

/// Flagged vectors over every URL in `text`, sorted and deduplicated.
pub fn flagged_vectors(text: &str, cfg: &SsrfConfig) -> Vec<Vector> {
    let mut out: Vec<Vector> = extract_urls_from_text(text, "text")
        .iter()
        .flat_map(|f| assess(f, cfg))
        .filter(|v| v.flagged)
        .map(|v| v.vector)
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Blocked when any URL in any site flags any vector. The score is the number
/// of flagged verdicts and the detail lists each with its source path.
pub fn check_sites(sites: &[PayloadSite], cfg: &SecurityConfig) -> CheckResult {
    let findings = extract_urls(sites);
    let mut hits = Vec::new();
    for f in &findings {
        for v in assess(f, &cfg.ssrf).into_iter().filter(|v| v.flagged) {
            hits.push(format!("{}: {} at {}", v.vector, v.evidence, f.source));
        }
    }
    let detail = if hits.is_empty() { format!("{} urls, none flagged", findings.len()) } else { hits.join("; ") };
    CheckResult::threshold(CheckKind::Ssrf, hits.len() as f64, 0.0, detail)
}

pub fn check_ssrf(doc: &Document, variables: &serde_json::Map<String, serde_json::Value>, cfg: &SecurityConfig) -> CheckResult {
    check_sites(&extract_string_inputs(doc, variables), cfg)
}
