//! Handcrafted payload features for the SQLi, OS-command and XSS detectors.
//!
//! Matching is driven entirely by the dictionary files under `dictionaries/`.
//! Each file holds one token (or regex) per line. Lines starting with `# ` are
//! comments, lines starting with `#@ ` are directives, and a line holding only
//! `#` is the literal token `#`. Directives:
//!
//! - `#@ case insensitive`: input and tokens are ASCII-lowercased before matching.
//! - `#@ boundary none`: disables word-boundary checks.
//! - `#@ kind regex`: every line is a regular expression; the count is the sum
//!   of non-overlapping matches per pattern.
//! - `#@ kind tag`: every line is a tag name matched after `<`, optional
//!   whitespace, an optional `/` and optional whitespace.
//!
//! Literal dictionaries scan left to right. At each position the longest token
//! that matches (and satisfies the boundary rule) is counted and skipped.
//! A boundary is required only at token ends that are ASCII word characters
//! `[A-Za-z0-9_]`; non-ASCII characters never count as word characters.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Bumped whenever the feature order or any dictionary changes meaning.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Sqli,
    Osi,
    Xss,
}

impl Detector {
    pub const ALL: [Detector; 3] = [Detector::Sqli, Detector::Osi, Detector::Xss];

    pub fn as_str(self) -> &'static str {
        match self {
            Detector::Sqli => "sqli",
            Detector::Osi => "osi",
            Detector::Xss => "xss",
        }
    }

    pub fn feature_names(self) -> &'static [&'static str] {
        match self {
            Detector::Sqli => SQLI_NAMES,
            Detector::Osi => OSI_NAMES,
            Detector::Xss => XSS_NAMES,
        }
    }

    pub fn features(self, payload: &str) -> FeatureVector {
        match self {
            Detector::Sqli => sqli_features(payload),
            Detector::Osi => osi_features(payload),
            Detector::Xss => xss_features(payload),
        }
    }
}

pub const OSI_NAMES: &[&str] = &[
    "os_commands",
    "os_operators",
    "os_special_chars",
    "payload_patterns",
    "pipe_operators",
    "variable_execution",
    "remote_execution",
    "sysinfo_extraction",
    "privilege_escalation",
];

pub const SQLI_NAMES: &[&str] = &[
    "sql_keywords",
    "sql_operators",
    "sql_special_chars",
    "boolean_conditions",
    "query_length",
    "union_select",
    "payload_patterns",
    "encoded_injection",
    "db_specific_keywords",
    "time_based_keywords",
    "nested_select",
];

pub const XSS_NAMES: &[&str] = &[
    "html_tags",
    "js_methods",
    "js_file_refs",
    "javascript_keyword",
    "payload_length",
    "obfuscated_script",
    "special_chars",
    "external_resources",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureVector {
    pub kind: Detector,
    pub values: Vec<u64>,
    pub names: &'static [&'static str],
}

impl FeatureVector {
    pub fn as_f32(&self) -> Vec<f32> {
        self.values.iter().map(|&v| v as f32).collect()
    }
}

#[derive(Debug)]
enum Matcher {
    Literal(Vec<Vec<u8>>),
    Regex(Vec<Regex>),
    Tag(Vec<Vec<u8>>),
}

#[derive(Debug)]
pub struct Dictionary {
    pub name: &'static str,
    case_insensitive: bool,
    boundary: bool,
    matcher: Matcher,
}

fn is_word(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c)
}

impl Dictionary {
    /// Parses a dictionary file. Panics on malformed content, since
    /// dictionaries are compiled into the binary.
    pub fn parse(name: &'static str, text: &str) -> Dictionary {
        let mut case_insensitive = false;
        let mut boundary = true;
        let mut kind = "literal";
        let mut lines = Vec::new();
        for line in text.lines() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with("# ") {
                continue;
            }
            if let Some(d) = line.strip_prefix("#@ ") {
                match d.trim() {
                    "case insensitive" => case_insensitive = true,
                    "boundary none" => boundary = false,
                    "kind regex" => kind = "regex",
                    "kind tag" => kind = "tag",
                    other => panic!("dictionary {name}: unknown directive {other:?}"),
                }
                continue;
            }
            lines.push(if case_insensitive { line.to_ascii_lowercase() } else { line.to_string() });
        }
        let literal = |lines: Vec<String>| {
            let mut toks: Vec<Vec<u8>> = lines
                .into_iter()
                .map(|t| {
                    assert!(t.is_ascii(), "dictionary {name}: non-ASCII token {t:?}");
                    t.into_bytes()
                })
                .collect();
            toks.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
            toks.dedup();
            toks
        };
        let matcher = match kind {
            "regex" => Matcher::Regex(
                lines
                    .iter()
                    .map(|p| Regex::new(p).unwrap_or_else(|e| panic!("dictionary {name}: {e}")))
                    .collect(),
            ),
            "tag" => Matcher::Tag(literal(lines)),
            _ => Matcher::Literal(literal(lines)),
        };
        Dictionary { name, case_insensitive, boundary, matcher }
    }

    pub fn count(&self, text: &str) -> u64 {
        let folded;
        let text = if self.case_insensitive {
            folded = text.to_ascii_lowercase();
            folded.as_str()
        } else {
            text
        };
        match &self.matcher {
            Matcher::Regex(patterns) => patterns.iter().map(|re| re.find_iter(text).count() as u64).sum(),
            Matcher::Literal(tokens) => self.count_literal(text.as_bytes(), tokens),
            Matcher::Tag(names) => count_tags(text.as_bytes(), names),
        }
    }

    fn token_at(&self, s: &[u8], i: usize, tokens: &[Vec<u8>]) -> Option<usize> {
        tokens.iter().find_map(|t| {
            if !s[i..].starts_with(t) {
                return None;
            }
            if self.boundary {
                let end = i + t.len();
                if is_word(t[0]) && i > 0 && is_word(s[i - 1]) {
                    return None;
                }
                if is_word(t[t.len() - 1]) && end < s.len() && is_word(s[end]) {
                    return None;
                }
            }
            Some(t.len())
        })
    }

    fn count_literal(&self, s: &[u8], tokens: &[Vec<u8>]) -> u64 {
        let mut i = 0;
        let mut n = 0;
        while i < s.len() {
            match self.token_at(s, i, tokens) {
                Some(len) => {
                    n += 1;
                    i += len;
                }
                None => i += 1,
            }
        }
        n
    }
}

fn count_tags(s: &[u8], names: &[Vec<u8>]) -> u64 {
    let mut i = 0;
    let mut n = 0;
    while i < s.len() {
        if s[i] == b'<' {
            let mut j = i + 1;
            while j < s.len() && is_space(s[j]) {
                j += 1;
            }
            if j < s.len() && s[j] == b'/' {
                j += 1;
            }
            while j < s.len() && is_space(s[j]) {
                j += 1;
            }
            let hit = names
                .iter()
                .find(|t| s[j..].starts_with(t) && s.get(j + t.len()).is_none_or(|&b| !is_word(b)));
            if let Some(t) = hit {
                n += 1;
                i = j + t.len();
                continue;
            }
        }
        i += 1;
    }
    n
}

/// `SELECT` tokens at parenthesis depth > 0 that follow an earlier `SELECT`.
/// Depth counts `(` and `)` and never drops below zero.
fn nested_select(text: &str) -> u64 {
    let s = text.to_ascii_lowercase().into_bytes();
    let (mut depth, mut seen, mut n, mut i) = (0usize, false, 0u64, 0usize);
    while i < s.len() {
        match s[i] {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b's' if s[i..].starts_with(b"select")
                && (i == 0 || !is_word(s[i - 1]))
                && s.get(i + 6).is_none_or(|&b| !is_word(b)) =>
            {
                if depth > 0 && seen {
                    n += 1;
                }
                seen = true;
                i += 6;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    n
}

macro_rules! dict {
    ($name:literal) => {
        Dictionary::parse($name, include_str!(concat!("../dictionaries/", $name, ".txt")))
    };
}

pub struct Dictionaries {
    pub osi: [Dictionary; 9],
    pub sqli: [Dictionary; 9],
    pub xss: [Dictionary; 7],
}

/// Dictionaries compiled into the binary, parsed once on first use.
pub fn dictionaries() -> &'static Dictionaries {
    static DICTS: OnceLock<Dictionaries> = OnceLock::new();
    DICTS.get_or_init(|| Dictionaries {
        osi: [
            dict!("os_commands"),
            dict!("os_operators"),
            dict!("os_special_chars"),
            dict!("os_patterns"),
            dict!("os_pipes"),
            dict!("os_variable_exec"),
            dict!("os_remote"),
            dict!("os_sysinfo"),
            dict!("os_privesc"),
        ],
        sqli: [
            dict!("sql_keywords"),
            dict!("sql_operators"),
            dict!("sql_special_chars"),
            dict!("sql_boolean"),
            dict!("sql_union_select"),
            dict!("sql_patterns"),
            dict!("sql_encoded"),
            dict!("sql_db_specific"),
            dict!("sql_time_based"),
        ],
        xss: [
            dict!("xss_tags"),
            dict!("xss_methods"),
            dict!("xss_js_files"),
            dict!("xss_javascript"),
            dict!("xss_obfuscated"),
            dict!("xss_special_chars"),
            dict!("xss_external"),
        ],
    })
}

fn char_len(s: &str) -> u64 {
    s.chars().count() as u64
}

pub fn osi_features(payload: &str) -> FeatureVector {
    let values = dictionaries().osi.iter().map(|d| d.count(payload)).collect();
    FeatureVector { kind: Detector::Osi, values, names: OSI_NAMES }
}

pub fn sqli_features(payload: &str) -> FeatureVector {
    let [kw, ops, special, boolean, union, patterns, encoded, db, time] = &dictionaries().sqli;
    let values = vec![
        kw.count(payload),
        ops.count(payload),
        special.count(payload),
        boolean.count(payload),
        char_len(payload),
        union.count(payload),
        patterns.count(payload),
        encoded.count(payload),
        db.count(payload),
        time.count(payload),
        nested_select(payload),
    ];
    FeatureVector { kind: Detector::Sqli, values, names: SQLI_NAMES }
}

pub fn xss_features(payload: &str) -> FeatureVector {
    let [tags, methods, files, js, obfuscated, special, external] = &dictionaries().xss;
    let values = vec![
        tags.count(payload),
        methods.count(payload),
        files.count(payload),
        js.count(payload),
        char_len(payload),
        obfuscated.count(payload),
        special.count(payload),
        external.count(payload),
    ];
    FeatureVector { kind: Detector::Xss, values, names: XSS_NAMES }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(v: &FeatureVector, name: &str) -> u64 {
        v.values[v.names.iter().position(|n| *n == name).unwrap()]
    }

    #[test]
    fn empty_payloads() {
        assert!(osi_features("").values.iter().all(|&v| v == 0));
        assert!(sqli_features("").values.iter().all(|&v| v == 0));
        assert!(xss_features("").values.iter().all(|&v| v == 0));
        assert_eq!(osi_features("").values.len(), 9);
        assert_eq!(sqli_features("").values.len(), 11);
        assert_eq!(xss_features("").values.len(), 8);
    }

    #[test]
    fn osi_example() {
        let v = osi_features("ls; whoami | sudo chmod 777 /");
        assert!(get(&v, "os_commands") >= 3);
        assert!(get(&v, "os_operators") >= 2);
        assert_eq!(get(&v, "pipe_operators"), 1);
        assert!(get(&v, "privilege_escalation") >= 2);
        assert!(osi_features("please list my orders").values.iter().all(|&v| v == 0));
    }

    #[test]
    fn osi_case_sensitive() {
        assert_eq!(get(&osi_features("LS WHOAMI"), "os_commands"), 0);
        assert_eq!(get(&osi_features("ls whoami"), "os_commands"), 2);
    }

    #[test]
    fn sqli_examples() {
        let v = sqli_features("' OR '1'='1' --");
        assert!(get(&v, "sql_special_chars") >= 5);
        assert!(get(&v, "payload_patterns") >= 1);
        assert_eq!(get(&v, "query_length"), 15);
        let v = sqli_features("SELECT name FROM t WHERE id IN (SELECT id FROM u)");
        assert!(get(&v, "union_select") >= 2);
        assert_eq!(get(&v, "nested_select"), 1);
    }

    #[test]
    fn xss_examples() {
        let v = xss_features("<script>alert(1)</script>");
        assert!(get(&v, "html_tags") >= 2);
        assert_eq!(get(&v, "js_methods"), 1);
        assert!(get(&v, "special_chars") >= 4);
        assert_eq!(get(&v, "payload_length"), 25);
        let v = xss_features("I read the javascript tutorial at http://a.com");
        assert_eq!(get(&v, "javascript_keyword"), 1);
        assert_eq!(get(&v, "external_resources"), 1);
        assert_eq!(get(&v, "html_tags"), 0);
    }

    #[test]
    fn longest_match_and_boundaries() {
        // `||` is one pipe token, not two.
        assert_eq!(get(&osi_features("a || b"), "pipe_operators"), 1);
        assert_eq!(get(&xss_features("app.json"), "js_file_refs"), 0);
        assert_eq!(get(&xss_features("app.js?v=1"), "js_file_refs"), 1);
        assert_eq!(get(&sqli_features("selection"), "union_select"), 0);
        assert_eq!(get(&sqli_features("WAITFOR DELAY '0:0:5'"), "time_based_keywords"), 1);
        assert_eq!(get(&xss_features("< / ScRiPt >"), "html_tags"), 1);
    }

    #[test]
    fn length_counts_characters() {
        assert_eq!(get(&sqli_features("é✓"), "query_length"), 2);
    }
}
