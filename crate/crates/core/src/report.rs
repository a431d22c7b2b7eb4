//! Check results shared by every analysis stage.

use serde::{Deserialize, Serialize};

/// Check names in fixed report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Depth,
    Aliases,
    Batch,
    Directives,
    Circular,
    PayloadInflation,
    Introspection,
    Complexity,
    Sqli,
    Osi,
    Xss,
    Ssrf,
    Parse,
}

impl CheckKind {
    /// Every configurable check; `parse` always runs and is not listed.
    pub const CONFIGURABLE: [CheckKind; 12] = [
        CheckKind::Depth,
        CheckKind::Aliases,
        CheckKind::Batch,
        CheckKind::Directives,
        CheckKind::Circular,
        CheckKind::PayloadInflation,
        CheckKind::Introspection,
        CheckKind::Complexity,
        CheckKind::Sqli,
        CheckKind::Osi,
        CheckKind::Xss,
        CheckKind::Ssrf,
    ];

    pub const STATIC: [CheckKind; 8] = [
        CheckKind::Depth,
        CheckKind::Aliases,
        CheckKind::Batch,
        CheckKind::Directives,
        CheckKind::Circular,
        CheckKind::PayloadInflation,
        CheckKind::Introspection,
        CheckKind::Complexity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckKind::Depth => "depth",
            CheckKind::Aliases => "aliases",
            CheckKind::Batch => "batch",
            CheckKind::Directives => "directives",
            CheckKind::Circular => "circular",
            CheckKind::PayloadInflation => "payload_inflation",
            CheckKind::Introspection => "introspection",
            CheckKind::Complexity => "complexity",
            CheckKind::Sqli => "sqli",
            CheckKind::Osi => "osi",
            CheckKind::Xss => "xss",
            CheckKind::Ssrf => "ssrf",
            CheckKind::Parse => "parse",
        }
    }

    pub fn from_name(name: &str) -> Option<CheckKind> {
        Self::CONFIGURABLE.into_iter().chain([CheckKind::Parse]).find(|k| k.as_str() == name)
    }

    pub fn is_ml(self) -> bool {
        matches!(self, CheckKind::Sqli | CheckKind::Osi | CheckKind::Xss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Blocked,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: CheckKind,
    pub status: CheckStatus,
    pub score: f64,
    pub threshold: f64,
    pub detail: String,
    pub duration_micros: u64,
}

impl CheckResult {
    /// A threshold check: blocked iff `score > threshold`.
    pub fn threshold(check: CheckKind, score: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let status = if score > threshold { CheckStatus::Blocked } else { CheckStatus::Pass };
        Self { check, status, score, threshold, detail: detail.into(), duration_micros: 0 }
    }

    /// A detector check: blocked iff `probability >= threshold`.
    pub fn probability(check: CheckKind, probability: f64, threshold: f64, detail: impl Into<String>) -> Self {
        let status = if probability >= threshold { CheckStatus::Blocked } else { CheckStatus::Pass };
        Self { check, status, score: probability, threshold, detail: detail.into(), duration_micros: 0 }
    }

    pub fn skipped(check: CheckKind, detail: impl Into<String>) -> Self {
        Self { check, status: CheckStatus::Skipped, score: 0.0, threshold: 0.0, detail: detail.into(), duration_micros: 0 }
    }

    pub fn blocked(check: CheckKind, detail: impl Into<String>) -> Self {
        Self { check, status: CheckStatus::Blocked, score: 1.0, threshold: 0.0, detail: detail.into(), duration_micros: 0 }
    }

    pub fn with_duration(mut self, micros: u64) -> Self {
        self.duration_micros = micros;
        self
    }

    pub fn is_blocked(&self) -> bool {
        self.status == CheckStatus::Blocked
    }
}
