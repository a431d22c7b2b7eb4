//! Payload embedding providers.
//!
//! `hash_ngram` is the deterministic built-in: signed feature hashing of
//! boundary-padded character trigrams. `external_service` posts to an
//! embedding server and `precomputed` looks vectors up by payload digest.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
/// Padding marks placed before and after the payload.
pub const START_MARK: char = '\u{2}';
pub const END_MARK: char = '\u{3}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    HashNgram,
    ExternalService,
    Precomputed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSpec {
    pub provider: Provider,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Service URL for `external_service`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Vector table for `precomputed`, relative to the bundle directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

fn default_timeout_ms() -> u64 {
    1000
}

impl EmbeddingSpec {
    pub fn hash(dim: usize, seed: u64) -> Self {
        Self { provider: Provider::HashNgram, dim, seed, endpoint: None, timeout_ms: default_timeout_ms(), table: None }
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding service timed out")]
    Timeout,
    #[error("embedding service request failed: {0}")]
    Transport(String),
    #[error("embedding service returned an unusable body: {0}")]
    BadResponse(String),
    #[error("embedding has {got} dimensions, expected {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("no precomputed embedding for payload digest {0}")]
    Missing(String),
    #[error("{0}")]
    Config(String),
}

/// FNV-1a over `bytes`, starting from the offset basis xor `seed`.
pub fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    bytes.iter().fold(FNV_OFFSET ^ seed, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Signed trigram hashing. Each trigram of `START_MARK + payload + END_MARK`
/// (by Unicode scalar) adds +1 or -1 to bucket `h % dim`, with the sign taken
/// from the hash's top bit (set means -1). The counts are L2-normalized in
/// f64; an empty payload, or one whose counts cancel, yields the zero vector.
pub fn hash_embed(payload: &str, dim: usize, seed: u64) -> Vec<f32> {
    assert!(dim > 0, "embedding dim must be positive");
    let mut counts = vec![0f64; dim];
    if !payload.is_empty() {
        let chars: Vec<char> = std::iter::once(START_MARK).chain(payload.chars()).chain(std::iter::once(END_MARK)).collect();
        let mut buf = [0u8; 12];
        for w in chars.windows(3) {
            let mut n = 0;
            for c in w {
                n += c.encode_utf8(&mut buf[n..]).len();
            }
            let h = fnv1a(&buf[..n], seed);
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            counts[(h % dim as u64) as usize] += sign;
        }
    }
    let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; dim];
    }
    counts.iter().map(|c| (c / norm) as f32).collect()
}

/// Hex SHA-256 of the payload, the key of precomputed tables.
pub fn payload_digest(payload: &str) -> String {
    Sha256::digest(payload.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, payload: &str) -> Result<Vec<f32>, EmbedError>;
}

#[derive(Debug, Clone)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, payload: &str) -> Result<Vec<f32>, EmbedError> {
        Ok(hash_embed(payload, self.dim, self.seed))
    }
}

/// POSTs `{"texts":[payload]}` and reads `{"vectors":[[...]]}`.
pub struct ExternalEmbedder {
    endpoint: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl ExternalEmbedder {
    pub fn new(endpoint: &str, dim: usize, timeout: Duration) -> Result<Self, EmbedError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Config(e.to_string()))?;
        Ok(Self { endpoint: endpoint.to_string(), dim, client })
    }
}

impl Embedder for ExternalEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, payload: &str) -> Result<Vec<f32>, EmbedError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .json(&serde_json::json!({ "texts": [payload] }))
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| if e.is_timeout() { EmbedError::Timeout } else { EmbedError::Transport(e.to_string()) })?;
        #[derive(Deserialize)]
        struct Body {
            vectors: Vec<Vec<f32>>,
        }
        let body: Body = resp.json().map_err(|e| if e.is_timeout() { EmbedError::Timeout } else { EmbedError::BadResponse(e.to_string()) })?;
        let v = body.vectors.into_iter().next().ok_or_else(|| EmbedError::BadResponse("no vectors".into()))?;
        if v.len() != self.dim {
            return Err(EmbedError::DimMismatch { expected: self.dim, got: v.len() });
        }
        Ok(v)
    }
}

/// Vectors keyed by `payload_digest`. File format:
/// `{"dim": N, "vectors": {"<sha256 hex>": [..N floats..]}}`.
#[derive(Debug, Clone)]
pub struct PrecomputedEmbedder {
    dim: usize,
    table: HashMap<String, Vec<f32>>,
}

impl PrecomputedEmbedder {
    pub fn new(dim: usize, table: HashMap<String, Vec<f32>>) -> Result<Self, EmbedError> {
        if let Some(bad) = table.values().find(|v| v.len() != dim) {
            return Err(EmbedError::DimMismatch { expected: dim, got: bad.len() });
        }
        Ok(Self { dim, table })
    }

    pub fn from_file(path: &Path) -> Result<Self, EmbedError> {
        #[derive(Deserialize)]
        struct File {
            dim: usize,
            vectors: HashMap<String, Vec<f32>>,
        }
        let text = std::fs::read_to_string(path).map_err(|e| EmbedError::Config(format!("{}: {e}", path.display())))?;
        let f: File = serde_json::from_str(&text).map_err(|e| EmbedError::Config(format!("{}: {e}", path.display())))?;
        Self::new(f.dim, f.vectors)
    }
}

impl Embedder for PrecomputedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, payload: &str) -> Result<Vec<f32>, EmbedError> {
        let key = payload_digest(payload);
        self.table.get(&key).cloned().ok_or(EmbedError::Missing(key))
    }
}

/// Builds the provider named by `spec`; relative table paths resolve against `base`.
pub fn embedder(spec: &EmbeddingSpec, base: &Path) -> Result<Box<dyn Embedder>, EmbedError> {
    if spec.dim == 0 {
        return Err(EmbedError::Config("embedding dim must be positive".into()));
    }
    Ok(match spec.provider {
        Provider::HashNgram => Box::new(HashEmbedder { dim: spec.dim, seed: spec.seed }),
        Provider::ExternalService => {
            let url = spec.endpoint.as_deref().ok_or_else(|| EmbedError::Config("external_service needs an endpoint".into()))?;
            Box::new(ExternalEmbedder::new(url, spec.dim, Duration::from_millis(spec.timeout_ms))?)
        }
        Provider::Precomputed => {
            let table = spec.table.as_deref().ok_or_else(|| EmbedError::Config("precomputed needs a table".into()))?;
            let e = PrecomputedEmbedder::from_file(&base.join(table))?;
            if e.dim != spec.dim {
                return Err(EmbedError::DimMismatch { expected: spec.dim, got: e.dim });
            }
            Box::new(e)
        }
    })
}

/// One-shot embedding through the provider named by `spec`.
pub fn embed(payload: &str, spec: &EmbeddingSpec) -> Result<Vec<f32>, EmbedError> {
    embedder(spec, Path::new("."))?.embed(payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(hash_embed("", 7, 3), vec![0.0; 7]);
    }

    #[test]
    fn unit_norm() {
        for p in ["a", "abc", "' OR 1=1 --", "東京タワー", "<script>alert(1)</script>"] {
            let v = hash_embed(p, 16, 0);
            let n: f64 = v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
            assert!(n == 0.0 || (n - 1.0).abs() < 1e-6, "{p}: {n}");
        }
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a(b"", 0), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a", 0), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar", 0), 0x85944171f73967e8);
    }

    #[test]
    fn hash_dispatch_is_identity() {
        assert_eq!(embed("abc", &EmbeddingSpec::hash(20, 7)).unwrap(), hash_embed("abc", 20, 7));
    }

    #[test]
    fn precomputed_lookup() {
        let mut t = HashMap::new();
        t.insert(payload_digest("x"), vec![1.0, 2.0]);
        let e = PrecomputedEmbedder::new(2, t).unwrap();
        assert_eq!(e.embed("x").unwrap(), vec![1.0, 2.0]);
        assert!(matches!(e.embed("y"), Err(EmbedError::Missing(_))));
        assert_eq!(payload_digest("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
