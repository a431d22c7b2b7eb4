//! Loading schema, config and model bundles into an engine context.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use gqlshield_core::config::{validate_config, SecurityConfig};
use gqlshield_core::engine::{EngineContext, DEFAULT_SCHEMA_ID};
use gqlshield_core::infer::DetectorSet;
use gqlshield_core::report::CheckKind;
use gqlshield_graphql::{parse_schema, Schema};

pub const DEFAULT_MODELS_DIR: &str = "models";

pub fn load_schema(path: &Path) -> Result<Schema> {
    let sdl = std::fs::read_to_string(path).with_context(|| format!("reading schema {}", path.display()))?;
    parse_schema(&sdl).with_context(|| format!("parsing schema {}", path.display()))
}

/// Reads and validates a config, listing every violation on failure.
pub fn load_config(path: &Path, schema: Option<&Schema>) -> Result<SecurityConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    validate_config(&text, schema).map_err(|e| anyhow::anyhow!("invalid config {}:\n  {}", path.display(), e.violations().join("\n  ")))
}

pub fn needs_models(cfg: &SecurityConfig) -> bool {
    cfg.enabled_checks.iter().any(|k| k.is_ml())
}

pub fn load_models(dir: &Path) -> Result<Arc<DetectorSet>> {
    DetectorSet::load_dir(dir).map(Arc::new).with_context(|| format!("loading model bundles from {}", dir.display()))
}

/// Everything needed to (re)build an engine.
#[derive(Debug, Clone)]
pub struct EngineSources {
    pub schema: Option<PathBuf>,
    pub config: PathBuf,
    pub models: PathBuf,
    pub workers: usize,
}

impl EngineSources {
    pub fn schema(&self) -> Result<Option<Arc<Schema>>> {
        self.schema.as_deref().map(|p| load_schema(p).map(Arc::new)).transpose()
    }

    /// Builds the context; models are loaded only when an ML check is enabled.
    pub fn build(&self, schema: Option<Arc<Schema>>, cfg: SecurityConfig) -> Result<EngineContext> {
        let detectors = if needs_models(&cfg) {
            if !self.models.is_dir() {
                let ml: Vec<_> = cfg.enabled_checks.iter().filter(|k| k.is_ml()).map(|k| k.as_str()).collect();
                bail!("checks {} need model bundles but {} is not a directory", ml.join(", "), self.models.display());
            }
            Some(load_models(&self.models)?)
        } else {
            None
        };
        build_engine(schema, cfg, detectors, self.workers)
    }
}

pub fn build_engine(
    schema: Option<Arc<Schema>>,
    cfg: SecurityConfig,
    detectors: Option<Arc<DetectorSet>>,
    workers: usize,
) -> Result<EngineContext> {
    let schemas: HashMap<String, Arc<Schema>> = schema.into_iter().map(|s| (DEFAULT_SCHEMA_ID.to_string(), s)).collect();
    Ok(EngineContext::new(cfg, schemas, detectors, workers)?)
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Config with the three ML checks switched off.
pub fn without_ml(mut cfg: SecurityConfig) -> SecurityConfig {
    cfg.enabled_checks.retain(|k| !k.is_ml());
    cfg
}

pub fn enabled_names(cfg: &SecurityConfig) -> Vec<&'static str> {
    CheckKind::CONFIGURABLE.into_iter().filter(|k| cfg.is_enabled(*k)).map(CheckKind::as_str).collect()
}
