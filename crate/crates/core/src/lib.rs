//! Analysis engine for GraphQL queries: static DoS checks, SSRF detection and
//! ML payload classification over a single parsed document.

pub mod features;
pub mod config;
pub mod embed;
pub mod engine;
pub mod infer;
pub mod report;
pub mod ssrf;
pub mod static_guard;
