//! GraphQL security gateway: the `/analyze` HTTP service, the batched event
//! log, engine setup from files, and the `bench` load generator.

pub mod bench;
pub mod logger;
pub mod metrics;
pub mod service;
pub mod setup;
