//! Batch harness around `stdlm_core`: file ingestion, run configuration,
//! studies with their output bundles, chain diagnostics, analytic tables and
//! simulated fixtures. The `stdlm` binary is a thin layer over these modules.

pub mod config;
pub mod diagnostics;
pub mod fixture;
pub mod ingest;
pub mod study;
pub mod tables;
