//! Library surface of the CLI: config schema and output formats, shared
//! with the integration and acceptance tests.

pub mod config;
pub mod output;
