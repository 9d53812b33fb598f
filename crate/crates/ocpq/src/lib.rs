//! File formats, CLI and HTTP server for the `ocpq-core` engine.

pub mod cli;
pub mod export;
pub mod ocel;
pub mod query_json;
pub mod server;
