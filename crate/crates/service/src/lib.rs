//! Event ingestion service: accounts, `uname` cookie sessions, validated
//! collection of keystroke and mouse events into per-user streams, and export.

pub mod auth;
pub mod collector;
pub mod http;

pub use collector::{AdminSetupError, Collector, ExportRequest, ServiceError, MAX_WIRE_BYTES};
pub use http::{router, serve, SESSION_COOKIE};
