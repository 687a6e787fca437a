//! Library side of the `collector` command: an HTTP client for the collect
//! protocol, a seeded session simulator, and the feature-file command.

pub mod client;
pub mod features_cmd;
pub mod profile;
pub mod simulate;

pub use client::{Client, ClientError};
pub use profile::SimulationProfile;
