//! Behavioral telemetry core: captured keyboard/mouse events, their wire
//! encoding, durable per-user storage, and biometric feature extraction.

pub mod event;
pub mod features;
pub mod report;
pub mod store;

pub use event::{
    decode_envelope, encode_envelope, EventEnvelope, EventKind, KeystrokeRecord, MouseAction,
    MouseRecord, WireError,
};
pub use features::{
    extract_bigraphs, mouse_speeds, segment_keystrokes, speed_profile, BigraphFeature,
    KeystrokeSegment, MouseSpeedFeature, MouseSpeeds, SpeedStats,
};
pub use report::ReportFormat;
pub use store::{EventStore, LogStore, StoreError, StoredEvent, UserAccount};
