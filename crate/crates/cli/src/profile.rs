//! Simulation profiles, read from TOML:
//!
//! ```toml
//! seed = 7                       # RNG seed; same seed, same events
//! start_ms = 1600000000000       # timestamp of the first keydown / mouse step origin
//! words = ["This", "Is", "The", "Text"]
//! inter_key_ms = [80, 400]       # keydown-to-keydown gap, inclusive range
//! dwell_ms = [50, 120]           # key held time, inclusive range
//!
//! [[mouse_path]]
//! x = 10
//! y = 20
//! elapsed_ms = [15, 40]          # time since the previous waypoint
//! action = "move"                # optional, default "move"
//! ```

use std::path::Path;

use collector_core::MouseAction;
use serde::Deserialize;

pub const DEFAULT_START_MS: i64 = 1_600_000_000_000;

/// Inclusive millisecond range, written as `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(from = "[i64; 2]")]
pub struct MsRange {
    pub min: i64,
    pub max: i64,
}

impl From<[i64; 2]> for MsRange {
    fn from([min, max]: [i64; 2]) -> Self {
        MsRange { min, max }
    }
}

impl MsRange {
    pub fn new(min: i64, max: i64) -> Self {
        MsRange { min, max }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Waypoint {
    pub x: i64,
    pub y: i64,
    pub elapsed_ms: MsRange,
    #[serde(default = "default_action", deserialize_with = "de_action")]
    pub action: MouseAction,
}

fn default_action() -> MouseAction {
    MouseAction::Move
}

fn de_action<'de, D: serde::Deserializer<'de>>(d: D) -> Result<MouseAction, D::Error> {
    let s = String::deserialize(d)?;
    s.parse()
        .map_err(|_| serde::de::Error::custom(format!("unknown mouse action {s:?}")))
}

fn default_start() -> i64 {
    DEFAULT_START_MS
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationProfile {
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start_ms: i64,
    #[serde(default)]
    pub words: Vec<String>,
    pub inter_key_ms: MsRange,
    pub dwell_ms: MsRange,
    #[serde(default)]
    pub mouse_path: Vec<Waypoint>,
}

#[derive(Debug, thiserror::Error)]
pub enum ProfileError {
    #[error("cannot read profile: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid profile: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

impl SimulationProfile {
    pub fn from_toml(text: &str) -> Result<Self, ProfileError> {
        let profile: SimulationProfile = toml::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &Path) -> Result<Self, ProfileError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let check = |name: &str, r: MsRange, min_allowed: i64| {
            if r.min > r.max {
                Err(ProfileError::Invalid(format!(
                    "{name}: min {} exceeds max {}",
                    r.min, r.max
                )))
            } else if r.min < min_allowed {
                Err(ProfileError::Invalid(format!(
                    "{name}: min must be at least {min_allowed}"
                )))
            } else {
                Ok(())
            }
        };
        check("inter_key_ms", self.inter_key_ms, 1)?;
        check("dwell_ms", self.dwell_ms, 0)?;
        for (i, w) in self.mouse_path.iter().enumerate() {
            check(&format!("mouse_path[{i}].elapsed_ms"), w.elapsed_ms, 0)?;
            if w.x < 0 || w.y < 0 {
                return Err(ProfileError::Invalid(format!(
                    "mouse_path[{i}]: page coordinates must be non-negative"
                )));
            }
        }
        if self.words.iter().any(|w| w.contains(' ')) {
            return Err(ProfileError::Invalid(
                "words must not contain spaces".into(),
            ));
        }
        Ok(())
    }
}
