//! `collector features`: feature files from an export file or a store log.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use collector_core::report::{
    bigraph_report, mouse_speed_report, parse_events, speed_profile_report,
};
use collector_core::{EventEnvelope, EventKind, EventStore, LogStore, ReportFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FeatureMode {
    /// Keystroke bigraph timings.
    Bigraph,
    /// Distance, elapsed time and speed per consecutive mouse event pair.
    MouseSpeed,
    /// Per action-type-pair speed count/mean/min/max.
    SpeedProfile,
}

impl FeatureMode {
    pub fn kind(self) -> EventKind {
        match self {
            FeatureMode::Bigraph => EventKind::Keystroke,
            FeatureMode::MouseSpeed | FeatureMode::SpeedProfile => EventKind::Mouse,
        }
    }
}

#[derive(Debug, Clone)]
pub enum FeatureSource {
    /// A `/export` file, CSV or JSONL.
    File(PathBuf),
    /// A store log opened read-only.
    Store {
        path: PathBuf,
        from_ms: i64,
        to_ms: i64,
    },
}

#[derive(Debug, Clone)]
pub struct FeaturesArgs {
    pub source: FeatureSource,
    pub mode: FeatureMode,
    pub user: String,
    pub format: ReportFormat,
}

/// `jsonl` for `.jsonl`/`.ndjson` outputs, CSV otherwise.
pub fn format_for_path(path: Option<&Path>) -> ReportFormat {
    match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("jsonl") | Some("ndjson") => ReportFormat::Jsonl,
        _ => ReportFormat::Csv,
    }
}

pub fn load_events(
    source: &FeatureSource,
    kind: EventKind,
    user: &str,
) -> anyhow::Result<Vec<EventEnvelope>> {
    match source {
        FeatureSource::File(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            parse_events(kind, &text).with_context(|| format!("parsing {}", path.display()))
        }
        FeatureSource::Store {
            path,
            from_ms,
            to_ms,
        } => {
            if from_ms >= to_ms {
                bail!("--from must be below --to");
            }
            let store = LogStore::open_read_only(path)
                .with_context(|| format!("opening store {}", path.display()))?;
            let events = store.scan(user, kind, *from_ms, *to_ms)?;
            Ok(events.into_iter().map(|e| e.envelope).collect())
        }
    }
}

pub fn run(args: &FeaturesArgs) -> anyhow::Result<String> {
    let events = load_events(&args.source, args.mode.kind(), &args.user)?;
    let out = match args.mode {
        FeatureMode::Bigraph => {
            let keys: Vec<_> = events
                .into_iter()
                .filter_map(|e| match e {
                    EventEnvelope::Keystroke(k) => Some(k),
                    EventEnvelope::Mouse(_) => None,
                })
                .collect();
            bigraph_report(&args.user, &keys, args.format)
        }
        FeatureMode::MouseSpeed | FeatureMode::SpeedProfile => {
            let mouse: Vec<_> = events
                .into_iter()
                .filter_map(|e| match e {
                    EventEnvelope::Mouse(m) => Some(m),
                    EventEnvelope::Keystroke(_) => None,
                })
                .collect();
            if args.mode == FeatureMode::MouseSpeed {
                mouse_speed_report(&args.user, &mouse, args.format)
            } else {
                speed_profile_report(&args.user, &mouse, args.format)
            }
        }
    };
    Ok(out)
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        <Self as clap::ValueEnum>::from_str(s, false)
    }
}
