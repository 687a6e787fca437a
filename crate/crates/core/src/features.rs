//! Keystroke and mouse biometric features.
//!
//! Keystrokes are split into word-like segments, then every pair of
//! consecutive letters in a segment yields a [`BigraphFeature`] carrying the
//! four raw timestamps. Mouse events yield one [`MouseSpeedFeature`] per
//! consecutive pair with positive elapsed time.

use std::collections::BTreeMap;

use crate::event::{KeystrokeRecord, MouseAction, MouseRecord};

/// Largest keydown-to-keydown gap, in ms, that keeps two letters in one segment.
pub const SEGMENT_GAP_MS: i64 = 1000;

pub const SPACE_KEY: &str = " ";

/// Named keys (`Shift`, `Enter`, `Backspace`, `F5`, ...) have multi-character
/// key values; printable characters, digits and punctuation have one.
pub fn is_function_key(key: &str) -> bool {
    key.chars().count() > 1
}

fn is_letter(record: &KeystrokeRecord) -> bool {
    record.key != SPACE_KEY && !is_function_key(&record.key)
}

/// A run of letter keystrokes approximating one typed word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeystrokeSegment {
    pub letters: Vec<KeystrokeRecord>,
}

impl KeystrokeSegment {
    /// The typed text, e.g. `The`.
    pub fn text(&self) -> String {
        self.letters.iter().map(|k| k.key.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// Splits a keystroke stream into segments.
///
/// Records are stably sorted by `down_ms` first. A new segment starts after a
/// space, or when a letter's keydown comes more than [`SEGMENT_GAP_MS`] after
/// the previous letter's keydown. Space and function-key records are dropped,
/// as are segments left empty.
pub fn segment_keystrokes(events: &[KeystrokeRecord]) -> Vec<KeystrokeSegment> {
    let mut sorted: Vec<&KeystrokeRecord> = events.iter().collect();
    sorted.sort_by_key(|k| k.down_ms);

    let mut segments = Vec::new();
    let mut current: Vec<KeystrokeRecord> = Vec::new();
    let mut space_seen = false;
    for record in sorted {
        if record.key == SPACE_KEY {
            space_seen = true;
            continue;
        }
        if !is_letter(record) {
            continue;
        }
        // A raw gap above the limit between any two keystrokes also shows up
        // between the letters around it, so checking letters alone suffices.
        let gap_break = current
            .last()
            .is_some_and(|prev| record.down_ms - prev.down_ms > SEGMENT_GAP_MS);
        if (space_seen || gap_break) && !current.is_empty() {
            segments.push(KeystrokeSegment {
                letters: std::mem::take(&mut current),
            });
        }
        space_seen = false;
        current.push(record.clone());
    }
    if !current.is_empty() {
        segments.push(KeystrokeSegment { letters: current });
    }
    segments
}

/// Timing of one consecutive letter pair within a segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigraphFeature {
    pub first_key: String,
    pub second_key: String,
    pub down1_ms: i64,
    pub up1_ms: i64,
    pub down2_ms: i64,
    pub up2_ms: i64,
    pub dwell1_ms: i64,
    pub dwell2_ms: i64,
    /// Negative when the second key goes down before the first is released.
    pub flight_ms: i64,
    pub dd_ms: i64,
}

impl BigraphFeature {
    pub fn from_pair(first: &KeystrokeRecord, second: &KeystrokeRecord) -> Self {
        BigraphFeature {
            first_key: first.key.clone(),
            second_key: second.key.clone(),
            down1_ms: first.down_ms,
            up1_ms: first.up_ms,
            down2_ms: second.down_ms,
            up2_ms: second.up_ms,
            dwell1_ms: first.up_ms - first.down_ms,
            dwell2_ms: second.up_ms - second.down_ms,
            flight_ms: second.down_ms - first.up_ms,
            dd_ms: second.down_ms - first.down_ms,
        }
    }
}

/// One feature per consecutive letter pair: `len - 1` of them, or none.
pub fn extract_bigraphs(segment: &KeystrokeSegment) -> Vec<BigraphFeature> {
    segment
        .letters
        .windows(2)
        .map(|w| BigraphFeature::from_pair(&w[0], &w[1]))
        .collect()
}

/// Distance and speed between two consecutive mouse events.
#[derive(Debug, Clone, PartialEq)]
pub struct MouseSpeedFeature {
    pub type_pair: (MouseAction, MouseAction),
    pub distance_px: f64,
    pub elapsed_ms: i64,
    pub speed_px_per_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MouseSpeeds {
    pub features: Vec<MouseSpeedFeature>,
    /// Consecutive pairs dropped because their elapsed time was not positive.
    pub skipped_pairs: usize,
}

/// Euclidean distance, elapsed time and speed for each consecutive pair.
///
/// Events are taken in the order given. Pairs whose elapsed time is zero or
/// negative have no defined speed; they are skipped and counted.
pub fn mouse_speeds(events: &[MouseRecord]) -> MouseSpeeds {
    let mut out = MouseSpeeds::default();
    for pair in events.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let elapsed_ms = b.t_ms - a.t_ms;
        if elapsed_ms <= 0 {
            out.skipped_pairs += 1;
            continue;
        }
        let dx = (b.x - a.x) as f64;
        let dy = (b.y - a.y) as f64;
        let distance_px = dx.hypot(dy);
        out.features.push(MouseSpeedFeature {
            type_pair: (a.action, b.action),
            distance_px,
            elapsed_ms,
            speed_px_per_s: distance_px / (elapsed_ms as f64 / 1000.0),
        });
    }
    out
}

/// Summary of speeds for one ordered pair of action types.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Groups speeds by ordered action-type pair. Pairs with no features are absent.
pub fn speed_profile(
    features: &[MouseSpeedFeature],
) -> BTreeMap<(MouseAction, MouseAction), SpeedStats> {
    let mut sums: BTreeMap<(MouseAction, MouseAction), (f64, SpeedStats)> = BTreeMap::new();
    for f in features {
        let s = f.speed_px_per_s;
        let (sum, stats) = sums.entry(f.type_pair).or_insert((
            0.0,
            SpeedStats {
                count: 0,
                mean: 0.0,
                min: f64::INFINITY,
                max: f64::NEG_INFINITY,
            },
        ));
        *sum += s;
        stats.count += 1;
        stats.min = stats.min.min(s);
        stats.max = stats.max.max(s);
    }
    sums.into_iter()
        .map(|(pair, (sum, mut stats))| {
            stats.mean = sum / stats.count as f64;
            (pair, stats)
        })
        .collect()
}
