//! Text formats: stored-event export and feature files, as CSV or JSONL.
//!
//! Export CSV columns are `code,key,down,up,ctrl,alt,shift,caps` for
//! keystrokes and `action,x,y,t` for mouse events; export JSONL is one
//! canonical-JSON record per line. Feature files carry a leading `user` column.
//! CSV output always has a header row, even when there are no rows.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::event::{
    decode_json, decode_value, EventEnvelope, EventKind, KeystrokeRecord, MouseRecord, WireError,
};
use crate::features::{
    extract_bigraphs, mouse_speeds, segment_keystrokes, speed_profile, BigraphFeature,
    MouseSpeedFeature,
};
use crate::store::{EventStore, StoreError, StoredEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Jsonl,
}

impl ReportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Jsonl => "jsonl",
        }
    }

    pub fn content_type(self) -> &'static str {
        match self {
            ReportFormat::Csv => "text/csv; charset=utf-8",
            ReportFormat::Jsonl => "application/x-ndjson",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "jsonl" => Ok(ReportFormat::Jsonl),
            other => Err(format!("unknown format {other:?}, expected csv or jsonl")),
        }
    }
}

pub const KEYSTROKE_COLUMNS: [&str; 8] =
    ["code", "key", "down", "up", "ctrl", "alt", "shift", "caps"];
pub const MOUSE_COLUMNS: [&str; 4] = ["action", "x", "y", "t"];
pub const BIGRAPH_COLUMNS: [&str; 11] = [
    "user", "first", "second", "down1", "up1", "down2", "up2", "dwell1", "dwell2", "flight", "dd",
];
pub const MOUSE_SPEED_COLUMNS: [&str; 6] =
    ["user", "type_a", "type_b", "distance", "elapsed", "speed"];
pub const SPEED_PROFILE_COLUMNS: [&str; 7] =
    ["user", "type_a", "type_b", "count", "mean", "min", "max"];

pub fn columns(kind: EventKind) -> &'static [&'static str] {
    match kind {
        EventKind::Keystroke => &KEYSTROKE_COLUMNS,
        EventKind::Mouse => &MOUSE_COLUMNS,
    }
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish_csv(writer: csv::Writer<Vec<u8>>) -> String {
    let bytes = writer.into_inner().expect("writing to a Vec cannot fail");
    String::from_utf8(bytes).expect("all fields are UTF-8")
}

fn write_csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv_writer();
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    finish_csv(w)
}

fn write_jsonl<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(&row).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

fn keystroke_row(k: &KeystrokeRecord) -> Vec<String> {
    vec![
        k.code.clone(),
        k.key.clone(),
        k.down_ms.to_string(),
        k.up_ms.to_string(),
        flag(k.ctrl),
        flag(k.alt),
        flag(k.shift),
        flag(k.caps),
    ]
}

fn mouse_row(m: &MouseRecord) -> Vec<String> {
    vec![
        m.action.to_string(),
        m.x.to_string(),
        m.y.to_string(),
        m.t_ms.to_string(),
    ]
}

/// Serializes envelopes of one kind in the export format.
pub fn write_events<'a>(
    kind: EventKind,
    events: impl IntoIterator<Item = &'a EventEnvelope>,
    format: ReportFormat,
) -> String {
    match format {
        ReportFormat::Jsonl => {
            let mut out = String::new();
            for e in events {
                out.push_str(&e.to_canonical_json());
                out.push('\n');
            }
            out
        }
        ReportFormat::Csv => write_csv(
            columns(kind),
            events.into_iter().map(|e| match e {
                EventEnvelope::Keystroke(k) => keystroke_row(k),
                EventEnvelope::Mouse(m) => mouse_row(m),
            }),
        ),
    }
}

/// Bulk export of a stored stream window.
pub fn export_stream(
    store: &dyn EventStore,
    user: &str,
    kind: EventKind,
    from_ms: i64,
    to_ms: i64,
    format: ReportFormat,
) -> Result<String, StoreError> {
    let events = store.scan(user, kind, from_ms, to_ms)?;
    Ok(write_events(
        kind,
        events.iter().map(|e| &e.envelope),
        format,
    ))
}

#[derive(Serialize)]
struct BigraphRow<'a> {
    user: &'a str,
    first: &'a str,
    second: &'a str,
    down1: i64,
    up1: i64,
    down2: i64,
    up2: i64,
    dwell1: i64,
    dwell2: i64,
    flight: i64,
    dd: i64,
}

impl<'a> BigraphRow<'a> {
    fn new(user: &'a str, b: &'a BigraphFeature) -> Self {
        BigraphRow {
            user,
            first: &b.first_key,
            second: &b.second_key,
            down1: b.down1_ms,
            up1: b.up1_ms,
            down2: b.down2_ms,
            up2: b.up2_ms,
            dwell1: b.dwell1_ms,
            dwell2: b.dwell2_ms,
            flight: b.flight_ms,
            dd: b.dd_ms,
        }
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.user.to_string(),
            self.first.to_string(),
            self.second.to_string(),
            self.down1.to_string(),
            self.up1.to_string(),
            self.down2.to_string(),
            self.up2.to_string(),
            self.dwell1.to_string(),
            self.dwell2.to_string(),
            self.flight.to_string(),
            self.dd.to_string(),
        ]
    }
}

/// All bigraphs of a keystroke stream, segment by segment.
pub fn bigraphs(keystrokes: &[KeystrokeRecord]) -> Vec<BigraphFeature> {
    segment_keystrokes(keystrokes)
        .iter()
        .flat_map(extract_bigraphs)
        .collect()
}

pub fn bigraph_report(user: &str, keystrokes: &[KeystrokeRecord], format: ReportFormat) -> String {
    let features = bigraphs(keystrokes);
    let rows = features.iter().map(|b| BigraphRow::new(user, b));
    match format {
        ReportFormat::Csv => write_csv(&BIGRAPH_COLUMNS, rows.map(|r| r.fields())),
        ReportFormat::Jsonl => write_jsonl(rows),
    }
}

#[derive(Serialize)]
struct MouseSpeedRow<'a> {
    user: &'a str,
    type_a: &'static str,
    type_b: &'static str,
    distance: f64,
    elapsed: i64,
    speed: f64,
}

impl<'a> MouseSpeedRow<'a> {
    fn new(user: &'a str, f: &MouseSpeedFeature) -> Self {
        MouseSpeedRow {
            user,
            type_a: f.type_pair.0.as_str(),
            type_b: f.type_pair.1.as_str(),
            distance: f.distance_px,
            elapsed: f.elapsed_ms,
            speed: f.speed_px_per_s,
        }
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.user.to_string(),
            self.type_a.to_string(),
            self.type_b.to_string(),
            format!("{:.6}", self.distance),
            self.elapsed.to_string(),
            format!("{:.6}", self.speed),
        ]
    }
}

/// Mouse speed features after a stable sort by client timestamp.
pub fn sorted_mouse_speeds(mouse: &[MouseRecord]) -> crate::features::MouseSpeeds {
    let mut sorted = mouse.to_vec();
    sorted.sort_by_key(|m| m.t_ms);
    mouse_speeds(&sorted)
}

pub fn mouse_speed_report(user: &str, mouse: &[MouseRecord], format: ReportFormat) -> String {
    let speeds = sorted_mouse_speeds(mouse);
    if speeds.skipped_pairs > 0 {
        tracing::info!(
            user,
            skipped = speeds.skipped_pairs,
            "skipped mouse pairs with no elapsed time"
        );
    }
    let rows = speeds.features.iter().map(|f| MouseSpeedRow::new(user, f));
    match format {
        ReportFormat::Csv => write_csv(&MOUSE_SPEED_COLUMNS, rows.map(|r| r.fields())),
        ReportFormat::Jsonl => write_jsonl(rows),
    }
}

#[derive(Serialize)]
struct ProfileRow<'a> {
    user: &'a str,
    type_a: &'static str,
    type_b: &'static str,
    count: usize,
    mean: f64,
    min: f64,
    max: f64,
}

pub fn speed_profile_report(user: &str, mouse: &[MouseRecord], format: ReportFormat) -> String {
    let speeds = sorted_mouse_speeds(mouse);
    let profile = speed_profile(&speeds.features);
    let rows = profile.iter().map(|((a, b), s)| ProfileRow {
        user,
        type_a: a.as_str(),
        type_b: b.as_str(),
        count: s.count,
        mean: s.mean,
        min: s.min,
        max: s.max,
    });
    match format {
        ReportFormat::Csv => write_csv(
            &SPEED_PROFILE_COLUMNS,
            rows.map(|r| {
                vec![
                    r.user.to_string(),
                    r.type_a.to_string(),
                    r.type_b.to_string(),
                    r.count.to_string(),
                    format!("{:.6}", r.mean),
                    format!("{:.6}", r.min),
                    format!("{:.6}", r.max),
                ]
            }),
        ),
        ReportFormat::Jsonl => write_jsonl(rows),
    }
}

fn keystrokes_of(events: Vec<StoredEvent>) -> Vec<KeystrokeRecord> {
    events
        .into_iter()
        .filter_map(|e| match e.envelope {
            EventEnvelope::Keystroke(k) => Some(k),
            EventEnvelope::Mouse(_) => None,
        })
        .collect()
}

fn mouse_of(events: Vec<StoredEvent>) -> Vec<MouseRecord> {
    events
        .into_iter()
        .filter_map(|e| match e.envelope {
            EventEnvelope::Mouse(m) => Some(m),
            EventEnvelope::Keystroke(_) => None,
        })
        .collect()
}

/// Scan a user's keystroke window, segment it, and serialize its bigraphs.
pub fn keystroke_feature_report(
    store: &dyn EventStore,
    user: &str,
    from_ms: i64,
    to_ms: i64,
    format: ReportFormat,
) -> Result<String, StoreError> {
    let events = store.scan(user, EventKind::Keystroke, from_ms, to_ms)?;
    Ok(bigraph_report(user, &keystrokes_of(events), format))
}

/// Scan a user's mouse window and serialize its speed features.
pub fn mouse_feature_report(
    store: &dyn EventStore,
    user: &str,
    from_ms: i64,
    to_ms: i64,
    format: ReportFormat,
) -> Result<String, StoreError> {
    let events = store.scan(user, EventKind::Mouse, from_ms, to_ms)?;
    Ok(mouse_speed_report(user, &mouse_of(events), format))
}

/// A line that could not be read back from an export file.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    /// 1-based line number in the input text.
    pub line: usize,
    pub reason: String,
}

/// Reads an export file (JSONL or CSV with header, detected from the first
/// non-empty line) back into validated records of the given kind.
pub fn parse_events(kind: EventKind, text: &str) -> Result<Vec<EventEnvelope>, ParseError> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty());
    match first {
        None => Ok(Vec::new()),
        Some(l) if l.starts_with('{') => parse_jsonl(kind, text),
        Some(_) => parse_csv(kind, text),
    }
}

fn parse_jsonl(kind: EventKind, text: &str) -> Result<Vec<EventEnvelope>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let envelope = decode_json(kind, line).map_err(|e| ParseError {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(envelope);
    }
    Ok(out)
}

fn parse_csv(kind: EventKind, text: &str) -> Result<Vec<EventEnvelope>, ParseError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let expected = columns(kind);
    let header = reader.headers().map_err(|e| ParseError {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(ParseError {
            line: 1,
            reason: format!("expected header {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| ParseError {
            line: e.position().map_or(0, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let envelope = csv_row_to_envelope(kind, &row).map_err(|e| ParseError {
            line,
            reason: e.to_string(),
        })?;
        out.push(envelope);
    }
    Ok(out)
}

fn csv_row_to_envelope(
    kind: EventKind,
    row: &csv::StringRecord,
) -> Result<EventEnvelope, WireError> {
    let mut map = Map::new();
    for (name, field) in columns(kind).iter().zip(row.iter()) {
        let is_text = matches!(*name, "code" | "key" | "action");
        let value = if is_text {
            Value::String(field.to_string())
        } else {
            // Unparseable numbers stay strings so the decoder names the field.
            field
                .parse::<i64>()
                .map(Value::from)
                .unwrap_or_else(|_| Value::String(field.to_string()))
        };
        map.insert((*name).to_string(), value);
    }
    decode_value(kind, Value::Object(map))
}
