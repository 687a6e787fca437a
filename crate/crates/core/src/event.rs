//! Captured keyboard and mouse events and their wire encoding.
//!
//! A wire string is the canonical JSON of a single record, percent-encoded so
//! that it can be appended verbatim to a `GET /collect?...&data=` URL. Field
//! order is fixed and booleans travel as `0`/`1`:
//!
//! ```text
//! keystroke: {"code":..,"key":..,"down":..,"up":..,"ctrl":0,"alt":0,"shift":0,"caps":0}
//! mouse:     {"action":..,"x":..,"y":..,"t":..}
//! ```
//!
//! Decoding is strict: unknown or missing fields, wrong JSON types and type
//! invariant violations are all rejected with an error naming the field.

use std::fmt;
use std::str::FromStr;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

/// Everything except RFC 3986 unreserved characters is escaped.
const WIRE_ESCAPE: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'.')
    .remove(b'_')
    .remove(b'~');

/// Which per-user stream an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    Keystroke,
    Mouse,
}

impl EventKind {
    pub const ALL: [EventKind; 2] = [EventKind::Keystroke, EventKind::Mouse];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Keystroke => "keystroke",
            EventKind::Mouse => "mouse",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown event kind {0:?}")]
pub struct UnknownKind(pub String);

impl FromStr for EventKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keystroke" => Ok(EventKind::Keystroke),
            "mouse" => Ok(EventKind::Mouse),
            other => Err(UnknownKind(other.to_string())),
        }
    }
}

/// One physical key press/release cycle.
///
/// Modifier flags describe the modifier state at the keydown instant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeystrokeRecord {
    /// Physical key identifier, e.g. `KeyD`.
    pub code: String,
    /// Logical key value, e.g. `d`, `D`, `Shift`, ` `.
    pub key: String,
    /// Keydown, client ms since Unix epoch.
    pub down_ms: i64,
    /// Keyup, client ms since Unix epoch.
    pub up_ms: i64,
    pub ctrl: bool,
    pub alt: bool,
    pub shift: bool,
    pub caps: bool,
}

impl KeystrokeRecord {
    /// A record with all modifier flags cleared.
    pub fn new(code: impl Into<String>, key: impl Into<String>, down_ms: i64, up_ms: i64) -> Self {
        KeystrokeRecord {
            code: code.into(),
            key: key.into(),
            down_ms,
            up_ms,
            ctrl: false,
            alt: false,
            shift: false,
            caps: false,
        }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if self.code.is_empty() {
            return Err(WireError::InvariantViolation("code".into()));
        }
        if self.key.is_empty() {
            return Err(WireError::InvariantViolation("key".into()));
        }
        if self.up_ms < self.down_ms {
            return Err(WireError::InvariantViolation("up_ms".into()));
        }
        Ok(())
    }

    /// Key held time, `up_ms - down_ms`.
    pub fn dwell_ms(&self) -> i64 {
        self.up_ms - self.down_ms
    }
}

/// The eight recorded mouse action types.
///
/// `WheelDown`/`WheelUp` are middle-button press/release; `WheelRoll` is any
/// scroll of the wheel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MouseAction {
    Move,
    LeftDown,
    LeftUp,
    RightDown,
    RightUp,
    WheelRoll,
    WheelDown,
    WheelUp,
}

impl MouseAction {
    pub const ALL: [MouseAction; 8] = [
        MouseAction::Move,
        MouseAction::LeftDown,
        MouseAction::LeftUp,
        MouseAction::RightDown,
        MouseAction::RightUp,
        MouseAction::WheelRoll,
        MouseAction::WheelDown,
        MouseAction::WheelUp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MouseAction::Move => "move",
            MouseAction::LeftDown => "left_down",
            MouseAction::LeftUp => "left_up",
            MouseAction::RightDown => "right_down",
            MouseAction::RightUp => "right_up",
            MouseAction::WheelRoll => "wheel_roll",
            MouseAction::WheelDown => "wheel_down",
            MouseAction::WheelUp => "wheel_up",
        }
    }
}

impl fmt::Display for MouseAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MouseAction {
    type Err = WireError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MouseAction::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| WireError::InvariantViolation("action".into()))
    }
}

/// One mouse action at a document-relative (page) position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MouseRecord {
    pub action: MouseAction,
    /// Page X, pixels.
    pub x: i64,
    /// Page Y, pixels.
    pub y: i64,
    /// Client ms since Unix epoch.
    pub t_ms: i64,
}

impl MouseRecord {
    pub fn new(action: MouseAction, x: i64, y: i64, t_ms: i64) -> Self {
        MouseRecord { action, x, y, t_ms }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        if self.x < 0 {
            return Err(WireError::InvariantViolation("x".into()));
        }
        if self.y < 0 {
            return Err(WireError::InvariantViolation("y".into()));
        }
        Ok(())
    }
}

/// A captured event tagged with its kind. The payload variant is the kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum EventEnvelope {
    Keystroke(KeystrokeRecord),
    Mouse(MouseRecord),
}

impl EventEnvelope {
    pub fn kind(&self) -> EventKind {
        match self {
            EventEnvelope::Keystroke(_) => EventKind::Keystroke,
            EventEnvelope::Mouse(_) => EventKind::Mouse,
        }
    }

    /// Client timestamp used for time-window queries: keydown for keystrokes.
    pub fn timestamp_ms(&self) -> i64 {
        match self {
            EventEnvelope::Keystroke(k) => k.down_ms,
            EventEnvelope::Mouse(m) => m.t_ms,
        }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        match self {
            EventEnvelope::Keystroke(k) => k.validate(),
            EventEnvelope::Mouse(m) => m.validate(),
        }
    }

    /// Canonical JSON of the payload, before percent-encoding.
    pub fn to_canonical_json(&self) -> String {
        match self {
            EventEnvelope::Keystroke(k) => keystroke_json(k),
            EventEnvelope::Mouse(m) => mouse_json(m),
        }
    }
}

impl From<KeystrokeRecord> for EventEnvelope {
    fn from(k: KeystrokeRecord) -> Self {
        EventEnvelope::Keystroke(k)
    }
}

impl From<MouseRecord> for EventEnvelope {
    fn from(m: MouseRecord) -> Self {
        EventEnvelope::Mouse(m)
    }
}

/// Reasons a wire string or JSON record is rejected. Each names a field
/// using the record's field names (`up_ms`, `t_ms`, `action`, ...).
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WireError {
    #[error("MalformedWire(data): {0}")]
    MalformedWire(String),
    #[error("SchemaViolation({0})")]
    SchemaViolation(String),
    #[error("InvariantViolation({0})")]
    InvariantViolation(String),
}

impl WireError {
    /// Stable error code, without the field.
    pub fn code(&self) -> &'static str {
        match self {
            WireError::MalformedWire(_) => "MalformedWire",
            WireError::SchemaViolation(_) => "SchemaViolation",
            WireError::InvariantViolation(_) => "InvariantViolation",
        }
    }

    pub fn field(&self) -> &str {
        match self {
            WireError::MalformedWire(_) => "data",
            WireError::SchemaViolation(f) | WireError::InvariantViolation(f) => f,
        }
    }
}

#[derive(Serialize)]
struct KeystrokeWire<'a> {
    code: &'a str,
    key: &'a str,
    down: i64,
    up: i64,
    ctrl: u8,
    alt: u8,
    shift: u8,
    caps: u8,
}

#[derive(Serialize)]
struct MouseWire {
    action: &'static str,
    x: i64,
    y: i64,
    t: i64,
}

impl<'a> From<&'a KeystrokeRecord> for KeystrokeWire<'a> {
    fn from(k: &'a KeystrokeRecord) -> Self {
        KeystrokeWire {
            code: &k.code,
            key: &k.key,
            down: k.down_ms,
            up: k.up_ms,
            ctrl: k.ctrl.into(),
            alt: k.alt.into(),
            shift: k.shift.into(),
            caps: k.caps.into(),
        }
    }
}

impl From<&MouseRecord> for MouseWire {
    fn from(m: &MouseRecord) -> Self {
        MouseWire {
            action: m.action.as_str(),
            x: m.x,
            y: m.y,
            t: m.t_ms,
        }
    }
}

fn keystroke_json(k: &KeystrokeRecord) -> String {
    serde_json::to_string(&KeystrokeWire::from(k)).expect("string/int struct always serializes")
}

fn mouse_json(m: &MouseRecord) -> String {
    serde_json::to_string(&MouseWire::from(m)).expect("string/int struct always serializes")
}

impl Serialize for KeystrokeRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        KeystrokeWire::from(self).serialize(s)
    }
}

impl Serialize for MouseRecord {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MouseWire::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for KeystrokeRecord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        keystroke_from_value(value).map_err(serde::de::Error::custom)
    }
}

impl<'de> Deserialize<'de> for MouseRecord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(d)?;
        mouse_from_value(value).map_err(serde::de::Error::custom)
    }
}

/// Encodes an envelope as a URL-safe wire string.
pub fn encode_envelope(envelope: &EventEnvelope) -> String {
    utf8_percent_encode(&envelope.to_canonical_json(), WIRE_ESCAPE).to_string()
}

/// Decodes and validates a wire string for the given stream kind.
pub fn decode_envelope(kind: EventKind, wire: &str) -> Result<EventEnvelope, WireError> {
    check_percent_escapes(wire)?;
    let json = percent_decode_str(wire)
        .decode_utf8()
        .map_err(|_| WireError::MalformedWire("payload is not valid UTF-8".into()))?;
    decode_json(kind, &json)
}

/// Decodes and validates one canonical-JSON record (no percent-encoding).
pub fn decode_json(kind: EventKind, json: &str) -> Result<EventEnvelope, WireError> {
    let value: Value =
        serde_json::from_str(json).map_err(|e| WireError::MalformedWire(e.to_string()))?;
    decode_value(kind, value)
}

/// Validates an already-parsed JSON record.
pub fn decode_value(kind: EventKind, value: Value) -> Result<EventEnvelope, WireError> {
    match kind {
        EventKind::Keystroke => keystroke_from_value(value).map(EventEnvelope::Keystroke),
        EventKind::Mouse => mouse_from_value(value).map(EventEnvelope::Mouse),
    }
}

fn check_percent_escapes(wire: &str) -> Result<(), WireError> {
    let bytes = wire.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let ok = bytes.len() > i + 2
                && bytes[i + 1].is_ascii_hexdigit()
                && bytes[i + 2].is_ascii_hexdigit();
            if !ok {
                return Err(WireError::MalformedWire(format!(
                    "bad percent escape at byte {i}"
                )));
            }
            i += 3;
        } else {
            i += 1;
        }
    }
    Ok(())
}

const KEYSTROKE_FIELDS: [(&str, &str); 8] = [
    ("code", "code"),
    ("key", "key"),
    ("down", "down_ms"),
    ("up", "up_ms"),
    ("ctrl", "ctrl"),
    ("alt", "alt"),
    ("shift", "shift"),
    ("caps", "caps"),
];

const MOUSE_FIELDS: [(&str, &str); 4] =
    [("action", "action"), ("x", "x"), ("y", "y"), ("t", "t_ms")];

struct Fields {
    map: Map<String, Value>,
}

impl Fields {
    fn new(value: Value, schema: &[(&str, &str)]) -> Result<Self, WireError> {
        let Value::Object(map) = value else {
            return Err(WireError::MalformedWire("expected a JSON object".into()));
        };
        if let Some(extra) = map
            .keys()
            .find(|k| !schema.iter().any(|(wire, _)| wire == k))
        {
            return Err(WireError::SchemaViolation(extra.clone()));
        }
        for (wire, name) in schema {
            if !map.contains_key(*wire) {
                return Err(WireError::SchemaViolation((*name).into()));
            }
        }
        Ok(Fields { map })
    }

    fn take(&mut self, wire: &str) -> Value {
        self.map.remove(wire).unwrap_or(Value::Null)
    }

    fn string(&mut self, wire: &str, name: &str) -> Result<String, WireError> {
        match self.take(wire) {
            Value::String(s) => Ok(s),
            _ => Err(WireError::SchemaViolation(name.into())),
        }
    }

    fn int(&mut self, wire: &str, name: &str) -> Result<i64, WireError> {
        self.take(wire)
            .as_i64()
            .ok_or_else(|| WireError::SchemaViolation(name.into()))
    }

    fn flag(&mut self, wire: &str, name: &str) -> Result<bool, WireError> {
        match self.take(wire).as_u64() {
            Some(0) => Ok(false),
            Some(1) => Ok(true),
            _ => Err(WireError::SchemaViolation(name.into())),
        }
    }
}

fn keystroke_from_value(value: Value) -> Result<KeystrokeRecord, WireError> {
    let mut f = Fields::new(value, &KEYSTROKE_FIELDS)?;
    let record = KeystrokeRecord {
        code: f.string("code", "code")?,
        key: f.string("key", "key")?,
        down_ms: f.int("down", "down_ms")?,
        up_ms: f.int("up", "up_ms")?,
        ctrl: f.flag("ctrl", "ctrl")?,
        alt: f.flag("alt", "alt")?,
        shift: f.flag("shift", "shift")?,
        caps: f.flag("caps", "caps")?,
    };
    record.validate()?;
    Ok(record)
}

fn mouse_from_value(value: Value) -> Result<MouseRecord, WireError> {
    let mut f = Fields::new(value, &MOUSE_FIELDS)?;
    let action: MouseAction = f.string("action", "action")?.parse()?;
    let record = MouseRecord {
        action,
        x: f.int("x", "x")?,
        y: f.int("y", "y")?,
        t_ms: f.int("t", "t_ms")?,
    };
    record.validate()?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_d() -> EventEnvelope {
        KeystrokeRecord::new("KeyD", "d", 1000, 1080).into()
    }

    // Golden strings produced with Python's urllib.parse.quote(s, safe="-._~").
    const KEY_D_WIRE: &str = "%7B%22code%22%3A%22KeyD%22%2C%22key%22%3A%22d%22%2C%22down%22%3A1000%2C%22up%22%3A1080%2C%22ctrl%22%3A0%2C%22alt%22%3A0%2C%22shift%22%3A0%2C%22caps%22%3A0%7D";
    const ORIGIN_MOVE_WIRE: &str =
        "%7B%22action%22%3A%22move%22%2C%22x%22%3A0%2C%22y%22%3A0%2C%22t%22%3A0%7D";

    #[test]
    fn keystroke_golden_wire() {
        assert_eq!(
            key_d().to_canonical_json(),
            r#"{"code":"KeyD","key":"d","down":1000,"up":1080,"ctrl":0,"alt":0,"shift":0,"caps":0}"#
        );
        assert_eq!(encode_envelope(&key_d()), KEY_D_WIRE);
    }

    #[test]
    fn mouse_origin_golden_wire() {
        let e: EventEnvelope = MouseRecord::new(MouseAction::Move, 0, 0, 0).into();
        assert_eq!(encode_envelope(&e), ORIGIN_MOVE_WIRE);
    }

    #[test]
    fn decode_golden() {
        assert_eq!(
            decode_envelope(EventKind::Keystroke, KEY_D_WIRE).unwrap(),
            key_d()
        );
    }

    #[test]
    fn flags_encode_as_digits() {
        let mut k = KeystrokeRecord::new("KeyA", "A", 5, 9);
        k.shift = true;
        k.caps = true;
        let json = EventEnvelope::from(k.clone()).to_canonical_json();
        assert!(
            json.ends_with(r#""ctrl":0,"alt":0,"shift":1,"caps":1}"#),
            "{json}"
        );
        assert_eq!(
            decode_json(EventKind::Keystroke, &json).unwrap(),
            EventEnvelope::Keystroke(k)
        );
    }

    #[test]
    fn unknown_action_is_invariant_violation() {
        let json = r#"{"action":"double_click","x":1,"y":2,"t":3}"#;
        assert_eq!(
            decode_json(EventKind::Mouse, json),
            Err(WireError::InvariantViolation("action".into()))
        );
    }

    #[test]
    fn up_before_down_rejected() {
        let json =
            r#"{"code":"KeyD","key":"d","down":1000,"up":900,"ctrl":0,"alt":0,"shift":0,"caps":0}"#;
        let wire = utf8_percent_encode(json, WIRE_ESCAPE).to_string();
        assert_eq!(
            decode_envelope(EventKind::Keystroke, &wire),
            Err(WireError::InvariantViolation("up_ms".into()))
        );
    }

    #[test]
    fn schema_errors_name_the_field() {
        let cases = [
            (r#"{"action":"move","x":1,"y":2}"#, "t_ms"),
            (r#"{"action":"move","x":1,"y":2,"t":3,"z":4}"#, "z"),
            (r#"{"action":"move","x":"1","y":2,"t":3}"#, "x"),
            (r#"{"action":"move","x":1.5,"y":2,"t":3}"#, "x"),
            (r#"{"action":7,"x":1,"y":2,"t":3}"#, "action"),
        ];
        for (json, field) in cases {
            assert_eq!(
                decode_json(EventKind::Mouse, json),
                Err(WireError::SchemaViolation(field.into())),
                "{json}"
            );
        }
        let ks =
            r#"{"code":"KeyD","key":"d","down":1,"up":2,"ctrl":true,"alt":0,"shift":0,"caps":0}"#;
        assert_eq!(
            decode_json(EventKind::Keystroke, ks),
            Err(WireError::SchemaViolation("ctrl".into()))
        );
        let ks = r#"{"code":"KeyD","key":"d","down":1,"up":2,"ctrl":2,"alt":0,"shift":0,"caps":0}"#;
        assert_eq!(
            decode_json(EventKind::Keystroke, ks),
            Err(WireError::SchemaViolation("ctrl".into()))
        );
    }

    #[test]
    fn invariant_errors() {
        let neg = r#"{"action":"move","x":-1,"y":2,"t":3}"#;
        assert_eq!(
            decode_json(EventKind::Mouse, neg),
            Err(WireError::InvariantViolation("x".into()))
        );
        let empty = r#"{"code":"","key":"d","down":1,"up":2,"ctrl":0,"alt":0,"shift":0,"caps":0}"#;
        assert_eq!(
            decode_json(EventKind::Keystroke, empty),
            Err(WireError::InvariantViolation("code".into()))
        );
    }

    #[test]
    fn malformed_wire() {
        for wire in ["%7B", "not json", "%zz", "abc%4", "%FF%FE"] {
            let err = decode_envelope(EventKind::Mouse, wire).unwrap_err();
            assert_eq!(err.code(), "MalformedWire", "{wire}");
        }
        assert_eq!(
            decode_json(EventKind::Mouse, "[1,2]").unwrap_err().code(),
            "MalformedWire"
        );
    }

    #[test]
    fn wrong_kind_is_schema_violation() {
        let err = decode_envelope(EventKind::Mouse, KEY_D_WIRE).unwrap_err();
        assert_eq!(err.code(), "SchemaViolation");
    }

    #[test]
    fn escapes_unusual_keys() {
        let k = KeystrokeRecord::new("Quote", "\"", 1, 2);
        let wire = encode_envelope(&k.clone().into());
        assert!(wire
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b"-._~%".contains(&b)));
        assert_eq!(
            decode_envelope(EventKind::Keystroke, &wire).unwrap(),
            k.into()
        );
        let plus = KeystrokeRecord::new("Equal", "+", 1, 2);
        let wire = encode_envelope(&plus.clone().into());
        assert_eq!(
            decode_envelope(EventKind::Keystroke, &wire).unwrap(),
            plus.into()
        );
    }

    #[test]
    fn kind_round_trips_through_str() {
        for kind in EventKind::ALL {
            assert_eq!(kind.as_str().parse::<EventKind>().unwrap(), kind);
        }
        assert!("wheel".parse::<EventKind>().is_err());
    }
}
