//! Synthetic typing and pointer sessions driven through the collect protocol.

use collector_core::{EventEnvelope, KeystrokeRecord, MouseRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::client::{Client, ClientError};
use crate::profile::{MsRange, SimulationProfile};

/// How far ahead of a capital letter's keydown the Shift key goes down, at most.
const SHIFT_LEAD_MS: i64 = 30;

fn sample(rng: &mut ChaCha8Rng, r: MsRange) -> i64 {
    rng.random_range(r.min..=r.max)
}

/// DOM `code` for a typed character.
fn key_code(c: char) -> String {
    match c {
        ' ' => "Space".into(),
        c if c.is_ascii_alphabetic() => format!("Key{}", c.to_ascii_uppercase()),
        c if c.is_ascii_digit() => format!("Digit{c}"),
        ',' => "Comma".into(),
        '.' => "Period".into(),
        '-' => "Minus".into(),
        '\'' => "Quote".into(),
        _ => "Unidentified".into(),
    }
}

/// Keystrokes for the profile's words joined by single spaces.
///
/// Keydowns are spaced by `inter_key_ms`; each key is held for `dwell_ms`.
/// Capital letters are typed with Shift held, which produces its own `Shift`
/// keystroke wrapping the letter.
pub fn keystrokes(profile: &SimulationProfile, rng: &mut ChaCha8Rng) -> Vec<KeystrokeRecord> {
    let text = profile.words.join(" ");
    let mut out = Vec::new();
    let mut down = profile.start_ms;
    for (i, c) in text.chars().enumerate() {
        let gap = if i == 0 {
            0
        } else {
            sample(rng, profile.inter_key_ms)
        };
        down += gap;
        let up = down + sample(rng, profile.dwell_ms);
        let mut record = KeystrokeRecord::new(key_code(c), c.to_string(), down, up);
        if c.is_uppercase() {
            let lead = if i == 0 {
                SHIFT_LEAD_MS
            } else {
                SHIFT_LEAD_MS.min(gap / 2)
            };
            let mut shift = KeystrokeRecord::new("ShiftLeft", "Shift", down - lead, up + 10);
            shift.shift = true;
            record.shift = true;
            out.push(shift);
        }
        out.push(record);
    }
    out
}

pub fn mouse_events(profile: &SimulationProfile, rng: &mut ChaCha8Rng) -> Vec<MouseRecord> {
    let mut t = profile.start_ms;
    profile
        .mouse_path
        .iter()
        .map(|w| {
            t += sample(rng, w.elapsed_ms);
            MouseRecord::new(w.action, w.x, w.y, t)
        })
        .collect()
}

/// Every event of the session in the order a browser client would send it:
/// keystrokes when their key is released, mouse events as they happen.
pub fn session_events(profile: &SimulationProfile) -> Vec<EventEnvelope> {
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let keys = keystrokes(profile, &mut rng);
    let mouse = mouse_events(profile, &mut rng);
    let mut timed: Vec<(i64, EventEnvelope)> = keys
        .into_iter()
        .map(|k| (k.up_ms, k.into()))
        .chain(mouse.into_iter().map(|m| (m.t_ms, m.into())))
        .collect();
    timed.sort_by_key(|(t, _)| *t);
    timed.into_iter().map(|(_, e)| e).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimulationReport {
    pub sent: usize,
    pub accepted: usize,
}

/// Registers (if needed) and logs in, sends the session, and logs out.
///
/// Events the server rejects are counted but do not stop the run; network
/// and authentication failures do.
pub async fn run(
    profile: &SimulationProfile,
    target: &str,
    user: &str,
    pass: &str,
) -> Result<SimulationReport, ClientError> {
    let mut client = Client::new(target);
    match client.register(user, pass).await {
        Ok(()) => {}
        Err(e) if e.code() == Some("DuplicateUser") => {}
        Err(e) => return Err(e),
    }
    client.login(user, pass).await?;
    let mut report = SimulationReport::default();
    for envelope in session_events(profile) {
        report.sent += 1;
        match client.collect(&envelope).await {
            Ok(()) => report.accepted += 1,
            Err(e) if e.is_auth() || matches!(e, ClientError::Network { .. }) => return Err(e),
            Err(e) => tracing::warn!("event rejected: {e}"),
        }
    }
    client.logout().await?;
    Ok(report)
}
