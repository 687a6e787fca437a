//! Property tests for segmentation, bigraphs and mouse speeds.
//!
//! The mouse oracle recomputes every consecutive pair naively (integer squared
//! distance, speed as distance * 1000 / elapsed) so it shares no arithmetic
//! path with the implementation.

use collector_core::features::{is_function_key, SEGMENT_GAP_MS};
use collector_core::{
    extract_bigraphs, mouse_speeds, segment_keystrokes, KeystrokeRecord, MouseAction, MouseRecord,
};
use proptest::prelude::*;

fn arb_stream() -> impl Strategy<Value = Vec<KeystrokeRecord>> {
    let key = prop_oneof![
        6 => "[a-zA-Z0-9,.]",
        2 => Just(" ".to_string()),
        1 => prop::sample::select(vec!["Shift", "Enter", "Backspace", "F5", "CapsLock"])
            .prop_map(str::to_string),
    ];
    // gaps cluster around the 1000 ms boundary
    let gap = prop_oneof![0i64..400, 995i64..1006, 1000i64..3000];
    prop::collection::vec((key, gap, 0i64..300), 0..60).prop_map(|items| {
        let mut t = 1_000_000;
        items
            .into_iter()
            .map(|(key, gap, dwell)| {
                t += gap;
                KeystrokeRecord::new("Key", key, t, t + dwell)
            })
            .collect()
    })
}

fn is_retained(k: &KeystrokeRecord) -> bool {
    k.key != " " && !is_function_key(&k.key)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn segments_partition_the_letters(stream in arb_stream()) {
        let segments = segment_keystrokes(&stream);
        let concatenated: Vec<_> = segments.iter().flat_map(|s| s.letters.clone()).collect();
        let expected: Vec<_> = stream.iter().filter(|k| is_retained(k)).cloned().collect();
        prop_assert_eq!(concatenated, expected);
        prop_assert!(segments.iter().all(|s| !s.is_empty()));
    }

    #[test]
    fn segment_boundaries_follow_rules(stream in arb_stream()) {
        let segments = segment_keystrokes(&stream);
        for s in &segments {
            for w in s.letters.windows(2) {
                prop_assert!(w[1].down_ms - w[0].down_ms <= SEGMENT_GAP_MS);
            }
        }
        for pair in segments.windows(2) {
            let last = pair[0].letters.last().unwrap();
            let first = &pair[1].letters[0];
            let gap = first.down_ms - last.down_ms > SEGMENT_GAP_MS;
            let space_between = stream
                .iter()
                .any(|k| k.key == " " && k.down_ms >= last.down_ms && k.down_ms <= first.down_ms);
            prop_assert!(gap || space_between, "unjustified boundary between {:?} and {:?}", last, first);
        }
    }

    #[test]
    fn bigraph_count_and_intervals(stream in arb_stream()) {
        for s in segment_keystrokes(&stream) {
            let bigraphs = extract_bigraphs(&s);
            prop_assert_eq!(bigraphs.len(), s.len().saturating_sub(1));
            for (i, b) in bigraphs.iter().enumerate() {
                let (a, c) = (&s.letters[i], &s.letters[i + 1]);
                prop_assert_eq!((b.down1_ms, b.up1_ms, b.down2_ms, b.up2_ms), (a.down_ms, a.up_ms, c.down_ms, c.up_ms));
                prop_assert_eq!(b.dwell1_ms, b.up1_ms - b.down1_ms);
                prop_assert_eq!(b.dwell2_ms, b.up2_ms - b.down2_ms);
                prop_assert_eq!(b.flight_ms, b.down2_ms - b.up1_ms);
                prop_assert_eq!(b.dd_ms, b.down2_ms - b.down1_ms);
                prop_assert!(b.dwell1_ms >= 0 && b.dwell2_ms >= 0 && b.dd_ms >= 0);
            }
        }
    }
}

fn arb_mouse_stream() -> impl Strategy<Value = Vec<MouseRecord>> {
    prop::collection::vec(
        (
            prop::sample::select(MouseAction::ALL.to_vec()),
            0i64..5000,
            0i64..5000,
            0i64..200,
        ),
        0..1000,
    )
    .prop_map(|items| {
        let mut t = 0;
        items
            .into_iter()
            .map(|(a, x, y, dt)| {
                t += dt;
                MouseRecord::new(a, x, y, t)
            })
            .collect()
    })
}

/// (type_a, type_b, distance, elapsed, speed) for every pair with dt > 0.
fn brute_force(events: &[MouseRecord]) -> Vec<(MouseAction, MouseAction, f64, i64, f64)> {
    let mut out = Vec::new();
    for i in 0..events.len().saturating_sub(1) {
        let a = &events[i];
        let b = &events[i + 1];
        let dt = b.t_ms - a.t_ms;
        if dt <= 0 {
            continue;
        }
        let sq = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
        let d = (sq as f64).sqrt();
        out.push((a.action, b.action, d, dt, d * 1000.0 / dt as f64));
    }
    out
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mouse_speeds_match_brute_force(events in arb_mouse_stream()) {
        let got = mouse_speeds(&events);
        let want = brute_force(&events);
        prop_assert_eq!(got.features.len(), want.len());
        prop_assert_eq!(got.skipped_pairs, events.len().saturating_sub(1) - want.len());
        for (f, w) in got.features.iter().zip(&want) {
            prop_assert_eq!(f.type_pair, (w.0, w.1));
            prop_assert_eq!(f.elapsed_ms, w.3);
            prop_assert!(rel_close(f.distance_px, w.2, 1e-12) || f.distance_px == w.2);
            prop_assert!(rel_close(f.speed_px_per_s, w.4, 1e-9) || f.speed_px_per_s == w.4);
            prop_assert!(f.speed_px_per_s >= 0.0);
            prop_assert_eq!(f.speed_px_per_s == 0.0, f.distance_px == 0.0);
        }
    }

    #[test]
    fn scaling_coordinates_scales_speed(events in arb_mouse_stream(), k in 1i64..50) {
        let scaled: Vec<_> = events
            .iter()
            .map(|e| MouseRecord::new(e.action, e.x * k, e.y * k, e.t_ms))
            .collect();
        let base = mouse_speeds(&events).features;
        let big = mouse_speeds(&scaled).features;
        prop_assert_eq!(base.len(), big.len());
        for (a, b) in base.iter().zip(&big) {
            let kf = k as f64;
            prop_assert!(rel_close(b.distance_px, a.distance_px * kf, 1e-9) || b.distance_px == 0.0 && a.distance_px == 0.0);
            prop_assert!(rel_close(b.speed_px_per_s, a.speed_px_per_s * kf, 1e-9) || b.speed_px_per_s == 0.0 && a.speed_px_per_s == 0.0);
        }
    }
}
