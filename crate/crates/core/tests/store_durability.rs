use std::sync::Arc;
use std::thread;

use collector_core::{
    EventEnvelope, EventKind, EventStore, KeystrokeRecord, LogStore, MouseAction, MouseRecord,
    UserAccount,
};
use proptest::prelude::*;

fn account(name: &str) -> UserAccount {
    UserAccount {
        username: name.into(),
        password_digest: "$argon2id$fake".into(),
        created_ms: 0,
    }
}

fn envelope(i: u64) -> EventEnvelope {
    let t = 1_700_000_000_000 + i as i64 * 37;
    if i.is_multiple_of(3) {
        MouseRecord::new(
            MouseAction::ALL[(i % 8) as usize],
            (i % 1920) as i64,
            (i % 1080) as i64,
            t,
        )
        .into()
    } else {
        KeystrokeRecord::new(format!("Key{}", i % 26), format!("{}", i % 10), t, t + 60).into()
    }
}

#[test]
fn appends_survive_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.log");
    let written: Vec<EventEnvelope> = (0..500).map(envelope).collect();
    {
        let store = LogStore::open(&path).unwrap();
        store.create_user(account("alice")).unwrap();
        for e in &written {
            store.append("alice", e.clone()).unwrap();
        }
    }
    let store = LogStore::open(&path).unwrap();
    assert!(store.user("alice").is_some());
    for kind in EventKind::ALL {
        let got: Vec<_> = store
            .scan("alice", kind, i64::MIN, i64::MAX)
            .unwrap()
            .into_iter()
            .map(|e| e.envelope)
            .collect();
        let want: Vec<_> = written
            .iter()
            .filter(|e| e.kind() == kind)
            .cloned()
            .collect();
        assert_eq!(got, want);
    }
}

#[test]
fn concurrent_appends_keep_per_stream_order() {
    let store = Arc::new(LogStore::in_memory());
    for u in ["a", "b", "c", "d"] {
        store.create_user(account(u)).unwrap();
    }
    let handles: Vec<_> = ["a", "b", "c", "d"]
        .into_iter()
        .map(|u| {
            let store = Arc::clone(&store);
            thread::spawn(move || {
                for i in 0..300u64 {
                    let e: EventEnvelope =
                        KeystrokeRecord::new("KeyA", "a", i as i64, i as i64 + 1).into();
                    assert_eq!(store.append(u, e).unwrap(), i + 1);
                }
            })
        })
        .collect();
    let reader = {
        let store = Arc::clone(&store);
        thread::spawn(move || {
            for _ in 0..50 {
                let snap = store.scan("a", EventKind::Keystroke, 0, 1000).unwrap();
                // a prefix: seq 1..=n with matching timestamps
                for (i, e) in snap.iter().enumerate() {
                    assert_eq!(e.seq, i as u64 + 1);
                    assert_eq!(e.envelope.timestamp_ms(), i as i64);
                }
            }
        })
    };
    for h in handles {
        h.join().unwrap();
    }
    reader.join().unwrap();
    for u in ["a", "b", "c", "d"] {
        assert_eq!(store.stream_len(u, EventKind::Keystroke).unwrap(), 300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scan_is_sorted_and_filtered_exactly(
        times in prop::collection::vec(0i64..1000, 0..80),
        from in 0i64..1000,
        width in 1i64..1000,
    ) {
        let store = LogStore::in_memory();
        store.create_user(account("a")).unwrap();
        store.create_user(account("b")).unwrap();
        for &t in &times {
            store.append("a", MouseRecord::new(MouseAction::Move, 1, 1, t).into()).unwrap();
            store.append("b", KeystrokeRecord::new("KeyQ", "q", t, t).into()).unwrap();
        }
        let to = from + width;
        let got = store.scan("a", EventKind::Mouse, from, to).unwrap();
        let want: Vec<(u64, i64)> = times
            .iter()
            .enumerate()
            .filter(|(_, &t)| t >= from && t < to)
            .map(|(i, &t)| (i as u64 + 1, t))
            .collect();
        let got: Vec<(u64, i64)> = got.iter().map(|e| (e.seq, e.envelope.timestamp_ms())).collect();
        prop_assert_eq!(got, want);
        prop_assert!(store.scan("a", EventKind::Keystroke, from, to).unwrap().is_empty());
        prop_assert!(store.scan("b", EventKind::Mouse, from, to).unwrap().is_empty());
    }
}
