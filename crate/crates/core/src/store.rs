//! Durable per-user append-only event streams.
//!
//! Every user owns two streams, one for keystrokes and one for mouse events.
//! [`LogStore`] keeps them in a single JSON-lines log file: each line is either
//! a user account or one stored event. The file is replayed into memory on
//! open; appends write one line and flush it to the OS before returning, so an
//! acknowledged append survives a process restart. [`LogStore::sync`] forces
//! the file to stable storage.
//!
//! A trailing line without its newline is a torn write from a crash. It is
//! truncated away when the log is opened for writing and ignored when it is
//! opened read-only. Any other unparseable line is reported as corruption.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::event::{EventEnvelope, EventKind, KeystrokeRecord, MouseRecord};

/// A registered account as persisted by the store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserAccount {
    pub username: String,
    /// Salted one-way digest in PHC string format. Never the password itself.
    pub password_digest: String,
    pub created_ms: i64,
}

/// An event as held in a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredEvent {
    /// Starts at 1 and increases by one per append within a (user, kind) stream.
    pub seq: u64,
    /// Server clock at append time, ms since Unix epoch.
    pub arrival_ms: i64,
    pub envelope: EventEnvelope,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("UnknownUser({0})")]
    UnknownUser(String),
    #[error("DuplicateUser({0})")]
    DuplicateUser(String),
    #[error("BadRange: from {from} must be below to {to}")]
    BadRange { from: i64, to: i64 },
    #[error("invalid event: {0}")]
    InvalidEvent(#[from] crate::event::WireError),
    #[error("storage failure: {0}")]
    StorageFailure(#[from] io::Error),
    #[error("corrupt store log at line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("store is open read-only")]
    ReadOnly,
}

/// Storage backend for accounts and event streams.
///
/// Implementations serialize appends per stream and give scans a consistent
/// snapshot: a scan sees a prefix of every stream.
pub trait EventStore: Send + Sync {
    fn create_user(&self, account: UserAccount) -> Result<(), StoreError>;

    fn user(&self, username: &str) -> Option<UserAccount>;

    /// Appends a validated envelope to the user's stream for its kind and
    /// returns the assigned sequence number.
    fn append(&self, user: &str, envelope: EventEnvelope) -> Result<u64, StoreError>;

    /// Events whose client timestamp lies in `[from_ms, to_ms)`, ordered by seq.
    fn scan(
        &self,
        user: &str,
        kind: EventKind,
        from_ms: i64,
        to_ms: i64,
    ) -> Result<Vec<StoredEvent>, StoreError>;

    /// Number of events in one stream.
    fn stream_len(&self, user: &str, kind: EventKind) -> Result<usize, StoreError>;

    fn sync(&self) -> Result<(), StoreError>;
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
enum LogEntry {
    User {
        username: String,
        digest: String,
        created: i64,
    },
    Keystroke {
        user: String,
        seq: u64,
        arrival: i64,
        record: KeystrokeRecord,
    },
    Mouse {
        user: String,
        seq: u64,
        arrival: i64,
        record: MouseRecord,
    },
}

#[derive(Default)]
struct Streams {
    keystroke: Vec<StoredEvent>,
    mouse: Vec<StoredEvent>,
}

impl Streams {
    fn get(&self, kind: EventKind) -> &Vec<StoredEvent> {
        match kind {
            EventKind::Keystroke => &self.keystroke,
            EventKind::Mouse => &self.mouse,
        }
    }

    fn get_mut(&mut self, kind: EventKind) -> &mut Vec<StoredEvent> {
        match kind {
            EventKind::Keystroke => &mut self.keystroke,
            EventKind::Mouse => &mut self.mouse,
        }
    }
}

struct UserEntry {
    account: UserAccount,
    streams: Streams,
}

#[derive(Default)]
struct Index {
    users: HashMap<String, UserEntry>,
}

impl Index {
    fn apply(&mut self, entry: LogEntry, line: usize) -> Result<(), StoreError> {
        let corrupt = |reason: String| StoreError::Corrupt { line, reason };
        match entry {
            LogEntry::User {
                username,
                digest,
                created,
            } => {
                if self.users.contains_key(&username) {
                    return Err(corrupt(format!("user {username} registered twice")));
                }
                let account = UserAccount {
                    username: username.clone(),
                    password_digest: digest,
                    created_ms: created,
                };
                self.users.insert(
                    username,
                    UserEntry {
                        account,
                        streams: Streams::default(),
                    },
                );
            }
            LogEntry::Keystroke {
                user,
                seq,
                arrival,
                record,
            } => self.push_replayed(&user, seq, arrival, record.into(), line)?,
            LogEntry::Mouse {
                user,
                seq,
                arrival,
                record,
            } => self.push_replayed(&user, seq, arrival, record.into(), line)?,
        }
        Ok(())
    }

    fn push_replayed(
        &mut self,
        user: &str,
        seq: u64,
        arrival_ms: i64,
        envelope: EventEnvelope,
        line: usize,
    ) -> Result<(), StoreError> {
        let entry = self
            .users
            .get_mut(user)
            .ok_or_else(|| StoreError::Corrupt {
                line,
                reason: format!("event for unregistered user {user}"),
            })?;
        let stream = entry.streams.get_mut(envelope.kind());
        let expected = stream.len() as u64 + 1;
        if seq != expected {
            return Err(StoreError::Corrupt {
                line,
                reason: format!("sequence {seq}, expected {expected}"),
            });
        }
        stream.push(StoredEvent {
            seq,
            arrival_ms,
            envelope,
        });
        Ok(())
    }
}

struct Inner {
    index: Index,
    writer: Option<BufWriter<File>>,
}

/// Single-file log-structured [`EventStore`].
pub struct LogStore {
    path: Option<PathBuf>,
    read_only: bool,
    inner: RwLock<Inner>,
}

impl LogStore {
    /// Opens (creating if needed) a store log for reading and appending.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let (index, good_len, torn) = replay(&mut file)?;
        if torn {
            tracing::warn!(path = %path.display(), "truncating torn trailing record");
            file.set_len(good_len)?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok(LogStore {
            path: Some(path.to_path_buf()),
            read_only: false,
            inner: RwLock::new(Inner {
                index,
                writer: Some(BufWriter::new(file)),
            }),
        })
    }

    /// Loads a snapshot of an existing log without taking write access.
    pub fn open_read_only(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let mut file = File::open(path)?;
        let (index, _, _) = replay(&mut file)?;
        Ok(LogStore {
            path: Some(path.to_path_buf()),
            read_only: true,
            inner: RwLock::new(Inner {
                index,
                writer: None,
            }),
        })
    }

    /// A store with no backing file, for tests and dry runs.
    pub fn in_memory() -> Self {
        LogStore {
            path: None,
            read_only: false,
            inner: RwLock::new(Inner {
                index: Index::default(),
                writer: None,
            }),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn usernames(&self) -> Vec<String> {
        let mut names: Vec<_> = self.inner.read().index.users.keys().cloned().collect();
        names.sort();
        names
    }

    fn write_entry(&self, inner: &mut Inner, entry: &LogEntry) -> Result<(), StoreError> {
        if self.read_only {
            return Err(StoreError::ReadOnly);
        }
        if let Some(writer) = inner.writer.as_mut() {
            let mut line = serde_json::to_vec(entry).map_err(io::Error::other)?;
            line.push(b'\n');
            writer.write_all(&line)?;
            writer.flush()?;
        }
        Ok(())
    }
}

/// Returns the index, the byte length of the well-formed prefix, and whether
/// a torn final line was found.
fn replay(file: &mut File) -> Result<(Index, u64, bool), StoreError> {
    file.seek(SeekFrom::Start(0))?;
    let mut reader = BufReader::new(file);
    let mut index = Index::default();
    let mut buf = Vec::new();
    let mut good_len = 0u64;
    let mut line_no = 0usize;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            return Ok((index, good_len, false));
        }
        line_no += 1;
        if buf.last() != Some(&b'\n') {
            return Ok((index, good_len, true));
        }
        let entry: LogEntry =
            serde_json::from_slice(&buf[..n - 1]).map_err(|e| StoreError::Corrupt {
                line: line_no,
                reason: e.to_string(),
            })?;
        index.apply(entry, line_no)?;
        good_len += n as u64;
    }
}

pub(crate) fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

impl EventStore for LogStore {
    fn create_user(&self, account: UserAccount) -> Result<(), StoreError> {
        let mut inner = self.inner.write();
        if inner.index.users.contains_key(&account.username) {
            return Err(StoreError::DuplicateUser(account.username));
        }
        let entry = LogEntry::User {
            username: account.username.clone(),
            digest: account.password_digest.clone(),
            created: account.created_ms,
        };
        self.write_entry(&mut inner, &entry)?;
        inner.index.users.insert(
            account.username.clone(),
            UserEntry {
                account,
                streams: Streams::default(),
            },
        );
        Ok(())
    }

    fn user(&self, username: &str) -> Option<UserAccount> {
        self.inner
            .read()
            .index
            .users
            .get(username)
            .map(|u| u.account.clone())
    }

    fn append(&self, user: &str, envelope: EventEnvelope) -> Result<u64, StoreError> {
        envelope.validate()?;
        let mut inner = self.inner.write();
        let seq = match inner.index.users.get(user) {
            Some(entry) => entry.streams.get(envelope.kind()).len() as u64 + 1,
            None => return Err(StoreError::UnknownUser(user.to_string())),
        };
        let arrival_ms = now_ms();
        let entry = match &envelope {
            EventEnvelope::Keystroke(k) => LogEntry::Keystroke {
                user: user.to_string(),
                seq,
                arrival: arrival_ms,
                record: k.clone(),
            },
            EventEnvelope::Mouse(m) => LogEntry::Mouse {
                user: user.to_string(),
                seq,
                arrival: arrival_ms,
                record: m.clone(),
            },
        };
        self.write_entry(&mut inner, &entry)?;
        let streams = &mut inner
            .index
            .users
            .get_mut(user)
            .expect("checked above under the same lock")
            .streams;
        streams.get_mut(envelope.kind()).push(StoredEvent {
            seq,
            arrival_ms,
            envelope,
        });
        Ok(seq)
    }

    fn scan(
        &self,
        user: &str,
        kind: EventKind,
        from_ms: i64,
        to_ms: i64,
    ) -> Result<Vec<StoredEvent>, StoreError> {
        if from_ms >= to_ms {
            return Err(StoreError::BadRange {
                from: from_ms,
                to: to_ms,
            });
        }
        let inner = self.inner.read();
        let entry = inner
            .index
            .users
            .get(user)
            .ok_or_else(|| StoreError::UnknownUser(user.to_string()))?;
        Ok(entry
            .streams
            .get(kind)
            .iter()
            .filter(|e| (from_ms..to_ms).contains(&e.envelope.timestamp_ms()))
            .cloned()
            .collect())
    }

    fn stream_len(&self, user: &str, kind: EventKind) -> Result<usize, StoreError> {
        let inner = self.inner.read();
        inner
            .index
            .users
            .get(user)
            .map(|u| u.streams.get(kind).len())
            .ok_or_else(|| StoreError::UnknownUser(user.to_string()))
    }

    fn sync(&self) -> Result<(), StoreError> {
        let mut inner = self.inner.write();
        if let Some(writer) = inner.writer.as_mut() {
            writer.flush()?;
            writer.get_ref().sync_data()?;
        }
        Ok(())
    }
}

impl Drop for LogStore {
    fn drop(&mut self) {
        if let Err(e) = self.sync() {
            tracing::error!("failed to sync store on close: {e}");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{MouseAction, MouseRecord};

    fn account(name: &str) -> UserAccount {
        UserAccount {
            username: name.into(),
            password_digest: "$test$digest".into(),
            created_ms: 1,
        }
    }

    fn key(down: i64) -> EventEnvelope {
        KeystrokeRecord::new("KeyA", "a", down, down + 50).into()
    }

    fn mouse(t: i64) -> EventEnvelope {
        MouseRecord::new(MouseAction::Move, 10, 20, t).into()
    }

    #[test]
    fn sequence_numbers_start_at_one() {
        let store = LogStore::in_memory();
        store.create_user(account("alice")).unwrap();
        assert_eq!(store.append("alice", key(100)).unwrap(), 1);
        assert_eq!(store.append("alice", key(200)).unwrap(), 2);
        // each stream has its own counter
        assert_eq!(store.append("alice", mouse(100)).unwrap(), 1);
    }

    #[test]
    fn append_requires_registered_user() {
        let store = LogStore::in_memory();
        assert!(matches!(
            store.append("ghost", key(1)),
            Err(StoreError::UnknownUser(u)) if u == "ghost"
        ));
        assert!(matches!(
            store.scan("ghost", EventKind::Mouse, 0, 1),
            Err(StoreError::UnknownUser(_))
        ));
    }

    #[test]
    fn append_rejects_invalid_envelope() {
        let store = LogStore::in_memory();
        store.create_user(account("alice")).unwrap();
        let bad = KeystrokeRecord::new("KeyA", "a", 10, 5).into();
        assert!(matches!(
            store.append("alice", bad),
            Err(StoreError::InvalidEvent(_))
        ));
        assert_eq!(store.stream_len("alice", EventKind::Keystroke).unwrap(), 0);
    }

    #[test]
    fn duplicate_user_rejected() {
        let store = LogStore::in_memory();
        store.create_user(account("alice")).unwrap();
        assert!(matches!(
            store.create_user(account("alice")),
            Err(StoreError::DuplicateUser(_))
        ));
    }

    #[test]
    fn scan_half_open_window() {
        let store = LogStore::in_memory();
        store.create_user(account("alice")).unwrap();
        for t in [100, 200, 300] {
            store.append("alice", key(t)).unwrap();
        }
        let got: Vec<_> = store
            .scan("alice", EventKind::Keystroke, 100, 300)
            .unwrap()
            .into_iter()
            .map(|e| e.seq)
            .collect();
        assert_eq!(got, vec![1, 2]);
        assert!(store
            .scan("alice", EventKind::Keystroke, 1000, 2000)
            .unwrap()
            .is_empty());
        assert!(matches!(
            store.scan("alice", EventKind::Keystroke, 300, 300),
            Err(StoreError::BadRange { .. })
        ));
    }

    #[test]
    fn scan_orders_by_seq_not_timestamp() {
        let store = LogStore::in_memory();
        store.create_user(account("alice")).unwrap();
        for t in [300, 100, 200] {
            store.append("alice", mouse(t)).unwrap();
        }
        let ts: Vec<_> = store
            .scan("alice", EventKind::Mouse, 0, 1000)
            .unwrap()
            .iter()
            .map(|e| e.envelope.timestamp_ms())
            .collect();
        assert_eq!(ts, vec![300, 100, 200]);
    }

    #[test]
    fn streams_are_isolated() {
        let store = LogStore::in_memory();
        store.create_user(account("a")).unwrap();
        store.create_user(account("b")).unwrap();
        store.append("a", key(10)).unwrap();
        assert!(store
            .scan("a", EventKind::Mouse, 0, 100)
            .unwrap()
            .is_empty());
        assert!(store
            .scan("b", EventKind::Keystroke, 0, 100)
            .unwrap()
            .is_empty());
        assert_eq!(
            store.scan("a", EventKind::Keystroke, 0, 100).unwrap().len(),
            1
        );
    }

    #[test]
    fn torn_tail_is_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.log");
        {
            let store = LogStore::open(&path).unwrap();
            store.create_user(account("alice")).unwrap();
            store.append("alice", key(1)).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"op":"keystroke","user":"alice","se"#)
            .unwrap();
        drop(f);

        let ro = LogStore::open_read_only(&path).unwrap();
        assert_eq!(ro.stream_len("alice", EventKind::Keystroke).unwrap(), 1);
        assert!(matches!(
            ro.append("alice", key(2)),
            Err(StoreError::ReadOnly)
        ));
        drop(ro);

        let store = LogStore::open(&path).unwrap();
        assert_eq!(store.append("alice", key(2)).unwrap(), 2);
        drop(store);
        let store = LogStore::open(&path).unwrap();
        assert_eq!(store.stream_len("alice", EventKind::Keystroke).unwrap(), 2);
    }

    #[test]
    fn corrupt_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.log");
        std::fs::write(
            &path,
            "{\"op\":\"user\",\"username\":\"a\",\"digest\":\"d\",\"created\":0}\ngarbage\n",
        )
        .unwrap();
        assert!(matches!(
            LogStore::open(&path),
            Err(StoreError::Corrupt { line: 2, .. })
        ));
    }
}
