//! Account validation, password digests and the session table.

use std::collections::HashMap;
use std::sync::LazyLock;

use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use parking_lot::Mutex;
use rand::Rng;
use regex::Regex;

pub const MIN_PASSWORD_LEN: usize = 8;

static USERNAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z0-9_]{3,32}$").expect("valid regex"));

/// Whitelist check applied to every username before it reaches the store.
pub fn valid_username(name: &str) -> bool {
    USERNAME.is_match(name)
}

pub fn valid_password(password: &str) -> bool {
    password.chars().count() >= MIN_PASSWORD_LEN
}

/// Argon2id digest with a fresh random salt, in PHC string format.
pub fn hash_password(password: &str) -> String {
    let mut salt = [0u8; 16];
    rand::rng().fill(&mut salt);
    let salt = SaltString::encode_b64(&salt).expect("16-byte salt is within limits");
    Argon2::default()
        .hash_password(password.as_bytes(), &salt)
        .expect("default argon2 params accept any password")
        .to_string()
}

pub fn verify_password(password: &str, digest: &str) -> bool {
    match PasswordHash::new(digest) {
        Ok(parsed) => Argon2::default()
            .verify_password(password.as_bytes(), &parsed)
            .is_ok(),
        Err(_) => false,
    }
}

/// Spends the same work as a real verification so that an unknown username
/// takes as long to reject as a wrong password.
pub fn burn_verification(password: &str) {
    static DUMMY: LazyLock<String> = LazyLock::new(|| hash_password("not-a-real-account"));
    let _ = verify_password(password, &DUMMY);
}

/// A server-side session bound to one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub username: String,
    pub issued_ms: i64,
}

/// 256 random bits, hex encoded.
pub fn new_token() -> String {
    let mut bytes = [0u8; 32];
    rand::rng().fill(&mut bytes);
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Live sessions keyed by opaque token. A user may hold several at once.
#[derive(Default)]
pub struct SessionTable {
    sessions: Mutex<HashMap<String, Session>>,
}

impl SessionTable {
    pub fn issue(&self, username: &str, issued_ms: i64) -> String {
        let mut sessions = self.sessions.lock();
        loop {
            let token = new_token();
            if !sessions.contains_key(&token) {
                sessions.insert(
                    token.clone(),
                    Session {
                        username: username.to_string(),
                        issued_ms,
                    },
                );
                return token;
            }
        }
    }

    pub fn lookup(&self, token: &str) -> Option<Session> {
        self.sessions.lock().get(token).cloned()
    }

    /// Returns whether a session was removed. Unknown tokens are a no-op.
    pub fn revoke(&self, token: &str) -> bool {
        self.sessions.lock().remove(token).is_some()
    }

    pub fn len(&self) -> usize {
        self.sessions.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
