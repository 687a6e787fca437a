//! Registration, sessions, ingestion and export, independent of HTTP.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use collector_core::report::{export_stream, ReportFormat};
use collector_core::{decode_envelope, EventKind, EventStore, StoreError, UserAccount, WireError};

use crate::auth::{
    burn_verification, hash_password, valid_password, valid_username, verify_password, SessionTable,
};

/// Longest accepted wire string, in bytes, as received in the query.
pub const MAX_WIRE_BYTES: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("InvalidUsername")]
    InvalidUsername,
    #[error("WeakPassword")]
    WeakPassword,
    #[error("DuplicateUser")]
    DuplicateUser,
    #[error("BadCredentials")]
    BadCredentials,
    #[error("NotAuthenticated")]
    NotAuthenticated,
    #[error("Forbidden")]
    Forbidden,
    #[error("BadRange")]
    BadRange,
    #[error("UnknownUser")]
    UnknownUser,
    /// A query parameter other than `data` is missing or unparseable.
    #[error("BadParameter({0})")]
    BadParameter(&'static str),
    #[error("{0}")]
    Wire(#[from] WireError),
    #[error("StorageFailure")]
    Storage(StoreError),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::InvalidUsername => "InvalidUsername",
            ServiceError::WeakPassword => "WeakPassword",
            ServiceError::DuplicateUser => "DuplicateUser",
            ServiceError::BadCredentials => "BadCredentials",
            ServiceError::NotAuthenticated => "NotAuthenticated",
            ServiceError::Forbidden => "Forbidden",
            ServiceError::BadRange => "BadRange",
            ServiceError::UnknownUser => "UnknownUser",
            ServiceError::BadParameter(_) => "BadParameter",
            ServiceError::Wire(e) => e.code(),
            ServiceError::Storage(_) => "StorageFailure",
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::DuplicateUser(_) => ServiceError::DuplicateUser,
            StoreError::UnknownUser(_) => ServiceError::UnknownUser,
            StoreError::BadRange { .. } => ServiceError::BadRange,
            StoreError::InvalidEvent(w) => ServiceError::Wire(w),
            other => ServiceError::Storage(other),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AdminSetupError {
    #[error("admin username {0:?} does not match the username rules")]
    InvalidUsername(String),
    #[error("admin password is shorter than the minimum length")]
    WeakPassword,
    #[error("admin account {0:?} already exists with a different password")]
    PasswordMismatch(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Everything needed to request an export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportRequest {
    pub user: String,
    pub kind: EventKind,
    pub from_ms: i64,
    pub to_ms: i64,
    pub format: ReportFormat,
}

fn now_ms() -> i64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as i64)
        .unwrap_or(0)
}

/// The ingestion service state shared by all request handlers.
pub struct Collector {
    store: Arc<dyn EventStore>,
    sessions: SessionTable,
    admin: Option<String>,
}

impl Collector {
    pub fn new(store: Arc<dyn EventStore>) -> Self {
        Collector {
            store,
            sessions: SessionTable::default(),
            admin: None,
        }
    }

    /// Designates an admin account, creating it if the store lacks it. An
    /// existing account must already have this password.
    pub fn with_admin(mut self, username: &str, password: &str) -> Result<Self, AdminSetupError> {
        if !valid_username(username) {
            return Err(AdminSetupError::InvalidUsername(username.to_string()));
        }
        if !valid_password(password) {
            return Err(AdminSetupError::WeakPassword);
        }
        match self.store.user(username) {
            Some(account) if !verify_password(password, &account.password_digest) => {
                return Err(AdminSetupError::PasswordMismatch(username.to_string()));
            }
            Some(_) => {}
            None => self.store.create_user(UserAccount {
                username: username.to_string(),
                password_digest: hash_password(password),
                created_ms: now_ms(),
            })?,
        }
        self.admin = Some(username.to_string());
        Ok(self)
    }

    pub fn store(&self) -> &Arc<dyn EventStore> {
        &self.store
    }

    pub fn sessions(&self) -> &SessionTable {
        &self.sessions
    }

    pub fn register(&self, username: &str, password: &str) -> Result<(), ServiceError> {
        if !valid_username(username) {
            return Err(ServiceError::InvalidUsername);
        }
        if !valid_password(password) {
            return Err(ServiceError::WeakPassword);
        }
        if self.store.user(username).is_some() {
            return Err(ServiceError::DuplicateUser);
        }
        self.store.create_user(UserAccount {
            username: username.to_string(),
            password_digest: hash_password(password),
            created_ms: now_ms(),
        })?;
        tracing::info!(username, "registered");
        Ok(())
    }

    /// Issues a new session token. Unknown users and wrong passwords fail
    /// identically.
    pub fn login(&self, username: &str, password: &str) -> Result<String, ServiceError> {
        let account = if valid_username(username) {
            self.store.user(username)
        } else {
            None
        };
        match account {
            Some(a) if verify_password(password, &a.password_digest) => {
                Ok(self.sessions.issue(&a.username, now_ms()))
            }
            Some(_) => Err(ServiceError::BadCredentials),
            None => {
                burn_verification(password);
                Err(ServiceError::BadCredentials)
            }
        }
    }

    /// Invalidates a token. Unknown or already revoked tokens are fine.
    pub fn logout(&self, token: Option<&str>) {
        if let Some(token) = token {
            self.sessions.revoke(token);
        }
    }

    fn authenticate(&self, token: Option<&str>) -> Result<String, ServiceError> {
        token
            .and_then(|t| self.sessions.lookup(t))
            .map(|s| s.username)
            .ok_or(ServiceError::NotAuthenticated)
    }

    /// Decodes one wire string and appends it to the caller's stream.
    /// Returns the stored sequence number.
    pub fn ingest(
        &self,
        token: Option<&str>,
        kind: EventKind,
        wire: &str,
    ) -> Result<u64, ServiceError> {
        let user = self.authenticate(token)?;
        if wire.len() > MAX_WIRE_BYTES {
            return Err(WireError::SchemaViolation("data".into()).into());
        }
        let envelope = decode_envelope(kind, wire)?;
        Ok(self.store.append(&user, envelope)?)
    }

    pub fn export(&self, token: Option<&str>, req: &ExportRequest) -> Result<String, ServiceError> {
        let caller = self.authenticate(token)?;
        let is_admin = self.admin.as_deref() == Some(caller.as_str());
        if caller != req.user && !is_admin {
            return Err(ServiceError::Forbidden);
        }
        if req.from_ms >= req.to_ms {
            return Err(ServiceError::BadRange);
        }
        Ok(export_stream(
            self.store.as_ref(),
            &req.user,
            req.kind,
            req.from_ms,
            req.to_ms,
            req.format,
        )?)
    }
}
