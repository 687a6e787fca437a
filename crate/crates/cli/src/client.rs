//! Minimal client for the collector's HTTP routes, speaking the same wire
//! protocol as the browser extension.

use std::fmt;

use collector_core::{encode_envelope, EventEnvelope, EventKind, ReportFormat};
use reqwest::header::{COOKIE, SET_COOKIE};
use reqwest::StatusCode;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("cannot reach {url}: {source}")]
    Network {
        url: String,
        #[source]
        source: reqwest::Error,
    },
    /// The server answered with a non-200 status and an error code body.
    #[error("server rejected request ({status}): {code}")]
    Rejected { status: StatusCode, code: String },
    #[error("not logged in")]
    NoSession,
}

impl ClientError {
    pub fn code(&self) -> Option<&str> {
        match self {
            ClientError::Rejected { code, .. } => Some(code),
            _ => None,
        }
    }

    /// Whether the failure is about authentication rather than one request's
    /// content.
    pub fn is_auth(&self) -> bool {
        matches!(self, ClientError::NoSession)
            || matches!(self, ClientError::Rejected { status, .. } if *status == StatusCode::UNAUTHORIZED)
    }
}

/// A session-holding client. The token never appears in `Debug` output.
pub struct Client {
    base: String,
    http: reqwest::Client,
    token: Option<String>,
}

impl fmt::Debug for Client {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Client")
            .field("base", &self.base)
            .field("logged_in", &self.token.is_some())
            .finish()
    }
}

fn query(pairs: &[(&str, &str)]) -> String {
    let mut s = form_urlencoded::Serializer::new(String::new());
    for (k, v) in pairs {
        s.append_pair(k, v);
    }
    s.finish()
}

impl Client {
    pub fn new(base: &str) -> Self {
        Client {
            base: base.trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
            token: None,
        }
    }

    pub fn is_logged_in(&self) -> bool {
        self.token.is_some()
    }

    async fn get(&self, path_and_query: &str) -> Result<reqwest::Response, ClientError> {
        let url = format!("{}{}", self.base, path_and_query);
        let mut req = self.http.get(&url);
        if let Some(token) = &self.token {
            req = req.header(
                COOKIE,
                format!("{}={token}", collector_service::SESSION_COOKIE),
            );
        }
        let resp = req.send().await.map_err(|source| ClientError::Network {
            url: format!(
                "{}{}",
                self.base,
                path_and_query.split('?').next().unwrap_or("")
            ),
            source,
        })?;
        if resp.status() == StatusCode::OK {
            Ok(resp)
        } else {
            let status = resp.status();
            let code = resp.text().await.unwrap_or_default();
            Err(ClientError::Rejected { status, code })
        }
    }

    pub async fn register(&self, user: &str, pass: &str) -> Result<(), ClientError> {
        self.get(&format!(
            "/register?{}",
            query(&[("uname", user), ("pwd", pass)])
        ))
        .await
        .map(drop)
    }

    pub async fn login(&mut self, user: &str, pass: &str) -> Result<(), ClientError> {
        let resp = self
            .get(&format!(
                "/login?{}",
                query(&[("uname", user), ("pwd", pass)])
            ))
            .await?;
        let prefix = format!("{}=", collector_service::SESSION_COOKIE);
        let token = resp
            .headers()
            .get_all(SET_COOKIE)
            .iter()
            .filter_map(|v| v.to_str().ok())
            .filter_map(|v| v.split(';').next())
            .find_map(|c| c.trim().strip_prefix(prefix.as_str()).map(str::to_string))
            .filter(|t| !t.is_empty());
        self.token = Some(token.ok_or(ClientError::NoSession)?);
        Ok(())
    }

    pub async fn logout(&mut self) -> Result<(), ClientError> {
        let result = self.get("/logout").await.map(drop);
        self.token = None;
        result
    }

    /// Sends one event as `GET /collect?type=..&data=<wire>`.
    pub async fn collect(&self, envelope: &EventEnvelope) -> Result<(), ClientError> {
        if self.token.is_none() {
            return Err(ClientError::NoSession);
        }
        let uri = format!(
            "/collect?type={}&data={}",
            envelope.kind(),
            encode_envelope(envelope)
        );
        self.get(&uri).await.map(drop)
    }

    pub async fn export(
        &self,
        user: &str,
        kind: EventKind,
        from_ms: i64,
        to_ms: i64,
        format: ReportFormat,
    ) -> Result<String, ClientError> {
        let q = query(&[
            ("user", user),
            ("kind", kind.as_str()),
            ("from", &from_ms.to_string()),
            ("to", &to_ms.to_string()),
            ("format", format.as_str()),
        ]);
        let resp = self.get(&format!("/export?{q}")).await?;
        resp.text().await.map_err(|source| ClientError::Network {
            url: format!("{}/export", self.base),
            source,
        })
    }
}
