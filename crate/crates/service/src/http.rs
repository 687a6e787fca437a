//! HTTP/1.1 routes. Every route is a GET with its arguments in the query:
//!
//! ```text
//! GET /register?uname=<s>&pwd=<s>
//! GET /login?uname=<s>&pwd=<s>        -> Set-Cookie: uname=<token>; HttpOnly
//! GET /logout
//! GET /collect?type=keystroke|mouse&data=<wire-string>
//! GET /export?user=<s>&kind=keystroke|mouse&from=<ms>&to=<ms>&format=jsonl|csv
//! ```
//!
//! Responses are plain text: `ok` or an error code such as
//! `InvariantViolation(up_ms)`. `/export` returns the requested file body.
//! The `data` parameter is taken from the raw query without URL decoding; the
//! wire string carries its own percent-encoding and is decoded exactly once.

use std::future::Future;
use std::sync::Arc;

use axum::extract::{RawQuery, State};
use axum::http::header::{CONTENT_TYPE, COOKIE, SET_COOKIE};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use collector_core::{EventKind, ReportFormat};

use crate::collector::{Collector, ExportRequest, ServiceError};

pub const SESSION_COOKIE: &str = "uname";

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::BadCredentials | ServiceError::NotAuthenticated => {
                StatusCode::UNAUTHORIZED
            }
            ServiceError::Forbidden => StatusCode::FORBIDDEN,
            ServiceError::UnknownUser => StatusCode::NOT_FOUND,
            ServiceError::Storage(e) => {
                tracing::error!("store failure: {e}");
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::BAD_REQUEST,
        };
        (status, self.to_string()).into_response()
    }
}

/// Query parameters, URL-decoded except for the raw `data` value.
#[derive(Debug, Default)]
struct Params {
    decoded: Vec<(String, String)>,
    raw_data: Option<String>,
}

impl Params {
    fn parse(raw: Option<&str>) -> Self {
        let mut params = Params::default();
        for pair in raw.unwrap_or("").split('&').filter(|p| !p.is_empty()) {
            let (name, value) = pair.split_once('=').unwrap_or((pair, ""));
            if name == "data" {
                params.raw_data.get_or_insert_with(|| value.to_string());
            } else if let Some((n, v)) = form_urlencoded::parse(pair.as_bytes()).next() {
                params.decoded.push((n.into_owned(), v.into_owned()));
            }
        }
        params
    }

    fn get(&self, name: &str) -> Option<&str> {
        self.decoded
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, name: &'static str) -> Result<&str, ServiceError> {
        self.get(name).ok_or(ServiceError::BadParameter(name))
    }

    fn parse_as<T: std::str::FromStr>(&self, name: &'static str) -> Result<T, ServiceError> {
        self.require(name)?
            .parse()
            .map_err(|_| ServiceError::BadParameter(name))
    }
}

fn session_token(headers: &HeaderMap) -> Option<String> {
    headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|c| c.trim().split_once('='))
        .find(|(name, _)| *name == SESSION_COOKIE)
        .map(|(_, value)| value.to_string())
        .filter(|v| !v.is_empty())
}

fn ok() -> Response {
    (StatusCode::OK, "ok").into_response()
}

async fn blocking<T, F>(f: F) -> Result<T, ServiceError>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| std::panic::resume_unwind(e.into_panic()))
}

async fn register(State(c): State<Arc<Collector>>, RawQuery(q): RawQuery) -> Response {
    let params = Params::parse(q.as_deref());
    let uname = params.get("uname").unwrap_or("").to_string();
    let pwd = params.get("pwd").unwrap_or("").to_string();
    match blocking(move || c.register(&uname, &pwd)).await {
        Ok(()) => ok(),
        Err(e) => {
            tracing::info!(code = e.code(), "registration rejected");
            e.into_response()
        }
    }
}

async fn login(State(c): State<Arc<Collector>>, RawQuery(q): RawQuery) -> Response {
    let params = Params::parse(q.as_deref());
    let uname = params.get("uname").unwrap_or("").to_string();
    let pwd = params.get("pwd").unwrap_or("").to_string();
    match blocking(move || c.login(&uname, &pwd)).await {
        Ok(token) => {
            let cookie = format!("{SESSION_COOKIE}={token}; HttpOnly");
            let mut resp = ok();
            resp.headers_mut().insert(
                SET_COOKIE,
                HeaderValue::from_str(&cookie).expect("hex token is a valid header"),
            );
            resp
        }
        Err(e) => e.into_response(),
    }
}

async fn logout(State(c): State<Arc<Collector>>, headers: HeaderMap) -> Response {
    c.logout(session_token(&headers).as_deref());
    let mut resp = ok();
    resp.headers_mut().insert(
        SET_COOKIE,
        HeaderValue::from_static("uname=; Max-Age=0; HttpOnly"),
    );
    resp
}

async fn collect(
    State(c): State<Arc<Collector>>,
    headers: HeaderMap,
    RawQuery(q): RawQuery,
) -> Response {
    let token = session_token(&headers);
    let params = Params::parse(q.as_deref());
    let result = (|| {
        let kind: EventKind = params.parse_as("type")?;
        let wire = params
            .raw_data
            .as_deref()
            .ok_or(ServiceError::BadParameter("data"))?;
        c.ingest(token.as_deref(), kind, wire)
    })();
    match result {
        Ok(_) => ok(),
        Err(e) => {
            tracing::warn!(rejection = %e, "collect rejected");
            e.into_response()
        }
    }
}

async fn export(
    State(c): State<Arc<Collector>>,
    headers: HeaderMap,
    RawQuery(q): RawQuery,
) -> Response {
    let token = session_token(&headers);
    let params = Params::parse(q.as_deref());
    let result = (|| {
        let req = ExportRequest {
            user: params.require("user")?.to_string(),
            kind: params.parse_as("kind")?,
            from_ms: params.parse_as("from")?,
            to_ms: params.parse_as("to")?,
            format: params.parse_as("format")?,
        };
        c.export(token.as_deref(), &req)
            .map(|body| (req.format, body))
    })();
    match result {
        Ok((format, body)) => ([(CONTENT_TYPE, format_content_type(format))], body).into_response(),
        Err(e) => e.into_response(),
    }
}

fn format_content_type(format: ReportFormat) -> HeaderValue {
    HeaderValue::from_static(format.content_type())
}

pub fn router(collector: Arc<Collector>) -> Router {
    Router::new()
        .route("/register", get(register))
        .route("/login", get(login))
        .route("/logout", get(logout))
        .route("/collect", get(collect))
        .route("/export", get(export))
        .with_state(collector)
}

/// Serves until `shutdown` resolves, then flushes the store to disk.
pub async fn serve<F>(
    listener: tokio::net::TcpListener,
    collector: Arc<Collector>,
    shutdown: F,
) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(Arc::clone(&collector)))
        .with_graceful_shutdown(shutdown)
        .await?;
    collector
        .store()
        .sync()
        .map_err(|e| std::io::Error::other(e.to_string()))
}
