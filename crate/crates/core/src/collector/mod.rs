//! Raw record collection from cursor-paginated JSON endpoints and local files.
//!
//! Endpoints are queried with `GET base_url?q=<query>&count=<page_size>[&cursor=<c>]`.
//! Each response is a JSON object; the records live under `records_field`
//! and the next-page cursor under `cursor_field` (absent, null or empty
//! means the last page).

pub mod fixture;

use std::io::{BufWriter, Write};
use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::json_path;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    #[default]
    TwitterLike,
    FacebookLike,
    File,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRecord {
    pub source: SourceKind,
    /// One JSON object, as text.
    pub payload: String,
    pub fetched_at: DateTime<Utc>,
}

impl RawRecord {
    pub fn new(source: SourceKind, payload: String) -> Self {
        RawRecord {
            source,
            payload,
            fetched_at: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total attempts per page, including the first.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles for each further attempt.
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            initial_backoff_ms: 500,
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, failed_attempts: u32) -> Duration {
        let factor = 1u64 << failed_attempts.saturating_sub(1).min(16);
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(factor))
    }
}

fn default_page_size() -> u32 {
    100
}

fn default_rate_limit() -> u32 {
    60
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    pub base_url: String,
    pub query: String,
    #[serde(default = "default_page_size")]
    pub page_size: u32,
    pub cursor_field: String,
    pub records_field: String,
    pub max_records: usize,
    /// Sent as a bearer token. Never read from config files.
    #[serde(skip)]
    pub auth_token: Option<String>,
    /// Requests per minute; 0 disables spacing.
    #[serde(default = "default_rate_limit")]
    pub rate_limit: u32,
    #[serde(default)]
    pub source: SourceKind,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, query: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            query: query.into(),
            page_size: default_page_size(),
            cursor_field: "meta.next_cursor".into(),
            records_field: "data".into(),
            max_records: 1000,
            auth_token: None,
            rate_limit: 0,
            source: SourceKind::TwitterLike,
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(Error::config(format!("base_url must be http(s): {:?}", self.base_url)));
        }
        if self.page_size == 0 {
            return Err(Error::config("page_size must be at least 1"));
        }
        if self.max_records == 0 {
            return Err(Error::config("max_records must be at least 1"));
        }
        if !json_path::is_valid(&self.cursor_field) {
            return Err(Error::config(format!("invalid cursor_field {:?}", self.cursor_field)));
        }
        if !json_path::is_valid(&self.records_field) {
            return Err(Error::config(format!("invalid records_field {:?}", self.records_field)));
        }
        if self.retry.max_attempts == 0 {
            return Err(Error::config("retry.max_attempts must be at least 1"));
        }
        Ok(())
    }

    fn min_interval(&self) -> Option<Duration> {
        (self.rate_limit > 0).then(|| Duration::from_secs_f64(60.0 / f64::from(self.rate_limit)))
    }
}

/// One page of results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Page {
    pub records: Vec<RawRecord>,
    pub next_cursor: Option<String>,
}

/// Blocking HTTP client for paginated endpoints.
pub struct HttpCollector {
    agent: ureq::Agent,
    last_request: Option<Instant>,
}

impl Default for HttpCollector {
    fn default() -> Self {
        Self::new()
    }
}

impl HttpCollector {
    pub fn new() -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .user_agent(concat!("sentilens/", env!("CARGO_PKG_VERSION")))
            .build()
            .into();
        HttpCollector {
            agent,
            last_request: None,
        }
    }

    /// A single request; no retries. Transport failures report one attempt.
    pub fn fetch_page(&mut self, config: &EndpointConfig, cursor: Option<&str>) -> Result<Page> {
        let mut request = self
            .agent
            .get(&config.base_url)
            .query("q", &config.query)
            .query("count", config.page_size.to_string());
        if let Some(c) = cursor {
            request = request.query("cursor", c);
        }
        if let Some(token) = &config.auth_token {
            request = request.header("Authorization", format!("Bearer {token}"));
        }
        self.last_request = Some(Instant::now());
        let mut response = request.call().map_err(|e| Error::Network {
            attempts: 1,
            message: e.to_string(),
        })?;

        let status = response.status().as_u16();
        if status == 429 {
            let retry_after = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs)
                .unwrap_or_else(|| config.retry.backoff(1));
            return Err(Error::RateLimited { retry_after });
        }
        if status >= 500 {
            return Err(Error::Network {
                attempts: 1,
                message: format!("HTTP {status}"),
            });
        }
        if !(200..300).contains(&status) {
            return Err(Error::HttpStatus {
                status,
                url: config.base_url.clone(),
            });
        }
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Network {
                attempts: 1,
                message: e.to_string(),
            })?;
        parse_page(&body, config)
    }

    fn wait_for_slot(&self, config: &EndpointConfig) {
        if let (Some(interval), Some(last)) = (config.min_interval(), self.last_request) {
            let elapsed = last.elapsed();
            if elapsed < interval {
                thread::sleep(interval - elapsed);
            }
        }
    }

    fn fetch_with_retry(&mut self, config: &EndpointConfig, cursor: Option<&str>) -> Result<Page> {
        let mut attempt = 1;
        loop {
            self.wait_for_slot(config);
            match self.fetch_page(config, cursor) {
                Ok(page) => return Ok(page),
                Err(err) if err.is_retryable() && attempt < config.retry.max_attempts => {
                    let delay = match &err {
                        Error::RateLimited { retry_after } => *retry_after,
                        _ => config.retry.backoff(attempt),
                    };
                    warn!("attempt {attempt} failed ({err}); retrying in {delay:?}");
                    thread::sleep(delay);
                    attempt += 1;
                }
                Err(Error::Network { message, .. }) => {
                    return Err(Error::Network {
                        attempts: attempt,
                        message,
                    })
                }
                Err(err) => return Err(err),
            }
        }
    }

    /// Follows cursors until the last page or `max_records`.
    pub fn collect(&mut self, config: &EndpointConfig) -> Result<Vec<RawRecord>> {
        config.validate()?;
        let mut records = Vec::new();
        let mut cursor: Option<String> = None;
        loop {
            let page = self.fetch_with_retry(config, cursor.as_deref())?;
            debug!(
                "{}: page with {} records, next cursor {:?}",
                config.base_url,
                page.records.len(),
                page.next_cursor
            );
            records.extend(page.records);
            if records.len() >= config.max_records {
                records.truncate(config.max_records);
                break;
            }
            match page.next_cursor {
                None => break,
                Some(next) if cursor.as_deref() == Some(next.as_str()) => {
                    return Err(Error::data(format!("cursor {next:?} did not advance")));
                }
                next => cursor = next,
            }
        }
        Ok(records)
    }
}

pub fn fetch_page(config: &EndpointConfig, cursor: Option<&str>) -> Result<Page> {
    config.validate()?;
    HttpCollector::new().fetch_page(config, cursor)
}

pub fn collect(config: &EndpointConfig) -> Result<Vec<RawRecord>> {
    HttpCollector::new().collect(config)
}

fn parse_page(body: &str, config: &EndpointConfig) -> Result<Page> {
    let value: Value = serde_json::from_str(body).map_err(|e| malformed(body, &e))?;
    let items = json_path::lookup(&value, &config.records_field)
        .ok_or_else(|| Error::data(format!("records field {:?} not found", config.records_field)))?
        .as_array()
        .ok_or_else(|| Error::data(format!("records field {:?} is not an array", config.records_field)))?;
    let records = items
        .iter()
        .map(|item| {
            if !item.is_object() {
                return Err(Error::data("record is not a JSON object"));
            }
            Ok(RawRecord::new(config.source, item.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let next_cursor = json_path::lookup_scalar(&value, &config.cursor_field).filter(|c| !c.is_empty());
    Ok(Page {
        records,
        next_cursor,
    })
}

/// Byte offset of a serde_json error position (1-based line and column).
fn malformed(text: &str, err: &serde_json::Error) -> Error {
    let line_start: usize = text
        .split_inclusive('\n')
        .take(err.line().saturating_sub(1))
        .map(str::len)
        .sum();
    Error::MalformedJson {
        offset: line_start + err.column().saturating_sub(1),
        message: err.to_string(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FileFormat {
    #[default]
    Jsonl,
    JsonArray,
}

/// Records read from a file, with the number of entries skipped in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ingested {
    pub records: Vec<RawRecord>,
    pub skipped: usize,
}

/// Reads one record per JSON object. In lenient mode unparsable lines (or
/// non-object array elements) are skipped and counted; in strict mode they
/// are errors carrying the line number.
pub fn ingest_file(path: &Path, format: FileFormat, strict: bool) -> Result<Ingested> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut skipped = 0;
    match format {
        FileFormat::Jsonl => {
            for (i, line) in text.lines().enumerate() {
                let line = line.trim_end_matches('\r');
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Value>(line) {
                    Ok(v) if v.is_object() => {
                        records.push(RawRecord::new(SourceKind::File, line.to_owned()))
                    }
                    outcome => {
                        if strict {
                            let message = match outcome {
                                Err(e) => e.to_string(),
                                Ok(_) => "not a JSON object".to_owned(),
                            };
                            return Err(Error::BadLine {
                                path: path.to_owned(),
                                line: i + 1,
                                message,
                            });
                        }
                        skipped += 1;
                    }
                }
            }
        }
        FileFormat::JsonArray => {
            if text.trim().is_empty() {
                return Ok(Ingested { records, skipped });
            }
            let value: Value = serde_json::from_str(&text).map_err(|e| malformed(&text, &e))?;
            let items = value
                .as_array()
                .ok_or_else(|| Error::data(format!("{}: top level is not an array", path.display())))?;
            for (i, item) in items.iter().enumerate() {
                if item.is_object() {
                    records.push(RawRecord::new(SourceKind::File, item.to_string()));
                } else if strict {
                    return Err(Error::data(format!(
                        "{}: element {i} is not a JSON object",
                        path.display()
                    )));
                } else {
                    skipped += 1;
                }
            }
        }
    }
    if skipped > 0 {
        warn!("{}: skipped {skipped} malformed entries", path.display());
    }
    Ok(Ingested { records, skipped })
}

/// One payload per line, LF endings.
pub fn write_payloads_jsonl(records: &[RawRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        writeln!(out, "{}", r.payload).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
