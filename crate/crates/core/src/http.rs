//! Minimal blocking HTTP transport shared by the store clients and the
//! remote embedding/sentiment providers.
//!
//! Every network call goes through [`HttpClient`], so tests and offline runs
//! can swap the live transport for a directory of recorded responses
//! ([`ReplayHttp`]). `ETHOS_HTTP_CACHE` selects the replay directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable naming the fixture-replay directory.
pub const HTTP_CACHE_ENV: &str = "ETHOS_HTTP_CACHE";
/// When set alongside [`HTTP_CACHE_ENV`], cache misses go to the network and
/// the response is recorded.
pub const HTTP_RECORD_ENV: &str = "ETHOS_HTTP_RECORD";

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("transport error for {url}: {message}")]
    Transport { url: String, message: String },
    #[error("no recorded response for {method} {url} (looked for {path})")]
    NotRecorded {
        method: String,
        url: String,
        path: PathBuf,
    },
    #[error("failed to read recorded response {path}: {message}")]
    BadRecording { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

pub trait HttpClient: Send + Sync {
    fn get(&self, url: &str) -> Result<HttpResponse, HttpError>;
    fn post(&self, url: &str, content_type: &str, body: &str) -> Result<HttpResponse, HttpError>;
}

/// Live transport backed by `ureq`. Non-2xx statuses are returned as
/// responses, not errors, so callers can map them to domain errors.
pub struct LiveHttp {
    agent: ureq::Agent,
}

impl LiveHttp {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .user_agent("ethos-review-audit/0.1")
            .build();
        Self {
            agent: config.into(),
        }
    }
}

impl Default for LiveHttp {
    fn default() -> Self {
        Self::new(Duration::from_secs(30))
    }
}

fn transport_err(url: &str, e: impl std::fmt::Display) -> HttpError {
    HttpError::Transport {
        url: url.to_string(),
        message: e.to_string(),
    }
}

impl HttpClient for LiveHttp {
    fn get(&self, url: &str) -> Result<HttpResponse, HttpError> {
        let mut resp = self.agent.get(url).call().map_err(|e| transport_err(url, e))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| transport_err(url, e))?;
        Ok(HttpResponse { status, body })
    }

    fn post(&self, url: &str, content_type: &str, body: &str) -> Result<HttpResponse, HttpError> {
        let mut resp = self
            .agent
            .post(url)
            .header("Content-Type", content_type)
            .send(body)
            .map_err(|e| transport_err(url, e))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| transport_err(url, e))?;
        Ok(HttpResponse { status, body })
    }
}

/// Key under which a request is stored in a replay directory.
pub fn recording_key(method: &str, url: &str, body: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(method.as_bytes());
    hasher.update(b"\n");
    hasher.update(url.as_bytes());
    hasher.update(b"\n");
    hasher.update(body.as_bytes());
    let digest = hasher.finalize();
    digest[..12].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct Recording {
    method: String,
    url: String,
    status: u16,
    body: String,
}

/// Serves recorded responses from disk. With a `fallback`, misses are fetched
/// live and written back.
pub struct ReplayHttp {
    dir: PathBuf,
    fallback: Option<Box<dyn HttpClient>>,
}

impl ReplayHttp {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            fallback: None,
        }
    }

    pub fn recording(dir: impl Into<PathBuf>, live: Box<dyn HttpClient>) -> Self {
        Self {
            dir: dir.into(),
            fallback: Some(live),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, method: &str, url: &str, body: &str) -> PathBuf {
        self.dir
            .join(format!("{}.json", recording_key(method, url, body)))
    }

    /// Writes a response so a later replay of the same request returns it.
    pub fn record(
        &self,
        method: &str,
        url: &str,
        body: &str,
        response: &HttpResponse,
    ) -> std::io::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let rec = Recording {
            method: method.to_string(),
            url: url.to_string(),
            status: response.status,
            body: response.body.clone(),
        };
        let json = serde_json::to_string_pretty(&rec).map_err(std::io::Error::other)?;
        fs::write(self.path_for(method, url, body), json)
    }

    fn lookup(&self, method: &str, url: &str, content_type: &str, body: &str) -> Result<HttpResponse, HttpError> {
        let path = self.path_for(method, url, body);
        match fs::read_to_string(&path) {
            Ok(text) => {
                let rec: Recording =
                    serde_json::from_str(&text).map_err(|e| HttpError::BadRecording {
                        path: path.clone(),
                        message: e.to_string(),
                    })?;
                Ok(HttpResponse {
                    status: rec.status,
                    body: rec.body,
                })
            }
            Err(_) => {
                let Some(live) = &self.fallback else {
                    return Err(HttpError::NotRecorded {
                        method: method.to_string(),
                        url: url.to_string(),
                        path,
                    });
                };
                let resp = if method == "GET" {
                    live.get(url)?
                } else {
                    live.post(url, content_type, body)?
                };
                self.record(method, url, body, &resp)
                    .map_err(|e| transport_err(url, e))?;
                Ok(resp)
            }
        }
    }
}

impl HttpClient for ReplayHttp {
    fn get(&self, url: &str) -> Result<HttpResponse, HttpError> {
        self.lookup("GET", url, "", "")
    }

    fn post(&self, url: &str, content_type: &str, body: &str) -> Result<HttpResponse, HttpError> {
        self.lookup("POST", url, content_type, body)
    }
}

/// Replay transport when `ETHOS_HTTP_CACHE` is set (recording misses if
/// `ETHOS_HTTP_RECORD` is also set), live transport otherwise.
pub fn client_from_env() -> Box<dyn HttpClient> {
    match std::env::var_os(HTTP_CACHE_ENV) {
        Some(dir) if std::env::var_os(HTTP_RECORD_ENV).is_some() => Box::new(
            ReplayHttp::recording(PathBuf::from(dir), Box::new(LiveHttp::default())),
        ),
        Some(dir) => Box::new(ReplayHttp::new(PathBuf::from(dir))),
        None => Box::new(LiveHttp::default()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayHttp::new(dir.path());
        let resp = HttpResponse {
            status: 200,
            body: "{\"ok\":true}".into(),
        };
        replay.record("GET", "https://example.test/a", "", &resp).unwrap();
        assert_eq!(replay.get("https://example.test/a").unwrap(), resp);
        assert!(matches!(
            replay.get("https://example.test/b"),
            Err(HttpError::NotRecorded { .. })
        ));
    }

    #[test]
    fn key_depends_on_body() {
        assert_ne!(
            recording_key("POST", "u", "a"),
            recording_key("POST", "u", "b")
        );
    }
}
