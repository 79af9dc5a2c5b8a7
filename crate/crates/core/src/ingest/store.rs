//! Public store endpoints.
//!
//! The Play client speaks the undocumented `batchexecute` RPC the web store
//! uses, so it is best-effort. The App Store client reads the customer-review
//! RSS JSON feed, which only exposes the most recent reviews (ten pages at
//! most). Both take an [`HttpClient`], so every response can be replayed from
//! disk.

use std::thread;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, Utc};
use regex::Regex;
use serde_json::Value;

use super::{IngestError, ReviewBatch, ReviewRecord, Store};
use crate::http::{HttpClient, HttpError, HttpResponse};

pub const PLAY_BATCH_URL: &str =
    "https://play.google.com/_/PlayStoreUi/data/batchexecute?hl=en&gl=us";
/// Deepest page the App Store review feed serves.
pub const APPSTORE_MAX_PAGE: u32 = 10;
const PLAY_SORT_NEWEST: u8 = 2;

/// Exponential backoff for transient failures (transport errors and 5xx).
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 4,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(16),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self {
            max_retries: 0,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }

    /// Runs `op` until it yields a non-transient outcome or retries run out.
    /// 429 is surfaced immediately as [`IngestError::RateLimited`].
    pub fn run<F>(&self, mut op: F) -> Result<HttpResponse, IngestError>
    where
        F: FnMut() -> Result<HttpResponse, HttpError>,
    {
        let mut attempt = 0;
        loop {
            let outcome = op();
            let transient = match &outcome {
                Ok(r) if r.status == 429 => {
                    return Err(IngestError::RateLimited { status: r.status })
                }
                Ok(r) => r.status >= 500,
                Err(HttpError::Transport { .. }) => true,
                Err(_) => false,
            };
            if !transient || attempt >= self.max_retries {
                return match outcome {
                    Ok(r) if r.status >= 500 => Err(IngestError::Network(format!(
                        "HTTP {} after {} attempts",
                        r.status,
                        attempt + 1
                    ))),
                    Ok(r) => Ok(r),
                    Err(e) => Err(IngestError::Network(e.to_string())),
                };
            }
            log::debug!("transient failure, retry {} of {}", attempt + 1, self.max_retries);
            thread::sleep(self.delay(attempt));
            attempt += 1;
        }
    }
}

fn is_play_package(app_id: &str) -> bool {
    static PATTERN: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    PATTERN
        .get_or_init(|| Regex::new(r"^[A-Za-z][A-Za-z0-9_]*(\.[A-Za-z][A-Za-z0-9_]*)+$").unwrap())
        .is_match(app_id)
}

fn form_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len() * 3);
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            b' ' => out.push('+'),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// Form body of a Play review-page request.
pub fn play_request_body(app_id: &str, page_token: Option<&str>, page_size: usize) -> String {
    let token = match page_token {
        Some(t) => Value::String(t.to_string()).to_string(),
        None => "null".to_string(),
    };
    let inner = format!(
        "[null,null,[2,{PLAY_SORT_NEWEST},[{page_size},null,{token}],null,[]],[{},7]]",
        Value::String(app_id.to_string())
    );
    let envelope = serde_json::json!([[["UsvDTd", inner, null, "generic"]]]);
    format!("f.req={}", form_encode(&envelope.to_string()))
}

/// Parses a `batchexecute` response into records and the continuation token.
pub fn parse_play_response(
    app_id: &str,
    body: &str,
    fetched_at: DateTime<Utc>,
) -> Result<(Vec<ReviewRecord>, Option<String>), IngestError> {
    let parse_err = |what: &str| IngestError::Network(format!("play response: {what}"));
    let start = body.find("[[").ok_or_else(|| parse_err("no payload array"))?;
    // The envelope may be followed by length-prefixed trailer chunks.
    let mut stream = serde_json::Deserializer::from_str(&body[start..]).into_iter::<Value>();
    let outer = stream
        .next()
        .ok_or_else(|| parse_err("empty payload"))?
        .map_err(|e| parse_err(&e.to_string()))?;
    let payload = outer
        .as_array()
        .and_then(|a| a.iter().find(|e| e.get(1).and_then(Value::as_str) == Some("UsvDTd")))
        .ok_or_else(|| parse_err("no UsvDTd frame"))?;
    let inner = match payload.get(2) {
        Some(Value::String(s)) => s,
        _ => return Err(IngestError::AppNotFound(app_id.to_string())),
    };
    let data: Value = serde_json::from_str(inner).map_err(|e| parse_err(&e.to_string()))?;
    let mut records = Vec::new();
    if let Some(items) = data.get(0).and_then(Value::as_array) {
        for item in items {
            let (Some(id), Some(text)) = (
                item.get(0).and_then(Value::as_str),
                item.get(4).and_then(Value::as_str),
            ) else {
                continue;
            };
            if text.trim().is_empty() {
                continue;
            }
            let rating = item.get(2).and_then(Value::as_u64).map(|r| r as u8);
            let posted_at = item
                .get(5)
                .and_then(|t| t.get(0))
                .and_then(Value::as_i64)
                .and_then(|secs| DateTime::from_timestamp(secs, 0))
                .map(|dt| dt.date_naive());
            records.push(ReviewRecord::new(
                Some(id.to_string()),
                app_id,
                Store::Play,
                text,
                rating.filter(|r| (1..=5).contains(r)),
                posted_at,
                fetched_at,
            )?);
        }
    }
    let token = data
        .as_array()
        .and_then(|a| a.get(1))
        .and_then(Value::as_array)
        .and_then(|t| t.last())
        .and_then(Value::as_str)
        .map(str::to_string);
    Ok((records, token))
}

pub struct PlayClient<'a> {
    http: &'a dyn HttpClient,
    retry: RetryPolicy,
}

impl<'a> PlayClient<'a> {
    pub fn new(http: &'a dyn HttpClient, retry: RetryPolicy) -> Self {
        Self { http, retry }
    }

    /// Fetches one page of reviews, newest first.
    pub fn fetch_reviews(
        &self,
        app_id: &str,
        page_token: Option<&str>,
        page_size: usize,
    ) -> Result<ReviewBatch, IngestError> {
        if !is_play_package(app_id) {
            return Err(IngestError::AppNotFound(app_id.to_string()));
        }
        if page_size == 0 {
            return Err(IngestError::InvalidArgument("page_size must be ≥ 1".into()));
        }
        let body = play_request_body(app_id, page_token, page_size);
        let resp = self.retry.run(|| {
            self.http
                .post(PLAY_BATCH_URL, "application/x-www-form-urlencoded;charset=UTF-8", &body)
        })?;
        if resp.status == 404 {
            return Err(IngestError::AppNotFound(app_id.to_string()));
        }
        if !resp.is_success() {
            return Err(IngestError::Network(format!("HTTP {}", resp.status)));
        }
        let (mut records, token) = parse_play_response(app_id, &resp.body, Utc::now())?;
        records.truncate(page_size);
        records.sort_by(|a, b| b.posted_at.cmp(&a.posted_at));
        let exhausted = token.is_none();
        Ok(ReviewBatch {
            records,
            next_page_token: token,
            exhausted,
        })
    }
}

pub fn appstore_feed_url(app_id: &str, country: &str, page: u32) -> String {
    format!(
        "https://itunes.apple.com/{}/rss/customerreviews/page={page}/id={app_id}/sortby=mostrecent/json",
        country.to_ascii_lowercase()
    )
}

fn label(v: &Value, key: &str) -> Option<String> {
    v.get(key)?.get("label")?.as_str().map(str::to_string)
}

/// Parses one page of the customer-review feed. Entries without a rating are
/// the app's own metadata entry and are skipped.
pub fn parse_appstore_feed(
    app_id: &str,
    body: &str,
    fetched_at: DateTime<Utc>,
) -> Result<Vec<ReviewRecord>, IngestError> {
    let doc: Value = serde_json::from_str(body)
        .map_err(|e| IngestError::Network(format!("appstore feed parse error: {e}")))?;
    let feed = doc
        .get("feed")
        .ok_or_else(|| IngestError::Network("appstore feed parse error: missing `feed`".into()))?;
    let entries: Vec<&Value> = match feed.get("entry") {
        None => Vec::new(),
        Some(Value::Array(a)) => a.iter().collect(),
        Some(single @ Value::Object(_)) => vec![single],
        Some(_) => {
            return Err(IngestError::Network(
                "appstore feed parse error: `entry` is neither list nor object".into(),
            ))
        }
    };
    let mut out = Vec::new();
    for e in entries {
        let Some(rating) = label(e, "im:rating") else {
            continue;
        };
        let text = label(e, "content").unwrap_or_default();
        if text.trim().is_empty() {
            continue;
        }
        let rating: Option<u8> = rating.parse().ok().filter(|r| (1..=5).contains(r));
        let posted_at = label(e, "updated").and_then(|s| {
            DateTime::parse_from_rfc3339(&s)
                .map(|d| d.date_naive())
                .ok()
                .or_else(|| NaiveDate::parse_from_str(s.get(..10)?, "%Y-%m-%d").ok())
        });
        out.push(ReviewRecord::new(
            label(e, "id"),
            app_id,
            Store::Appstore,
            text,
            rating,
            posted_at,
            fetched_at,
        )?);
    }
    Ok(out)
}

pub struct AppStoreClient<'a> {
    http: &'a dyn HttpClient,
    retry: RetryPolicy,
}

impl<'a> AppStoreClient<'a> {
    pub fn new(http: &'a dyn HttpClient, retry: RetryPolicy) -> Self {
        Self { http, retry }
    }

    /// Fetches one feed page. Past the feed's depth, or on an empty page, the
    /// batch is empty and exhausted: the feed only keeps recent reviews.
    pub fn fetch_reviews(
        &self,
        app_id: &str,
        country: &str,
        page: u32,
    ) -> Result<ReviewBatch, IngestError> {
        if page == 0 {
            return Err(IngestError::InvalidArgument("page starts at 1".into()));
        }
        if country.len() != 2 || !country.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(IngestError::InvalidArgument(format!(
                "country {country:?} is not a two-letter store code"
            )));
        }
        if page > APPSTORE_MAX_PAGE {
            return Ok(ReviewBatch::exhausted());
        }
        let url = appstore_feed_url(app_id, country, page);
        let resp = self.retry.run(|| self.http.get(&url))?;
        if resp.status == 404 {
            return Err(IngestError::AppNotFound(app_id.to_string()));
        }
        if !resp.is_success() {
            return Err(IngestError::Network(format!("HTTP {}", resp.status)));
        }
        let records = parse_appstore_feed(app_id, &resp.body, Utc::now())?;
        if records.is_empty() {
            return Ok(ReviewBatch::exhausted());
        }
        let exhausted = page >= APPSTORE_MAX_PAGE;
        Ok(ReviewBatch {
            records,
            next_page_token: (!exhausted).then(|| (page + 1).to_string()),
            exhausted,
        })
    }
}

/// Which store, and its paging parameters, to collect an app from.
#[derive(Debug, Clone)]
pub struct AppSource {
    pub app_id: String,
    pub store: Store,
    pub country: String,
    pub page_size: usize,
    pub max_pages: Option<usize>,
}

/// Pages through one app sequentially until the store is exhausted or
/// `max_pages` is reached. Records already seen by id are dropped.
pub fn collect_app(
    http: &dyn HttpClient,
    retry: RetryPolicy,
    src: &AppSource,
) -> Result<Vec<ReviewRecord>, IngestError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut token: Option<String> = None;
    let mut pages = 0usize;
    loop {
        if src.max_pages.is_some_and(|m| pages >= m) {
            break;
        }
        let batch = match src.store {
            Store::Play => PlayClient::new(http, retry).fetch_reviews(
                &src.app_id,
                token.as_deref(),
                src.page_size,
            )?,
            Store::Appstore => {
                let page = token.as_deref().map_or(Ok(1), str::parse).map_err(|_| {
                    IngestError::InvalidArgument(format!("bad page token {token:?}"))
                })?;
                AppStoreClient::new(http, retry).fetch_reviews(&src.app_id, &src.country, page)?
            }
        };
        pages += 1;
        out.extend(batch.records.into_iter().filter(|r| seen.insert(r.id.clone())));
        if batch.exhausted {
            break;
        }
        token = batch.next_page_token;
    }
    Ok(out)
}

/// Collects several apps concurrently, one thread per app. Output order
/// follows `sources`.
pub fn collect_apps(
    http: &dyn HttpClient,
    retry: RetryPolicy,
    sources: &[AppSource],
) -> Vec<Result<Vec<ReviewRecord>, IngestError>> {
    thread::scope(|s| {
        let handles: Vec<_> = sources
            .iter()
            .map(|src| s.spawn(move || collect_app(http, retry, src)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("collector thread panicked"))
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::ReplayHttp;
    use std::sync::Mutex;

    /// Serves canned responses in order and records requests.
    struct Scripted {
        responses: Mutex<Vec<Result<HttpResponse, HttpError>>>,
        requests: Mutex<Vec<String>>,
    }

    impl Scripted {
        fn new(mut r: Vec<Result<HttpResponse, HttpError>>) -> Self {
            r.reverse();
            Self {
                responses: Mutex::new(r),
                requests: Mutex::new(Vec::new()),
            }
        }
        fn next(&self, req: String) -> Result<HttpResponse, HttpError> {
            self.requests.lock().unwrap().push(req);
            self.responses.lock().unwrap().pop().expect("unexpected request")
        }
    }

    impl HttpClient for Scripted {
        fn get(&self, url: &str) -> Result<HttpResponse, HttpError> {
            self.next(url.to_string())
        }
        fn post(&self, url: &str, _: &str, body: &str) -> Result<HttpResponse, HttpError> {
            self.next(format!("{url} {body}"))
        }
    }

    fn ok(body: String) -> Result<HttpResponse, HttpError> {
        Ok(HttpResponse { status: 200, body })
    }

    fn play_page(ids: &[&str], token: Option<&str>) -> String {
        let items: Vec<Value> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                serde_json::json!([
                    id, ["someone", null], 4, null,
                    format!("review number {id} is here"),
                    [1_700_000_000i64 - i as i64 * 86_400, 0]
                ])
            })
            .collect();
        let data = serde_json::json!([items, [null, token]]);
        let frame = serde_json::json!([["wrb.fr", "UsvDTd", data.to_string(), null, null, null, "generic"]]);
        format!(")]}}'\n\n{}\n25\n[[\"e\",4,null,null,123]]", frame)
    }

    fn feed(ids: &[&str]) -> String {
        let mut entries = vec![serde_json::json!({"im:name": {"label": "App"}})];
        for id in ids {
            entries.push(serde_json::json!({
                "id": {"label": id},
                "im:rating": {"label": "2"},
                "updated": {"label": "2024-05-01T10:00:00-07:00"},
                "content": {"label": format!("text of {id}"), "attributes": {"type": "text"}},
            }));
        }
        serde_json::json!({"feed": {"entry": entries}}).to_string()
    }

    #[test]
    fn play_pagination_resumes_without_overlap() {
        let http = Scripted::new(vec![
            ok(play_page(&["a", "b"], Some("tok1"))),
            ok(play_page(&["c", "d"], None)),
        ]);
        let client = PlayClient::new(&http, RetryPolicy::none());
        let first = client.fetch_reviews("com.example.app", None, 2).unwrap();
        assert!(!first.exhausted);
        assert_eq!(first.next_page_token.as_deref(), Some("tok1"));
        assert_eq!(first.records[0].rating, Some(4));
        let second = client
            .fetch_reviews("com.example.app", first.next_page_token.as_deref(), 2)
            .unwrap();
        assert!(second.exhausted && second.next_page_token.is_none());
        let ids: Vec<_> = first.records.iter().chain(&second.records).map(|r| &r.id).collect();
        assert_eq!(ids, ["a", "b", "c", "d"]);
        let reqs = http.requests.lock().unwrap();
        assert!(reqs[1].contains("tok1"));
    }

    #[test]
    fn play_unknown_package() {
        let http = Scripted::new(vec![]);
        let client = PlayClient::new(&http, RetryPolicy::none());
        assert!(matches!(
            client.fetch_reviews("not a package", None, 100),
            Err(IngestError::AppNotFound(_))
        ));
        let frame = r#")]}'

[["wrb.fr","UsvDTd",null,null,null,[5],"generic"]]"#;
        let http = Scripted::new(vec![ok(frame.to_string())]);
        let client = PlayClient::new(&http, RetryPolicy::none());
        assert!(matches!(
            client.fetch_reviews("com.nope.missing", None, 100),
            Err(IngestError::AppNotFound(_))
        ));
    }

    #[test]
    fn retries_transient_then_succeeds() {
        let http = Scripted::new(vec![
            Err(HttpError::Transport { url: "u".into(), message: "reset".into() }),
            Ok(HttpResponse { status: 503, body: String::new() }),
            ok(play_page(&["a"], None)),
        ]);
        let client = PlayClient::new(&http, RetryPolicy { max_retries: 3, ..RetryPolicy::none() });
        let batch = client.fetch_reviews("com.example.app", None, 10).unwrap();
        assert_eq!(batch.records.len(), 1);
        assert_eq!(http.requests.lock().unwrap().len(), 3);
    }

    #[test]
    fn rate_limit_surfaces() {
        let http = Scripted::new(vec![Ok(HttpResponse { status: 429, body: String::new() })]);
        let client = PlayClient::new(&http, RetryPolicy::default());
        assert!(matches!(
            client.fetch_reviews("com.example.app", None, 10),
            Err(IngestError::RateLimited { status: 429 })
        ));
    }

    #[test]
    fn backoff_doubles_and_caps() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(0), Duration::from_millis(500));
        assert_eq!(p.delay(2), Duration::from_secs(2));
        assert_eq!(p.delay(10), Duration::from_secs(16));
    }

    #[test]
    fn appstore_page_parses_rating_and_date() {
        let http = Scripted::new(vec![ok(feed(&["r1", "r2"]))]);
        let client = AppStoreClient::new(&http, RetryPolicy::none());
        let batch = client.fetch_reviews("1058882138", "us", 1).unwrap();
        assert_eq!(batch.records.len(), 2);
        assert_eq!(batch.records[0].rating, Some(2));
        assert_eq!(batch.records[0].posted_at, NaiveDate::from_ymd_opt(2024, 5, 1));
        assert_eq!(batch.next_page_token.as_deref(), Some("2"));
    }

    #[test]
    fn appstore_beyond_depth_is_exhausted() {
        let http = Scripted::new(vec![]);
        let client = AppStoreClient::new(&http, RetryPolicy::none());
        let batch = client.fetch_reviews("1058882138", "us", 11).unwrap();
        assert!(batch.exhausted && batch.records.is_empty());
        let http = Scripted::new(vec![ok(r#"{"feed":{"author":{}}}"#.into())]);
        let client = AppStoreClient::new(&http, RetryPolicy::none());
        assert!(client.fetch_reviews("1058882138", "us", 3).unwrap().exhausted);
    }

    #[test]
    fn appstore_malformed_payload() {
        let http = Scripted::new(vec![ok("<html>oops".into())]);
        let client = AppStoreClient::new(&http, RetryPolicy::none());
        match client.fetch_reviews("1", "us", 1) {
            Err(IngestError::Network(msg)) => assert!(msg.contains("parse")),
            other => panic!("expected network error, got {other:?}"),
        }
    }

    #[test]
    fn collect_from_replay_directory() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayHttp::new(dir.path());
        for page in 1..=2u32 {
            let body = if page == 1 { feed(&["x1", "x2"]) } else { feed(&["x2", "x3"]) };
            replay
                .record("GET", &appstore_feed_url("42", "us", page), "", &HttpResponse { status: 200, body })
                .unwrap();
        }
        replay
            .record("GET", &appstore_feed_url("42", "us", 3), "", &HttpResponse { status: 200, body: feed(&[]) })
            .unwrap();
        let src = AppSource {
            app_id: "42".into(),
            store: Store::Appstore,
            country: "us".into(),
            page_size: 50,
            max_pages: None,
        };
        let all = collect_apps(&replay, RetryPolicy::none(), &[src.clone(), src]);
        for r in all {
            let ids: Vec<_> = r.unwrap().into_iter().map(|r| r.id).collect();
            assert_eq!(ids, ["x1", "x2", "x3"]);
        }
    }
}
