//! Review acquisition and exclusion filtering.
//!
//! Reviews come either from the public store endpoints ([`store`]) or from a
//! local JSON Lines / CSV file ([`load_reviews_file`]). [`filter_reviews`]
//! applies the exclusion criteria: minimum length, English only, and
//! per-app duplicate removal.

mod filter;
mod load;
pub mod store;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use filter::{
    filter_reviews, is_english, FilterConfig, FilterOutcome, RejectReason, FUNCTION_WORDS,
};
pub use load::{load_reviews_file, read_reviews_jsonl, write_reviews_jsonl, LoadedReviews};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Store {
    Play,
    Appstore,
}

impl Store {
    pub fn as_str(self) -> &'static str {
        match self {
            Store::Play => "play",
            Store::Appstore => "appstore",
        }
    }
}

impl std::str::FromStr for Store {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "play" => Ok(Store::Play),
            "appstore" => Ok(Store::Appstore),
            other => Err(IngestError::Format(format!("unknown store {other:?}"))),
        }
    }
}

/// One user review with its store metadata.
///
/// `rating` is carried through for completeness but no analysis stage reads
/// it: star ratings say nothing about which ethical aspect a review concerns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub id: String,
    pub app_id: String,
    pub store: Store,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rating: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posted_at: Option<NaiveDate>,
    pub fetched_at: DateTime<Utc>,
}

impl ReviewRecord {
    /// Builds a record, deriving the id from the content when the store gave
    /// none. Fails when the text is blank or the rating is out of range.
    pub fn new(
        id: Option<String>,
        app_id: impl Into<String>,
        store: Store,
        text: impl Into<String>,
        rating: Option<u8>,
        posted_at: Option<NaiveDate>,
        fetched_at: DateTime<Utc>,
    ) -> Result<Self, IngestError> {
        let app_id = app_id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(IngestError::Format("review text is empty".into()));
        }
        if let Some(r) = rating {
            if !(1..=5).contains(&r) {
                return Err(IngestError::Format(format!("rating {r} outside 1..5")));
            }
        }
        let id = match id {
            Some(id) if !id.trim().is_empty() => id,
            _ => content_id(&app_id, store, &text),
        };
        Ok(Self {
            id,
            app_id,
            store,
            text,
            rating,
            posted_at,
            fetched_at,
        })
    }

    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Content hash used as the review id when the source has none.
pub fn content_id(app_id: &str, store: Store, text: &str) -> String {
    let mut h = Sha256::new();
    h.update(app_id.as_bytes());
    h.update([0]);
    h.update(store.as_str().as_bytes());
    h.update([0]);
    h.update(text.as_bytes());
    let d = h.finalize();
    let hex: String = d[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("h{hex}")
}

/// One page of reviews from a store.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReviewBatch {
    pub records: Vec<ReviewRecord>,
    pub next_page_token: Option<String>,
    pub exhausted: bool,
}

impl ReviewBatch {
    pub fn exhausted() -> Self {
        Self {
            records: Vec::new(),
            next_page_token: None,
            exhausted: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("network error: {0}")]
    Network(String),
    #[error("app not found: {0}")]
    AppNotFound(String),
    #[error("rate limited by store (HTTP {status}); back off before retrying")]
    RateLimited { status: u16 },
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
