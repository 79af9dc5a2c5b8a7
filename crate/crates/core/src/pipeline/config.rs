//! Flat `key = value` run configuration. Blank lines and `#` comments are
//! ignored; list values are comma-separated; relative paths resolve against
//! the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::align::TopicText;
use crate::ingest::{FilterConfig, Store};
use crate::topicmodel::{Alpha, LdaConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {key}: {message}")]
    Value { key: String, message: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingChoice {
    StaticVectors,
    HttpInference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentimentChoice {
    Lexicon,
    HttpAbsa,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppSpec {
    pub store: Store,
    pub app_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    // ingest
    pub input: Option<PathBuf>,
    pub apps: Vec<AppSpec>,
    pub country: String,
    pub page_size: usize,
    pub max_pages: Option<usize>,
    pub filter: FilterConfig,
    // prep
    pub readability_floor: f64,
    pub stopwords: Option<PathBuf>,
    pub domain_words: Option<PathBuf>,
    pub slang: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
    // corpus
    pub phrase_min_count: usize,
    pub phrase_threshold: f64,
    pub min_df: usize,
    pub max_df: f64,
    // sweep and train
    pub k_values: Vec<usize>,
    pub k: Option<usize>,
    pub lda: LdaConfig,
    pub window_size: usize,
    pub top_n: usize,
    pub tau_doc: f64,
    // align
    pub threshold: f64,
    pub align_top_n: usize,
    pub topic_text: TopicText,
    pub taxonomy: Option<PathBuf>,
    pub emergent_overlay: bool,
    pub embedding_provider: EmbeddingChoice,
    pub embedding_endpoint: Option<String>,
    pub max_in_flight: usize,
    // sentiment
    pub sentiment_provider: SentimentChoice,
    pub sentiment_endpoint: Option<String>,
    pub lexicon: Option<PathBuf>,
    pub negators: Option<PathBuf>,
    pub negation_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            apps: Vec::new(),
            country: "us".into(),
            page_size: 100,
            max_pages: None,
            filter: FilterConfig::default(),
            readability_floor: crate::textprep::DEFAULT_READABILITY_FLOOR,
            stopwords: None,
            domain_words: None,
            slang: None,
            lemmas: None,
            phrase_min_count: 5,
            phrase_threshold: 10.0,
            min_df: 2,
            max_df: 0.5,
            k_values: (5..=150).step_by(5).collect(),
            k: None,
            lda: LdaConfig::default(),
            window_size: crate::coherence::DEFAULT_WINDOW,
            top_n: crate::topicmodel::DEFAULT_TOP_N,
            tau_doc: crate::topicmodel::DEFAULT_TAU_DOC,
            threshold: crate::align::DEFAULT_THRESHOLD,
            align_top_n: 10,
            topic_text: TopicText::Joined,
            taxonomy: None,
            emergent_overlay: false,
            embedding_provider: EmbeddingChoice::StaticVectors,
            embedding_endpoint: None,
            max_in_flight: 4,
            sentiment_provider: SentimentChoice::Lexicon,
            sentiment_endpoint: None,
            lexicon: None,
            negators: None,
            negation_window: crate::sentiment::DEFAULT_NEGATION_WINDOW,
        }
    }
}

/// Every recognised key, in documentation order.
pub const KEYS: &[&str] = &[
    "input",
    "apps",
    "country",
    "page_size",
    "max_pages",
    "min_words",
    "english_only",
    "dedupe",
    "readability_floor",
    "stopwords",
    "domain_words",
    "slang",
    "lemmas",
    "phrase_min_count",
    "phrase_threshold",
    "min_df",
    "max_df",
    "k_values",
    "k",
    "alpha",
    "beta",
    "passes",
    "burn_in",
    "sample_lag",
    "seed",
    "partitions",
    "chunk_size",
    "window_size",
    "top_n",
    "tau_doc",
    "threshold",
    "align_top_n",
    "topic_text",
    "taxonomy",
    "emergent_overlay",
    "embedding_provider",
    "embedding_endpoint",
    "max_in_flight",
    "sentiment_provider",
    "sentiment_endpoint",
    "lexicon",
    "negators",
    "negation_window",
];

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| value_err(key, format!("cannot parse {v:?}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(value_err(key, format!("expected true or false, got {v:?}"))),
    }
}

fn opt(v: &str) -> Option<&str> {
    (!v.is_empty()).then_some(v)
}

fn fmt_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl PipelineConfig {
    /// Parses config text. Relative paths are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            cfg.set_in(k.trim(), v.trim(), base_dir)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Sets one key; relative paths resolve against the working directory.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_in(key, value, Path::new(""))
    }

    fn set_in(&mut self, key: &str, v: &str, base: &Path) -> Result<(), ConfigError> {
        let path = |v: &str| opt(v).map(|p| base.join(p));
        match key {
            "input" => self.input = path(v),
            "apps" => {
                self.apps = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        let (store, app) = s
                            .split_once(':')
                            .ok_or_else(|| value_err(key, format!("expected store:app_id, got {s:?}")))?;
                        Ok(AppSpec {
                            store: store.parse().map_err(|e: crate::ingest::IngestError| value_err(key, e.to_string()))?,
                            app_id: app.to_string(),
                        })
                    })
                    .collect::<Result<_, ConfigError>>()?
            }
            "country" => self.country = v.to_lowercase(),
            "page_size" => self.page_size = parse_num(key, v)?,
            "max_pages" => self.max_pages = opt(v).map(|v| parse_num(key, v)).transpose()?,
            "min_words" => self.filter.min_words = parse_num(key, v)?,
            "english_only" => self.filter.english_only = parse_bool(key, v)?,
            "dedupe" => self.filter.dedupe = parse_bool(key, v)?,
            "readability_floor" => self.readability_floor = parse_num(key, v)?,
            "stopwords" => self.stopwords = path(v),
            "domain_words" => self.domain_words = path(v),
            "slang" => self.slang = path(v),
            "lemmas" => self.lemmas = path(v),
            "phrase_min_count" => self.phrase_min_count = parse_num(key, v)?,
            "phrase_threshold" => self.phrase_threshold = parse_num(key, v)?,
            "min_df" => self.min_df = parse_num(key, v)?,
            "max_df" => self.max_df = parse_num(key, v)?,
            "k_values" => {
                self.k_values = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num(key, s))
                    .collect::<Result<_, _>>()?
            }
            "k" => self.k = opt(v).map(|v| parse_num(key, v)).transpose()?,
            "alpha" => self.lda.alpha = v.parse::<Alpha>().map_err(|e| value_err(key, e))?,
            "beta" => self.lda.beta = parse_num(key, v)?,
            "passes" => self.lda.passes = parse_num(key, v)?,
            "burn_in" => self.lda.burn_in = parse_num(key, v)?,
            "sample_lag" => self.lda.sample_lag = parse_num(key, v)?,
            "seed" => self.lda.seed = parse_num(key, v)?,
            "partitions" => self.lda.partitions = parse_num(key, v)?,
            "chunk_size" => self.lda.chunk_size = parse_num(key, v)?,
            "window_size" => self.window_size = parse_num(key, v)?,
            "top_n" => self.top_n = parse_num(key, v)?,
            "tau_doc" => self.tau_doc = parse_num(key, v)?,
            "threshold" => self.threshold = parse_num(key, v)?,
            "align_top_n" => self.align_top_n = parse_num(key, v)?,
            "topic_text" => {
                self.topic_text = match v {
                    "joined" => TopicText::Joined,
                    "weighted" => TopicText::Weighted,
                    _ => return Err(value_err(key, "expected joined or weighted")),
                }
            }
            "taxonomy" => self.taxonomy = path(v),
            "emergent_overlay" => self.emergent_overlay = parse_bool(key, v)?,
            "embedding_provider" => {
                self.embedding_provider = match v {
                    "static-vectors" => EmbeddingChoice::StaticVectors,
                    "http-inference" => EmbeddingChoice::HttpInference,
                    _ => return Err(value_err(key, "expected static-vectors or http-inference")),
                }
            }
            "embedding_endpoint" => self.embedding_endpoint = opt(v).map(String::from),
            "max_in_flight" => self.max_in_flight = parse_num(key, v)?,
            "sentiment_provider" => {
                self.sentiment_provider = match v {
                    "lexicon" => SentimentChoice::Lexicon,
                    "http-absa" => SentimentChoice::HttpAbsa,
                    _ => return Err(value_err(key, "expected lexicon or http-absa")),
                }
            }
            "sentiment_endpoint" => self.sentiment_endpoint = opt(v).map(String::from),
            "lexicon" => self.lexicon = path(v),
            "negators" => self.negators = path(v),
            "negation_window" => self.negation_window = parse_num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.filter.min_words < 1 {
            return bad("min_words must be ≥ 1");
        }
        if self.phrase_min_count < 2 {
            return bad("phrase_min_count must be ≥ 2");
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return bad("max_df must lie in (0, 1]");
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return bad("k_values must list positive integers");
        }
        if self.k == Some(0) {
            return bad("k must be positive");
        }
        if self.window_size < 2 {
            return bad("window_size must be ≥ 2");
        }
        if self.top_n < 2 || self.align_top_n < 1 {
            return bad("top_n must be ≥ 2 and align_top_n ≥ 1");
        }
        if !(self.tau_doc > 0.0 && self.tau_doc < 1.0) {
            return bad("tau_doc must lie in (0, 1)");
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [-1, 1]");
        }
        if self.embedding_provider == EmbeddingChoice::HttpInference && self.embedding_endpoint.is_none() {
            return bad("embedding_provider = http-inference needs embedding_endpoint");
        }
        if self.sentiment_provider == SentimentChoice::HttpAbsa && self.sentiment_endpoint.is_none() {
            return bad("sentiment_provider = http-absa needs sentiment_endpoint");
        }
        self.lda
            .with_k(self.k.unwrap_or(self.k_values[0]))
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// The effective value of every key, as it would be written in a file.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let alpha = match self.lda.alpha {
            Alpha::SymmetricDefault => "symmetric-default".to_string(),
            Alpha::Value(a) => a.to_string(),
        };
        let pairs: Vec<(&str, String)> = vec![
            ("input", fmt_path(&self.input)),
            (
                "apps",
                self.apps
                    .iter()
                    .map(|a| format!("{}:{}", a.store.as_str(), a.app_id))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("country", self.country.clone()),
            ("page_size", self.page_size.to_string()),
            ("max_pages", fmt_opt(&self.max_pages)),
            ("min_words", self.filter.min_words.to_string()),
            ("english_only", self.filter.english_only.to_string()),
            ("dedupe", self.filter.dedupe.to_string()),
            ("readability_floor", self.readability_floor.to_string()),
            ("stopwords", fmt_path(&self.stopwords)),
            ("domain_words", fmt_path(&self.domain_words)),
            ("slang", fmt_path(&self.slang)),
            ("lemmas", fmt_path(&self.lemmas)),
            ("phrase_min_count", self.phrase_min_count.to_string()),
            ("phrase_threshold", self.phrase_threshold.to_string()),
            ("min_df", self.min_df.to_string()),
            ("max_df", self.max_df.to_string()),
            ("k_values", join(&self.k_values)),
            ("k", fmt_opt(&self.k)),
            ("alpha", alpha),
            ("beta", self.lda.beta.to_string()),
            ("passes", self.lda.passes.to_string()),
            ("burn_in", self.lda.burn_in.to_string()),
            ("sample_lag", self.lda.sample_lag.to_string()),
            ("seed", self.lda.seed.to_string()),
            ("partitions", self.lda.partitions.to_string()),
            ("chunk_size", self.lda.chunk_size.to_string()),
            ("window_size", self.window_size.to_string()),
            ("top_n", self.top_n.to_string()),
            ("tau_doc", self.tau_doc.to_string()),
            ("threshold", self.threshold.to_string()),
            ("align_top_n", self.align_top_n.to_string()),
            (
                "topic_text",
                match self.topic_text {
                    TopicText::Joined => "joined",
                    TopicText::Weighted => "weighted",
                }
                .into(),
            ),
            ("taxonomy", fmt_path(&self.taxonomy)),
            ("emergent_overlay", self.emergent_overlay.to_string()),
            (
                "embedding_provider",
                match self.embedding_provider {
                    EmbeddingChoice::StaticVectors => "static-vectors",
                    EmbeddingChoice::HttpInference => "http-inference",
                }
                .into(),
            ),
            ("embedding_endpoint", self.embedding_endpoint.clone().unwrap_or_default()),
            ("max_in_flight", self.max_in_flight.to_string()),
            (
                "sentiment_provider",
                match self.sentiment_provider {
                    SentimentChoice::Lexicon => "lexicon",
                    SentimentChoice::HttpAbsa => "http-absa",
                }
                .into(),
            ),
            ("sentiment_endpoint", self.sentiment_endpoint.clone().unwrap_or_default()),
            ("lexicon", fmt_path(&self.lexicon)),
            ("negators", fmt_path(&self.negators)),
            ("negation_window", self.negation_window.to_string()),
        ];
        debug_assert_eq!(pairs.len(), KEYS.len());
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Rebuilds a config from [`entries`](Self::entries) output.
    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, v) in entries {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
