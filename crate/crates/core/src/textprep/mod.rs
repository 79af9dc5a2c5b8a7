//! Review text cleaning, tokenization, lemmatization and corpus statistics.
//!
//! The lookup tables (stopwords, domain words, slang, lemmas) are plain text
//! files under `resources/`. The bundled copies are compiled in; any of them
//! can be replaced at run time via [`TextResources::load`].

mod clean;
mod lemma;
mod stats;

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clean::{clean_text, tokenize};
pub use lemma::{expand_slang, lemma_of, lemmatize, remove_stopwords, MIN_LEMMA_CHARS};
pub use stats::{
    corpus_stats, count_chars, count_sentences, count_syllables, count_words, reading_ease,
    stats_table, CorpusStats, Spread, StatsTable,
};

use crate::ingest::ReviewRecord;

pub const BUNDLED_STOPWORDS: &str = include_str!("../../resources/stopwords_en.txt");
pub const BUNDLED_DOMAIN_WORDS: &str = include_str!("../../resources/domain_words.txt");
pub const BUNDLED_SLANG: &str = include_str!("../../resources/slang.tsv");
pub const BUNDLED_LEMMAS: &str = include_str!("../../resources/lemmas.tsv");

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("resource {path}: {message}")]
    Resource { path: String, message: String },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn content_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
}

pub fn parse_word_list(text: &str) -> HashSet<String> {
    content_lines(text).map(|l| l.trim().to_lowercase()).collect()
}

fn parse_pairs(text: &str, origin: &str) -> Result<Vec<(String, String)>, TextprepError> {
    content_lines(text)
        .map(|l| {
            l.split_once('\t')
                .map(|(a, b)| (a.trim().to_lowercase(), b.trim().to_lowercase()))
                .ok_or_else(|| TextprepError::Resource {
                    path: origin.to_string(),
                    message: format!("expected TAB-separated pair, got {l:?}"),
                })
        })
        .collect()
}

/// Lookup tables driving preprocessing.
#[derive(Debug, Clone)]
pub struct TextResources {
    /// English stopwords together with the domain words.
    pub stoplist: HashSet<String>,
    pub slang: HashMap<String, Vec<String>>,
    pub lemmas: HashMap<String, String>,
}

/// Optional replacements for the bundled tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourcePaths {
    pub stopwords: Option<PathBuf>,
    pub domain_words: Option<PathBuf>,
    pub slang: Option<PathBuf>,
    pub lemmas: Option<PathBuf>,
}

impl TextResources {
    pub fn bundled() -> Self {
        Self::from_texts(BUNDLED_STOPWORDS, BUNDLED_DOMAIN_WORDS, BUNDLED_SLANG, BUNDLED_LEMMAS)
            .expect("bundled resources are well-formed")
    }

    pub fn from_texts(
        stopwords: &str,
        domain_words: &str,
        slang: &str,
        lemmas: &str,
    ) -> Result<Self, TextprepError> {
        let mut stoplist = parse_word_list(stopwords);
        stoplist.extend(parse_word_list(domain_words));
        let slang = parse_pairs(slang, "slang")?
            .into_iter()
            .map(|(k, v)| (k, v.split_whitespace().map(str::to_string).collect()))
            .collect();
        let lemmas = parse_pairs(lemmas, "lemmas")?.into_iter().collect();
        Ok(Self {
            stoplist,
            slang,
            lemmas,
        })
    }

    pub fn load(paths: &ResourcePaths) -> Result<Self, TextprepError> {
        let read = |p: &Option<PathBuf>, fallback: &'static str| -> Result<String, TextprepError> {
            match p {
                None => Ok(fallback.to_string()),
                Some(p) => std::fs::read_to_string(p).map_err(|e| TextprepError::Resource {
                    path: p.display().to_string(),
                    message: e.to_string(),
                }),
            }
        };
        Self::from_texts(
            &read(&paths.stopwords, BUNDLED_STOPWORDS)?,
            &read(&paths.domain_words, BUNDLED_DOMAIN_WORDS)?,
            &read(&paths.slang, BUNDLED_SLANG)?,
            &read(&paths.lemmas, BUNDLED_LEMMAS)?,
        )
    }

    pub fn add_domain_words<I, S>(&mut self, words: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.stoplist
            .extend(words.into_iter().map(|w| w.as_ref().to_lowercase()));
    }

    /// Cleaned, slang-expanded tokens mapped to lemmas, keeping short lemmas
    /// and stopwords. Used where negators such as "not" must survive.
    pub fn lemma_sequence(&self, raw: &str) -> Vec<String> {
        let tokens = expand_slang(&tokenize(&clean_text(raw)), &self.slang);
        tokens.iter().map(|t| lemma_of(t, &self.lemmas)).collect()
    }

    /// Content lemmas of free text: the full pipeline without a review id.
    pub fn content_lemmas(&self, raw: &str) -> Vec<String> {
        let tokens = expand_slang(&tokenize(&clean_text(raw)), &self.slang);
        remove_stopwords(&lemmatize(&tokens, &self.lemmas), &self.stoplist)
    }
}

/// A review after preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanDocument {
    pub review_id: String,
    pub raw_text: String,
    pub clean_text: String,
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
}

pub struct Preprocessor {
    pub resources: TextResources,
    /// Reviews whose reading-ease score falls below this are discarded.
    pub readability_floor: f64,
}

pub const DEFAULT_READABILITY_FLOOR: f64 = -30.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrepOutcome {
    pub documents: Vec<CleanDocument>,
    /// Ids of reviews discarded by the readability gate.
    pub unreadable: Vec<String>,
}

impl Preprocessor {
    pub fn new(resources: TextResources) -> Self {
        Self {
            resources,
            readability_floor: DEFAULT_READABILITY_FLOOR,
        }
    }

    pub fn process(&self, review: &ReviewRecord) -> CleanDocument {
        let clean = clean_text(&review.text);
        let tokens = expand_slang(&tokenize(&clean), &self.resources.slang);
        let lemmas = remove_stopwords(
            &lemmatize(&tokens, &self.resources.lemmas),
            &self.resources.stoplist,
        );
        CleanDocument {
            review_id: review.id.clone(),
            raw_text: review.text.clone(),
            clean_text: clean,
            tokens,
            lemmas,
        }
    }

    pub fn passes_readability(&self, review: &ReviewRecord) -> bool {
        reading_ease(&review.text) >= self.readability_floor
    }

    /// Processes every review that clears the readability gate, in input
    /// order. Work is split across threads; output order does not depend on
    /// the split.
    pub fn run(&self, reviews: &[ReviewRecord]) -> PrepOutcome {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
        let chunk = reviews.len().div_ceil(threads).max(64);
        let parts: Vec<Vec<Result<CleanDocument, String>>> = std::thread::scope(|s| {
            let handles: Vec<_> = reviews
                .chunks(chunk)
                .map(|c| {
                    s.spawn(move || {
                        c.iter()
                            .map(|r| {
                                if self.passes_readability(r) {
                                    Ok(self.process(r))
                                } else {
                                    Err(r.id.clone())
                                }
                            })
                            .collect()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        let mut out = PrepOutcome::default();
        for item in parts.into_iter().flatten() {
            match item {
                Ok(doc) => out.documents.push(doc),
                Err(id) => out.unreadable.push(id),
            }
        }
        out
    }
}

pub fn write_clean_jsonl(path: &Path, docs: &[CleanDocument]) -> Result<(), TextprepError> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in docs {
        serde_json::to_writer(&mut w, d).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_clean_jsonl(path: &Path) -> Result<Vec<CleanDocument>, TextprepError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| TextprepError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(out)
}
