//! Phrase detection, vocabulary construction and bag-of-words encoding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type TermId = u32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("no documents")]
    EmptyCorpus,
    #[error("vocabulary filters removed every token")]
    EmptyVocabulary,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Joins phrase parts into one token.
pub const PHRASE_JOINER: char = '_';

fn parts(token: &str) -> usize {
    token.split(PHRASE_JOINER).count()
}

/// Association score of an adjacent pair:
/// `(count(ab) − min_count) · N / (count(a) · count(b))`, N = total tokens.
pub fn phrase_score(pair_count: usize, count_a: usize, count_b: usize, total: usize, min_count: usize) -> f64 {
    (pair_count as f64 - min_count as f64) * total as f64 / (count_a as f64 * count_b as f64)
}

/// One left-to-right merge pass. `max_parts` caps the size of a merged token.
fn merge_pass(docs: &[Vec<String>], min_count: usize, threshold: f64, max_parts: usize) -> Vec<Vec<String>> {
    let mut unigram: HashMap<&str, usize> = HashMap::new();
    let mut bigram: HashMap<(&str, &str), usize> = HashMap::new();
    let mut total = 0usize;
    for doc in docs {
        total += doc.len();
        for t in doc {
            *unigram.entry(t.as_str()).or_default() += 1;
        }
        for w in doc.windows(2) {
            *bigram.entry((w[0].as_str(), w[1].as_str())).or_default() += 1;
        }
    }
    let accepted = |a: &str, b: &str| -> bool {
        if parts(a) + parts(b) > max_parts {
            return false;
        }
        let n_ab = bigram.get(&(a, b)).copied().unwrap_or(0);
        n_ab >= min_count
            && phrase_score(n_ab, unigram[a], unigram[b], total, min_count) > threshold
    };
    docs.iter()
        .map(|doc| {
            let mut out = Vec::with_capacity(doc.len());
            let mut i = 0;
            while i < doc.len() {
                if i + 1 < doc.len() && accepted(&doc[i], &doc[i + 1]) {
                    out.push(format!("{}{PHRASE_JOINER}{}", doc[i], doc[i + 1]));
                    i += 2;
                } else {
                    out.push(doc[i].clone());
                    i += 1;
                }
            }
            out
        })
        .collect()
}

/// Merges frequent adjacent pairs into underscore-joined phrase tokens:
/// a first pass forms two-word phrases, a second pass extends them to
/// three-word phrases.
pub fn detect_phrases(
    docs: &[Vec<String>],
    min_count: usize,
    score_threshold: f64,
) -> Result<Vec<Vec<String>>, CorpusError> {
    if min_count < 2 {
        return Err(CorpusError::InvalidArgument("min_count must be ≥ 2".into()));
    }
    let bigrams = merge_pass(docs, min_count, score_threshold, 2);
    Ok(merge_pass(&bigrams, min_count, score_threshold, 3))
}

/// Dense token ids in lexicographic order, with document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, TermId>,
    id_to_token: Vec<String>,
    doc_freq: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    doc_freq: Vec<u32>,
}

impl Vocabulary {
    pub fn from_parts(tokens: Vec<String>, doc_freq: Vec<u32>) -> Result<Self, CorpusError> {
        if tokens.len() != doc_freq.len() {
            return Err(CorpusError::InvalidArgument(format!(
                "{} tokens but {} document frequencies",
                tokens.len(),
                doc_freq.len()
            )));
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if token_to_id.insert(t.clone(), i as TermId).is_some() {
                return Err(CorpusError::InvalidArgument(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self {
            token_to_id,
            id_to_token: tokens,
            doc_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TermId> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: TermId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn doc_freq(&self) -> &[u32] {
        &self.doc_freq
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VocabFile {
            tokens: self.id_to_token.clone(),
            doc_freq: self.doc_freq.clone(),
        })
        .expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let f: VocabFile = serde_json::from_str(text).map_err(|e| CorpusError::Format {
            path: "vocab.json".into(),
            line: e.line(),
            message: e.to_string(),
        })?;
        Self::from_parts(f.tokens, f.doc_freq)
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Maps a lemma sequence to ids, dropping out-of-vocabulary lemmas.
    pub fn encode(&self, doc: &[String]) -> Vec<TermId> {
        doc.iter().filter_map(|t| self.id(t)).collect()
    }
}

/// Keeps tokens found in at least `min_doc_freq` documents and in no more
/// than `max_doc_fraction` of them.
pub fn build_vocabulary(
    docs: &[Vec<String>],
    min_doc_freq: usize,
    max_doc_fraction: f64,
) -> Result<Vocabulary, CorpusError> {
    if docs.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, u32> = BTreeMap::new();
    for doc in docs {
        let unique: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let max_docs = max_doc_fraction * docs.len() as f64;
    let (tokens, freqs): (Vec<String>, Vec<u32>) = df
        .into_iter()
        .filter(|&(_, n)| n as usize >= min_doc_freq && n as f64 <= max_docs)
        .map(|(t, n)| (t.to_string(), n))
        .unzip();
    if tokens.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    Vocabulary::from_parts(tokens, freqs)
}

/// Sparse term counts of one review, term ids strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowDocument {
    pub review_id: String,
    pub counts: Vec<(TermId, u32)>,
}

impl BowDocument {
    pub fn len(&self) -> usize {
        self.counts.iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Expands counts back into a token-id sequence (ids ascending).
    pub fn token_ids(&self) -> Vec<TermId> {
        self.counts
            .iter()
            .flat_map(|&(id, c)| std::iter::repeat_n(id, c as usize))
            .collect()
    }

    /// Tokens in id order, each repeated by its count.
    pub fn decode(&self, vocab: &Vocabulary) -> Vec<String> {
        self.token_ids()
            .into_iter()
            .filter_map(|id| vocab.token(id).map(str::to_string))
            .collect()
    }
}

pub fn to_bow(review_id: &str, doc: &[String], vocab: &Vocabulary) -> BowDocument {
    let mut counts: BTreeMap<TermId, u32> = BTreeMap::new();
    for id in vocab.encode(doc) {
        *counts.entry(id).or_default() += 1;
    }
    BowDocument {
        review_id: review_id.to_string(),
        counts: counts.into_iter().collect(),
    }
}

/// `review_id<TAB>id:count id:count…`, one line per document.
pub fn write_bow(path: &Path, docs: &[BowDocument]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for d in docs {
        out.push_str(&d.review_id);
        out.push('\t');
        for (i, (id, c)) in d.counts.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{id}:{c}");
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_bow(path: &Path) -> Result<Vec<BowDocument>, CorpusError> {
    let text = fs::read_to_string(path)?;
    let err = |line: usize, message: String| CorpusError::Format {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| err(i + 1, "missing TAB after review id".into()))?;
        let mut counts = Vec::new();
        for pair in rest.split_whitespace() {
            let (t, c) = pair
                .split_once(':')
                .ok_or_else(|| err(i + 1, format!("bad pair {pair:?}")))?;
            let t: TermId = t.parse().map_err(|_| err(i + 1, format!("bad term id {t:?}")))?;
            let c: u32 = c.parse().map_err(|_| err(i + 1, format!("bad count {c:?}")))?;
            if c == 0 || counts.last().is_some_and(|&(prev, _)| prev >= t) {
                return Err(err(i + 1, "counts must be positive with increasing ids".into()));
            }
            counts.push((t, c));
        }
        docs.push(BowDocument {
            review_id: id.to_string(),
            counts,
        });
    }
    Ok(docs)
}
