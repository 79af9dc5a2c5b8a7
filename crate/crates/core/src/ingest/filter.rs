use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::ReviewRecord;

/// Exclusion criteria applied after acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub min_words: usize,
    pub english_only: bool,
    pub dedupe: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_words: 5,
            english_only: true,
            dedupe: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    TooShort,
    NonEnglish,
    Duplicate,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::TooShort => "too_short",
            RejectReason::NonEnglish => "non_english",
            RejectReason::Duplicate => "duplicate",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<ReviewRecord>,
    /// Every dropped record counted under exactly one reason.
    pub rejected_counts: BTreeMap<String, usize>,
    /// Ids of dropped records with the reason, in input order.
    pub rejected: Vec<(String, RejectReason)>,
}

/// English function words. A review must contain at least one to count as
/// English.
pub const FUNCTION_WORDS: [&str; 100] = [
    "the", "a", "an", "and", "or", "but", "if", "of", "to", "in", "on", "at", "for", "with",
    "from", "by", "about", "as", "into", "like", "through", "after", "over", "between", "out",
    "against", "during", "without", "before", "under", "around", "i", "me", "my", "you", "your",
    "he", "him", "his", "she", "her", "it", "its", "we", "us", "our", "they", "them", "their",
    "this", "that", "these", "those", "is", "am", "are", "was", "were", "be", "been", "being",
    "have", "has", "had", "do", "does", "did", "will", "would", "can", "could", "should", "may",
    "might", "must", "not", "no", "so", "very", "just", "too", "also", "than", "then", "there",
    "here", "when", "where", "why", "how", "what", "which", "who", "all", "some", "any", "more",
    "most", "only", "really",
];

const ASCII_LETTER_SHARE: f64 = 0.85;

/// At least 85% of alphabetic characters are ASCII letters and at least one
/// word is an English function word.
pub fn is_english(text: &str) -> bool {
    let (mut alpha, mut ascii) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        alpha += 1;
        if c.is_ascii_alphabetic() {
            ascii += 1;
        }
    }
    if alpha == 0 || (ascii as f64) < ASCII_LETTER_SHARE * alpha as f64 {
        return false;
    }
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
        .any(|w| FUNCTION_WORDS.contains(&w))
}

fn dedupe_key(r: &ReviewRecord) -> (String, String) {
    let norm = r
        .text
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ");
    (r.app_id.clone(), norm)
}

/// Applies the exclusion criteria in order: length, language, duplicates.
///
/// Among duplicates (same app, same case-folded whitespace-collapsed text, or
/// the same id) the earliest-posted record survives; undated records rank
/// after dated ones and input order breaks ties. Kept records stay in input
/// order.
pub fn filter_reviews(records: &[ReviewRecord], cfg: &FilterConfig) -> FilterOutcome {
    let min_words = cfg.min_words.max(1);
    let mut verdict: Vec<Option<RejectReason>> = records
        .iter()
        .map(|r| {
            if r.word_count() < min_words {
                Some(RejectReason::TooShort)
            } else if cfg.english_only && !is_english(&r.text) {
                Some(RejectReason::NonEnglish)
            } else {
                None
            }
        })
        .collect();

    // Survivors ranked by (posted_at, input index); undated last.
    let mut order: Vec<usize> = (0..records.len()).filter(|&i| verdict[i].is_none()).collect();
    order.sort_by_key(|&i| (records[i].posted_at.is_none(), records[i].posted_at, i));
    let mut seen_text: HashMap<(String, String), usize> = HashMap::new();
    let mut seen_id: HashSet<&str> = HashSet::new();
    for i in order {
        let r = &records[i];
        let dup_text = cfg.dedupe && seen_text.contains_key(&dedupe_key(r));
        if dup_text || !seen_id.insert(r.id.as_str()) {
            verdict[i] = Some(RejectReason::Duplicate);
            continue;
        }
        if cfg.dedupe {
            seen_text.insert(dedupe_key(r), i);
        }
    }

    let mut out = FilterOutcome::default();
    for (r, v) in records.iter().zip(verdict) {
        match v {
            None => out.kept.push(r.clone()),
            Some(reason) => {
                *out.rejected_counts.entry(reason.as_str().to_string()).or_default() += 1;
                out.rejected.push((r.id.clone(), reason));
            }
        }
    }
    out
}
