use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::TextprepError;
use crate::ingest::{ReviewRecord, Store};

/// Max, min and mean of a per-review count. The mean is rounded to two
/// decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub max: usize,
    pub min: usize,
    pub avg: f64,
}

impl Spread {
    fn of(values: &[usize]) -> Self {
        let max = values.iter().copied().max().unwrap_or(0);
        let min = values.iter().copied().min().unwrap_or(0);
        let sum: usize = values.iter().sum();
        let avg = sum as f64 / values.len().max(1) as f64;
        Self {
            max,
            min,
            avg: (avg * 100.0).round() / 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_reviews: usize,
    pub n_sentences: usize,
    pub n_words: usize,
    pub n_chars: usize,
    pub sentences: Spread,
    pub words: Spread,
    pub chars: Spread,
}

/// Per-store columns plus the total, in the layout of a review-statistics
/// table. Store columns are absent when the store contributed no review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub play: Option<CorpusStats>,
    pub appstore: Option<CorpusStats>,
    pub total: CorpusStats,
}

fn sentence_split() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    R.get_or_init(|| Regex::new(r"[.!?]+").unwrap())
}

/// Sentences in raw text: segments between runs of `.`, `!` or `?` that
/// contain a letter or digit. A non-empty review has at least one.
pub fn count_sentences(text: &str) -> usize {
    let n = sentence_split()
        .split(text)
        .filter(|seg| seg.chars().any(char::is_alphanumeric))
        .count();
    if n == 0 && !text.trim().is_empty() {
        1
    } else {
        n
    }
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

pub fn count_chars(text: &str) -> usize {
    text.chars().count()
}

pub fn corpus_stats(docs: &[ReviewRecord]) -> Result<CorpusStats, TextprepError> {
    if docs.is_empty() {
        return Err(TextprepError::EmptyCorpus);
    }
    let sentences: Vec<usize> = docs.iter().map(|d| count_sentences(&d.text)).collect();
    let words: Vec<usize> = docs.iter().map(|d| count_words(&d.text)).collect();
    let chars: Vec<usize> = docs.iter().map(|d| count_chars(&d.text)).collect();
    Ok(CorpusStats {
        n_reviews: docs.len(),
        n_sentences: sentences.iter().sum(),
        n_words: words.iter().sum(),
        n_chars: chars.iter().sum(),
        sentences: Spread::of(&sentences),
        words: Spread::of(&words),
        chars: Spread::of(&chars),
    })
}

pub fn stats_table(docs: &[ReviewRecord]) -> Result<StatsTable, TextprepError> {
    let by_store = |s: Store| -> Option<CorpusStats> {
        let subset: Vec<ReviewRecord> = docs.iter().filter(|d| d.store == s).cloned().collect();
        corpus_stats(&subset).ok()
    };
    Ok(StatsTable {
        play: by_store(Store::Play),
        appstore: by_store(Store::Appstore),
        total: corpus_stats(docs)?,
    })
}

/// Vowel-group syllable estimate with a silent final `e`; at least one per
/// word.
pub fn count_syllables(word: &str) -> usize {
    let w: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if w.is_empty() {
        return 0;
    }
    let vowel = |c: char| matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
    let mut groups = 0;
    let mut prev = false;
    for &c in &w {
        let v = vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = w.len();
    if n > 2 && w[n - 1] == 'e' && !vowel(w[n - 2]) && !(w[n - 2] == 'l' && !vowel(w[n - 3])) {
        groups -= 1;
    }
    groups.max(1)
}

/// Flesch reading ease: 206.835 − 1.015·(words/sentence) − 84.6·(syllables/word).
/// Text without any alphabetic word scores `f64::NEG_INFINITY`.
pub fn reading_ease(text: &str) -> f64 {
    let words: Vec<&str> = text
        .split(|c: char| !c.is_alphabetic() && c != '\'')
        .filter(|w| w.chars().any(char::is_alphabetic))
        .collect();
    if words.is_empty() {
        return f64::NEG_INFINITY;
    }
    let sentences = count_sentences(text).max(1) as f64;
    let syllables: usize = words.iter().map(|w| count_syllables(w)).sum();
    let n = words.len() as f64;
    206.835 - 1.015 * (n / sentences) - 84.6 * (syllables as f64 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Utc;
    use proptest::prelude::*;

    fn review(text: &str, store: Store) -> ReviewRecord {
        ReviewRecord::new(None, "a", store, text, None, None, Utc::now()).unwrap()
    }

    #[test]
    fn hand_countable_review() {
        let s = corpus_stats(&[review("I love it. Really.", Store::Play)]).unwrap();
        assert_eq!(s.n_sentences, 2);
        assert_eq!(s.n_words, 4);
        assert_eq!(s.words.avg, 4.0);
        assert_eq!(s.n_chars, 18);
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(corpus_stats(&[]), Err(TextprepError::EmptyCorpus)));
    }

    #[test]
    fn unpunctuated_is_one_sentence() {
        assert_eq!(count_sentences("no punctuation at all"), 1);
        assert_eq!(count_sentences("wow!!! so good?! yes..."), 3);
    }

    #[test]
    fn table_splits_by_store() {
        let t = stats_table(&[
            review("one two three.", Store::Play),
            review("four five", Store::Appstore),
            review("six", Store::Play),
        ])
        .unwrap();
        assert_eq!(t.play.as_ref().unwrap().n_reviews, 2);
        assert_eq!(t.appstore.as_ref().unwrap().n_words, 2);
        assert_eq!(t.total.n_words, 6);
    }

    #[test]
    fn syllables() {
        assert_eq!(count_syllables("cat"), 1);
        assert_eq!(count_syllables("make"), 1);
        assert_eq!(count_syllables("table"), 2);
        assert_eq!(count_syllables("anxiety"), 3);
    }

    #[test]
    fn easy_text_reads_easier_than_dense_text() {
        let easy = reading_ease("I like it. It is good. It helps me.");
        let hard = reading_ease("Incomprehensible institutionalization notwithstanding considerations.");
        assert!(easy > hard);
        assert!(easy > 80.0);
    }

    proptest! {
        #[test]
        fn totals_and_spread_bounds(texts in prop::collection::vec("[a-z .!?]{1,40}", 1..30)) {
            let docs: Vec<_> = texts.iter()
                .filter(|t| !t.trim().is_empty())
                .map(|t| review(t, Store::Play))
                .collect();
            prop_assume!(!docs.is_empty());
            let s = corpus_stats(&docs).unwrap();
            prop_assert_eq!(s.n_words, docs.iter().map(|d| count_words(&d.text)).sum::<usize>());
            prop_assert_eq!(s.n_chars, docs.iter().map(|d| count_chars(&d.text)).sum::<usize>());
            for sp in [s.sentences, s.words, s.chars] {
                prop_assert!(sp.min as f64 <= sp.avg && sp.avg <= sp.max as f64);
            }
        }
    }
}
