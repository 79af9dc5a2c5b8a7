//! Topic to ethics-principle alignment.
//!
//! A topic is embedded from its top terms and compared by cosine similarity
//! with the definition of every principle in the taxonomy. The best match is
//! assigned when its score reaches the threshold; otherwise the topic is
//! flagged as a candidate emergent concern and waits for a human decision.

mod decisions;
mod embed;
mod taxonomy;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use decisions::{
    append_decision, apply_decisions, read_decisions, Action, DecisionRecord, FinalMapping, LabelPayload,
};
pub use embed::{
    EmbeddingProvider, EmbeddingVector, HttpEmbedding, StaticVectors, BUNDLED_WORD_VECTORS, HTTP_PROVIDER_ID,
    STATIC_PROVIDER_ID,
};
pub use taxonomy::{
    default_taxonomy, emergent_overlay, load_taxonomy, parse_taxonomy, with_overlay, EthicsPrinciple,
    PrincipleSource, BUNDLED_EMERGENT_OVERLAY, BUNDLED_TAXONOMY,
};

use crate::corpus::PHRASE_JOINER;
use crate::topicmodel::TopicSummary;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("taxonomy file not found: {0}")]
    FileNotFound(String),
    #[error("taxonomy schema: {0}")]
    Schema(String),
    #[error("duplicate principle id {0:?}")]
    DuplicateId(String),
    #[error("text is empty")]
    EmptyText,
    #[error("no known words in {0:?}")]
    NoKnownWords(String),
    #[error("embedding provider: {0}")]
    Provider(String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero vector")]
    ZeroVector,
    #[error("unknown topic {0}")]
    UnknownTopic(usize),
    #[error("unknown principle {0:?}")]
    UnknownLabel(String),
    #[error("decision {action} on topic {topic} needs a label")]
    MissingLabel { topic: usize, action: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("decision log line {line}: {message}")]
    DecisionFormat { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Cosine similarity.
pub fn similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, AlignError> {
    if a.values.len() != b.values.len() {
        return Err(AlignError::DimensionMismatch(a.values.len(), b.values.len()));
    }
    if a.is_zero() || b.is_zero() {
        return Err(AlignError::ZeroVector);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Pending,
    Accepted,
    Rejected,
    Relabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub topic_id: usize,
    /// Cosine similarity against every principle of the taxonomy.
    pub scores: BTreeMap<String, f64>,
    pub best_principle: Option<String>,
    pub best_score: f64,
    pub emergent: bool,
    pub decision: Decision,
    pub decided_label: Option<String>,
    pub note: Option<String>,
}

impl AlignmentResult {
    /// Highest-scoring principle regardless of the threshold.
    pub fn candidate(&self) -> Option<&str> {
        best_of(&self.scores).map(|(id, _)| id)
    }
}

fn best_of(scores: &BTreeMap<String, f64>) -> Option<(&str, f64)> {
    // BTreeMap iterates ids in order, so strict `>` keeps the smallest id on ties.
    let mut best: Option<(&str, f64)> = None;
    for (id, &s) in scores {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    best
}

/// How a topic's terms become one embedding.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopicText {
    /// Embed the space-joined terms as one text.
    #[default]
    Joined,
    /// φ-weighted mean of per-term embeddings.
    Weighted,
}

fn term_text(term: &str) -> String {
    term.replace(PHRASE_JOINER, " ")
}

pub fn topic_embedding(
    topic: &TopicSummary,
    provider: &dyn EmbeddingProvider,
    mode: TopicText,
) -> Result<EmbeddingVector, AlignError> {
    if topic.top_terms.is_empty() {
        return Err(AlignError::InvalidArgument(format!("topic {} has no terms", topic.topic_id)));
    }
    match mode {
        TopicText::Joined => {
            let text: Vec<String> = topic.terms().map(term_text).collect();
            provider.embed(&text.join(" "))
        }
        TopicText::Weighted => {
            let mut acc: Option<Vec<f64>> = None;
            for (term, p) in &topic.top_terms {
                let v = match provider.embed(&term_text(term)) {
                    Ok(v) => v,
                    Err(AlignError::NoKnownWords(_)) => continue,
                    Err(e) => return Err(e),
                };
                let a = acc.get_or_insert_with(|| vec![0.0; v.values.len()]);
                if a.len() != v.values.len() {
                    return Err(AlignError::DimensionMismatch(a.len(), v.values.len()));
                }
                a.iter_mut().zip(&v.values).for_each(|(s, x)| *s += p * x);
            }
            let joined: Vec<&str> = topic.terms().collect();
            acc.map(|a| EmbeddingVector::new(a, provider.id()))
                .ok_or_else(|| AlignError::NoKnownWords(joined.join(" ")))
        }
    }
}

fn score_all(
    v: &EmbeddingVector,
    principle_vectors: &[(String, EmbeddingVector)],
) -> Result<BTreeMap<String, f64>, AlignError> {
    principle_vectors
        .iter()
        .map(|(id, pv)| Ok((id.clone(), similarity(v, pv)?)))
        .collect()
}

fn result_from_scores(topic_id: usize, scores: BTreeMap<String, f64>, threshold: f64) -> AlignmentResult {
    let (best_id, best_score) = best_of(&scores)
        .map(|(id, s)| (id.to_string(), s))
        .expect("taxonomy is non-empty");
    let emergent = best_score < threshold;
    AlignmentResult {
        topic_id,
        scores,
        best_principle: (!emergent).then_some(best_id),
        best_score,
        emergent,
        decision: Decision::Pending,
        decided_label: None,
        note: None,
    }
}

fn embed_principles(
    taxonomy: &[EthicsPrinciple],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<(String, EmbeddingVector)>, AlignError> {
    if taxonomy.is_empty() {
        return Err(AlignError::InvalidArgument("taxonomy is empty".into()));
    }
    taxonomy
        .iter()
        .map(|p| Ok((p.id.clone(), provider.embed(&p.definition)?)))
        .collect()
}

fn check_threshold(threshold: f64) -> Result<(), AlignError> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(AlignError::InvalidArgument(format!("threshold {threshold} outside [-1, 1]")));
    }
    Ok(())
}

/// Aligns one topic against every principle of the taxonomy. Ties on the
/// best score go to the lexicographically smallest principle id.
pub fn align_topic(
    topic: &TopicSummary,
    taxonomy: &[EthicsPrinciple],
    provider: &dyn EmbeddingProvider,
    threshold: f64,
) -> Result<AlignmentResult, AlignError> {
    check_threshold(threshold)?;
    let principles = embed_principles(taxonomy, provider)?;
    let v = topic_embedding(topic, provider, TopicText::Joined)?;
    Ok(result_from_scores(topic.topic_id, score_all(&v, &principles)?, threshold))
}

/// Aligns all topics, embedding each principle once. At most `max_in_flight`
/// topics are embedded at the same time.
pub fn align_topics(
    topics: &[TopicSummary],
    taxonomy: &[EthicsPrinciple],
    provider: &dyn EmbeddingProvider,
    threshold: f64,
    mode: TopicText,
    max_in_flight: usize,
) -> Result<Vec<AlignmentResult>, AlignError> {
    check_threshold(threshold)?;
    let principles = embed_principles(taxonomy, provider)?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<AlignmentResult, AlignError>>>> =
        Mutex::new((0..topics.len()).map(|_| None).collect());
    let workers = max_in_flight.clamp(1, topics.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(topic) = topics.get(i) else { break };
                let r = topic_embedding(topic, provider, mode)
                    .and_then(|v| score_all(&v, &principles))
                    .map(|scores| result_from_scores(topic.topic_id, scores, threshold));
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every topic aligned"))
        .collect()
}

pub fn alignments_json(alignments: &[AlignmentResult]) -> String {
    let mut s = serde_json::to_string_pretty(alignments).expect("alignments serialize");
    s.push('\n');
    s
}
