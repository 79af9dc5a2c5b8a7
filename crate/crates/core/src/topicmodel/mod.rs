//! Latent Dirichlet allocation trained by collapsed Gibbs sampling.
//!
//! Each token's topic is resampled from
//! `p(z = k) ∝ (n_dk + α)(n_kw + β) / (n_k + Vβ)`. After `burn_in` sweeps the
//! φ and θ estimates are averaged every `sample_lag` sweeps. With
//! `partitions = 1` (the default) training is single-threaded and
//! bit-reproducible for a given seed.

mod gibbs;
mod io;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use gibbs::{fold_in, GibbsSampler};
pub use io::{load_model, read_theta_bin, save_model, write_theta_bin};

use crate::corpus::{BowDocument, TermId, Vocabulary};

#[derive(Debug, Error)]
pub enum TopicModelError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("topic {topic} out of range (model has {k} topics)")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dirichlet prior on document-topic mixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    /// 50 / K.
    SymmetricDefault,
    Value(f64),
}

impl Serialize for Alpha {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Alpha::SymmetricDefault => s.serialize_str("symmetric-default"),
            Alpha::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Alpha::Value(v)),
            Raw::Str(s) if s == "symmetric-default" => Ok(Alpha::SymmetricDefault),
            Raw::Str(s) => s
                .parse()
                .map(Alpha::Value)
                .map_err(|_| serde::de::Error::custom(format!("bad alpha {s:?}"))),
        }
    }
}

impl std::str::FromStr for Alpha {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "symmetric-default" {
            Ok(Alpha::SymmetricDefault)
        } else {
            s.parse().map(Alpha::Value).map_err(|_| format!("bad alpha {s:?}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    pub alpha: Alpha,
    pub beta: f64,
    pub passes: usize,
    /// Documents per progress checkpoint; no effect on results.
    pub chunk_size: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub sample_lag: usize,
    /// Parallel document partitions per sweep. Anything above 1 changes the
    /// results relative to the serial sampler.
    #[serde(default = "one")]
    pub partitions: usize,
}

fn one() -> usize {
    1
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self {
            k: 10,
            alpha: Alpha::SymmetricDefault,
            beta: 0.01,
            passes: 200,
            chunk_size: 2000,
            seed: 42,
            burn_in: 100,
            sample_lag: 10,
            partitions: 1,
        }
    }
}

impl LdaConfig {
    pub fn alpha_value(&self) -> f64 {
        match self.alpha {
            Alpha::SymmetricDefault => 50.0 / self.k as f64,
            Alpha::Value(a) => a,
        }
    }

    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), TopicModelError> {
        let bad = |m: &str| Err(TopicModelError::InvalidConfig(m.to_string()));
        if self.k == 0 || self.k > u16::MAX as usize {
            return bad("k must be in 1..=65535");
        }
        if self.passes == 0 {
            return bad("passes must be ≥ 1");
        }
        let a = self.alpha_value();
        if !(a > 0.0 && a.is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if self.sample_lag == 0 {
            return bad("sample_lag must be ≥ 1");
        }
        Ok(())
    }
}

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn normalize_rows(&mut self) {
        for r in self.data.chunks_mut(self.cols.max(1)) {
            let s: f64 = r.iter().sum();
            if s > 0.0 {
                r.iter_mut().for_each(|x| *x /= s);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct LdaModel {
    pub config: LdaConfig,
    /// K × V topic-word probabilities.
    pub phi: Matrix,
    /// M × K document-topic mixtures, rows aligned with `doc_ids`.
    pub theta: Matrix,
    pub doc_ids: Vec<String>,
    pub log_likelihood_trace: Vec<f64>,
    doc_index: HashMap<String, usize>,
}

impl LdaModel {
    pub fn new(
        config: LdaConfig,
        phi: Matrix,
        theta: Matrix,
        doc_ids: Vec<String>,
        log_likelihood_trace: Vec<f64>,
    ) -> Self {
        let doc_index = doc_ids.iter().enumerate().map(|(i, d)| (d.clone(), i)).collect();
        Self {
            config,
            phi,
            theta,
            doc_ids,
            log_likelihood_trace,
            doc_index,
        }
    }

    pub fn num_topics(&self) -> usize {
        self.phi.rows()
    }

    pub fn vocab_size(&self) -> usize {
        self.phi.cols()
    }

    pub fn doc_row(&self, review_id: &str) -> Option<usize> {
        self.doc_index.get(review_id).copied()
    }

    /// Index of the largest θ entry, lowest index on ties.
    pub fn primary_topic(&self, doc: usize) -> usize {
        argmax(self.theta.row(doc))
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Runs the sampler for `cfg.passes` sweeps, recording the collapsed
/// log-likelihood after each.
pub fn train_lda(
    corpus: &[BowDocument],
    vocab: &Vocabulary,
    cfg: &LdaConfig,
) -> Result<LdaModel, TopicModelError> {
    let mut sampler = GibbsSampler::new(corpus, vocab.len(), cfg)?;
    let mut trace = Vec::with_capacity(cfg.passes);
    for pass in 1..=cfg.passes {
        sampler.sweep();
        trace.push(sampler.log_likelihood());
        if pass > cfg.burn_in && (pass - cfg.burn_in) % cfg.sample_lag == 0 {
            sampler.accumulate();
        }
        if pass % 50 == 0 {
            log::debug!("k={} pass {pass}/{}: log-likelihood {:.1}", cfg.k, cfg.passes, trace[pass - 1]);
        }
    }
    Ok(sampler.into_model(cfg.clone(), trace))
}

/// Number of fold-in sweeps for documents outside the training corpus.
pub const FOLD_IN_SWEEPS: usize = 20;
const FOLD_IN_SALT: u64 = 0xF01D_1A7E;

/// Topic mixture of a document: the stored row for a training document,
/// otherwise a fold-in estimate with φ held fixed.
pub fn doc_topics(model: &LdaModel, doc: &BowDocument) -> Result<Vec<f64>, TopicModelError> {
    if let Some(&(t, _)) = doc.counts.iter().find(|&&(t, _)| t as usize >= model.vocab_size()) {
        return Err(TopicModelError::VocabularyMismatch(format!(
            "term id {t} ≥ vocabulary size {}",
            model.vocab_size()
        )));
    }
    if let Some(row) = model.doc_row(&doc.review_id) {
        return Ok(model.theta.row(row).to_vec());
    }
    Ok(fold_in(
        &model.phi,
        model.config.alpha_value(),
        &doc.token_ids(),
        FOLD_IN_SWEEPS,
        model.config.seed ^ FOLD_IN_SALT,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_id: usize,
    pub top_terms: Vec<(String, f64)>,
    /// Documents whose primary topic this is.
    pub review_count: usize,
}

impl TopicSummary {
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.top_terms.iter().map(|(t, _)| t.as_str())
    }
}

/// Default number of top words per topic.
pub const DEFAULT_TOP_N: usize = 20;

fn check_topic(model: &LdaModel, vocab: &Vocabulary, topic_id: usize) -> Result<(), TopicModelError> {
    let k = model.num_topics();
    if topic_id >= k {
        return Err(TopicModelError::TopicOutOfRange { topic: topic_id, k });
    }
    if vocab.len() != model.vocab_size() {
        return Err(TopicModelError::VocabularyMismatch(format!(
            "vocabulary has {} tokens, model {}",
            vocab.len(),
            model.vocab_size()
        )));
    }
    Ok(())
}

/// Ids of the `n` most probable terms of a topic, ties broken by token.
pub fn top_term_ids(
    model: &LdaModel,
    vocab: &Vocabulary,
    topic_id: usize,
    n: usize,
) -> Result<Vec<TermId>, TopicModelError> {
    check_topic(model, vocab, topic_id)?;
    let row = model.phi.row(topic_id);
    let mut ids: Vec<usize> = (0..row.len()).collect();
    ids.sort_by(|&a, &b| {
        row[b]
            .total_cmp(&row[a])
            .then_with(|| vocab.tokens()[a].cmp(&vocab.tokens()[b]))
    });
    ids.truncate(n.min(row.len()));
    Ok(ids.into_iter().map(|i| i as TermId).collect())
}

/// Number of documents whose primary topic is each topic.
pub fn primary_counts(model: &LdaModel) -> Vec<usize> {
    let mut counts = vec![0; model.num_topics()];
    for d in 0..model.theta.rows() {
        counts[model.primary_topic(d)] += 1;
    }
    counts
}

/// The `n` most probable tokens of a topic (ties broken lexicographically).
/// `n` is capped at the vocabulary size.
pub fn top_words(
    model: &LdaModel,
    vocab: &Vocabulary,
    topic_id: usize,
    n: usize,
) -> Result<TopicSummary, TopicModelError> {
    let row = model.phi.row(topic_id.min(model.num_topics().saturating_sub(1)));
    let top_terms = top_term_ids(model, vocab, topic_id, n)?
        .into_iter()
        .map(|i| (vocab.tokens()[i as usize].clone(), row[i as usize]))
        .collect();
    Ok(TopicSummary {
        topic_id,
        top_terms,
        review_count: primary_counts(model)[topic_id],
    })
}

pub fn summarize_topics(
    model: &LdaModel,
    vocab: &Vocabulary,
    n: usize,
) -> Result<Vec<TopicSummary>, TopicModelError> {
    (0..model.num_topics())
        .map(|k| top_words(model, vocab, k, n))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub primary: usize,
    /// Topics with θ ≥ τ, always including the primary.
    pub secondary: BTreeSet<usize>,
}

/// Default θ threshold for secondary topic membership.
pub const DEFAULT_TAU_DOC: f64 = 0.2;

pub fn assign_topics(
    model: &LdaModel,
    tau_doc: f64,
) -> Result<BTreeMap<String, TopicAssignment>, TopicModelError> {
    if !(tau_doc > 0.0 && tau_doc < 1.0) {
        return Err(TopicModelError::InvalidConfig(format!(
            "tau_doc {tau_doc} must lie in (0, 1)"
        )));
    }
    Ok(model
        .doc_ids
        .iter()
        .enumerate()
        .map(|(d, id)| {
            let row = model.theta.row(d);
            let primary = argmax(row);
            let mut secondary: BTreeSet<usize> = row
                .iter()
                .enumerate()
                .filter(|&(_, &x)| x >= tau_doc)
                .map(|(k, _)| k)
                .collect();
            secondary.insert(primary);
            (id.clone(), TopicAssignment { primary, secondary })
        })
        .collect())
}
