//! Loading a finished run back into memory, and the providers a config
//! selects.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbeddingChoice, PipelineConfig, PipelineError, RunManifest, SentimentChoice, DECISIONS};
use crate::align::{
    apply_decisions, read_decisions, AlignmentResult, EmbeddingProvider, EthicsPrinciple, FinalMapping,
    HttpEmbedding, StaticVectors,
};
use crate::coherence::CoherenceCurve;
use crate::http::client_from_env;
use crate::sentiment::{
    classify_all, polarity_index, read_sentiments, required_pairs, AspectSentiment, HttpAbsa, LexiconProvider,
    PolarityIndex, SentimentLexicon, SentimentProvider, BUNDLED_LEXICON, BUNDLED_NEGATORS,
};
use crate::textprep::{read_clean_jsonl, CleanDocument, ResourcePaths, StatsTable, TextResources, TextprepError};
use crate::topicmodel::{assign_topics, load_model, LdaModel, TopicAssignment, TopicSummary};

/// Contents of `ingest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    /// `file` or `stores`.
    pub source: String,
    pub loaded: usize,
    pub malformed: usize,
    pub kept: usize,
    /// Dropped records per exclusion reason.
    pub rejected: BTreeMap<String, usize>,
    /// Kept records per store.
    pub by_store: BTreeMap<String, usize>,
    /// Apps that could not be collected.
    #[serde(default)]
    pub errors: Vec<String>,
}

/// Contents of `stats.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepStats {
    pub table: StatsTable,
    /// Reviews discarded by the readability gate.
    pub unreadable: Vec<String>,
    /// Reviews that passed preprocessing.
    pub documents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRecord {
    #[serde(flatten)]
    pub summary: TopicSummary,
    /// C_v of the topic's top terms.
    pub coherence: f64,
}

/// Contents of `topics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsFile {
    pub k: usize,
    pub best_k: usize,
    pub mean_coherence: f64,
    pub topics: Vec<TopicRecord>,
}

pub fn text_resources(cfg: &PipelineConfig) -> Result<TextResources, TextprepError> {
    TextResources::load(&ResourcePaths {
        stopwords: cfg.stopwords.clone(),
        domain_words: cfg.domain_words.clone(),
        slang: cfg.slang.clone(),
        lemmas: cfg.lemmas.clone(),
    })
}

pub fn embedding_provider(cfg: &PipelineConfig) -> Box<dyn EmbeddingProvider> {
    match (cfg.embedding_provider, &cfg.embedding_endpoint) {
        (EmbeddingChoice::HttpInference, Some(url)) => Box::new(HttpEmbedding::new(url, client_from_env())),
        _ => Box::new(StaticVectors::bundled()),
    }
}

pub fn sentiment_provider(cfg: &PipelineConfig) -> Result<Box<dyn SentimentProvider>, PipelineError> {
    if let (SentimentChoice::HttpAbsa, Some(url)) = (cfg.sentiment_provider, &cfg.sentiment_endpoint) {
        return Ok(Box::new(HttpAbsa::new(url, client_from_env())));
    }
    let resources = text_resources(cfg).map_err(|e| PipelineError::Resource(e.to_string()))?;
    let read = |p: &Option<PathBuf>, fallback: &str| -> Result<String, PipelineError> {
        match p {
            Some(p) => Ok(std::fs::read_to_string(p)?),
            None => Ok(fallback.to_string()),
        }
    };
    let mut lex = SentimentLexicon::parse(
        &read(&cfg.lexicon, BUNDLED_LEXICON)?,
        &read(&cfg.negators, BUNDLED_NEGATORS)?,
        &resources.lemmas,
    )
    .map_err(|e| PipelineError::Resource(e.to_string()))?;
    lex.negation_window = cfg.negation_window;
    Ok(Box::new(LexiconProvider::new(lex, resources)))
}

fn need(dir: &Path, name: &str) -> Result<PathBuf, PipelineError> {
    let p = dir.join(name);
    if p.exists() {
        Ok(p)
    } else {
        Err(PipelineError::IncompleteRun(format!("{name} is missing from {}", dir.display())))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(need(dir, name)?)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Manifest(format!("{name}: {e}")))
}

fn wrap(name: &str) -> impl Fn(&dyn std::fmt::Display) -> PipelineError + '_ {
    move |e| PipelineError::Manifest(format!("{name}: {e}"))
}

/// Everything the report and the review API need from a run directory.
pub struct RunData {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub config: PipelineConfig,
    pub ingest: IngestSummary,
    pub stats: PrepStats,
    pub documents: HashMap<String, CleanDocument>,
    pub curve: CoherenceCurve,
    pub model: LdaModel,
    pub topics: TopicsFile,
    pub alignments: Vec<AlignmentResult>,
    pub taxonomy: Vec<EthicsPrinciple>,
    pub assignments: BTreeMap<String, TopicAssignment>,
    /// Classified (review, principle) pairs; may grow as decisions change.
    pub sentiments: Vec<AspectSentiment>,
}

impl RunData {
    /// Loads a run through the align stage. Sentiments are optional.
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let manifest = RunManifest::load(dir)?;
        let config = manifest.config()?;
        let model = load_model(&need(dir, "model.json")?, &need(dir, "theta.bin")?).map_err(|e| wrap("model")(&e))?;
        let assignments = assign_topics(&model, config.tau_doc).map_err(|e| wrap("model")(&e))?;
        let curve = CoherenceCurve::load(&need(dir, "coherence.csv")?).map_err(|e| wrap("coherence.csv")(&e))?;
        let documents = read_clean_jsonl(&need(dir, "clean.jsonl")?)
            .map_err(|e| wrap("clean.jsonl")(&e))?
            .into_iter()
            .map(|d| (d.review_id.clone(), d))
            .collect();
        let sentiments = match dir.join("sentiments.jsonl") {
            p if p.exists() => read_sentiments(&p).map_err(|e| wrap("sentiments.jsonl")(&e))?,
            _ => Vec::new(),
        };
        Ok(Self {
            ingest: read_json(dir, "ingest.json")?,
            stats: read_json(dir, "stats.json")?,
            topics: read_json(dir, "topics.json")?,
            alignments: read_json(dir, "alignments.json")?,
            taxonomy: read_json(dir, "taxonomy.json")?,
            dir: dir.to_path_buf(),
            manifest,
            config,
            documents,
            curve,
            model,
            assignments,
            sentiments,
        })
    }

    pub fn decisions_path(&self) -> PathBuf {
        self.dir.join(DECISIONS)
    }

    /// Current mapping with the decision log replayed.
    pub fn mapping(&self) -> Result<FinalMapping, PipelineError> {
        let decisions = read_decisions(&self.decisions_path()).map_err(|e| wrap(DECISIONS)(&e))?;
        apply_decisions(&self.alignments, &self.taxonomy, &decisions).map_err(|e| wrap(DECISIONS)(&e))
    }

    pub fn polarities(&self) -> PolarityIndex {
        polarity_index(&self.sentiments)
    }

    /// Pairs the mapping needs that have no classification yet.
    pub fn missing_pairs(&self, mapping: &FinalMapping) -> Vec<(String, String)> {
        let idx = self.polarities();
        required_pairs(&self.assignments, mapping)
            .into_iter()
            .filter(|p| !idx.contains_key(p))
            .collect()
    }

    /// Classifies the missing pairs with `provider` and keeps them in memory.
    /// Returns how many were added.
    pub fn complete_sentiments(
        &mut self,
        mapping: &FinalMapping,
        provider: &dyn SentimentProvider,
        threads: usize,
    ) -> Result<usize, PipelineError> {
        let missing = self.missing_pairs(mapping);
        if missing.is_empty() {
            return Ok(0);
        }
        let texts: HashMap<String, String> = missing
            .iter()
            .filter_map(|(r, _)| self.documents.get(r).map(|d| (r.clone(), d.raw_text.clone())))
            .collect();
        let principles: HashMap<String, EthicsPrinciple> = missing
            .iter()
            .filter_map(|(_, e)| mapping.principle(&self.taxonomy, e).map(|p| (e.clone(), p.clone())))
            .collect();
        let rows = classify_all(&missing, &texts, &principles, provider, threads).map_err(|e| wrap("sentiment")(&e))?;
        let n = rows.len();
        self.sentiments.extend(rows);
        Ok(n)
    }
}
