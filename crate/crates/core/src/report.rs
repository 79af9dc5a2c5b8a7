//! Report tables: corpus statistics, topics, the ethics frequency/sentiment
//! table, pending emergent topics and the coherence curve. Rendered as JSON,
//! CSV (the ethics table) or Markdown.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{Decision, FinalMapping, PrincipleSource};
use crate::pipeline::{IngestSummary, PipelineError, RunData};
use crate::sentiment::{ethics_sentiment, topic_sentiments, EthicsReportRow, SentimentError};
use crate::textprep::{CorpusStats, StatsTable};

/// Top words shown per topic in the Markdown table.
pub const MD_TOP_WORDS: usize = 12;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("run is incomplete: {0}")]
    IncompleteRun(String),
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error("csv: {0}")]
    Csv(String),
    #[error("unknown report format {0:?} (expected json, csv or md)")]
    UnknownFormat(String),
}

impl From<PipelineError> for ReportError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::IncompleteRun(m) => ReportError::IncompleteRun(m),
            other => ReportError::Pipeline(other),
        }
    }
}

impl From<SentimentError> for ReportError {
    fn from(e: SentimentError) -> Self {
        match e {
            SentimentError::Missing { review_id, aspect_id } => ReportError::IncompleteRun(format!(
                "no sentiment for review {review_id} toward {aspect_id}; run the sentiment stage"
            )),
            other => ReportError::Pipeline(PipelineError::Manifest(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Json => "report.json",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub k: usize,
    pub c_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTopic {
    pub topic_id: usize,
    pub top_terms: Vec<String>,
    pub review_count: usize,
    pub coherence: f64,
    pub principle: Option<String>,
    pub decision: Decision,
    /// S_i over the reviews whose primary topic this is.
    pub sentiment: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingTopic {
    pub topic_id: usize,
    pub top_terms: Vec<String>,
    /// Closest principle, below the assignment threshold.
    pub candidate: Option<String>,
    pub best_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub ingest: IngestSummary,
    pub stats: StatsTable,
    /// Reviews in the topic model; the denominator of every frequency.
    pub total_reviews: usize,
    pub k: usize,
    pub best_k: usize,
    pub coherence: Vec<CoherencePoint>,
    pub topics: Vec<ReportTopic>,
    pub ethics: Vec<EthicsReportRow>,
    pub pending: Vec<PendingTopic>,
    pub rejected: Vec<usize>,
}

/// Assembles the report for a mapping. Every (review, principle) pair the
/// mapping needs must already be classified.
pub fn build_report(data: &RunData, mapping: &FinalMapping) -> Result<Report, ReportError> {
    let polarities = data.polarities();
    let total = data.model.doc_ids.len();
    let ethics = ethics_sentiment(total, &data.assignments, mapping, &data.taxonomy, &polarities)?;
    let sentiments = topic_sentiments(&data.assignments, mapping, &polarities)?;
    let decisions: BTreeMap<usize, Decision> = mapping.alignments.iter().map(|a| (a.topic_id, a.decision)).collect();
    let topics = data
        .topics
        .topics
        .iter()
        .map(|t| {
            let id = t.summary.topic_id;
            ReportTopic {
                topic_id: id,
                top_terms: t.summary.terms().map(str::to_string).collect(),
                review_count: t.summary.review_count,
                coherence: t.coherence,
                principle: mapping.assignments.get(&id).cloned(),
                decision: decisions.get(&id).copied().unwrap_or(Decision::Pending),
                sentiment: sentiments.get(&id).copied(),
            }
        })
        .collect();
    let pending = mapping
        .pending
        .iter()
        .filter_map(|id| {
            let a = mapping.alignments.iter().find(|a| a.topic_id == *id)?;
            let t = data.topics.topics.iter().find(|t| t.summary.topic_id == *id)?;
            Some(PendingTopic {
                topic_id: *id,
                top_terms: t.summary.terms().map(str::to_string).collect(),
                candidate: a.candidate().map(str::to_string),
                best_score: a.best_score,
            })
        })
        .collect();
    Ok(Report {
        ingest: data.ingest.clone(),
        stats: data.stats.table.clone(),
        total_reviews: total,
        k: data.topics.k,
        best_k: data.topics.best_k,
        coherence: data
            .curve
            .points
            .iter()
            .map(|&(k, c_v)| CoherencePoint { k, c_v })
            .collect(),
        topics,
        ethics,
        pending,
        rejected: mapping.rejected.clone(),
    })
}

/// `1883847` → `1,883,847`.
pub fn thousands(n: usize) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Sentiment with an explicit sign and two decimals: `+0.67`, `-0.41`.
pub fn signed(x: f64) -> String {
    let r = (x * 100.0).round() / 100.0;
    // avoid "-0.00"
    if r == 0.0 {
        "+0.00".into()
    } else {
        format!("{r:+.2}")
    }
}

fn stats_rows(t: &StatsTable) -> Vec<(String, [String; 3])> {
    let col = |f: &dyn Fn(&CorpusStats) -> String| -> [String; 3] {
        [
            t.play.as_ref().map_or("-".into(), f),
            t.appstore.as_ref().map_or("-".into(), f),
            f(&t.total),
        ]
    };
    let avg = |x: f64| format!("{x:.2}");
    let mut rows = vec![
        ("No. of reviews".to_string(), col(&|s| thousands(s.n_reviews))),
        ("Total sentences".to_string(), col(&|s| thousands(s.n_sentences))),
        ("Total words".to_string(), col(&|s| thousands(s.n_words))),
        ("Total characters".to_string(), col(&|s| thousands(s.n_chars))),
    ];
    for (name, get) in [
        ("sentences", (|s: &CorpusStats| s.sentences) as fn(&CorpusStats) -> crate::textprep::Spread),
        ("words", |s: &CorpusStats| s.words),
        ("characters", |s: &CorpusStats| s.chars),
    ] {
        rows.push((format!("Max. {name} per review"), col(&|s| thousands(get(s).max))));
        rows.push((format!("Min. {name} per review"), col(&|s| thousands(get(s).min))));
        rows.push((format!("Avg. {name} per review"), col(&|s| avg(get(s).avg))));
    }
    rows
}

fn aspect_label(row: &EthicsReportRow) -> String {
    match row.source {
        PrincipleSource::Known => row.label.clone(),
        PrincipleSource::Emergent => format!("{} (Emergent)", row.label),
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The ethics table as CSV. Floats use the shortest representation that
    /// parses back to the same value.
    pub fn to_csv(&self) -> Result<String, ReportError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        // header is written even for an empty table
        w.write_record(["ethic_id", "label", "source", "frequency_pct", "mean_sentiment", "n_reviews"])
            .map_err(|e| ReportError::Csv(e.to_string()))?;
        for r in &self.ethics {
            let source = match r.source {
                PrincipleSource::Known => "known",
                PrincipleSource::Emergent => "emergent",
            };
            w.write_record([
                r.ethic_id.as_str(),
                r.label.as_str(),
                source,
                &r.frequency_pct.to_string(),
                &r.mean_sentiment.to_string(),
                &r.n_reviews.to_string(),
            ])
            .map_err(|e| ReportError::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| ReportError::Csv(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::from("# Ethics audit report\n\n");

        md.push_str("## Statistics of user review texts\n\n");
        md.push_str("| Statistics | Play Store | App Store | Total |\n|---|---:|---:|---:|\n");
        for (name, [a, b, c]) in stats_rows(&self.stats) {
            md.push_str(&format!("| {name} | {a} | {b} | {c} |\n"));
        }
        let rejected: Vec<String> = self.ingest.rejected.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        md.push_str(&format!(
            "\nLoaded {} reviews, kept {} after filtering ({}). {} reviews entered the topic model.\n\n",
            thousands(self.ingest.loaded),
            thousands(self.ingest.kept),
            if rejected.is_empty() { "none excluded".to_string() } else { rejected.join(", ") },
            thousands(self.total_reviews),
        ));

        md.push_str("## Topic coherence\n\n| k | C_v |\n|---:|---:|\n");
        for p in &self.coherence {
            md.push_str(&format!("| {} | {:.4} |\n", p.k, p.c_v));
        }
        md.push_str(&format!("\nBest k by coherence: {}. Model trained with k = {}.\n\n", self.best_k, self.k));

        md.push_str("## Top words extracted from LDA model\n\n");
        md.push_str("| Topic # | Top words | No. of reviews |\n|---:|---|---:|\n");
        for t in &self.topics {
            let words: Vec<&str> = t.top_terms.iter().take(MD_TOP_WORDS).map(String::as_str).collect();
            md.push_str(&format!("| {} | {} | {} |\n", t.topic_id, words.join(", "), t.review_count));
        }

        md.push_str("\n## Identified ethical aspects\n\n");
        md.push_str("| Ethical Aspect | Frequency (% of reviews) | Average sentiment score |\n|---|---:|---:|\n");
        for r in &self.ethics {
            md.push_str(&format!(
                "| {} | {:.1}% | {} |\n",
                aspect_label(r),
                r.frequency_pct,
                signed(r.mean_sentiment)
            ));
        }
        if self.ethics.is_empty() {
            md.push_str("\nNo topic is mapped to an ethical principle yet.\n");
        }

        md.push_str("\n## Pending emergent topics\n\n");
        if self.pending.is_empty() {
            md.push_str("None.\n");
        } else {
            md.push_str("| Topic # | Top words | Closest principle | Similarity |\n|---:|---|---|---:|\n");
            for p in &self.pending {
                let words: Vec<&str> = p.top_terms.iter().take(MD_TOP_WORDS).map(String::as_str).collect();
                md.push_str(&format!(
                    "| {} | {} | {} | {:.3} |\n",
                    p.topic_id,
                    words.join(", "),
                    p.candidate.as_deref().unwrap_or("-"),
                    p.best_score
                ));
            }
        }
        if !self.rejected.is_empty() {
            let ids: Vec<String> = self.rejected.iter().map(usize::to_string).collect();
            md.push_str(&format!("\nRejected topics: {}.\n", ids.join(", ")));
        }
        md
    }

    pub fn render(&self, format: ReportFormat) -> Result<String, ReportError> {
        Ok(match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv()?,
            ReportFormat::Markdown => self.to_markdown(),
        })
    }
}

/// Renders the report of a finished run with its current decisions.
pub fn render_report(run_dir: &Path, format: ReportFormat) -> Result<String, ReportError> {
    let data = RunData::load(run_dir)?;
    if data.manifest.status(crate::pipeline::Stage::Sentiment) != crate::pipeline::StageStatus::Done {
        return Err(ReportError::IncompleteRun("the sentiment stage has not completed".into()));
    }
    let mapping = data.mapping()?;
    build_report(&data, &mapping)?.render(format)
}
