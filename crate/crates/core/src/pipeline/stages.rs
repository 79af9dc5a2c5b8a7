use std::collections::{BTreeMap, HashMap};
use std::error::Error;
use std::path::Path;

use super::run::{embedding_provider, sentiment_provider, text_resources, RunData};
use super::{IngestSummary, PipelineConfig, PrepStats, Stage, TopicRecord, TopicsFile};
use crate::align::{
    alignments_json, default_taxonomy, emergent_overlay, load_taxonomy, with_overlay, AlignmentResult,
    EthicsPrinciple,
};
use crate::coherence::{model_coherences, sweep_k, window_counts, CoherenceCurve, CooccurrenceCounts};
use crate::corpus::{build_vocabulary, detect_phrases, read_bow, to_bow, write_bow, BowDocument, Vocabulary};
use crate::http::client_from_env;
use crate::ingest::{
    filter_reviews, load_reviews_file, read_reviews_jsonl, store::collect_apps, store::AppSource, store::RetryPolicy,
    write_reviews_jsonl,
};
use crate::report::{build_report, ReportFormat};
use crate::sentiment::{classify_all, required_pairs, write_sentiments};
use crate::textprep::{read_clean_jsonl, stats_table, write_clean_jsonl, CleanDocument, Preprocessor};
use crate::topicmodel::{assign_topics, load_model, save_model, summarize_topics, train_lda};

type StageResult = Result<(), Box<dyn Error + Send + Sync>>;

pub(super) struct Ctx<'a> {
    pub cfg: &'a PipelineConfig,
    /// Run directory: inputs are read from here.
    pub dir: &'a Path,
    /// Staging directory: outputs are written here.
    pub out: &'a Path,
}

pub(super) fn run(stage: Stage, ctx: &Ctx) -> StageResult {
    match stage {
        Stage::Ingest => ingest(ctx),
        Stage::Prep => prep(ctx),
        Stage::Corpus => corpus(ctx),
        Stage::Sweep => sweep(ctx),
        Stage::Train => train(ctx),
        Stage::Align => align(ctx),
        Stage::Sentiment => sentiment(ctx),
        Stage::Report => report(ctx),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    s.push('\n');
    std::fs::write(path, s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Box<dyn Error + Send + Sync>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).min(8)
}

fn ingest(ctx: &Ctx) -> StageResult {
    let cfg = ctx.cfg;
    let (records, source, malformed, errors) = if let Some(input) = &cfg.input {
        let loaded = load_reviews_file(input)?;
        let n_bad = loaded.malformed();
        (loaded.records, "file", n_bad, Vec::new())
    } else if !cfg.apps.is_empty() {
        let sources: Vec<AppSource> = cfg
            .apps
            .iter()
            .map(|a| AppSource {
                app_id: a.app_id.clone(),
                store: a.store,
                country: cfg.country.clone(),
                page_size: cfg.page_size,
                max_pages: cfg.max_pages,
            })
            .collect();
        let http = client_from_env();
        let mut records = Vec::new();
        let mut errors = Vec::new();
        for (src, r) in sources.iter().zip(collect_apps(http.as_ref(), RetryPolicy::default(), &sources)) {
            match r {
                Ok(rs) => records.extend(rs),
                Err(e) => {
                    log::warn!("{}:{}: {e}", src.store.as_str(), src.app_id);
                    errors.push(format!("{}:{}: {e}", src.store.as_str(), src.app_id));
                }
            }
        }
        if records.is_empty() {
            return Err(format!("no app could be collected: {}", errors.join("; ")).into());
        }
        (records, "stores", 0, errors)
    } else {
        return Err("config sets neither input nor apps".into());
    };
    let outcome = filter_reviews(&records, &cfg.filter);
    if outcome.kept.is_empty() {
        return Err("every review was excluded by the filters".into());
    }
    let mut by_store = BTreeMap::new();
    for r in &outcome.kept {
        *by_store.entry(r.store.as_str().to_string()).or_insert(0) += 1;
    }
    write_reviews_jsonl(&ctx.out.join("reviews.jsonl"), &outcome.kept)?;
    write_json(
        &ctx.out.join("ingest.json"),
        &IngestSummary {
            source: source.into(),
            loaded: records.len(),
            malformed,
            kept: outcome.kept.len(),
            rejected: outcome.rejected_counts,
            by_store,
            errors,
        },
    )?;
    Ok(())
}

fn prep(ctx: &Ctx) -> StageResult {
    let reviews = read_reviews_jsonl(&ctx.dir.join("reviews.jsonl"))?;
    let mut pre = Preprocessor::new(text_resources(ctx.cfg)?);
    pre.readability_floor = ctx.cfg.readability_floor;
    let outcome = pre.run(&reviews);
    if outcome.documents.is_empty() {
        return Err("no review passed the readability gate".into());
    }
    let kept: std::collections::HashSet<&str> = outcome.documents.iter().map(|d| d.review_id.as_str()).collect();
    let surviving: Vec<_> = reviews.into_iter().filter(|r| kept.contains(r.id.as_str())).collect();
    write_clean_jsonl(&ctx.out.join("clean.jsonl"), &outcome.documents)?;
    write_json(
        &ctx.out.join("stats.json"),
        &PrepStats {
            table: stats_table(&surviving)?,
            documents: outcome.documents.len(),
            unreadable: outcome.unreadable,
        },
    )?;
    Ok(())
}

/// Phrase-merged lemma sequences, in clean.jsonl order.
fn phrased(cfg: &PipelineConfig, docs: &[CleanDocument]) -> Result<Vec<Vec<String>>, Box<dyn Error + Send + Sync>> {
    let lemmas: Vec<Vec<String>> = docs.iter().map(|d| d.lemmas.clone()).collect();
    Ok(detect_phrases(&lemmas, cfg.phrase_min_count, cfg.phrase_threshold)?)
}

fn corpus(ctx: &Ctx) -> StageResult {
    let docs = read_clean_jsonl(&ctx.dir.join("clean.jsonl"))?;
    let merged = phrased(ctx.cfg, &docs)?;
    let vocab = build_vocabulary(&merged, ctx.cfg.min_df, ctx.cfg.max_df)?;
    // reviews left without any vocabulary term carry no topic signal
    let bows: Vec<BowDocument> = docs
        .iter()
        .zip(&merged)
        .map(|(d, toks)| to_bow(&d.review_id, toks, &vocab))
        .filter(|b| !b.is_empty())
        .collect();
    if bows.is_empty() {
        return Err("no document has a vocabulary term".into());
    }
    log::info!("corpus: {} documents, {} terms", bows.len(), vocab.len());
    vocab.save(&ctx.out.join("vocab.json"))?;
    write_bow(&ctx.out.join("corpus.bow"), &bows)?;
    Ok(())
}

struct Modeling {
    bows: Vec<BowDocument>,
    vocab: Vocabulary,
    counts: CooccurrenceCounts,
}

/// Corpus plus window co-occurrence counts over the ordered, phrase-merged
/// documents.
fn modeling_inputs(ctx: &Ctx) -> Result<Modeling, Box<dyn Error + Send + Sync>> {
    let vocab = Vocabulary::load(&ctx.dir.join("vocab.json"))?;
    let bows = read_bow(&ctx.dir.join("corpus.bow"))?;
    let docs = read_clean_jsonl(&ctx.dir.join("clean.jsonl"))?;
    let ids: Vec<Vec<u32>> = phrased(ctx.cfg, &docs)?.iter().map(|d| vocab.encode(d)).collect();
    let counts = window_counts(&ids, ctx.cfg.window_size)?;
    Ok(Modeling { bows, vocab, counts })
}

fn sweep(ctx: &Ctx) -> StageResult {
    let m = modeling_inputs(ctx)?;
    let curve = sweep_k(&m.bows, &m.vocab, &m.counts, &ctx.cfg.k_values, &ctx.cfg.lda, ctx.cfg.top_n)?;
    log::info!("sweep: best k = {}", curve.best_k);
    curve.save(&ctx.out.join("coherence.csv"))?;
    Ok(())
}

fn train(ctx: &Ctx) -> StageResult {
    let m = modeling_inputs(ctx)?;
    let curve = CoherenceCurve::load(&ctx.dir.join("coherence.csv"))?;
    let k = ctx.cfg.k.unwrap_or(curve.best_k);
    let model = train_lda(&m.bows, &m.vocab, &ctx.cfg.lda.with_k(k))?;
    let coherences = model_coherences(&model, &m.vocab, &m.counts, ctx.cfg.top_n)?;
    let topics: Vec<TopicRecord> = summarize_topics(&model, &m.vocab, ctx.cfg.top_n)?
        .into_iter()
        .zip(&coherences)
        .map(|(summary, &coherence)| TopicRecord { summary, coherence })
        .collect();
    save_model(&model, &ctx.out.join("model.json"), &ctx.out.join("theta.bin"))?;
    write_json(
        &ctx.out.join("topics.json"),
        &TopicsFile {
            k,
            best_k: curve.best_k,
            mean_coherence: coherences.iter().sum::<f64>() / k as f64,
            topics,
        },
    )?;
    Ok(())
}

pub(super) fn taxonomy_for(cfg: &PipelineConfig) -> Result<Vec<EthicsPrinciple>, Box<dyn Error + Send + Sync>> {
    let base = match &cfg.taxonomy {
        Some(p) => load_taxonomy(p)?,
        None => default_taxonomy(),
    };
    Ok(if cfg.emergent_overlay {
        with_overlay(base, emergent_overlay())?
    } else {
        base
    })
}

fn align(ctx: &Ctx) -> StageResult {
    let cfg = ctx.cfg;
    let file: TopicsFile = read_json(&ctx.dir.join("topics.json"))?;
    let topics: Vec<_> = file
        .topics
        .into_iter()
        .map(|t| {
            let mut s = t.summary;
            s.top_terms.truncate(cfg.align_top_n);
            s
        })
        .collect();
    let taxonomy = taxonomy_for(cfg)?;
    let provider = embedding_provider(cfg);
    let alignments: Vec<AlignmentResult> = crate::align::align_topics(
        &topics,
        &taxonomy,
        provider.as_ref(),
        cfg.threshold,
        cfg.topic_text,
        cfg.max_in_flight,
    )?;
    let emergent = alignments.iter().filter(|a| a.emergent).count();
    log::info!("align: {} topics, {emergent} emergent", alignments.len());
    std::fs::write(ctx.out.join("alignments.json"), alignments_json(&alignments))?;
    write_json(&ctx.out.join("taxonomy.json"), &taxonomy)?;
    Ok(())
}

fn sentiment(ctx: &Ctx) -> StageResult {
    let cfg = ctx.cfg;
    let model = load_model(&ctx.dir.join("model.json"), &ctx.dir.join("theta.bin"))?;
    let assignments = assign_topics(&model, cfg.tau_doc)?;
    let alignments: Vec<AlignmentResult> = read_json(&ctx.dir.join("alignments.json"))?;
    let taxonomy: Vec<EthicsPrinciple> = read_json(&ctx.dir.join("taxonomy.json"))?;
    let decisions = crate::align::read_decisions(&ctx.dir.join(super::DECISIONS))?;
    let mapping = crate::align::apply_decisions(&alignments, &taxonomy, &decisions)?;
    let pairs = required_pairs(&assignments, &mapping);
    let texts: HashMap<String, String> = read_clean_jsonl(&ctx.dir.join("clean.jsonl"))?
        .into_iter()
        .map(|d| (d.review_id, d.raw_text))
        .collect();
    let principles: HashMap<String, EthicsPrinciple> = mapping
        .assignments
        .values()
        .filter_map(|id| mapping.principle(&taxonomy, id).map(|p| (id.clone(), p.clone())))
        .collect();
    let provider = sentiment_provider(cfg)?;
    let workers = match cfg.sentiment_provider {
        super::SentimentChoice::HttpAbsa => cfg.max_in_flight,
        super::SentimentChoice::Lexicon => threads(),
    };
    let rows = classify_all(&pairs, &texts, &principles, provider.as_ref(), workers)?;
    log::info!("sentiment: {} review-aspect pairs", rows.len());
    write_sentiments(&ctx.out.join("sentiments.jsonl"), &rows)?;
    Ok(())
}

fn report(ctx: &Ctx) -> StageResult {
    let data = RunData::load(ctx.dir)?;
    let mapping = data.mapping()?;
    let report = build_report(&data, &mapping)?;
    for fmt in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown] {
        std::fs::write(ctx.out.join(fmt.file_name()), report.render(fmt)?)?;
    }
    Ok(())
}
