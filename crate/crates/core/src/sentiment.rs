//! Aspect-conditioned review polarity and its aggregation per topic and per
//! ethical principle.
//!
//! The default provider scores lemmas with a signed lexicon, flipping words
//! that follow a negator and, when the review mentions the aspect, scoring
//! only the neighbourhood of those mentions. The raw score is squashed to a
//! two-class distribution with the logistic function.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{EthicsPrinciple, FinalMapping, PrincipleSource};
use crate::http::HttpClient;
use crate::textprep::{lemma_of, parse_word_list, TextResources};
use crate::topicmodel::TopicAssignment;

pub const BUNDLED_LEXICON: &str = include_str!("../resources/sentiment_lexicon.tsv");
pub const BUNDLED_NEGATORS: &str = include_str!("../resources/negators.txt");
pub const DEFAULT_NEGATION_WINDOW: usize = 3;
/// Tokens kept on each side of an aspect keyword.
pub const ASPECT_SPAN: usize = 6;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("review text is empty")]
    EmptyText,
    #[error("sentiment provider: {0}")]
    Provider(String),
    #[error("no polarities for topic")]
    EmptyTopic,
    #[error("no sentiment for review {review_id} and aspect {aspect_id}")]
    Missing { review_id: String, aspect_id: String },
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectSentiment {
    pub review_id: String,
    pub aspect_id: String,
    pub p_pos: f64,
    pub p_neg: f64,
    pub polarity: i8,
}

#[derive(Debug, Clone)]
pub struct SentimentLexicon {
    pub word_scores: HashMap<String, f64>,
    pub negators: HashSet<String>,
    pub negation_window: usize,
}

impl SentimentLexicon {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_LEXICON, BUNDLED_NEGATORS, &TextResources::bundled().lemmas)
            .expect("bundled lexicon is valid")
    }

    /// Parses a `lemma<TAB>score` table and a negator list. Entries are also
    /// registered under their lemma so inflected keys still match.
    pub fn parse(
        lexicon: &str,
        negators: &str,
        lemmas: &HashMap<String, String>,
    ) -> Result<Self, SentimentError> {
        let mut word_scores = HashMap::new();
        let mut derived = Vec::new();
        for (i, line) in lexicon.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| SentimentError::Lexicon(format!("line {}: {m}", i + 1));
            let (w, s) = line.split_once('\t').ok_or_else(|| bad("expected lemma<TAB>score"))?;
            let score: f64 = s.trim().parse().map_err(|_| bad("bad score"))?;
            if !(-1.0..=1.0).contains(&score) {
                return Err(bad("score outside [-1, 1]"));
            }
            let w = w.trim().to_lowercase();
            derived.push((lemma_of(&w, lemmas), score));
            word_scores.insert(w, score);
        }
        for (l, s) in derived {
            word_scores.entry(l).or_insert(s);
        }
        let mut neg = parse_word_list(negators);
        let extra: Vec<String> = neg.iter().map(|w| lemma_of(w, lemmas)).collect();
        neg.extend(extra);
        Ok(Self {
            word_scores,
            negators: neg,
            negation_window: DEFAULT_NEGATION_WINDOW,
        })
    }

    pub fn load(lexicon: &Path, negators: &Path, lemmas: &HashMap<String, String>) -> Result<Self, SentimentError> {
        Self::parse(
            &std::fs::read_to_string(lexicon)?,
            &std::fs::read_to_string(negators)?,
            lemmas,
        )
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Content lemmas of a principle's label and definition.
pub fn aspect_keywords(aspect: &EthicsPrinciple, resources: &TextResources) -> BTreeSet<String> {
    resources
        .content_lemmas(&format!("{} {}", aspect.label, aspect.definition))
        .into_iter()
        .collect()
}

/// Signed lexicon sum over the aspect-relevant part of a lemma sequence.
pub fn raw_score(lemmas: &[String], keywords: &BTreeSet<String>, lex: &SentimentLexicon) -> f64 {
    let hits: Vec<usize> = (0..lemmas.len()).filter(|&i| keywords.contains(&lemmas[i])).collect();
    let in_scope = |j: usize| hits.is_empty() || hits.iter().any(|&h| h.abs_diff(j) <= ASPECT_SPAN);
    let mut raw = 0.0;
    let mut last_negator: Option<usize> = None;
    for (j, l) in lemmas.iter().enumerate() {
        if lex.negators.contains(l) {
            last_negator = Some(j);
            continue;
        }
        let Some(&s) = lex.word_scores.get(l) else { continue };
        if !in_scope(j) {
            continue;
        }
        let negated = last_negator.is_some_and(|n| j - n <= lex.negation_window);
        raw += if negated { -s } else { s };
    }
    raw
}

/// Two-class distribution from the lexicon: `p_pos = logistic(raw)`.
pub fn lexicon_score(lemmas: &[String], keywords: &BTreeSet<String>, lex: &SentimentLexicon) -> (f64, f64) {
    let p_pos = logistic(raw_score(lemmas, keywords, lex));
    (p_pos, 1.0 - p_pos)
}

/// Returns `(p_pos, p_neg)` for a review with respect to an aspect.
pub trait SentimentProvider: Send + Sync {
    fn id(&self) -> &str;
    fn probabilities(&self, text: &str, aspect: &EthicsPrinciple) -> Result<(f64, f64), SentimentError>;
}

pub const LEXICON_PROVIDER_ID: &str = "lexicon";
pub const HTTP_ABSA_PROVIDER_ID: &str = "http-absa";

pub struct LexiconProvider {
    pub lexicon: SentimentLexicon,
    pub resources: TextResources,
    keywords: Mutex<HashMap<String, BTreeSet<String>>>,
}

impl LexiconProvider {
    pub fn new(lexicon: SentimentLexicon, resources: TextResources) -> Self {
        Self {
            lexicon,
            resources,
            keywords: Mutex::new(HashMap::new()),
        }
    }

    pub fn bundled() -> Self {
        Self::new(SentimentLexicon::bundled(), TextResources::bundled())
    }

    fn keywords_for(&self, aspect: &EthicsPrinciple) -> BTreeSet<String> {
        let mut cache = self.keywords.lock().unwrap();
        cache
            .entry(format!("{}\n{}\n{}", aspect.id, aspect.label, aspect.definition))
            .or_insert_with(|| aspect_keywords(aspect, &self.resources))
            .clone()
    }
}

impl SentimentProvider for LexiconProvider {
    fn id(&self) -> &str {
        LEXICON_PROVIDER_ID
    }

    fn probabilities(&self, text: &str, aspect: &EthicsPrinciple) -> Result<(f64, f64), SentimentError> {
        let lemmas = self.resources.lemma_sequence(text);
        Ok(lexicon_score(&lemmas, &self.keywords_for(aspect), &self.lexicon))
    }
}

/// Remote classifier: `POST {base}/absa {"text", "aspect"}` answered by
/// `{"p_pos", "p_neg"}`. The aspect is sent as its label.
pub struct HttpAbsa {
    endpoint: String,
    client: Box<dyn HttpClient>,
}

impl HttpAbsa {
    pub fn new(base_url: &str, client: Box<dyn HttpClient>) -> Self {
        Self {
            endpoint: format!("{}/absa", base_url.trim_end_matches('/')),
            client,
        }
    }
}

#[derive(Serialize)]
struct AbsaRequest<'a> {
    text: &'a str,
    aspect: &'a str,
}

#[derive(Deserialize)]
struct AbsaResponse {
    p_pos: f64,
    p_neg: f64,
}

impl SentimentProvider for HttpAbsa {
    fn id(&self) -> &str {
        HTTP_ABSA_PROVIDER_ID
    }

    fn probabilities(&self, text: &str, aspect: &EthicsPrinciple) -> Result<(f64, f64), SentimentError> {
        let body = serde_json::to_string(&AbsaRequest {
            text,
            aspect: &aspect.label,
        })
        .expect("request serializes");
        let resp = self
            .client
            .post(&self.endpoint, "application/json", &body)
            .map_err(|e| SentimentError::Provider(e.to_string()))?;
        if !resp.is_success() {
            return Err(SentimentError::Provider(format!(
                "{} returned status {}",
                self.endpoint, resp.status
            )));
        }
        let r: AbsaResponse =
            serde_json::from_str(&resp.body).map_err(|e| SentimentError::Provider(format!("bad absa response: {e}")))?;
        Ok((r.p_pos, r.p_neg))
    }
}

/// Classifies one review against one aspect. The provider's pair is
/// renormalized; polarity is +1 when `p_pos ≥ p_neg`.
pub fn classify(
    review_id: &str,
    text: &str,
    aspect: &EthicsPrinciple,
    provider: &dyn SentimentProvider,
) -> Result<AspectSentiment, SentimentError> {
    if text.trim().is_empty() {
        return Err(SentimentError::EmptyText);
    }
    let (a, b) = provider.probabilities(text, aspect)?;
    if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0 && a + b > 0.0) {
        return Err(SentimentError::Provider(format!("invalid probabilities ({a}, {b})")));
    }
    let p_pos = a / (a + b);
    let p_neg = 1.0 - p_pos;
    Ok(AspectSentiment {
        review_id: review_id.to_string(),
        aspect_id: aspect.id.clone(),
        p_pos,
        p_neg,
        polarity: if p_pos >= p_neg { 1 } else { -1 },
    })
}

/// Classifies `(review_id, aspect_id)` pairs in parallel, keeping input
/// order. `texts` maps review ids to raw text.
pub fn classify_all(
    pairs: &[(String, String)],
    texts: &HashMap<String, String>,
    principles: &HashMap<String, EthicsPrinciple>,
    provider: &dyn SentimentProvider,
    threads: usize,
) -> Result<Vec<AspectSentiment>, SentimentError> {
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<Result<AspectSentiment, SentimentError>>>> =
        Mutex::new((0..pairs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, pairs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((rid, aid)) = pairs.get(i) else { break };
                let r = match (texts.get(rid), principles.get(aid)) {
                    (Some(t), Some(p)) => classify(rid, t, p, provider),
                    _ => Err(SentimentError::Missing {
                        review_id: rid.clone(),
                        aspect_id: aid.clone(),
                    }),
                };
                out.lock().unwrap()[i] = Some(r);
            });
        }
    });
    out.into_inner().unwrap().into_iter().map(|r| r.expect("classified")).collect()
}

/// S_i: mean polarity.
pub fn topic_sentiment(polarities: &[i8]) -> Result<f64, SentimentError> {
    if polarities.is_empty() {
        return Err(SentimentError::EmptyTopic);
    }
    Ok(polarities.iter().map(|&p| p as f64).sum::<f64>() / polarities.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EthicsReportRow {
    pub ethic_id: String,
    pub label: String,
    pub source: PrincipleSource,
    pub frequency_pct: f64,
    pub mean_sentiment: f64,
    pub n_reviews: usize,
}

/// Reviews contributing to each mapped principle: a review counts for a
/// principle when any of its topics maps there.
pub fn contributions(
    assignments: &BTreeMap<String, TopicAssignment>,
    mapping: &FinalMapping,
) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (rid, a) in assignments {
        for t in &a.secondary {
            if let Some(e) = mapping.assignments.get(t) {
                out.entry(e.clone()).or_default().insert(rid.clone());
            }
        }
    }
    out
}

/// Every `(review_id, principle_id)` pair that needs a classification.
pub fn required_pairs(
    assignments: &BTreeMap<String, TopicAssignment>,
    mapping: &FinalMapping,
) -> Vec<(String, String)> {
    let mut pairs: Vec<(String, String)> = contributions(assignments, mapping)
        .into_iter()
        .flat_map(|(e, rs)| rs.into_iter().map(move |r| (r, e.clone())))
        .collect();
    pairs.sort();
    pairs
}

pub type PolarityIndex = HashMap<(String, String), i8>;

pub fn polarity_index(sentiments: &[AspectSentiment]) -> PolarityIndex {
    sentiments
        .iter()
        .map(|s| ((s.review_id.clone(), s.aspect_id.clone()), s.polarity))
        .collect()
}

fn lookup(index: &PolarityIndex, review: &str, ethic: &str) -> Result<i8, SentimentError> {
    index
        .get(&(review.to_string(), ethic.to_string()))
        .copied()
        .ok_or_else(|| SentimentError::Missing {
            review_id: review.to_string(),
            aspect_id: ethic.to_string(),
        })
}

/// One row per mapped principle with at least one review: share of all
/// reviews (multi-label, so rows may sum past 100) and mean polarity. Known
/// principles come first, then emergent, each by descending frequency.
pub fn ethics_sentiment(
    total_reviews: usize,
    assignments: &BTreeMap<String, TopicAssignment>,
    mapping: &FinalMapping,
    taxonomy: &[EthicsPrinciple],
    polarities: &PolarityIndex,
) -> Result<Vec<EthicsReportRow>, SentimentError> {
    let mut rows = Vec::new();
    for (ethic, reviews) in contributions(assignments, mapping) {
        let ps = reviews
            .iter()
            .map(|r| lookup(polarities, r, &ethic))
            .collect::<Result<Vec<i8>, _>>()?;
        let (label, source) = match mapping.principle(taxonomy, &ethic) {
            Some(p) => (p.label.clone(), p.source),
            None => (ethic.clone(), PrincipleSource::Emergent),
        };
        rows.push(EthicsReportRow {
            frequency_pct: 100.0 * reviews.len() as f64 / total_reviews.max(1) as f64,
            mean_sentiment: topic_sentiment(&ps)?,
            n_reviews: reviews.len(),
            ethic_id: ethic,
            label,
            source,
        });
    }
    rows.sort_by(|a, b| {
        a.source
            .cmp(&b.source)
            .then(b.n_reviews.cmp(&a.n_reviews))
            .then_with(|| a.ethic_id.cmp(&b.ethic_id))
    });
    Ok(rows)
}

/// S_i for each mapped topic, over the reviews whose primary topic it is,
/// using polarity toward the topic's principle. Topics without such
/// reviews are left out.
pub fn topic_sentiments(
    assignments: &BTreeMap<String, TopicAssignment>,
    mapping: &FinalMapping,
    polarities: &PolarityIndex,
) -> Result<BTreeMap<usize, f64>, SentimentError> {
    let mut by_topic: BTreeMap<usize, Vec<i8>> = BTreeMap::new();
    for (rid, a) in assignments {
        if let Some(e) = mapping.assignments.get(&a.primary) {
            by_topic.entry(a.primary).or_default().push(lookup(polarities, rid, e)?);
        }
    }
    by_topic
        .into_iter()
        .map(|(t, ps)| Ok((t, topic_sentiment(&ps)?)))
        .collect()
}

pub fn write_sentiments(path: &Path, rows: &[AspectSentiment]) -> Result<(), SentimentError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(std::io::Error::other)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sentiments(path: &Path) -> Result<Vec<AspectSentiment>, SentimentError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SentimentError::Format {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{default_taxonomy, AlignmentResult};
    use proptest::prelude::*;

    fn lex() -> SentimentLexicon {
        SentimentLexicon {
            word_scores: HashMap::from([("help".to_string(), 0.8), ("bad".to_string(), -0.5)]),
            negators: HashSet::from(["not".to_string()]),
            negation_window: 3,
        }
    }

    fn v(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn principle(id: &str) -> EthicsPrinciple {
        default_taxonomy().into_iter().find(|p| p.id == id).unwrap()
    }

    #[test]
    fn formula_cases() {
        let none = BTreeSet::new();
        let (p, n) = lexicon_score(&v(&["help"]), &none, &lex());
        assert!((p - 1.0 / (1.0 + (-0.8f64).exp())).abs() < 1e-12);
        assert!((p - 0.690).abs() < 1e-3);
        assert!((p + n - 1.0).abs() < 1e-12);
        let (p, _) = lexicon_score(&v(&["not", "help"]), &none, &lex());
        assert!((p - 0.310).abs() < 1e-3);
        assert_eq!(lexicon_score(&[], &none, &lex()), (0.5, 0.5));
        // outside the negation window
        assert!((raw_score(&v(&["not", "a", "b", "c", "help"]), &none, &lex()) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn aspect_window() {
        let kw = BTreeSet::from(["privacy".to_string()]);
        let mut doc = v(&["help"]);
        doc.extend(v(&["x"; 8]));
        doc.extend(v(&["privacy", "bad"]));
        // "help" sits 9 tokens before the keyword: out of scope
        assert!((raw_score(&doc, &kw, &lex()) + 0.5).abs() < 1e-12);
        assert!((raw_score(&doc, &BTreeSet::new(), &lex()) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn bundled_examples() {
        let p = LexiconProvider::bundled();
        let good = classify("r1", "this app really helped my anxiety", &principle("beneficence"), &p).unwrap();
        assert_eq!(good.polarity, 1);
        let bad = classify("r2", "they sold my data without asking", &principle("privacy-data-protection"), &p).unwrap();
        assert_eq!(bad.polarity, -1);
        let negated = classify("r3", "It doesn't help at all", &principle("beneficence"), &p).unwrap();
        assert_eq!(negated.polarity, -1);
        assert!(matches!(classify("r4", "  ", &principle("beneficence"), &p), Err(SentimentError::EmptyText)));
    }

    struct Fixed(f64, f64);
    impl SentimentProvider for Fixed {
        fn id(&self) -> &str {
            "fixed"
        }
        fn probabilities(&self, _: &str, _: &EthicsPrinciple) -> Result<(f64, f64), SentimentError> {
            Ok((self.0, self.1))
        }
    }

    #[test]
    fn tie_is_positive() {
        let s = classify("r", "text", &principle("safety"), &Fixed(0.5, 0.5)).unwrap();
        assert_eq!(s.polarity, 1);
        assert!(classify("r", "text", &principle("safety"), &Fixed(f64::NAN, 0.5)).is_err());
    }

    #[test]
    fn topic_means() {
        assert_eq!(topic_sentiment(&[1, 1, 1]).unwrap(), 1.0);
        assert!((topic_sentiment(&[1, -1, 1]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(matches!(topic_sentiment(&[]), Err(SentimentError::EmptyTopic)));
    }

    fn mapping(assign: &[(usize, &str)]) -> FinalMapping {
        FinalMapping {
            assignments: assign.iter().map(|&(t, e)| (t, e.to_string())).collect(),
            promoted: vec![],
            pending: vec![],
            rejected: vec![],
            alignments: Vec::<AlignmentResult>::new(),
        }
    }

    fn ta(primary: usize, secondary: &[usize]) -> TopicAssignment {
        TopicAssignment {
            primary,
            secondary: secondary.iter().copied().collect(),
        }
    }

    #[test]
    fn ethics_rows_hand_computed() {
        // 10 reviews, 4 of them on the privacy topic
        let mut assignments = BTreeMap::new();
        for i in 0..10 {
            let t = if i < 4 { 0 } else { 1 };
            assignments.insert(format!("r{i}"), ta(t, &[t]));
        }
        let m = mapping(&[(0, "privacy-data-protection")]);
        let mut idx = PolarityIndex::new();
        for (i, p) in [-1, -1, -1, 1].iter().enumerate() {
            idx.insert((format!("r{i}"), "privacy-data-protection".into()), *p);
        }
        let rows = ethics_sentiment(10, &assignments, &m, &default_taxonomy(), &idx).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].frequency_pct, 40.0);
        assert_eq!(rows[0].mean_sentiment, -0.5);
        assert_eq!(rows[0].n_reviews, 4);
        assert_eq!(rows[0].label, "Privacy/Data Protection/Confidentiality");
        let s = topic_sentiments(&assignments, &m, &idx).unwrap();
        assert_eq!(s[&0], -0.5);
        assert!(!s.contains_key(&1));
    }

    #[test]
    fn multi_label_counts_once_each() {
        let assignments = BTreeMap::from([("r".to_string(), ta(0, &[0, 1])), ("q".to_string(), ta(1, &[1]))]);
        let m = mapping(&[(0, "safety"), (1, "beneficence")]);
        let pairs = required_pairs(&assignments, &m);
        assert_eq!(pairs.len(), 3);
        let idx: PolarityIndex = pairs.iter().map(|p| (p.clone(), 1)).collect();
        let rows = ethics_sentiment(2, &assignments, &m, &default_taxonomy(), &idx).unwrap();
        assert_eq!(rows.iter().map(|r| r.n_reviews).sum::<usize>(), 3);
        assert_eq!(rows[0].ethic_id, "beneficence");
        assert_eq!(rows[0].frequency_pct, 100.0);
        assert!(ethics_sentiment(2, &assignments, &m, &default_taxonomy(), &PolarityIndex::new()).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let rows = vec![AspectSentiment {
            review_id: "a".into(),
            aspect_id: "safety".into(),
            p_pos: 0.25,
            p_neg: 0.75,
            polarity: -1,
        }];
        write_sentiments(&path, &rows).unwrap();
        assert_eq!(read_sentiments(&path).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(words in prop::collection::vec("(help|bad|not|x)", 0..20)) {
            let (p, n) = lexicon_score(&words, &BTreeSet::new(), &lex());
            prop_assert!((p + n - 1.0).abs() < 1e-9);
        }

        #[test]
        fn antisymmetry(ps in prop::collection::vec(prop::bool::ANY, 1..50)) {
            let a: Vec<i8> = ps.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let flipped: Vec<i8> = a.iter().map(|x| -x).collect();
            prop_assert_eq!(topic_sentiment(&a).unwrap(), -topic_sentiment(&flipped).unwrap());
        }
    }
}
