//! Sliding-window NPMI statistics, C_v topic coherence and the sweep over
//! the number of topics.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::corpus::{BowDocument, TermId, Vocabulary};
use crate::topicmodel::{top_term_ids, train_lda, LdaConfig, LdaModel, TopicModelError};

pub const DEFAULT_WINDOW: usize = 110;

#[derive(Debug, Error)]
pub enum CoherenceError {
    #[error("coherence needs at least two terms, got {0}")]
    TooFewTerms(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("coherence.csv line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] TopicModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Boolean window counts: each term and each unordered pair is counted at
/// most once per window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CooccurrenceCounts {
    pub window_size: usize,
    pub n_windows: u64,
    unigram: HashMap<TermId, u64>,
    /// Keyed by `(i, j)` with `i < j`.
    pairs: HashMap<(TermId, TermId), u64>,
}

impl CooccurrenceCounts {
    pub fn unigram(&self, w: TermId) -> u64 {
        self.unigram.get(&w).copied().unwrap_or(0)
    }

    pub fn pair(&self, a: TermId, b: TermId) -> u64 {
        if a == b {
            return self.unigram(a);
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.pairs.get(&key).copied().unwrap_or(0)
    }

    pub fn unigrams(&self) -> impl Iterator<Item = (TermId, u64)> + '_ {
        self.unigram.iter().map(|(&k, &v)| (k, v))
    }

    pub fn pairs(&self) -> impl Iterator<Item = ((TermId, TermId), u64)> + '_ {
        self.pairs.iter().map(|(&k, &v)| (k, v))
    }

    fn merge(&mut self, other: CooccurrenceCounts) {
        self.n_windows += other.n_windows;
        for (k, v) in other.unigram {
            *self.unigram.entry(k).or_default() += v;
        }
        for (k, v) in other.pairs {
            *self.pairs.entry(k).or_default() += v;
        }
    }

    fn add_doc(&mut self, doc: &[TermId], keep: Option<&BTreeSet<TermId>>) {
        if doc.is_empty() {
            return;
        }
        let w = self.window_size;
        let starts = if doc.len() <= w { 1 } else { doc.len() - w + 1 };
        let mut seen: Vec<TermId> = Vec::with_capacity(w.min(doc.len()));
        for s in 0..starts {
            let span = &doc[s..(s + w).min(doc.len())];
            seen.clear();
            seen.extend(span.iter().copied().filter(|t| keep.is_none_or(|k| k.contains(t))));
            seen.sort_unstable();
            seen.dedup();
            self.n_windows += 1;
            for (i, &a) in seen.iter().enumerate() {
                *self.unigram.entry(a).or_default() += 1;
                for &b in &seen[i + 1..] {
                    *self.pairs.entry((a, b)).or_default() += 1;
                }
            }
        }
    }
}

fn count_parallel(docs: &[Vec<TermId>], window_size: usize, keep: Option<&BTreeSet<TermId>>) -> CooccurrenceCounts {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    let chunk = docs.len().div_ceil(threads).max(256);
    let parts: Vec<CooccurrenceCounts> = std::thread::scope(|s| {
        let handles: Vec<_> = docs
            .chunks(chunk)
            .map(|c| {
                s.spawn(move || {
                    let mut acc = CooccurrenceCounts {
                        window_size,
                        ..Default::default()
                    };
                    for d in c {
                        acc.add_doc(d, keep);
                    }
                    acc
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut total = CooccurrenceCounts {
        window_size,
        ..Default::default()
    };
    for p in parts {
        total.merge(p);
    }
    total
}

fn check_window(window_size: usize) -> Result<(), CoherenceError> {
    if window_size < 2 {
        return Err(CoherenceError::InvalidArgument(format!(
            "window size {window_size} must be ≥ 2"
        )));
    }
    Ok(())
}

/// Counts every contiguous span of `window_size` tokens in each document.
/// A document shorter than the window is a single window; an empty one
/// contributes none.
pub fn window_counts(docs: &[Vec<TermId>], window_size: usize) -> Result<CooccurrenceCounts, CoherenceError> {
    check_window(window_size)?;
    Ok(count_parallel(docs, window_size, None))
}

/// Like [`window_counts`], but only records terms in `terms`. Window totals
/// are unaffected, so NPMI values among those terms are identical.
pub fn window_counts_for(
    docs: &[Vec<TermId>],
    window_size: usize,
    terms: &BTreeSet<TermId>,
) -> Result<CooccurrenceCounts, CoherenceError> {
    check_window(window_size)?;
    Ok(count_parallel(docs, window_size, Some(terms)))
}

/// Normalized PMI over window probabilities. Limits: 0 when either term
/// never occurs, −1 when the pair never co-occurs, 1 when the pair occurs
/// in every window.
pub fn npmi(counts: &CooccurrenceCounts, wi: TermId, wj: TermId) -> f64 {
    let (ci, cj) = (counts.unigram(wi), counts.unigram(wj));
    if ci == 0 || cj == 0 {
        return 0.0;
    }
    let cij = counts.pair(wi, wj);
    if cij == 0 {
        return -1.0;
    }
    if cij == counts.n_windows {
        return 1.0;
    }
    let n = counts.n_windows as f64;
    let (pi, pj, pij) = (ci as f64 / n, cj as f64 / n, cij as f64 / n);
    let v = (pij / (pi * pj)).ln() / -pij.ln();
    v.clamp(-1.0, 1.0)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// C_v: mean cosine over all unordered pairs of the terms' NPMI context
/// vectors, each vector taken over the same term set.
pub fn topic_coherence(counts: &CooccurrenceCounts, top_terms: &[TermId]) -> Result<f64, CoherenceError> {
    let n = top_terms.len();
    if n < 2 {
        return Err(CoherenceError::TooFewTerms(n));
    }
    let vectors: Vec<Vec<f64>> = top_terms
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            top_terms
                .iter()
                .enumerate()
                .map(|(j, &b)| if i == j { 1.0 } else { npmi(counts, a, b) })
                .collect()
        })
        .collect();
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += cosine(&vectors[i], &vectors[j]);
        }
    }
    Ok(sum / (n * (n - 1) / 2) as f64)
}

/// C_v of every topic of a model over its top `top_n` terms.
pub fn model_coherences(
    model: &LdaModel,
    vocab: &Vocabulary,
    counts: &CooccurrenceCounts,
    top_n: usize,
) -> Result<Vec<f64>, CoherenceError> {
    (0..model.num_topics())
        .map(|t| topic_coherence(counts, &top_term_ids(model, vocab, t, top_n)?))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceCurve {
    pub points: Vec<(usize, f64)>,
    pub best_k: usize,
}

impl CoherenceCurve {
    /// Builds a curve from unsorted points; best k is the maximum, the
    /// smallest such k on ties.
    pub fn from_points(mut points: Vec<(usize, f64)>) -> Result<Self, CoherenceError> {
        if points.is_empty() {
            return Err(CoherenceError::InvalidArgument("empty coherence curve".into()));
        }
        points.sort_by_key(|p| p.0);
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(CoherenceError::InvalidArgument("duplicate k in curve".into()));
        }
        let mut best = points[0];
        for &p in &points[1..] {
            if p.1 > best.1 || best.1.is_nan() {
                best = p;
            }
        }
        Ok(Self {
            points,
            best_k: best.0,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,c_v\n");
        for (k, c) in &self.points {
            let _ = writeln!(s, "{k},{c:.6}");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, CoherenceError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "k,c_v")) => {}
            _ => {
                return Err(CoherenceError::Format {
                    line: 1,
                    message: "expected header k,c_v".into(),
                })
            }
        }
        let mut points = Vec::new();
        for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |m: &str| CoherenceError::Format {
                line: i + 1,
                message: m.to_string(),
            };
            let (k, c) = line.split_once(',').ok_or_else(|| bad("expected two fields"))?;
            points.push((
                k.trim().parse().map_err(|_| bad("bad k"))?,
                c.trim().parse().map_err(|_| bad("bad c_v"))?,
            ));
        }
        Self::from_points(points)
    }

    pub fn save(&self, path: &Path) -> Result<(), CoherenceError> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    pub fn load(path: &Path) -> Result<Self, CoherenceError> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Trains one model per k (all with the base seed) and scores each by the
/// mean C_v of its topics. Models are trained in parallel.
pub fn sweep_k(
    corpus: &[BowDocument],
    vocab: &Vocabulary,
    counts: &CooccurrenceCounts,
    k_values: &[usize],
    base: &LdaConfig,
    top_n: usize,
) -> Result<CoherenceCurve, CoherenceError> {
    sweep_k_with_models(corpus, vocab, counts, k_values, base, top_n).map(|(c, _)| c)
}

/// [`sweep_k`], also returning the trained models in ascending k order.
pub fn sweep_k_with_models(
    corpus: &[BowDocument],
    vocab: &Vocabulary,
    counts: &CooccurrenceCounts,
    k_values: &[usize],
    base: &LdaConfig,
    top_n: usize,
) -> Result<(CoherenceCurve, Vec<LdaModel>), CoherenceError> {
    let ks: Vec<usize> = k_values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if ks.is_empty() {
        return Err(CoherenceError::InvalidArgument("no k values to sweep".into()));
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<(f64, LdaModel), CoherenceError>>>> =
        Mutex::new((0..ks.len()).map(|_| None).collect());
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(ks.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= ks.len() {
                    break;
                }
                let r = train_lda(corpus, vocab, &base.with_k(ks[i]))
                    .map_err(CoherenceError::from)
                    .and_then(|m| {
                        let cs = model_coherences(&m, vocab, counts, top_n)?;
                        Ok((cs.iter().sum::<f64>() / cs.len() as f64, m))
                    });
                log::info!("sweep k={} done", ks[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut points = Vec::with_capacity(ks.len());
    let mut models = Vec::with_capacity(ks.len());
    for (k, r) in ks.iter().zip(results.into_inner().unwrap()) {
        let (c, m) = r.expect("every k trained")?;
        points.push((*k, c));
        models.push(m);
    }
    Ok((CoherenceCurve::from_points(points)?, models))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_doc_is_one_window() {
        let c = window_counts(&[vec![0, 1]], DEFAULT_WINDOW).unwrap();
        assert_eq!(c.n_windows, 1);
        assert_eq!((c.unigram(0), c.unigram(1), c.pair(0, 1)), (1, 1, 1));
    }

    #[test]
    fn sliding_windows_hand_count() {
        let c = window_counts(&[vec![0, 1, 0]], 2).unwrap();
        assert_eq!(c.n_windows, 2);
        assert_eq!((c.unigram(0), c.unigram(1), c.pair(1, 0)), (2, 2, 2));
        assert!(window_counts(&[vec![0]], 1).is_err());
        assert_eq!(window_counts(&[vec![]], 5).unwrap().n_windows, 0);
    }

    #[test]
    fn npmi_limits() {
        // 0 and 1 always together in half the windows
        let docs = vec![vec![0, 1], vec![0, 1], vec![2], vec![3]];
        let c = window_counts(&docs, 10).unwrap();
        assert!((npmi(&c, 0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(npmi(&c, 0, 2), -1.0);
        assert_eq!(npmi(&c, 0, 9), 0.0);
        // independence: P(0)=P(1)=1/2, P(0,1)=1/4
        let docs = vec![vec![0, 1], vec![0], vec![1], vec![2]];
        let c = window_counts(&docs, 10).unwrap();
        assert!(npmi(&c, 0, 1).abs() < 1e-12);
        let all = window_counts(&[vec![4, 5], vec![5, 4]], 10).unwrap();
        assert_eq!(npmi(&all, 4, 5), 1.0);
    }

    #[test]
    fn restricted_counts_agree() {
        let docs = vec![vec![0, 1, 2, 3, 1], vec![2, 3, 4], vec![0, 4]];
        let full = window_counts(&docs, 3).unwrap();
        let some = window_counts_for(&docs, 3, &BTreeSet::from([1, 3])).unwrap();
        assert_eq!(full.n_windows, some.n_windows);
        assert_eq!(npmi(&full, 1, 3), npmi(&some, 1, 3));
        assert_eq!(some.unigram(0), 0);
    }

    #[test]
    fn identical_contexts_give_one() {
        let docs = vec![vec![0, 1], vec![0, 1], vec![2]];
        let c = window_counts(&docs, 10).unwrap();
        assert!((topic_coherence(&c, &[0, 1]).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(topic_coherence(&c, &[0]), Err(CoherenceError::TooFewTerms(1))));
    }

    #[test]
    fn curve_ties_and_csv() {
        let c = CoherenceCurve::from_points(vec![(8, 0.4), (3, 0.5), (5, 0.5)]).unwrap();
        assert_eq!(c.best_k, 3);
        assert_eq!(c.points.iter().map(|p| p.0).collect::<Vec<_>>(), [3, 5, 8]);
        assert_eq!(c.to_csv(), "k,c_v\n3,0.500000\n5,0.500000\n8,0.400000\n");
        assert_eq!(CoherenceCurve::from_csv(&c.to_csv()).unwrap(), c);
        assert!(CoherenceCurve::from_points(vec![]).is_err());
    }

    fn docs_strategy() -> impl Strategy<Value = Vec<Vec<TermId>>> {
        prop::collection::vec(prop::collection::vec(0u32..8, 0..15), 1..5)
    }

    proptest! {
        #[test]
        fn count_bounds(docs in docs_strategy(), w in 2usize..6) {
            let c = window_counts(&docs, w).unwrap();
            for ((a, b), n) in c.pairs() {
                prop_assert!(a < b);
                prop_assert!(n <= c.unigram(a).min(c.unigram(b)));
            }
            for (_, n) in c.unigrams() {
                prop_assert!(n <= c.n_windows);
            }
        }

        #[test]
        fn npmi_symmetric_and_bounded(docs in docs_strategy(), w in 2usize..6, a in 0u32..8, b in 0u32..8) {
            let c = window_counts(&docs, w).unwrap();
            let x = npmi(&c, a, b);
            prop_assert_eq!(x, npmi(&c, b, a));
            prop_assert!((-1.0..=1.0).contains(&x));
        }

        #[test]
        fn coherence_bounded(docs in docs_strategy(), terms in prop::collection::btree_set(0u32..8, 2..6)) {
            let c = window_counts(&docs, 4).unwrap();
            let t: Vec<TermId> = terms.into_iter().collect();
            let v = topic_coherence(&c, &t).unwrap();
            prop_assert!((-1.0..=1.0).contains(&v));
        }
    }
}
