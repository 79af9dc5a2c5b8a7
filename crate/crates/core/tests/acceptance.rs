//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails. Runs without the review UI.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use common::*;
use ethos::align::{
    align_topic, align_topics, append_decision, apply_decisions, default_taxonomy, emergent_overlay,
    read_decisions, similarity, Action, AlignmentResult, DecisionRecord, EmbeddingProvider, EmbeddingVector,
    EthicsPrinciple, LabelPayload, PrincipleSource, StaticVectors,
};
use ethos::coherence::{npmi, sweep_k, topic_coherence, window_counts, DEFAULT_WINDOW};
use ethos::ingest::{filter_reviews, load_reviews_file, FilterConfig};
use ethos::pipeline::RunData;
use ethos::sentiment::{classify, lexicon_score, logistic, topic_sentiment, topic_sentiments, LexiconProvider};
use ethos::textprep::TextResources;
use ethos::topicmodel::{train_lda, Alpha, GibbsSampler, LdaConfig, TopicSummary};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn lda_recovery() -> Outcome {
    let syn = synthetic(11);
    let cfg = LdaConfig { k: SYN_K, ..Default::default() };
    let start = Instant::now();
    let model = train_lda(&syn.bow, &syn.vocab, &cfg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cost: Vec<Vec<f64>> = (0..SYN_K)
        .map(|t| (0..SYN_K).map(|s| total_variation(model.phi.row(t), &syn.phi_star[s])).collect())
        .collect();
    let perm = best_matching(&cost);
    let tvs: Vec<f64> = perm.iter().enumerate().map(|(t, &s)| cost[t][s]).collect();
    let worst = tvs.iter().cloned().fold(0.0, f64::max);
    ensure!(worst <= 0.15, "max TV {worst:.4} > 0.15 ({tvs:?})");
    ensure!(elapsed < Duration::from_secs(30), "training took {elapsed:?}");
    Ok(format!("max TV {worst:.4}, {:.1}s", elapsed.as_secs_f64()))
}

fn sampler_invariants() -> Outcome {
    let syn = synthetic(5);
    let fixture = fixture_bow();
    let mut sweeps = 0;
    for (bow, v) in [(&syn.bow, SYN_V), (&fixture.0, fixture.1)] {
        for partitions in [1, 4] {
            let cfg = LdaConfig {
                k: 5,
                alpha: Alpha::Value(0.2),
                partitions,
                ..Default::default()
            };
            let mut s = GibbsSampler::new(bow, v, &cfg).map_err(|e| e.to_string())?;
            for i in 0..25 {
                s.sweep();
                s.check_counts().map_err(|e| format!("sweep {i}: {e}"))?;
                s.accumulate();
                sweeps += 1;
                let (phi, theta) = s.estimates();
                for m in [&phi, &theta] {
                    for r in 0..m.rows() {
                        let sum: f64 = m.row(r).iter().sum();
                        ensure!((sum - 1.0).abs() <= 1e-9, "row {r} sums to {sum}");
                    }
                }
            }
        }
    }
    let run = || {
        let cfg = LdaConfig { k: 3, passes: 60, burn_in: 20, ..Default::default() };
        train_lda(&syn.bow, &syn.vocab, &cfg).unwrap()
    };
    let (a, b) = (run(), run());
    let bits = |m: &ethos::topicmodel::LdaModel| {
        m.phi.data().iter().chain(m.theta.data()).map(|x| x.to_bits()).collect::<Vec<_>>()
    };
    ensure!(bits(&a) == bits(&b), "same seed gave different estimates");
    ensure!(
        a.log_likelihood_trace.iter().map(|x| x.to_bits()).eq(b.log_likelihood_trace.iter().map(|x| x.to_bits())),
        "same seed gave different likelihood traces"
    );
    Ok(format!("{sweeps} sweeps checked, seeded runs bit-identical"))
}

/// Bag-of-words for the cleaned fixture corpus, built through the library.
fn fixture_bow() -> (Vec<ethos::corpus::BowDocument>, usize) {
    let res = TextResources::bundled();
    let loaded = load_reviews_file(&fixtures().join("reviews.jsonl")).unwrap();
    let kept = filter_reviews(&loaded.records, &FilterConfig::default()).kept;
    let docs: Vec<Vec<String>> = kept.iter().map(|r| res.content_lemmas(&r.text)).collect();
    let vocab = ethos::corpus::build_vocabulary(&docs, 2, 0.5).unwrap();
    let bow: Vec<_> = kept
        .iter()
        .zip(&docs)
        .map(|(r, d)| ethos::corpus::to_bow(&r.id, d, &vocab))
        .filter(|b| !b.is_empty())
        .collect();
    (bow, vocab.len())
}

fn npmi_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..1000 {
        let docs = random_small_corpus(&mut rng, 8);
        let window = rng.random_range(2..=12);
        let counts = window_counts(&docs, window).map_err(|e| e.to_string())?;
        let brute = brute_windows(&docs, window);
        ensure!(counts.n_windows == brute.n_windows, "case {case}: window totals differ");
        for a in 0..8 {
            ensure!(
                counts.unigram(a) == *brute.unigram.get(&a).unwrap_or(&0),
                "case {case}: unigram {a} differs"
            );
            for b in 0..8 {
                if a < b {
                    ensure!(
                        counts.pair(a, b) == *brute.pair.get(&(a, b)).unwrap_or(&0),
                        "case {case}: pair ({a},{b}) differs"
                    );
                }
                let (x, y) = (npmi(&counts, a, b), brute.npmi(a, b));
                ensure!(x == y || (x - y).abs() <= 1e-12, "case {case}: npmi({a},{b}) {x} vs {y}");
                ensure!((-1.0..=1.0).contains(&x), "case {case}: npmi out of range {x}");
            }
        }
    }
    // Perfect association: a and b always together, each in half the windows.
    let docs = vec![vec![0, 1], vec![2, 3]];
    let c = window_counts(&docs, 110).unwrap();
    ensure!(npmi(&c, 0, 1) == 1.0, "perfect association gave {}", npmi(&c, 0, 1));
    ensure!(npmi(&c, 0, 2) == -1.0, "disjoint terms gave {}", npmi(&c, 0, 2));
    Ok("1000 random corpora, limits exact".into())
}

fn c_v_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let docs: Vec<Vec<u32>> = (0..rng.random_range(3..12))
            .map(|_| (0..rng.random_range(1..15)).map(|_| rng.random_range(0..9)).collect())
            .collect();
        let window = rng.random_range(2..=10);
        let counts = window_counts(&docs, window).unwrap();
        let brute = brute_windows(&docs, window);
        let mut terms: Vec<u32> = (0..9).collect();
        terms.shuffle(&mut rng);
        terms.truncate(5);
        let got = topic_coherence(&counts, &terms).map_err(|e| e.to_string())?;
        let want = brute.c_v(&terms);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-12, "case {case}: {got} vs {want}");
        for _ in 0..100 {
            let mut p = terms.clone();
            p.shuffle(&mut rng);
            let again = topic_coherence(&counts, &p).unwrap();
            ensure!((again - got).abs() <= 1e-12, "case {case}: ordering changed C_v {got} to {again}");
        }
    }
    Ok(format!("200 toy topics, max deviation {worst:.1e}, 100 orderings each"))
}

fn sweep_sanity() -> Outcome {
    let syn = synthetic(11);
    let counts = window_counts(&syn.docs, DEFAULT_WINDOW).unwrap();
    let curve = sweep_k(&syn.bow, &syn.vocab, &counts, &[2, 3, 5, 8], &LdaConfig::default(), 20)
        .map_err(|e| e.to_string())?;
    let pts: Vec<String> = curve.points.iter().map(|(k, c)| format!("{k}:{c:.3}")).collect();
    ensure!(curve.best_k == 3, "best_k {} ({})", curve.best_k, pts.join(" "));
    Ok(format!("best_k 3 ({})", pts.join(" ")))
}

/// Maps a few words to fixed axes; everything else is unknown.
struct AxisProvider;

impl EmbeddingProvider for AxisProvider {
    fn id(&self) -> &str {
        "axes"
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ethos::align::AlignError> {
        let mut v = vec![0.0; 3];
        for w in text.split_whitespace() {
            match w {
                "east" => v[0] += 1.0,
                "north" => v[1] += 1.0,
                "up" => v[2] += 1.0,
                // Exactly 60 degrees from east: cosine 0.5.
                "sixty" => {
                    v[0] += 0.5;
                    v[1] += 3f64.sqrt() / 2.0;
                }
                // Slightly more than 60 degrees from east.
                "beyond" => {
                    v[0] += 0.5 - 1e-9;
                    v[1] += 3f64.sqrt() / 2.0;
                }
                _ => {}
            }
        }
        Ok(EmbeddingVector::new(v, "axes"))
    }
}

fn principle(id: &str, definition: &str) -> EthicsPrinciple {
    EthicsPrinciple {
        id: id.into(),
        label: id.to_uppercase(),
        definition: definition.into(),
        source: PrincipleSource::Known,
        framework_refs: vec![],
    }
}

fn topic(id: usize, terms: &[&str]) -> TopicSummary {
    TopicSummary {
        topic_id: id,
        top_terms: terms.iter().map(|t| (t.to_string(), 1.0 / terms.len() as f64)).collect(),
        review_count: 0,
    }
}

fn alignment() -> Outcome {
    let ev = |v: &[f64]| EmbeddingVector::new(v.to_vec(), "t");
    let s = |a: &[f64], b: &[f64]| similarity(&ev(a), &ev(b)).unwrap();
    ensure!((s(&[0.3, -2.0, 5.0], &[0.3, -2.0, 5.0]) - 1.0).abs() < 1e-12, "identical vectors");
    ensure!(s(&[1.0, 0.0, 0.0], &[0.0, 3.0, 0.0]).abs() < 1e-12, "orthogonal vectors");

    let provider = StaticVectors::bundled();
    let mut taxonomy = default_taxonomy();
    taxonomy.extend(emergent_overlay());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let words: Vec<String> = taxonomy
        .iter()
        .flat_map(|p| p.definition.split_whitespace().map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase()))
        .filter(|w| w.len() > 3)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let principle_vecs: Vec<(String, EmbeddingVector)> =
        taxonomy.iter().map(|p| (p.id.clone(), provider.embed(&p.definition).unwrap())).collect();
    let argmax = |v: &EmbeddingVector| {
        let mut best: Option<(&str, f64)> = None;
        for (id, pv) in &principle_vecs {
            let x = similarity(v, pv).unwrap();
            if best.is_none_or(|(_, b)| x > b) {
                best = Some((id, x));
            }
        }
        best.unwrap().0.to_string()
    };
    let (mut assigned, mut emergent) = (0, 0);
    for i in 0..300 {
        let terms: Vec<&str> = words.choose_multiple(&mut rng, 6).map(String::as_str).collect();
        let Ok(v) = provider.embed(&terms.join(" ")) else { continue };
        if v.is_zero() {
            continue;
        }
        let scale = rng.random_range(0.01..100.0);
        ensure!(argmax(&v) == argmax(&v.scaled(scale)), "argmax moved under scaling by {scale}");
        let r = align_topic(&topic(i, &terms), &taxonomy, &provider, 0.5).map_err(|e| e.to_string())?;
        let best = r.scores.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        ensure!(r.emergent == (best < 0.5), "topic {i}: emergent flag disagrees with score {best}");
        ensure!(r.best_principle.is_some() == (best >= 0.5), "topic {i}: assignment disagrees with score {best}");
        if r.emergent {
            emergent += 1;
        } else {
            assigned += 1;
        }
    }
    // The boundary itself.
    let tax = vec![principle("east", "east")];
    let at = align_topic(&topic(0, &["sixty"]), &tax, &AxisProvider, 0.5).unwrap();
    let below = align_topic(&topic(1, &["beyond"]), &tax, &AxisProvider, 0.5).unwrap();
    ensure!((at.best_score - 0.5).abs() < 1e-12, "boundary score {}", at.best_score);
    ensure!(at.best_principle.as_deref() == Some("east") && !at.emergent, "score 0.5 must be assigned");
    ensure!(below.emergent && below.best_principle.is_none(), "score below 0.5 must be emergent");

    ensure!(assigned > 0 && emergent > 0, "random topics fell on one side only ({assigned}/{emergent})");

    replay_is_byte_identical()?;
    Ok(format!("{assigned} assigned / {emergent} emergent random topics, boundary exact, replay identical"))
}

fn replay_is_byte_identical() -> Result<(), String> {
    let tax = vec![principle("east", "east"), principle("north", "north")];
    let topics = vec![
        topic(0, &["east"]),
        topic(1, &["north", "north", "east"]),
        topic(2, &["up"]),
        topic(3, &["up", "east"]),
        topic(4, &["up", "north"]),
    ];
    let alignments: Vec<AlignmentResult> =
        align_topics(&topics, &tax, &AxisProvider, 0.5, Default::default(), 2).map_err(|e| e.to_string())?;
    let at = |m: u32| Utc.with_ymd_and_hms(2025, 3, 1, 10, m, 0).unwrap();
    let log = vec![
        DecisionRecord { topic_id: 2, action: Action::Accept, label: Some(LabelPayload::New {
            id: "vertical".into(), label: "Vertical".into(), definition: "up".into() }), note: None, decided_at: at(1) },
        DecisionRecord { topic_id: 0, action: Action::Reject, label: None, note: Some("noise".into()), decided_at: at(2) },
        DecisionRecord { topic_id: 3, action: Action::Relabel, label: Some(LabelPayload::Existing("east".into())),
            note: None, decided_at: at(3) },
        DecisionRecord { topic_id: 0, action: Action::Accept, label: None, note: None, decided_at: at(4) },
        DecisionRecord { topic_id: 4, action: Action::Relabel, label: Some(LabelPayload::Existing("vertical".into())),
            note: None, decided_at: at(5) },
    ];
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("decisions.jsonl");
    let mut live = Vec::new();
    for d in &log {
        append_decision(&path, d).map_err(|e| e.to_string())?;
        live.push(d.clone());
    }
    let incremental = apply_decisions(&alignments, &tax, &live).map_err(|e| e.to_string())?.to_json();
    let replayed = read_decisions(&path).map_err(|e| e.to_string())?;
    ensure!(replayed == log, "log did not round-trip");
    for _ in 0..3 {
        let again = apply_decisions(&alignments, &tax, &replayed).map_err(|e| e.to_string())?.to_json();
        ensure!(again == incremental, "replay differs from the live mapping");
    }
    Ok(())
}

fn sentiment() -> Outcome {
    let provider = LexiconProvider::bundled();
    let mut taxonomy = default_taxonomy();
    taxonomy.extend(emergent_overlay());
    let loaded = load_reviews_file(&fixtures().join("reviews.jsonl")).map_err(|e| e.to_string())?;
    let mut n = 0;
    'outer: for r in &loaded.records {
        for p in &taxonomy {
            let s = classify(&r.id, &r.text, p, &provider).map_err(|e| e.to_string())?;
            ensure!((s.p_pos + s.p_neg - 1.0).abs() <= 1e-9, "{} / {}: sums to {}", r.id, p.id, s.p_pos + s.p_neg);
            ensure!(s.polarity == if s.p_pos >= s.p_neg { 1 } else { -1 }, "polarity disagrees with probabilities");
            n += 1;
            if n == 10_000 {
                break 'outer;
            }
        }
    }
    ensure!(n == 10_000, "only {n} classifications available");

    // Flipping every lexicon sign swaps the two probabilities.
    let res = TextResources::bundled();
    let lex = ethos::sentiment::SentimentLexicon::bundled();
    let mut flipped = lex.clone();
    flipped.word_scores.values_mut().for_each(|s| *s = -*s);
    for r in loaded.records.iter().take(500) {
        let lemmas = res.lemma_sequence(&r.text);
        for p in taxonomy.iter().take(4) {
            let kw = ethos::sentiment::aspect_keywords(p, &res);
            let (a, b) = lexicon_score(&lemmas, &kw, &lex);
            let (fa, fb) = lexicon_score(&lemmas, &kw, &flipped);
            ensure!((a - fb).abs() <= 1e-12 && (b - fa).abs() <= 1e-12, "{}: flip not antisymmetric", r.id);
        }
    }
    for x in [-5.0, -0.3, 0.0, 0.7, 12.0] {
        ensure!((logistic(-x) - (1.0 - logistic(x))).abs() <= 1e-15, "logistic asymmetry at {x}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let ps: Vec<i8> = (0..rng.random_range(1..40)).map(|_| if rng.random() { 1 } else { -1 }).collect();
        let pos = ps.iter().filter(|&&p| p == 1).count() as f64;
        let want = (2.0 * pos - ps.len() as f64) / ps.len() as f64;
        ensure!((topic_sentiment(&ps).unwrap() - want).abs() <= 1e-12, "mean of {ps:?}");
    }

    let labeled = read_jsonl(&fixtures().join("sentiment_labeled.jsonl"));
    let by_id: HashMap<&str, &EthicsPrinciple> = taxonomy.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut agree = 0;
    for row in &labeled {
        let p = by_id[row["aspect_id"].as_str().unwrap()];
        let s = classify("x", row["text"].as_str().unwrap(), p, &provider).unwrap();
        if s.polarity as i64 == row["label"].as_i64().unwrap() {
            agree += 1;
        }
    }
    let rate = agree as f64 / labeled.len() as f64;
    ensure!(labeled.len() == 200, "labeled fixture has {} rows", labeled.len());
    ensure!(rate >= 0.70, "agreement {rate:.3} < 0.70");
    Ok(format!("10000 classifications, agreement {agree}/200 = {rate:.3}"))
}

fn ethos(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ethos")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn end_to_end() -> Outcome {
    let conf = fixtures().join("fixture.conf");
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let start = Instant::now();
    let out = ethos(&["run", "--config", conf.to_str().unwrap(), "--run-dir", a.to_str().unwrap()]);
    let elapsed = start.elapsed();
    ensure!(out.status.success(), "ethos run failed: {}", String::from_utf8_lossy(&out.stderr));
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    let md = std::fs::read_to_string(a.join("report.md")).map_err(|e| e.to_string())?;
    for heading in [
        "## Statistics of user review texts",
        "## Topic coherence",
        "## Top words extracted from LDA model",
        "## Identified ethical aspects",
    ] {
        ensure!(md.contains(heading), "report.md lacks {heading:?}");
    }
    for header in [
        "| Statistics | Play Store | App Store | Total |",
        "| Topic # | Top words | No. of reviews |",
        "| Ethical Aspect | Frequency (% of reviews) | Average sentiment score |",
    ] {
        ensure!(md.contains(header), "report.md lacks table header {header:?}");
    }
    let csv = std::fs::read_to_string(a.join("coherence.csv")).map_err(|e| e.to_string())?;
    ensure!(csv.starts_with("k,c_v\n") && csv.lines().count() == 6, "coherence.csv malformed");
    topic_means_match_recount(&a)?;

    let out = ethos(&["run", "--config", conf.to_str().unwrap(), "--run-dir", b.to_str().unwrap()]);
    ensure!(out.status.success(), "second run failed");
    for f in ["report.md", "report.json", "report.csv", "coherence.csv", "theta.bin", "model.json", "sentiments.jsonl"] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        ensure!(x == y, "{f} differs between runs");
    }
    Ok(format!("{:.1}s, four tables present, rerun byte-identical", elapsed.as_secs_f64()))
}

/// S_i recomputed from the run's files with plain loops.
fn topic_means_match_recount(dir: &Path) -> Result<(), String> {
    let data = RunData::load(dir).map_err(|e| e.to_string())?;
    let mapping = data.mapping().map_err(|e| e.to_string())?;
    let lib = topic_sentiments(&data.assignments, &mapping, &data.polarities())
        .map_err(|e| e.to_string())?;
    let sentiments = read_jsonl(&dir.join("sentiments.jsonl"));
    let pol: HashMap<(String, String), i64> = sentiments
        .iter()
        .map(|s| {
            ((s["review_id"].as_str().unwrap().to_string(), s["aspect_id"].as_str().unwrap().to_string()),
                s["polarity"].as_i64().unwrap())
        })
        .collect();
    let mut sums: BTreeMap<usize, (i64, i64)> = BTreeMap::new();
    for (d, id) in data.model.doc_ids.iter().enumerate() {
        let row = data.model.theta.row(d);
        let mut primary = 0;
        for t in 1..row.len() {
            if row[t] > row[primary] {
                primary = t;
            }
        }
        if mapping.assignments.contains_key(&primary) {
            let e = sums.entry(primary).or_default();
            e.0 += pol[&(id.clone(), mapping.assignments[&primary].clone())];
            e.1 += 1;
        }
    }
    ensure!(sums.len() == lib.len(), "topic sets differ");
    for (t, (s, n)) in sums {
        let want = s as f64 / n as f64;
        ensure!((lib[&t] - want).abs() <= 1e-12, "topic {t}: {} vs recount {want}", lib[&t]);
    }
    Ok(())
}

fn ingestion_filters() -> Outcome {
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixtures().join("filter_manifest.json")).unwrap()).unwrap();
    let loaded = load_reviews_file(&fixtures().join("reviews.jsonl")).map_err(|e| e.to_string())?;
    ensure!(loaded.records.len() as u64 == manifest["loaded"].as_u64().unwrap(), "loaded {}", loaded.records.len());
    ensure!(loaded.malformed() as u64 == manifest["malformed"].as_u64().unwrap(), "malformed {}", loaded.malformed());
    let out = filter_reviews(&loaded.records, &FilterConfig::default());
    let ids = |v: &serde_json::Value| -> BTreeSet<String> {
        v.as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect()
    };
    let kept: BTreeSet<String> = out.kept.iter().map(|r| r.id.clone()).collect();
    ensure!(kept == ids(&manifest["kept"]), "kept set differs: {:?}", kept.symmetric_difference(&ids(&manifest["kept"])).collect::<Vec<_>>());
    for (reason, want) in manifest["rejected"].as_object().unwrap() {
        let got: BTreeSet<String> =
            out.rejected.iter().filter(|(_, r)| r.as_str() == reason).map(|(id, _)| id.clone()).collect();
        ensure!(got == ids(want), "{reason} set differs");
        ensure!(out.rejected_counts.get(reason).copied().unwrap_or(0) == got.len(), "{reason} count differs");
    }
    ensure!(out.kept.len() + out.rejected.len() == loaded.records.len(), "partition does not cover the input");
    Ok(format!("{} kept, {} rejected", out.kept.len(), out.rejected.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("lda-recovery", lda_recovery),
        ("sampler-invariants", sampler_invariants),
        ("npmi-oracle", npmi_oracle),
        ("cv-oracle", c_v_oracle),
        ("sweep-sanity", sweep_sanity),
        ("alignment", alignment),
        ("sentiment", sentiment),
        ("end-to-end", end_to_end),
        ("ingestion-filters", ingestion_filters),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| name.contains(x.as_str())) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match result {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
