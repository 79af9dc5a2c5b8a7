//! Score LDA models for several k by C_v coherence and pick the best one.
//!
//!     cargo run --release --example coherence_sweep

use std::error::Error;
use std::path::Path;

use ethos::coherence::{npmi, sweep_k, window_counts, DEFAULT_WINDOW};
use ethos::corpus::{build_vocabulary, detect_phrases, to_bow};
use ethos::ingest::{filter_reviews, load_reviews_file, FilterConfig};
use ethos::textprep::{Preprocessor, TextResources};
use ethos::topicmodel::{Alpha, LdaConfig};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/reviews.jsonl");
    let kept = filter_reviews(&load_reviews_file(&path)?.records, &FilterConfig::default()).kept;
    let docs = Preprocessor::new(TextResources::bundled()).run(&kept).documents;
    let lemmas: Vec<Vec<String>> = docs.iter().map(|d| d.lemmas.clone()).collect();
    let phrased = detect_phrases(&lemmas, 10, 10.0)?;
    let vocab = build_vocabulary(&phrased, 2, 0.5)?;
    let bow: Vec<_> = docs
        .iter()
        .zip(&phrased)
        .map(|(d, p)| to_bow(&d.review_id, p, &vocab))
        .filter(|b| !b.is_empty())
        .collect();
    let encoded: Vec<_> = phrased.iter().map(|p| vocab.encode(p)).collect();
    let counts = window_counts(&encoded, DEFAULT_WINDOW)?;

    let base = LdaConfig { alpha: Alpha::Value(0.5), passes: 100, burn_in: 50, ..Default::default() };
    let curve = sweep_k(&bow, &vocab, &counts, &[4, 8, 12], &base, 20)?;
    let mut s = String::from("k  C_v\n");
    for (k, c) in &curve.points {
        s += &format!("{k:<2} {c:.4}\n");
    }
    s += &format!("best k = {}\n", curve.best_k);
    if let (Some(a), Some(b)) = (vocab.id("privacy"), vocab.id("data")) {
        s += &format!("NPMI(privacy, data) = {:.3}\n", npmi(&counts, a, b));
    }
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
