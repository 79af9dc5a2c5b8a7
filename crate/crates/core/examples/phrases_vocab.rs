//! Detect multi-word phrases in the fixture corpus, build the filtered
//! vocabulary and encode a document as bag-of-words.
//!
//!     cargo run --example phrases_vocab

use std::collections::BTreeMap;
use std::error::Error;
use std::path::Path;

use ethos::corpus::{build_vocabulary, detect_phrases, to_bow, PHRASE_JOINER};
use ethos::ingest::{filter_reviews, load_reviews_file, FilterConfig};
use ethos::textprep::{Preprocessor, TextResources};

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/reviews.jsonl");
    let kept = filter_reviews(&load_reviews_file(&path)?.records, &FilterConfig::default()).kept;
    let docs = Preprocessor::new(TextResources::bundled()).run(&kept).documents;
    let lemmas: Vec<Vec<String>> = docs.iter().map(|d| d.lemmas.clone()).collect();
    let phrased = detect_phrases(&lemmas, 10, 10.0)?;

    let mut phrase_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in phrased.iter().flatten().filter(|t| t.contains(PHRASE_JOINER)) {
        *phrase_counts.entry(t).or_default() += 1;
    }
    let mut top: Vec<_> = phrase_counts.into_iter().collect();
    top.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));

    let vocab = build_vocabulary(&phrased, 2, 0.5)?;
    let bow = to_bow(&docs[0].review_id, &phrased[0], &vocab);
    let mut s = format!("{} documents, {} distinct phrases, vocabulary {}\n", docs.len(), top.len(), vocab.len());
    for (p, n) in top.iter().take(10) {
        s += &format!("  {p:<28} {n}\n");
    }
    s += &format!("{} -> {:?}\n", docs[0].review_id, bow.decode(&vocab));
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
