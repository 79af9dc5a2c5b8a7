//! Train a collapsed-Gibbs LDA model on a tiny hand-made corpus and print
//! each topic's top words and a document's mixture.
//!
//!     cargo run --example train_lda

use std::error::Error;

use ethos::corpus::{build_vocabulary, to_bow};
use ethos::topicmodel::{assign_topics, summarize_topics, train_lda, Alpha, LdaConfig};

const DOCS: [&str; 8] = [
    "privacy data share advertiser data policy",
    "data privacy encrypt policy share",
    "advertiser share data sell privacy",
    "policy privacy data encrypt sell",
    "crash slow update login crash bug",
    "bug crash freeze update slow",
    "login update bug freeze crash",
    "slow freeze crash bug login",
];

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let docs: Vec<Vec<String>> = DOCS.iter().map(|d| d.split_whitespace().map(String::from).collect()).collect();
    let vocab = build_vocabulary(&docs, 1, 1.0)?;
    let bow: Vec<_> = docs.iter().enumerate().map(|(i, d)| to_bow(&format!("doc{i}"), d, &vocab)).collect();
    let cfg = LdaConfig { k: 2, alpha: Alpha::Value(0.1), ..Default::default() };
    let model = train_lda(&bow, &vocab, &cfg)?;

    let mut s = String::new();
    for t in summarize_topics(&model, &vocab, 5)? {
        let words: Vec<String> = t.top_terms.iter().map(|(w, p)| format!("{w} {p:.2}")).collect();
        s += &format!("topic {} ({} docs): {}\n", t.topic_id, t.review_count, words.join(", "));
    }
    let assign = assign_topics(&model, 0.2)?;
    s += &format!("doc0 theta = {:.3?}, primary topic {}\n", model.theta.row(0), assign["doc0"].primary);
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
