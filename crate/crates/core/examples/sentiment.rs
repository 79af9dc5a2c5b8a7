//! Aspect-conditioned polarity with the bundled lexicon.
//!
//!     cargo run --example sentiment

use std::error::Error;

use ethos::align::{default_taxonomy, EthicsPrinciple};
use ethos::sentiment::{classify, topic_sentiment, LexiconProvider};

const REVIEWS: [(&str, &str); 5] = [
    ("privacy-data-protection", "they sold my data without asking"),
    ("privacy-data-protection", "my journal is encrypted and secure, great privacy"),
    ("safety", "no crisis resources at all, this is not safe"),
    ("beneficence", "the breathing exercises really helped my anxiety"),
    ("beneficence", "it did not help, the advice was useless"),
];

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let provider = LexiconProvider::bundled();
    let taxonomy = default_taxonomy();
    let find = |id: &str| -> &EthicsPrinciple { taxonomy.iter().find(|p| p.id == id).expect("known id") };
    let mut s = String::new();
    let mut polarities = Vec::new();
    for (i, (aspect, text)) in REVIEWS.iter().enumerate() {
        let r = classify(&format!("r{i}"), text, find(aspect), &provider)?;
        s += &format!("{:+} p_pos={:.3} [{aspect}] {text}\n", r.polarity, r.p_pos);
        polarities.push(r.polarity);
    }
    s += &format!("mean polarity: {:+.2}\n", topic_sentiment(&polarities)?);
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
