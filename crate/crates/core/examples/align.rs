//! Map topics to ethical principles by embedding similarity, then apply a
//! reviewer decision to an emergent topic.
//!
//!     cargo run --example align

use std::error::Error;

use chrono::Utc;
use ethos::align::{
    align_topics, apply_decisions, default_taxonomy, Action, DecisionRecord, LabelPayload, StaticVectors,
    DEFAULT_THRESHOLD,
};
use ethos::topicmodel::TopicSummary;

fn topic(id: usize, terms: &[&str]) -> TopicSummary {
    TopicSummary {
        topic_id: id,
        top_terms: terms.iter().map(|t| (t.to_string(), 0.1)).collect(),
        review_count: 0,
    }
}

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let topics = [
        topic(0, &["privacy", "data", "share", "third_party", "advertiser"]),
        topic(1, &["crisis", "hotline", "suicidal", "emergency", "unsafe"]),
        topic(2, &["crash", "slow", "update", "login", "freeze"]),
    ];
    let taxonomy = default_taxonomy();
    let provider = StaticVectors::bundled();
    let aligned = align_topics(&topics, &taxonomy, &provider, DEFAULT_THRESHOLD, Default::default(), 4)?;
    let mut s = String::new();
    for a in &aligned {
        s += &format!(
            "topic {}: best {:?} at {:.3} -> {}\n",
            a.topic_id,
            a.candidate().unwrap_or("-"),
            a.best_score,
            a.best_principle.as_deref().unwrap_or("emergent, pending review")
        );
    }
    let decisions: Vec<DecisionRecord> = aligned
        .iter()
        .filter(|a| a.emergent)
        .map(|a| DecisionRecord {
            topic_id: a.topic_id,
            action: Action::Accept,
            label: Some(LabelPayload::New {
                id: "usability-responsiveness".into(),
                label: "Usability/Responsiveness".into(),
                definition: "the app is fast, stable and easy to use".into(),
            }),
            note: None,
            decided_at: Utc::now(),
        })
        .collect();
    let mapping = apply_decisions(&aligned, &taxonomy, &decisions)?;
    s += &format!("after review: {:?}, pending {:?}\n", mapping.assignments, mapping.pending);
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
