//! Load a review export, apply the exclusion filters and show what was
//! dropped and why.
//!
//!     cargo run --example ingest [path/to/reviews.jsonl]

use std::error::Error;
use std::path::PathBuf;

use ethos::ingest::{filter_reviews, load_reviews_file, FilterConfig};

pub fn run_example(path: Option<PathBuf>) -> Result<String, Box<dyn Error>> {
    let path = path.unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/reviews.jsonl"));
    let loaded = load_reviews_file(&path)?;
    let out = filter_reviews(&loaded.records, &FilterConfig::default());
    let mut s = format!(
        "{}: {} records ({} malformed lines skipped), {} kept\n",
        path.display(),
        loaded.records.len(),
        loaded.malformed(),
        out.kept.len()
    );
    for (reason, n) in &out.rejected_counts {
        s += &format!("  {reason:<12} {n}\n");
    }
    for (id, reason) in out.rejected.iter().take(5) {
        let text = &loaded.records.iter().find(|r| &r.id == id).unwrap().text;
        s += &format!("  e.g. {id} ({}): {text:.60}\n", reason.as_str());
    }
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example(std::env::args().nth(1).map(PathBuf::from))?);
    Ok(())
}
