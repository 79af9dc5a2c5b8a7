//! Clean, expand slang, lemmatize and filter stopwords; then print the
//! corpus statistics table for a few reviews.
//!
//!     cargo run --example preprocess

use std::error::Error;

use chrono::Utc;
use ethos::ingest::{ReviewRecord, Store};
use ethos::textprep::{reading_ease, stats_table, Preprocessor, TextResources};

const SAMPLES: [&str; 3] = [
    "Tbh this app rlly helped w/ my panic attacks!!! 10/10 <br> https://example.com",
    "The chatbot keeps crashing after the update. Sooo frustrating... Y'all fix it pls.",
    "I love that my journal entries stay private. Breathing exercises calm me down.",
];

pub fn run_example() -> Result<String, Box<dyn Error>> {
    let prep = Preprocessor::new(TextResources::bundled());
    let mut records = Vec::new();
    let mut s = String::new();
    for (i, text) in SAMPLES.iter().enumerate() {
        let store = if i % 2 == 0 { Store::Play } else { Store::Appstore };
        let r = ReviewRecord::new(None, "com.example.app", store, *text, None, None, Utc::now())?;
        let doc = prep.process(&r);
        s += &format!("raw:     {text}\nclean:   {}\nlemmas:  {}\nease:    {:.1}\n\n",
            doc.clean_text, doc.lemmas.join(" "), reading_ease(text));
        records.push(r);
    }
    let table = stats_table(&records)?;
    s += &format!(
        "total: {} reviews, {} sentences, {} words, avg {:.2} words per review\n",
        table.total.n_reviews, table.total.n_sentences, table.total.n_words, table.total.words.avg
    );
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    print!("{}", run_example()?);
    Ok(())
}
