use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, Utc};
use serde::Deserialize;

use super::{IngestError, ReviewRecord, Store};

/// Input row accepted from JSON Lines or CSV.
#[derive(Debug, Deserialize)]
struct InputRow {
    #[serde(default)]
    id: Option<String>,
    app_id: String,
    store: Store,
    text: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    rating: Option<u8>,
    #[serde(default, deserialize_with = "empty_as_none")]
    posted_at: Option<NaiveDate>,
    #[serde(default)]
    fetched_at: Option<DateTime<Utc>>,
}

fn empty_as_none<'de, D, T>(de: D) -> Result<Option<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: std::str::FromStr + serde::Deserialize<'de>,
    T::Err: std::fmt::Display,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw<T> {
        Str(String),
        Val(T),
    }
    match Option::<Raw<T>>::deserialize(de)? {
        None => Ok(None),
        Some(Raw::Val(v)) => Ok(Some(v)),
        Some(Raw::Str(s)) if s.trim().is_empty() => Ok(None),
        Some(Raw::Str(s)) => s.trim().parse().map(Some).map_err(serde::de::Error::custom),
    }
}

impl InputRow {
    fn into_record(self, now: DateTime<Utc>) -> Result<ReviewRecord, IngestError> {
        ReviewRecord::new(
            self.id,
            self.app_id,
            self.store,
            self.text,
            self.rating,
            self.posted_at,
            self.fetched_at.unwrap_or(now),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedReviews {
    pub records: Vec<ReviewRecord>,
    /// 1-based line numbers (data rows for CSV) that failed to parse.
    pub malformed_lines: Vec<usize>,
}

impl LoadedReviews {
    pub fn malformed(&self) -> usize {
        self.malformed_lines.len()
    }
}

/// Loads reviews from JSON Lines, or from CSV when the extension is `.csv`
/// (header: `id,app_id,store,text,rating,posted_at`). Malformed lines are
/// skipped and reported; a file with no parseable line is a format error.
pub fn load_reviews_file(path: &Path) -> Result<LoadedReviews, IngestError> {
    if !path.exists() {
        return Err(IngestError::FileNotFound(path.display().to_string()));
    }
    let now = Utc::now();
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let loaded = if is_csv {
        load_csv(path, now)?
    } else {
        load_jsonl(path, now)?
    };
    if loaded.records.is_empty() {
        return Err(IngestError::Format(format!(
            "{}: no parseable review ({} malformed lines)",
            path.display(),
            loaded.malformed()
        )));
    }
    if !loaded.malformed_lines.is_empty() {
        log::warn!(
            "{}: skipped {} malformed lines",
            path.display(),
            loaded.malformed()
        );
    }
    Ok(loaded)
}

fn load_jsonl(path: &Path, now: DateTime<Utc>) -> Result<LoadedReviews, IngestError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = LoadedReviews {
        records: Vec::new(),
        malformed_lines: Vec::new(),
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<InputRow>(&line)
            .map_err(|e| IngestError::Format(e.to_string()))
            .and_then(|row| row.into_record(now));
        match parsed {
            Ok(r) => out.records.push(r),
            Err(_) => out.malformed_lines.push(i + 1),
        }
    }
    Ok(out)
}

fn load_csv(path: &Path, now: DateTime<Utc>) -> Result<LoadedReviews, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| IngestError::Format(e.to_string()))?;
    let mut out = LoadedReviews {
        records: Vec::new(),
        malformed_lines: Vec::new(),
    };
    for (i, row) in reader.deserialize::<InputRow>().enumerate() {
        match row
            .map_err(|e| IngestError::Format(e.to_string()))
            .and_then(|r| r.into_record(now))
        {
            Ok(r) => out.records.push(r),
            Err(_) => out.malformed_lines.push(i + 1),
        }
    }
    Ok(out)
}

/// Reads a run's `reviews.jsonl`. Unlike [`load_reviews_file`] any malformed
/// line is an error: this file is produced by the pipeline itself.
pub fn read_reviews_jsonl(path: &Path) -> Result<Vec<ReviewRecord>, IngestError> {
    let reader = BufReader::new(File::open(path).map_err(|_| {
        IngestError::FileNotFound(path.display().to_string())
    })?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ReviewRecord = serde_json::from_str(&line)
            .map_err(|e| IngestError::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_reviews_jsonl(path: &Path, records: &[ReviewRecord]) -> Result<(), IngestError> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| IngestError::Format(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}
