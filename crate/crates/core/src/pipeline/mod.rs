//! Stage runner over a run directory.
//!
//! Every stage reads artifacts written by earlier stages and writes its own
//! into the run directory. `manifest.json` records, per stage, a fingerprint
//! of its config keys and input hashes plus the hashes of its outputs. A
//! stage whose fingerprint and outputs are unchanged is skipped; once a stage
//! re-runs, every later stage re-runs too.

mod config;
mod run;
mod stages;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{AppSpec, ConfigError, EmbeddingChoice, PipelineConfig, SentimentChoice, KEYS};
pub use run::{
    embedding_provider, sentiment_provider, text_resources, IngestSummary, PrepStats, RunData, TopicRecord,
    TopicsFile,
};

pub const MANIFEST: &str = "manifest.json";
pub const DECISIONS: &str = "decisions.jsonl";
const LOCK: &str = ".lock";
const STAGING: &str = ".staging";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("run directory {0} is locked by another process (remove the lock file if it is stale)")]
    Locked(PathBuf),
    #[error("stage {stage} failed: {cause}")]
    StageFailed { stage: Stage, cause: String },
    #[error("run is incomplete: {0}")]
    IncompleteRun(String),
    #[error("resource: {0}")]
    Resource(String),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Prep,
    Corpus,
    Sweep,
    Train,
    Align,
    Sentiment,
    Report,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

const LDA_KEYS: [&str; 9] = [
    "alpha",
    "beta",
    "passes",
    "burn_in",
    "sample_lag",
    "seed",
    "partitions",
    "chunk_size",
    "window_size",
];

const RESOURCE_KEYS: [&str; 4] = ["stopwords", "domain_words", "slang", "lemmas"];

/// Config keys holding file paths; their contents feed the fingerprint.
const PATH_KEYS: [&str; 8] = [
    "input",
    "stopwords",
    "domain_words",
    "slang",
    "lemmas",
    "taxonomy",
    "lexicon",
    "negators",
];

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Prep,
        Stage::Corpus,
        Stage::Sweep,
        Stage::Train,
        Stage::Align,
        Stage::Sentiment,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Prep => "prep",
            Stage::Corpus => "corpus",
            Stage::Sweep => "sweep",
            Stage::Train => "train",
            Stage::Align => "align",
            Stage::Sentiment => "sentiment",
            Stage::Report => "report",
        }
    }

    /// Config keys the stage's outputs depend on.
    pub fn keys(self) -> Vec<&'static str> {
        let phrase = ["phrase_min_count", "phrase_threshold"];
        match self {
            Stage::Ingest => vec![
                "input",
                "apps",
                "country",
                "page_size",
                "max_pages",
                "min_words",
                "english_only",
                "dedupe",
            ],
            Stage::Prep => [&["readability_floor"][..], &RESOURCE_KEYS].concat(),
            Stage::Corpus => [&phrase[..], &["min_df", "max_df"]].concat(),
            Stage::Sweep => [&phrase[..], &LDA_KEYS, &["k_values", "top_n"]].concat(),
            Stage::Train => [&phrase[..], &LDA_KEYS, &["k", "top_n"]].concat(),
            Stage::Align => vec![
                "threshold",
                "align_top_n",
                "topic_text",
                "taxonomy",
                "emergent_overlay",
                "embedding_provider",
                "embedding_endpoint",
            ],
            Stage::Sentiment => [
                &[
                    "tau_doc",
                    "sentiment_provider",
                    "sentiment_endpoint",
                    "lexicon",
                    "negators",
                    "negation_window",
                ][..],
                &RESOURCE_KEYS,
            ]
            .concat(),
            Stage::Report => vec!["tau_doc"],
        }
    }

    /// Run-directory files the stage reads. `decisions.jsonl` may be absent.
    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &[],
            Stage::Prep => &["reviews.jsonl"],
            Stage::Corpus => &["clean.jsonl"],
            Stage::Sweep => &["clean.jsonl", "vocab.json", "corpus.bow"],
            Stage::Train => &["clean.jsonl", "vocab.json", "corpus.bow", "coherence.csv"],
            Stage::Align => &["topics.json"],
            Stage::Sentiment => &[
                "clean.jsonl",
                "model.json",
                "theta.bin",
                "alignments.json",
                "taxonomy.json",
                DECISIONS,
            ],
            Stage::Report => &[
                "ingest.json",
                "stats.json",
                "clean.jsonl",
                "coherence.csv",
                "model.json",
                "theta.bin",
                "topics.json",
                "alignments.json",
                "taxonomy.json",
                "sentiments.jsonl",
                DECISIONS,
            ],
        }
    }

    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["reviews.jsonl", "ingest.json"],
            Stage::Prep => &["clean.jsonl", "stats.json"],
            Stage::Corpus => &["vocab.json", "corpus.bow"],
            Stage::Sweep => &["coherence.csv"],
            Stage::Train => &["model.json", "theta.bin", "topics.json"],
            Stage::Align => &["alignments.json", "taxonomy.json"],
            Stage::Sentiment => &["sentiments.jsonl"],
            Stage::Report => &["report.json", "report.csv", "report.md"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Pending,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub fingerprint: String,
    /// Output file name → sha256.
    pub outputs: BTreeMap<String, String>,
    pub finished_at: Option<DateTime<Utc>>,
    /// How many times the stage has executed in this run directory.
    pub executions: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: DateTime<Utc>,
    pub stage_status: BTreeMap<Stage, StageStatus>,
    pub stages: BTreeMap<Stage, StageRecord>,
    pub config_snapshot: BTreeMap<String, String>,
    /// Hash of every artifact and external input seen by the last run.
    pub input_hashes: BTreeMap<String, String>,
}

impl RunManifest {
    fn fresh(cfg: &PipelineConfig) -> Self {
        let created_at = Utc::now();
        let cfg_hash = sha256_hex(format!("{:?}", cfg.entries()).as_bytes());
        Self {
            run_id: format!("{}-{}", created_at.format("%Y%m%dT%H%M%SZ"), &cfg_hash[..8]),
            created_at,
            stage_status: Stage::ALL.iter().map(|&s| (s, StageStatus::Pending)).collect(),
            stages: BTreeMap::new(),
            config_snapshot: cfg.entries(),
            input_hashes: BTreeMap::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => PipelineError::IncompleteRun(format!("{} not found", path.display())),
            _ => e.into(),
        })?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Manifest(e.to_string()))
    }

    fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        write_atomic(&dir.join(MANIFEST), text.as_bytes())?;
        Ok(())
    }

    pub fn status(&self, stage: Stage) -> StageStatus {
        self.stage_status.get(&stage).copied().unwrap_or(StageStatus::Pending)
    }

    pub fn executions(&self, stage: Stage) -> u32 {
        self.stages.get(&stage).map_or(0, |r| r.executions)
    }

    /// The config the run was last executed with.
    pub fn config(&self) -> Result<PipelineConfig, PipelineError> {
        Ok(PipelineConfig::from_entries(&self.config_snapshot)?)
    }
}

/// What one invocation did.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub executed: Vec<Stage>,
    pub skipped: Vec<Stage>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of a file's contents, or `None` when it does not exist.
pub fn file_sha256(path: &Path) -> std::io::Result<Option<String>> {
    match fs::read(path) {
        Ok(b) => Ok(Some(sha256_hex(&b))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}

struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self, PipelineError> {
        let path = dir.join(LOCK);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::Locked(path)),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub run_dir: PathBuf,
}

impl Pipeline {
    pub fn new(config: PipelineConfig, run_dir: impl Into<PathBuf>) -> Self {
        Self {
            config,
            run_dir: run_dir.into(),
        }
    }

    /// Runs every stage, skipping those already up to date.
    pub fn run(&self) -> Result<RunSummary, PipelineError> {
        self.run_through(Stage::Report)
    }

    /// Runs the stages up to and including `last`.
    pub fn run_through(&self, last: Stage) -> Result<RunSummary, PipelineError> {
        let stages: Vec<Stage> = Stage::ALL.into_iter().filter(|&s| s <= last).collect();
        self.execute(&stages, false)
    }

    /// Re-runs one stage unconditionally, then nothing else. Later stages are
    /// marked pending.
    pub fn force_stage(&self, stage: Stage) -> Result<RunSummary, PipelineError> {
        self.execute(&[stage], true)
    }

    fn input_hashes(&self, stage: Stage) -> Result<BTreeMap<String, String>, PipelineError> {
        let mut out = BTreeMap::new();
        for name in stage.inputs() {
            let h = file_sha256(&self.run_dir.join(name))?;
            if h.is_none() && *name != DECISIONS {
                return Err(PipelineError::StageFailed {
                    stage,
                    cause: format!("input {name} is missing; run the earlier stages first"),
                });
            }
            out.insert(name.to_string(), h.unwrap_or_else(|| "absent".into()));
        }
        let entries = self.config.entries();
        for key in stage.keys() {
            if PATH_KEYS.contains(&key) && !entries[key].is_empty() {
                let h = file_sha256(Path::new(&entries[key]))?.unwrap_or_else(|| "absent".into());
                out.insert(format!("config:{key}"), h);
            }
        }
        Ok(out)
    }

    fn fingerprint(&self, stage: Stage, inputs: &BTreeMap<String, String>) -> String {
        let entries = self.config.entries();
        let mut s = format!("{stage}\n");
        for key in stage.keys() {
            s.push_str(&format!("{key}={}\n", entries[key]));
        }
        for (name, h) in inputs {
            s.push_str(&format!("<{name}>{h}\n"));
        }
        sha256_hex(s.as_bytes())
    }

    fn outputs_intact(&self, record: &StageRecord, stage: Stage) -> Result<bool, PipelineError> {
        for name in stage.outputs() {
            let on_disk = file_sha256(&self.run_dir.join(name))?;
            if on_disk.as_ref() != record.outputs.get(*name) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn execute(&self, stages: &[Stage], force: bool) -> Result<RunSummary, PipelineError> {
        self.config.validate()?;
        fs::create_dir_all(&self.run_dir)?;
        let _lock = LockGuard::acquire(&self.run_dir)?;
        let mut manifest = match RunManifest::load(&self.run_dir) {
            Ok(m) => m,
            Err(PipelineError::IncompleteRun(_)) => RunManifest::fresh(&self.config),
            Err(e) => return Err(e),
        };
        manifest.config_snapshot = self.config.entries();
        manifest.save(&self.run_dir)?;
        let mut summary = RunSummary {
            manifest: manifest.clone(),
            executed: Vec::new(),
            skipped: Vec::new(),
        };
        let mut dirty = force;
        for &stage in stages {
            let inputs = self.input_hashes(stage).inspect_err(|_| {
                manifest.stage_status.insert(stage, StageStatus::Failed);
                let _ = manifest.save(&self.run_dir);
            })?;
            let fp = self.fingerprint(stage, &inputs);
            manifest.input_hashes.extend(inputs);
            let up_to_date = !dirty
                && manifest.status(stage) == StageStatus::Done
                && match manifest.stages.get(&stage) {
                    Some(r) => r.fingerprint == fp && self.outputs_intact(r, stage)?,
                    None => false,
                };
            if up_to_date {
                log::info!("{stage}: up to date");
                summary.skipped.push(stage);
                continue;
            }
            dirty = true;
            log::info!("{stage}: running");
            let started = std::time::Instant::now();
            let result = self.run_one(stage);
            let record = manifest.stages.entry(stage).or_insert_with(|| StageRecord {
                fingerprint: String::new(),
                outputs: BTreeMap::new(),
                finished_at: None,
                executions: 0,
                error: None,
            });
            record.executions += 1;
            match result {
                Ok(outputs) => {
                    record.fingerprint = fp;
                    record.outputs = outputs.clone();
                    record.finished_at = Some(Utc::now());
                    record.error = None;
                    manifest.stage_status.insert(stage, StageStatus::Done);
                    manifest.input_hashes.extend(outputs);
                    for later in Stage::ALL.into_iter().filter(|&s| s > stage) {
                        if !stages.contains(&later) {
                            manifest.stage_status.insert(later, StageStatus::Pending);
                        }
                    }
                    manifest.save(&self.run_dir)?;
                    log::info!("{stage}: done in {:.1?}", started.elapsed());
                    summary.executed.push(stage);
                }
                Err(cause) => {
                    record.error = Some(cause.clone());
                    manifest.stage_status.insert(stage, StageStatus::Failed);
                    manifest.save(&self.run_dir)?;
                    return Err(PipelineError::StageFailed { stage, cause });
                }
            }
        }
        manifest.save(&self.run_dir)?;
        summary.manifest = manifest;
        Ok(summary)
    }

    /// Runs a stage into a staging directory and moves its outputs into
    /// place only when it succeeds.
    fn run_one(&self, stage: Stage) -> Result<BTreeMap<String, String>, String> {
        let staging = self.run_dir.join(STAGING);
        let _ = fs::remove_dir_all(&staging);
        fs::create_dir_all(&staging).map_err(|e| e.to_string())?;
        let ctx = stages::Ctx {
            cfg: &self.config,
            dir: &self.run_dir,
            out: &staging,
        };
        let result = stages::run(stage, &ctx).map_err(|e| e.to_string());
        let mut hashes = BTreeMap::new();
        if result.is_ok() {
            for name in stage.outputs() {
                let from = staging.join(name);
                let bytes = fs::read(&from).map_err(|e| format!("stage did not write {name}: {e}"))?;
                hashes.insert(name.to_string(), sha256_hex(&bytes));
                fs::rename(&from, self.run_dir.join(name)).map_err(|e| e.to_string())?;
            }
        }
        let _ = fs::remove_dir_all(&staging);
        result.map(|()| hashes)
    }
}

/// Loads a config file and runs every stage into `run_dir`.
pub fn run_pipeline(config_path: &Path, run_dir: &Path) -> Result<RunManifest, PipelineError> {
    let cfg = PipelineConfig::load(config_path)?;
    Ok(Pipeline::new(cfg, run_dir).run()?.manifest)
}
