//! Build a run, then drive the review API in-process: list pending
//! topics, accept one under a new label and read the updated ethics table.
//! `ethos serve --run-dir DIR` exposes the same routes over HTTP.
//!
//!     cargo run --release --example audit_server

use std::error::Error;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use ethos::pipeline::{Pipeline, PipelineConfig};
use ethos::server::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &axum::Router, req: Request<Body>) -> Result<Value, Box<dyn Error>> {
    let resp = app.clone().oneshot(req).await?;
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok(serde_json::from_slice(&bytes)?)
}

pub async fn run_example(run_dir: &Path) -> Result<String, Box<dyn Error>> {
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/fixture.conf");
    Pipeline::new(PipelineConfig::load(&conf)?, run_dir).run()?;
    let app = router(Arc::new(AppState::open(run_dir)?), None);

    let aligns = call(&app, Request::get("/api/alignments").body(Body::empty())?).await?;
    let pending: Vec<u64> = aligns
        .as_array()
        .into_iter()
        .flatten()
        .filter(|a| a["decision"] == "pending" && a["emergent"] == true)
        .filter_map(|a| a["topic_id"].as_u64())
        .collect();
    let mut s = format!("pending emergent topics: {pending:?}\n");
    if let Some(t) = pending.first() {
        let body = json!({"action": "accept", "label": {"id": "review-theme", "label": "Review Theme",
            "definition": "a theme found while reviewing topics"}});
        let req = Request::post(format!("/api/alignments/{t}/decision"))
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))?;
        let updated = call(&app, req).await?;
        s += &format!("topic {t} -> {} ({})\n", updated["decided_label"], updated["decision"]);
    }
    let ethics = call(&app, Request::get("/api/ethics").body(Body::empty())?).await?;
    for row in ethics.as_array().into_iter().flatten() {
        s += &format!(
            "{:<28} {:>6.1}% {:+.2}\n",
            row["ethic_id"].as_str().unwrap_or("?"),
            row["frequency_pct"].as_f64().unwrap_or(0.0),
            row["mean_sentiment"].as_f64().unwrap_or(0.0)
        );
    }
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let dir = tempfile::tempdir()?;
    let rt = tokio::runtime::Runtime::new()?;
    print!("{}", rt.block_on(run_example(dir.path()))?);
    Ok(())
}
