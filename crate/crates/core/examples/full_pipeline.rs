//! Run every stage on the fixture corpus into a run directory and print
//! the Markdown report. A second run is a no-op.
//!
//!     cargo run --release --example full_pipeline [run-dir]

use std::error::Error;
use std::path::{Path, PathBuf};

use ethos::pipeline::{Pipeline, PipelineConfig};
use ethos::report::{render_report, ReportFormat};

pub fn run_example(run_dir: &Path) -> Result<String, Box<dyn Error>> {
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/fixture.conf");
    let pipeline = Pipeline::new(PipelineConfig::load(&conf)?, run_dir);
    let first = pipeline.run()?;
    let second = pipeline.run()?;
    let mut s = render_report(run_dir, ReportFormat::Markdown)?;
    s += &format!(
        "\nfirst run executed {} stages; second run skipped {}\n",
        first.executed.len(),
        second.skipped.len()
    );
    Ok(s)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("ethos-example-run"));
    print!("{}", run_example(&dir)?);
    eprintln!("run directory: {}", dir.display());
    Ok(())
}
