use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ethos::pipeline::{Pipeline, PipelineConfig, PipelineError, RunManifest, Stage};
use ethos::report::{render_report, ReportFormat};
use ethos::server::{serve, DEFAULT_BIND};

#[derive(Parser)]
#[command(name = "ethos", version, about = "Ethics audit of app-store reviews")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the sampler seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the number of topics.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Override the alignment threshold.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    run_dir: PathBuf,
    /// Config file; defaults to the snapshot stored in the run directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Re-run this stage even if it is up to date (later stages are not run).
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fetches or loads reviews and applies the filters.
    Ingest(RunArgs),
    /// Cleans and lemmatizes the kept reviews.
    Prep(RunArgs),
    /// Detects phrases and builds the vocabulary.
    Corpus(RunArgs),
    /// Scores candidate k values by coherence.
    Sweep(RunArgs),
    /// Trains the final topic model.
    Train(RunArgs),
    /// Maps topics to ethical principles.
    Align(RunArgs),
    /// Classifies review polarity per aspect.
    Sentiment(RunArgs),
    /// Runs every stage through the report; optionally prints one format.
    Report {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_parser = ["json", "csv", "md"])]
        print: Option<String>,
    },
    /// Runs every stage.
    Run(RunArgs),
    /// Serves a run directory to the review UI.
    Serve {
        #[arg(long)]
        run_dir: PathBuf,
        #[arg(long, default_value = DEFAULT_BIND)]
        bind: SocketAddr,
        /// Directory with the built review UI, served under /ui.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Stage(String),
}

fn load_config(cli: &Cli, args: &RunArgs) -> Result<PipelineConfig, Failure> {
    let cfg_err = |e: &dyn std::fmt::Display| Failure::Config(e.to_string());
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| cfg_err(&e))?,
        None => RunManifest::load(&args.run_dir)
            .and_then(|m| m.config())
            .map_err(|_| Failure::Config(format!("{} has no manifest; pass --config", args.run_dir.display())))?,
    };
    if let Some(seed) = cli.seed {
        cfg.lda.seed = seed;
    }
    if let Some(k) = cli.k {
        cfg.k = Some(k);
    }
    if let Some(t) = cli.threshold {
        cfg.threshold = t;
    }
    cfg.validate().map_err(|e| cfg_err(&e))?;
    Ok(cfg)
}

fn run_stages(cli: &Cli, args: &RunArgs, last: Stage) -> Result<(), Failure> {
    let cfg = load_config(cli, args)?;
    let p = Pipeline::new(cfg, &args.run_dir);
    let result = if args.force { p.force_stage(last) } else { p.run_through(last) };
    match result {
        Ok(s) => {
            for st in &s.skipped {
                eprintln!("{st:<10} up to date");
            }
            for st in &s.executed {
                eprintln!("{st:<10} done");
            }
            Ok(())
        }
        Err(PipelineError::Config(e)) => Err(Failure::Config(e.to_string())),
        Err(e) => Err(Failure::Stage(e.to_string())),
    }
}

fn serve_dir(run_dir: &Path, bind: SocketAddr, ui: Option<&Path>) -> Result<(), Failure> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::Stage(e.to_string()))?;
    rt.block_on(serve(run_dir, bind, ui)).map_err(|e| Failure::Stage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Ingest(a) => run_stages(&cli, a, Stage::Ingest),
        Command::Prep(a) => run_stages(&cli, a, Stage::Prep),
        Command::Corpus(a) => run_stages(&cli, a, Stage::Corpus),
        Command::Sweep(a) => run_stages(&cli, a, Stage::Sweep),
        Command::Train(a) => run_stages(&cli, a, Stage::Train),
        Command::Align(a) => run_stages(&cli, a, Stage::Align),
        Command::Sentiment(a) => run_stages(&cli, a, Stage::Sentiment),
        Command::Run(a) => run_stages(&cli, a, Stage::Report),
        Command::Report { run, print } => run_stages(&cli, run, Stage::Report).and_then(|()| {
            if let Some(fmt) = print {
                let fmt: ReportFormat = fmt.parse().expect("clap restricts the values");
                let text = render_report(&run.run_dir, fmt).map_err(|e| Failure::Stage(e.to_string()))?;
                print!("{text}");
            }
            Ok(())
        }),
        Command::Serve { run_dir, bind, ui } => serve_dir(run_dir, *bind, ui.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}
