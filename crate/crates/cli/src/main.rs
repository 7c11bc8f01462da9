use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use log::{error, info};

use vcot_core::eval::{read_annotations, Report};
use vcot_core::run::{parse_baselines, run_pipeline, verify_run, DatasetFormat, Overrides, RunConfig, RunOptions};

/// Recursive multimodal infilling for sequential text-visual data.
#[derive(Parser)]
#[command(name = "vcot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline over a dataset and write a run directory.
    Run(RunArgs),
    /// Tabulate a human-annotation CSV into percentage tables.
    Tabulate {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recheck a run directory's recorded selections against its assets.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    format: Option<DatasetFormat>,
    #[arg(long)]
    depth: Option<u32>,
    #[arg(long)]
    text_candidates: Option<usize>,
    #[arg(long)]
    image_candidates: Option<usize>,
    /// `mock` or a profile id from the config.
    #[arg(long)]
    backend: Option<String>,
    /// Comma-separated: cot, coi, cot_plus_coi, random, no_infilling.
    #[arg(long)]
    baselines: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Ingest and report without generating infillings.
    #[arg(long)]
    no_infill: bool,
}

fn parse_format(s: &str) -> Result<DatasetFormat, String> {
    s.parse().map_err(|e: vcot_core::Error| e.to_string())
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let mut cfg = RunConfig::load(&args.config)?;
    let baselines = args.baselines.as_deref().map(parse_baselines).transpose()?;
    cfg.apply(Overrides {
        dataset: args.dataset,
        format: args.format,
        depth: args.depth,
        text_candidates: args.text_candidates,
        image_candidates: args.image_candidates,
        backend: args.backend,
        baselines,
        seed: args.seed,
        out: args.out,
        no_infill: args.no_infill,
        workers: args.workers,
    });
    let opts = RunOptions {
        bearer: std::env::var("VCOT_API_KEY").ok().filter(|k| !k.is_empty()),
        ..RunOptions::default()
    };
    let summary = run_pipeline(&cfg, &opts)?;
    let calls: u64 = summary.stats.mock_calls.values().sum();
    info!(
        "{} of {} sequences succeeded; {} mock calls, {} cache misses",
        summary.stats.succeeded, summary.stats.sequences, calls, summary.stats.cache.misses
    );
    println!("{}", summary.dir.display());
    if summary.all_failed() {
        error!("every sequence failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn tabulate(annotations: PathBuf, out: PathBuf) -> Result<ExitCode> {
    let records = read_annotations(&annotations)?;
    let report = Report::from_records(&records)?;
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    std::fs::write(out.join("tables.md"), report.to_markdown())?;
    std::fs::write(out.join("tables.json"), report.to_json() + "\n")?;
    print!("{}", report.to_markdown());
    Ok(ExitCode::SUCCESS)
}

fn verify(dir: PathBuf) -> Result<ExitCode> {
    let report = verify_run(&dir)?;
    for p in &report.problems {
        println!("FAIL {p}");
    }
    println!(
        "checked {} assets, {} selections, {} links: {}",
        report.assets,
        report.selections,
        report.links,
        if report.ok() { "ok" } else { "problems found" }
    );
    Ok(if report.ok() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Tabulate { annotations, out } => tabulate(annotations, out),
        Command::Verify { run } => verify(run),
    };
    result.unwrap_or_else(|e| {
        error!("{e:#}");
        ExitCode::FAILURE
    })
}
