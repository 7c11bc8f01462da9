//! End-to-end run: ingest, unify, foveate, infill, downstream, baselines,
//! then persist everything under the run directory.
//!
//! Sequences are processed on a bounded pool. Generation happens in two
//! passes because the random baseline draws from every pair the first pass
//! produced. All files are written afterwards by one thread in dataset order,
//! so their bytes never depend on scheduling.

use std::collections::BTreeMap;
use std::error::Error as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::ingest::{load_dataset, Ingested};
use super::records::{
    downstream_lines, foveation_line, plain_entries, unify_records, vcot_entries, EntryRecord, NodeLine, OutputLine,
    UnifyRecord, VCOT,
};
use super::report;
use crate::backend::{CacheStats, Endpoint, Gateway, MockTransport, ResponseCache};
use crate::downstream::{run_downstream, DownstreamOutput};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::eval::{run_baseline, BaselineKind};
use crate::foveation::{multipoint_foveation, FoveationOutcome};
use crate::infill::{infill_sequence_detailed, InfilledSequence};
use crate::model::{RecursionPolicy, Sequence, TaskKind, TextVisualPair, VisualAsset};
use crate::prompts::PromptKit;
use crate::unify::{unify_text_sequence, Unified};

/// Process-level handles a run needs besides its config.
#[derive(Clone, Default)]
pub struct RunOptions {
    /// Serves every endpoint a profile marks as `mock`; its counters are how
    /// tests observe backend traffic.
    pub mock: Arc<MockTransport>,
    /// Bearer token for HTTP endpoints.
    pub bearer: Option<String>,
}

/// One method's merged sequence and downstream output.
#[derive(Debug, Clone)]
pub struct MethodResult {
    pub method: String,
    pub entries: Vec<EntryRecord>,
    pub downstream: Option<DownstreamOutput>,
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub id: String,
    pub task: TaskKind,
    pub title: Option<String>,
    pub unify: Vec<UnifyRecord>,
    pub foveation: Option<FoveationOutcome>,
    /// The full method first, then baselines in request order.
    pub methods: Vec<MethodResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub sequences: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Calls that reached the mock transport, per endpoint.
    pub mock_calls: BTreeMap<&'static str, u64>,
    pub cache: CacheStats,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub stats: RunStats,
    pub failures: Vec<(String, String)>,
}

impl RunSummary {
    /// True when there was work and none of it succeeded.
    pub fn all_failed(&self) -> bool {
        self.stats.sequences > 0 && self.stats.failed == self.stats.sequences
    }
}

/// The message of an error followed by its causes.
pub fn error_chain(err: &Error) -> String {
    let mut out = err.to_string();
    let mut source = err.source();
    while let Some(e) = source {
        out.push_str(": ");
        out.push_str(&e.to_string());
        source = e.source();
    }
    out
}

struct FirstPass {
    unified: Option<Unified>,
    sequence: Sequence,
    foveation: Option<FoveationOutcome>,
    infilled: Option<InfilledSequence>,
}

fn first_pass(engine: &Engine, item: &Ingested, policy: &RecursionPolicy, no_infill: bool) -> Result<FirstPass> {
    let (sequence, unified) = match item {
        Ingested::Paired(s) => (s.clone(), None),
        Ingested::TextOnly(t) => {
            let u = unify_text_sequence(engine, t, engine.settings.unify_candidates)?;
            (u.sequence.clone(), Some(u))
        }
    };
    if no_infill {
        return Ok(FirstPass {
            unified,
            sequence,
            foveation: None,
            infilled: None,
        });
    }
    let foveation = multipoint_foveation(engine, &sequence)?;
    let infilled = infill_sequence_detailed(engine, &foveation.sequence, &foveation.foveation, policy)?;
    Ok(FirstPass {
        unified,
        sequence: foveation.sequence.clone(),
        foveation: Some(foveation),
        infilled: Some(infilled),
    })
}

fn second_pass(
    engine: &Engine,
    first: &FirstPass,
    policy: &RecursionPolicy,
    baselines: &[BaselineKind],
    pool: &[TextVisualPair],
) -> Result<(Vec<MethodResult>, Vec<VisualAsset>)> {
    let mut assets = Vec::new();
    let (Some(fov), Some(infilled)) = (&first.foveation, &first.infilled) else {
        let aug = crate::model::passthrough(first.sequence.clone());
        let method = MethodResult {
            method: VCOT.into(),
            entries: plain_entries(&aug, VCOT),
            downstream: None,
        };
        return Ok((vec![method], assets));
    };

    let mut methods = vec![MethodResult {
        method: VCOT.into(),
        entries: vcot_entries(infilled),
        downstream: run_downstream(engine, &infilled.augmented, &fov.foveation)?,
    }];
    for c in &infilled.candidates {
        assets.extend(c.visuals.iter().cloned());
    }

    let runs = baselines
        .par_iter()
        .map(|&kind| {
            let aug = run_baseline(engine, &fov.sequence, policy, kind, pool)?;
            let downstream = run_downstream(engine, &aug, &fov.foveation)?;
            Ok((kind, aug, downstream))
        })
        .collect::<Vec<Result<_>>>();
    for run in runs {
        let (kind, aug, downstream) = run?;
        assets.extend(aug.infillings.iter().filter_map(|n| n.visual.clone()));
        methods.push(MethodResult {
            method: kind.to_string(),
            entries: plain_entries(&aug, kind.name()),
            downstream,
        });
    }
    Ok((methods, assets))
}

/// Downstream results and baseline assets for one sequence.
type SecondPass = Result<(Vec<MethodResult>, Vec<VisualAsset>)>;

pub fn run_pipeline(cfg: &RunConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let profile = cfg.profile()?;
    let policy = RecursionPolicy::new(cfg.depth)?;
    let items = load_dataset(&cfg.dataset, cfg.format)?;

    let dir = cfg.out.clone();
    fs::create_dir_all(dir.join("assets"))?;
    let cache = Arc::new(ResponseCache::on_disk(dir.join("cache"))?);
    let gateway = Gateway::for_profile(profile, opts.mock.clone(), opts.bearer.clone())?.with_cache(cache.clone());
    let prompts = PromptKit::load(cfg.templates_dir.as_deref(), cfg.exemplars_dir.as_deref())?;
    let engine = Engine::new(Arc::new(gateway), cfg.engine.clone()).with_prompts(prompts);
    let calls_before: Vec<u64> = Endpoint::ALL.iter().map(|e| opts.mock.calls_to(*e)).collect();

    let workers = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    info!("running {} sequences on {} workers", items.len(), cfg.workers);

    let firsts: Vec<Result<FirstPass>> = workers.install(|| {
        items
            .par_iter()
            .map(|item| first_pass(&engine, item, &policy, cfg.no_infill))
            .collect()
    });
    let pool: Vec<TextVisualPair> = firsts
        .iter()
        .filter_map(|f| f.as_ref().ok()?.infilled.as_ref())
        .flat_map(|i| i.augmented.infillings.iter().map(|n| n.pair.clone()))
        .collect();
    let seconds: Vec<Option<SecondPass>> = workers.install(|| {
        firsts
            .par_iter()
            .map(|f| {
                f.as_ref()
                    .ok()
                    .map(|f| second_pass(&engine, f, &policy, &cfg.baselines, &pool))
            })
            .collect()
    });

    let mut nodes = Vec::new();
    let mut outputs = Vec::new();
    let mut assets: BTreeMap<String, VisualAsset> = BTreeMap::new();
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for ((item, first), second) in items.iter().zip(firsts).zip(seconds) {
        let id = item.id().to_owned();
        let outcome = first.and_then(|f| second.expect("ran for every first pass").map(|s| (f, s)));
        let (first, (methods, extra)) = match outcome {
            Ok(v) => v,
            Err(e) => {
                let message = error_chain(&e);
                warn!("sequence {id} failed: {message}");
                outputs.push(OutputLine::Failure {
                    sequence_id: id.clone(),
                    error: message.clone(),
                });
                failures.push((id, message));
                continue;
            }
        };

        for pair in first.sequence.elements() {
            assets.insert(pair.visual().id().to_owned(), pair.visual().clone());
        }
        let unify = first.unified.as_ref().map(unify_records).unwrap_or_default();
        if let Some(u) = &first.unified {
            for s in &u.selections {
                assets.extend(s.candidates.iter().map(|v| (v.id().to_owned(), v.clone())));
            }
        }
        assets.extend(extra.into_iter().map(|v| (v.id().to_owned(), v)));
        nodes.extend(unify.iter().cloned().map(NodeLine::Unify));
        if let Some(fov) = &first.foveation {
            outputs.push(foveation_line(&id, fov));
        }
        for m in &methods {
            nodes.extend(m.entries.iter().cloned().map(NodeLine::Entry));
            if let Some(d) = &m.downstream {
                outputs.extend(downstream_lines(&id, &m.method, d));
            }
        }
        results.push(SequenceResult {
            id,
            task: first.sequence.task(),
            title: first.sequence.title().map(str::to_owned),
            unify,
            foveation: first.foveation,
            methods,
        });
    }

    for (id, asset) in &assets {
        fs::write(dir.join("assets").join(format!("{id}.png")), asset.png_bytes())?;
    }
    write_jsonl(&dir.join("nodes.jsonl"), &nodes)?;
    write_jsonl(&dir.join("outputs.jsonl"), &outputs)?;
    fs::write(dir.join("report.md"), report::markdown(&results, &failures))?;
    fs::write(dir.join("report.html"), report::html(&results, &failures))?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;

    let stats = RunStats {
        sequences: items.len(),
        succeeded: results.len(),
        failed: failures.len(),
        mock_calls: Endpoint::ALL
            .iter()
            .zip(calls_before)
            .map(|(e, before)| (e.name(), opts.mock.calls_to(*e) - before))
            .collect(),
        cache: cache.stats(),
    };
    fs::write(dir.join("stats.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
    Ok(RunSummary { dir, stats, failures })
}

fn write_jsonl<T: Serialize>(path: &Path, lines: &[T]) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for line in lines {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}
