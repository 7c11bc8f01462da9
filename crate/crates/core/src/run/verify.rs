//! Offline audit of a run directory.
//!
//! Recomputes asset hashes, every recorded selection argmax, and the
//! neighbor links of every infilled entry from the JSONL records alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use super::records::{entry_fingerprint, EntryRecord, NodeLine, OutputLine, VCOT};
use crate::engine::argmax_lowest;
use crate::error::{Error, Result};
use crate::model::sha256_hex;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifyReport {
    pub assets: usize,
    pub selections: usize,
    pub links: usize,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Input(format!("{} line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn verify_run(dir: &Path) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let nodes: Vec<NodeLine> = read_jsonl(&dir.join("nodes.jsonl"))?;
    let outputs: Vec<OutputLine> = read_jsonl(&dir.join("outputs.jsonl"))?;

    let mut present = BTreeSet::new();
    let assets_dir = dir.join("assets");
    if assets_dir.is_dir() {
        for entry in fs::read_dir(&assets_dir)? {
            let path = entry?.path();
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()).map(str::to_owned) else {
                continue;
            };
            let digest = sha256_hex(&fs::read(&path)?);
            if digest != stem {
                report
                    .problems
                    .push(format!("asset {} hashes to {digest}", path.display()));
            }
            present.insert(stem);
            report.assets += 1;
        }
    }
    let need_asset = |id: &str, what: &str, report: &mut VerifyReport| {
        if !present.contains(id) {
            report.problems.push(format!("{what}: missing asset {id}"));
        }
    };

    let mut by_run: BTreeMap<(String, String), Vec<EntryRecord>> = BTreeMap::new();
    let mut unify_choice: BTreeMap<(String, usize), String> = BTreeMap::new();
    for line in nodes {
        match line {
            NodeLine::Entry(e) => by_run
                .entry((e.sequence_id.clone(), e.method.clone()))
                .or_default()
                .push(e),
            NodeLine::Unify(u) => {
                let what = format!("{} unify step {}", u.sequence_id, u.step);
                report.selections += 1;
                for c in &u.candidates {
                    need_asset(c, &what, &mut report);
                }
                if argmax_lowest(u.scores.iter().copied().map(Some)) != Some(u.chosen) {
                    report
                        .problems
                        .push(format!("{what}: chosen {} is not the argmax", u.chosen));
                }
                if u.candidates.len() != u.scores.len() || u.chosen >= u.candidates.len() {
                    report
                        .problems
                        .push(format!("{what}: candidate and score counts disagree"));
                } else {
                    unify_choice.insert((u.sequence_id.clone(), u.step), u.candidates[u.chosen].clone());
                }
            }
        }
    }

    for ((seq, method), entries) in &by_run {
        for (pos, e) in entries.iter().enumerate() {
            let what = format!("{seq}/{method} entry {pos}");
            if e.position != pos {
                report
                    .problems
                    .push(format!("{what}: recorded position {}", e.position));
            }
            if let Some(v) = &e.visual {
                need_asset(v, &what, &mut report);
            }
            if let (Some(i), Some(v)) = (e.original_index, &e.visual) {
                if unify_choice.get(&(seq.clone(), i)).is_some_and(|u| u != v) {
                    report
                        .problems
                        .push(format!("{what}: visual differs from the unification choice"));
                }
            }
            if let Some(s) = &e.selection {
                report.selections += 1;
                for c in &s.visual_candidates {
                    need_asset(c, &what, &mut report);
                }
                let text_ok = argmax_lowest(s.text_scores.iter().copied()) == Some(s.chosen_text)
                    && s.text_scores.get(s.chosen_text).copied().flatten() == Some(s.text_score)
                    && s.candidate_texts.get(s.chosen_text).map(|t| t.trim()) == e.text.as_deref();
                if !text_ok {
                    report
                        .problems
                        .push(format!("{what}: text selection does not recompute"));
                }
                let visual_ok = argmax_lowest(s.visual_scores.iter().copied().map(Some)) == Some(s.chosen_visual)
                    && s.visual_scores.get(s.chosen_visual) == Some(&s.visual_score)
                    && s.visual_candidates.get(s.chosen_visual) == e.visual.as_ref();
                if !visual_ok {
                    report
                        .problems
                        .push(format!("{what}: visual selection does not recompute"));
                }
            }
            if let Some((prev, next)) = &e.links {
                report.links += 1;
                // The neighbors an entry was generated between are the
                // nearest shallower entries on each side.
                let left = entries[..pos].iter().rev().find(|o| o.depth < e.depth);
                let right = entries[pos + 1..].iter().find(|o| o.depth < e.depth);
                let ok = left.and_then(entry_fingerprint).as_ref() == Some(prev)
                    && right.and_then(entry_fingerprint).as_ref() == Some(next);
                if !ok {
                    report
                        .problems
                        .push(format!("{what}: neighbor links do not match merged order"));
                }
            }
        }
        if method == VCOT {
            let originals: Vec<usize> = entries.iter().filter_map(|e| e.original_index).collect();
            if originals != (0..originals.len()).collect::<Vec<_>>() {
                report.problems.push(format!("{seq}/{method}: originals out of order"));
            }
        }
    }

    for line in &outputs {
        if let OutputLine::Foveation {
            sequence_id,
            candidates,
            selected,
            summary,
            summary_loglik,
            ..
        } = line
        {
            report.selections += 1;
            let best = argmax_lowest(candidates.iter().map(|c| Some(c.loglik)));
            let chosen = candidates.get(*selected);
            if best != Some(*selected)
                || chosen.map(|c| c.loglik) != Some(*summary_loglik)
                || chosen.map(|c| &c.text) != Some(summary)
            {
                report
                    .problems
                    .push(format!("{sequence_id}: summary selection does not recompute"));
            }
        }
        if let OutputLine::Step {
            sequence_id,
            method,
            step,
            prompt,
            prompt_sha256,
            ..
        } = line
        {
            if &sha256_hex(prompt.as_bytes()) != prompt_sha256 {
                report
                    .problems
                    .push(format!("{sequence_id}/{method} step {step}: prompt hash mismatch"));
            }
        }
    }
    Ok(report)
}
