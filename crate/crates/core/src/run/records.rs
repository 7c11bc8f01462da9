//! Line-delimited JSON records written into a run directory.
//!
//! `nodes.jsonl` holds every merged entry of every method plus unification
//! choices; `outputs.jsonl` holds foveation, downstream generations and
//! failures. Both are enough to re-check every selection without a backend.

use serde::{Deserialize, Serialize};

use crate::downstream::DownstreamOutput;
use crate::eval::BaselineNode;
use crate::foveation::FoveationOutcome;
use crate::infill::InfilledSequence;
use crate::model::{AugmentedSequence, MergedEntry, TaskKind, TextVisualPair};
use crate::unify::Unified;

pub const VCOT: &str = "vcot";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub candidate_texts: Vec<String>,
    pub text_scores: Vec<Option<f64>>,
    pub chosen_text: usize,
    pub text_score: f64,
    pub visual_candidates: Vec<String>,
    pub visual_scores: Vec<f64>,
    pub chosen_visual: usize,
    pub visual_score: f64,
    pub novelty: f64,
    pub prompt_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub sequence_id: String,
    pub method: String,
    /// Position in the merged order.
    pub position: usize,
    pub original_index: Option<usize>,
    pub gap_index: Option<usize>,
    /// 0 for originals.
    pub depth: u32,
    pub text: Option<String>,
    /// Asset id of the visual.
    pub visual: Option<String>,
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRecord>,
    /// Fingerprints of the `(prev, next)` pair the entry was generated between.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub links: Option<(String, String)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool_index: Option<usize>,
}

impl EntryRecord {
    pub fn is_original(&self) -> bool {
        self.original_index.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnifyRecord {
    pub sequence_id: String,
    pub step: usize,
    pub candidates: Vec<String>,
    pub scores: Vec<f64>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum NodeLine {
    Entry(EntryRecord),
    Unify(UnifyRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCandidateRecord {
    pub text: String,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutputLine {
    Foveation {
        sequence_id: String,
        candidates: Vec<SummaryCandidateRecord>,
        selected: usize,
        summary: String,
        summary_loglik: f64,
        focus: String,
    },
    Summary {
        sequence_id: String,
        method: String,
        task: TaskKind,
        prompt: String,
        summary: String,
    },
    Step {
        sequence_id: String,
        method: String,
        step: usize,
        prompt: String,
        prompt_sha256: String,
        context: Vec<String>,
        output: String,
    },
    Failure {
        sequence_id: String,
        error: String,
    },
}

fn original_entry(seq_id: &str, method: &str, position: usize, index: usize, pair: &TextVisualPair) -> EntryRecord {
    EntryRecord {
        sequence_id: seq_id.to_owned(),
        method: method.to_owned(),
        position,
        original_index: Some(index),
        gap_index: None,
        depth: 0,
        text: Some(pair.text().to_owned()),
        visual: Some(pair.visual().id().to_owned()),
        caption: pair.caption().map(str::to_owned),
        selection: None,
        links: None,
        pool_index: None,
    }
}

pub fn vcot_entries(infilled: &InfilledSequence) -> Vec<EntryRecord> {
    let aug = &infilled.augmented;
    let id = aug.original.id();
    aug.merged
        .iter()
        .enumerate()
        .map(|(position, entry)| match *entry {
            MergedEntry::Original(i) => original_entry(id, VCOT, position, i, &aug.original.elements()[i]),
            MergedEntry::Infilled(i) => {
                let node = &aug.infillings[i];
                let cands = &infilled.candidates[i];
                EntryRecord {
                    sequence_id: id.to_owned(),
                    method: VCOT.to_owned(),
                    position,
                    original_index: None,
                    gap_index: Some(node.gap_index),
                    depth: node.depth,
                    text: Some(node.pair.text().to_owned()),
                    visual: Some(node.pair.visual().id().to_owned()),
                    caption: node.pair.caption().map(str::to_owned),
                    selection: Some(SelectionRecord {
                        candidate_texts: node.audit.candidate_texts.clone(),
                        text_scores: node.audit.text_scores.clone(),
                        chosen_text: node.candidate_index_text,
                        text_score: node.text_score,
                        visual_candidates: cands.visuals.iter().map(|v| v.id().to_owned()).collect(),
                        visual_scores: node.audit.visual_scores.clone(),
                        chosen_visual: node.candidate_index_visual,
                        visual_score: node.visual_score,
                        novelty: node.audit.novelty,
                        prompt_sha256: node.audit.prompt_sha256.clone(),
                    }),
                    links: Some(infilled.links[i].clone()),
                    pool_index: None,
                }
            }
        })
        .collect()
}

/// Entries of a sequence with nothing inserted.
pub fn plain_entries(aug: &AugmentedSequence<BaselineNode>, method: &str) -> Vec<EntryRecord> {
    let id = aug.original.id();
    aug.merged
        .iter()
        .enumerate()
        .map(|(position, entry)| match *entry {
            MergedEntry::Original(i) => original_entry(id, method, position, i, &aug.original.elements()[i]),
            MergedEntry::Infilled(i) => {
                let node = &aug.infillings[i];
                EntryRecord {
                    sequence_id: id.to_owned(),
                    method: method.to_owned(),
                    position,
                    original_index: None,
                    gap_index: Some(node.gap_index),
                    depth: node.depth,
                    text: node.text.clone(),
                    visual: node.visual.as_ref().map(|v| v.id().to_owned()),
                    caption: None,
                    selection: None,
                    links: None,
                    pool_index: node.pool_index,
                }
            }
        })
        .collect()
}

pub fn unify_records(unified: &Unified) -> Vec<UnifyRecord> {
    unified
        .selections
        .iter()
        .enumerate()
        .map(|(step, s)| UnifyRecord {
            sequence_id: unified.sequence.id().to_owned(),
            step,
            candidates: s.candidates.iter().map(|v| v.id().to_owned()).collect(),
            scores: s.scores.clone(),
            chosen: s.chosen,
        })
        .collect()
}

pub fn foveation_line(seq_id: &str, fov: &FoveationOutcome) -> OutputLine {
    OutputLine::Foveation {
        sequence_id: seq_id.to_owned(),
        candidates: fov
            .candidates
            .iter()
            .map(|c| SummaryCandidateRecord {
                text: c.text.clone(),
                loglik: c.loglik,
            })
            .collect(),
        selected: fov.selected,
        summary: fov.foveation.summary.clone(),
        summary_loglik: fov.foveation.summary_loglik,
        focus: fov.foveation.focus.clone(),
    }
}

pub fn downstream_lines(seq_id: &str, method: &str, out: &DownstreamOutput) -> Vec<OutputLine> {
    let mut lines = vec![OutputLine::Summary {
        sequence_id: seq_id.to_owned(),
        method: method.to_owned(),
        task: out.task,
        prompt: out.summary_prompt.clone(),
        summary: out.summary.clone(),
    }];
    lines.extend(out.steps.iter().map(|s| OutputLine::Step {
        sequence_id: seq_id.to_owned(),
        method: method.to_owned(),
        step: s.index,
        prompt_sha256: crate::model::sha256_hex(s.prompt.as_bytes()),
        prompt: s.prompt.clone(),
        context: s.context.clone(),
        output: s.output.clone(),
    }));
    lines
}

/// Fingerprint of an entry as a neighbor, when it carries both modalities.
pub fn entry_fingerprint(entry: &EntryRecord) -> Option<String> {
    let (text, visual) = (entry.text.as_deref()?, entry.visual.as_deref()?);
    let mut buf = Vec::with_capacity(text.len() + 1 + visual.len());
    buf.extend_from_slice(text.as_bytes());
    buf.push(0);
    buf.extend_from_slice(visual.as_bytes());
    Some(crate::model::sha256_hex(&buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::pair_fingerprint;
    use crate::model::testing::pair;

    #[test]
    fn entry_fingerprint_matches_pair_fingerprint() {
        let p = pair("a dog runs", 3);
        let e = original_entry("s", VCOT, 0, 0, &p);
        assert_eq!(entry_fingerprint(&e).unwrap(), pair_fingerprint(&p));
    }

    #[test]
    fn lines_round_trip() {
        let line = NodeLine::Unify(UnifyRecord {
            sequence_id: "w".into(),
            step: 1,
            candidates: vec!["ab".into()],
            scores: vec![0.1 + 0.2],
            chosen: 0,
        });
        let text = serde_json::to_string(&line).unwrap();
        assert!(text.starts_with(r#"{"kind":"unify","#));
        assert_eq!(serde_json::from_str::<NodeLine>(&text).unwrap(), line);
    }
}
