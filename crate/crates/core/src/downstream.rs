//! Downstream generation over an augmented sequence.
//!
//! Both tasks start from one extensive summary of the merged sequence. A story
//! is then written one original step at a time, each step seeing everything
//! written before it. Instructions are written per original step from the
//! infillings on either side of it, with no chaining between steps.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::model::{AugmentedSequence, Foveation, GapNode, MergedEntry, TaskKind, VisualAsset};
use crate::prompts::Template;

/// One merged entry reduced to what prompts show of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MergedItem {
    /// Index into the original elements, for original entries.
    pub original: Option<usize>,
    pub caption: Option<String>,
    pub text: Option<String>,
}

impl MergedItem {
    pub fn line(&self) -> String {
        match (&self.caption, &self.text) {
            (Some(c), Some(t)) => format!("[image: {c}] {t}"),
            (Some(c), None) => format!("[image: {c}]"),
            (None, Some(t)) => t.clone(),
            (None, None) => String::new(),
        }
    }
}

fn numbered(items: &[MergedItem]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| format!("{}. {}", i + 1, item.line()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Captions and texts of every merged entry, captioning whatever lacks one.
pub fn describe_merged<N>(engine: &Engine, aug: &AugmentedSequence<N>) -> Result<Vec<MergedItem>>
where
    N: GapNode + Sync,
{
    let caption = |stored: Option<&str>, visual: Option<&VisualAsset>| -> Result<Option<String>> {
        match (stored, visual) {
            (Some(c), _) => Ok(Some(c.to_owned())),
            (None, Some(v)) => engine.backend.caption_image(v).map(Some),
            (None, None) => Ok(None),
        }
    };
    aug.merged
        .par_iter()
        .map(|entry| match *entry {
            MergedEntry::Original(i) => {
                let pair = &aug.original.elements()[i];
                Ok(MergedItem {
                    original: Some(i),
                    caption: caption(pair.caption(), Some(pair.visual()))?,
                    text: Some(pair.text().to_owned()),
                })
            }
            MergedEntry::Infilled(i) => {
                let node = &aug.infillings[i];
                Ok(MergedItem {
                    original: None,
                    caption: caption(node.caption(), node.visual())?,
                    text: node.text().map(str::to_owned),
                })
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DownstreamStep {
    pub index: usize,
    pub prompt: String,
    pub output: String,
    /// Material that varies per step: prior story passages, or the lines of
    /// the surrounding infillings.
    pub context: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DownstreamOutput {
    pub task: TaskKind,
    pub summary_prompt: String,
    pub summary: String,
    pub steps: Vec<DownstreamStep>,
}

impl DownstreamOutput {
    pub fn outputs(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.output.as_str()).collect()
    }
}

/// One base-temperature summary over every merged caption and text.
pub fn extensive_summary(engine: &Engine, task: TaskKind, items: &[MergedItem]) -> Result<(String, String)> {
    let prompt = engine.prompts.render(
        Template::ExtensiveSummary,
        &[
            ("exemplars", engine.prompts.exemplars(task).foveation.trim()),
            ("captions_and_texts", &numbered(items)),
        ],
    )?;
    let summary = engine.complete(&prompt, engine.settings.max_tokens_long)?;
    if summary.trim().is_empty() {
        return Err(Error::Generation("extensive summary came back empty".into()));
    }
    Ok((prompt, summary.trim().to_owned()))
}

/// Merged entries from original `i` up to, not including, original `i + 1`.
fn window(items: &[MergedItem], step: usize) -> &[MergedItem] {
    let start = items
        .iter()
        .position(|it| it.original == Some(step))
        .expect("every original is in the merged order");
    let end = items[start + 1..]
        .iter()
        .position(|it| it.original.is_some())
        .map_or(items.len(), |off| start + 1 + off);
    &items[start..end]
}

fn step_output(engine: &Engine, index: usize, prompt: String, context: Vec<String>) -> Result<DownstreamStep> {
    let output = engine
        .complete(&prompt, engine.settings.max_tokens_long)
        .and_then(|out| {
            let out = out.trim();
            if out.is_empty() {
                Err(Error::Generation("empty downstream output".into()))
            } else {
                Ok(out.to_owned())
            }
        })
        .map_err(|e| Error::Step {
            step_index: index,
            source: Box::new(e),
        })?;
    Ok(DownstreamStep {
        index,
        prompt,
        output,
        context,
    })
}

fn require_task(aug_task: TaskKind, wanted: TaskKind) -> Result<()> {
    if aug_task != wanted {
        return Err(Error::Precondition(format!(
            "expected a {wanted} sequence, got {aug_task}"
        )));
    }
    Ok(())
}

/// Writes a story one original step at a time; each prompt carries every
/// passage written so far.
pub fn build_story<N>(engine: &Engine, aug: &AugmentedSequence<N>, foveation: &Foveation) -> Result<DownstreamOutput>
where
    N: GapNode + Sync,
{
    require_task(aug.original.task(), TaskKind::Storytelling)?;
    let items = describe_merged(engine, aug)?;
    let (summary_prompt, summary) = extensive_summary(engine, TaskKind::Storytelling, &items)?;
    let exemplars = engine.prompts.exemplars(TaskKind::Storytelling).downstream.trim();

    let mut steps: Vec<DownstreamStep> = Vec::with_capacity(aug.original.len());
    for i in 0..aug.original.len() {
        let history: Vec<String> = steps.iter().map(|s| s.output.clone()).collect();
        let window = window(&items, i)
            .iter()
            .map(MergedItem::line)
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = engine.prompts.render(
            Template::StoryStep,
            &[
                ("exemplars", exemplars),
                ("summary", &summary),
                ("focus", foveation.focus.trim()),
                ("window", &window),
                ("history", &history.join("\n")),
            ],
        )?;
        steps.push(step_output(engine, i, prompt, history)?);
    }
    Ok(DownstreamOutput {
        task: TaskKind::Storytelling,
        summary_prompt,
        summary,
        steps,
    })
}

/// Writes one instruction per original step from the step itself and the
/// infillings of the gaps on either side of it.
pub fn summarize_instructions<N>(
    engine: &Engine,
    aug: &AugmentedSequence<N>,
    foveation: &Foveation,
) -> Result<DownstreamOutput>
where
    N: GapNode + Sync,
{
    require_task(aug.original.task(), TaskKind::Summarization)?;
    let items = describe_merged(engine, aug)?;
    let (summary_prompt, summary) = extensive_summary(engine, TaskKind::Summarization, &items)?;
    let exemplars = engine.prompts.exemplars(TaskKind::Summarization).downstream.trim();

    let n = aug.original.len();
    let steps = (0..n)
        .into_par_iter()
        .map(|i| {
            // Infillings sit between originals, so the entries strictly
            // between original i-1 and original i+1, minus i itself.
            let start = match i {
                0 => 0,
                _ => items.iter().position(|it| it.original == Some(i - 1)).expect("present") + 1,
            };
            let end = match i + 1 < n {
                true => items.iter().position(|it| it.original == Some(i + 1)).expect("present"),
                false => items.len(),
            };
            let context: Vec<String> = items[start..end]
                .iter()
                .filter(|it| it.original.is_none())
                .map(MergedItem::line)
                .collect();
            let step = items.iter().find(|it| it.original == Some(i)).expect("present").line();
            let prompt = engine.prompts.render(
                Template::InstructionStep,
                &[
                    ("exemplars", exemplars),
                    ("summary", &summary),
                    ("focus", foveation.focus.trim()),
                    ("infillings", &context.join("\n")),
                    ("step", &step),
                ],
            )?;
            step_output(engine, i, prompt, context)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(DownstreamOutput {
        task: TaskKind::Summarization,
        summary_prompt,
        summary,
        steps,
    })
}

/// The task-appropriate downstream run; generic sequences have none.
pub fn run_downstream<N>(
    engine: &Engine,
    aug: &AugmentedSequence<N>,
    foveation: &Foveation,
) -> Result<Option<DownstreamOutput>>
where
    N: GapNode + Sync,
{
    match aug.original.task() {
        TaskKind::Storytelling => build_story(engine, aug, foveation).map(Some),
        TaskKind::Summarization => summarize_instructions(engine, aug, foveation).map(Some),
        TaskKind::Generic => Ok(None),
    }
}
