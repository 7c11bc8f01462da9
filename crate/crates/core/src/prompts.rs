//! Prompt templates and few-shot exemplars.
//!
//! Both ship as data files under `templates/` and `exemplars/` and are compiled
//! in as defaults. A run may point at directories holding replacements; any
//! file present there overrides the built-in copy.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Template {
    FoveationSummary,
    FocusExtract,
    Infill,
    ExtensiveSummary,
    StoryStep,
    InstructionStep,
    CotInfill,
}

impl Template {
    pub const ALL: [Template; 7] = [
        Template::FoveationSummary,
        Template::FocusExtract,
        Template::Infill,
        Template::ExtensiveSummary,
        Template::StoryStep,
        Template::InstructionStep,
        Template::CotInfill,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Template::FoveationSummary => "foveation_summary.v1.txt",
            Template::FocusExtract => "focus_extract.v1.txt",
            Template::Infill => "infill.v1.txt",
            Template::ExtensiveSummary => "extensive_summary.v1.txt",
            Template::StoryStep => "story_step.v1.txt",
            Template::InstructionStep => "instruction_step.v1.txt",
            Template::CotInfill => "cot_infill.v1.txt",
        }
    }

    /// Placeholders a template of this kind may use.
    pub fn placeholders(self) -> &'static [&'static str] {
        match self {
            Template::FoveationSummary | Template::ExtensiveSummary => &["exemplars", "captions_and_texts"],
            Template::FocusExtract => &["summary"],
            Template::Infill => &[
                "exemplars",
                "focus",
                "prev_caption",
                "prev_text",
                "next_caption",
                "next_text",
            ],
            Template::StoryStep => &["exemplars", "summary", "focus", "window", "history"],
            Template::InstructionStep => &["exemplars", "summary", "focus", "step", "infillings"],
            Template::CotInfill => &["prev_text", "next_text"],
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            Template::FoveationSummary => include_str!("../templates/foveation_summary.v1.txt"),
            Template::FocusExtract => include_str!("../templates/focus_extract.v1.txt"),
            Template::Infill => include_str!("../templates/infill.v1.txt"),
            Template::ExtensiveSummary => include_str!("../templates/extensive_summary.v1.txt"),
            Template::StoryStep => include_str!("../templates/story_step.v1.txt"),
            Template::InstructionStep => include_str!("../templates/instruction_step.v1.txt"),
            Template::CotInfill => include_str!("../templates/cot_infill.v1.txt"),
        }
    }
}

/// Few-shot blocks for one task kind.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExemplarSet {
    pub foveation: String,
    pub infill: String,
    pub downstream: String,
}

impl ExemplarSet {
    fn builtin(task: TaskKind) -> Self {
        let raw = match task {
            TaskKind::Storytelling => include_str!("../exemplars/storytelling.toml"),
            TaskKind::Summarization => include_str!("../exemplars/summarization.toml"),
            TaskKind::Generic => include_str!("../exemplars/generic.toml"),
        };
        toml::from_str(raw).expect("built-in exemplars parse")
    }
}

#[derive(Debug, Clone)]
pub struct PromptKit {
    templates: HashMap<Template, String>,
    exemplars: HashMap<TaskKind, ExemplarSet>,
}

const TASKS: [TaskKind; 3] = [TaskKind::Storytelling, TaskKind::Summarization, TaskKind::Generic];

impl PromptKit {
    pub fn builtin() -> Self {
        Self {
            templates: Template::ALL.iter().map(|t| (*t, t.builtin().to_owned())).collect(),
            exemplars: TASKS.iter().map(|t| (*t, ExemplarSet::builtin(*t))).collect(),
        }
    }

    /// Built-ins overridden by whatever files exist in the given directories.
    pub fn load(templates_dir: Option<&Path>, exemplars_dir: Option<&Path>) -> Result<Self> {
        let mut kit = Self::builtin();
        if let Some(dir) = templates_dir {
            for t in Template::ALL {
                let path = dir.join(t.file_name());
                if path.exists() {
                    kit.set_template(t, fs::read_to_string(&path)?)?;
                }
            }
        }
        if let Some(dir) = exemplars_dir {
            for task in TASKS {
                let path = dir.join(format!("{task}.toml"));
                if path.exists() {
                    let set: ExemplarSet = toml::from_str(&fs::read_to_string(&path)?)
                        .map_err(|e| Error::Template(format!("{}: {e}", path.display())))?;
                    kit.exemplars.insert(task, set);
                }
            }
        }
        Ok(kit)
    }

    pub fn set_template(&mut self, template: Template, text: String) -> Result<()> {
        for name in placeholders_in(&text) {
            if !template.placeholders().contains(&name.as_str()) {
                return Err(Error::Template(format!(
                    "{} uses unknown placeholder {{{name}}}",
                    template.file_name()
                )));
            }
        }
        self.templates.insert(template, text);
        Ok(())
    }

    pub fn exemplars(&self, task: TaskKind) -> &ExemplarSet {
        &self.exemplars[&task]
    }

    pub fn render(&self, template: Template, vars: &[(&str, &str)]) -> Result<String> {
        render(&self.templates[&template], vars)
    }
}

impl Default for PromptKit {
    fn default() -> Self {
        Self::builtin()
    }
}

fn is_placeholder_name(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn placeholders_in(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_placeholder_name(&after[..close]) => {
                out.push(after[..close].to_owned());
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

/// Substitutes `{name}` placeholders in one pass; substituted values are
/// never rescanned.
pub fn render(text: &str, vars: &[(&str, &str)]) -> Result<String> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close) if is_placeholder_name(&after[..close]) => {
                let name = &after[..close];
                let value = vars
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::Template(format!("no value for {{{name}}}")))?;
                out.push_str(value);
                rest = &after[close + 1..];
            }
            _ => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
