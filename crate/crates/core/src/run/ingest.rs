//! Dataset readers.
//!
//! `vist` files hold stories of text-image steps, `wikihow` files hold
//! text-only how-to articles, and `generic` files hold either kind with an
//! explicit task.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Sequence, TaskKind, TextSequence, TextVisualPair, VisualAsset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Vist,
    Wikihow,
    Generic,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vist" => Ok(Self::Vist),
            "wikihow" => Ok(Self::Wikihow),
            "generic" => Ok(Self::Generic),
            other => Err(Error::Config(format!("unknown dataset format {other:?}"))),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Vist => "vist",
            Self::Wikihow => "wikihow",
            Self::Generic => "generic",
        })
    }
}

/// One ingested sequence, before or after it has visuals.
#[derive(Debug, Clone, PartialEq)]
pub enum Ingested {
    Paired(Sequence),
    TextOnly(TextSequence),
}

impl Ingested {
    pub fn id(&self) -> &str {
        match self {
            Ingested::Paired(s) => s.id(),
            Ingested::TextOnly(t) => &t.id,
        }
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Ingested::Paired(s) => s.task(),
            Ingested::TextOnly(t) => t.task,
        }
    }
}

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Vec<Ingested>> {
    match format {
        DatasetFormat::Vist => Ok(parse_vist(path)?.into_iter().map(Ingested::Paired).collect()),
        DatasetFormat::Wikihow => Ok(parse_wikihow(path)?.into_iter().map(Ingested::TextOnly).collect()),
        DatasetFormat::Generic => parse_generic(path),
    }
}

fn ingestion(path: &Path, message: impl Into<String>) -> Error {
    Error::Ingestion {
        path: path.to_owned(),
        message: message.into(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path).map_err(|e| ingestion(path, e.to_string()))?;
    serde_json::from_str(&raw).map_err(|e| ingestion(path, e.to_string()))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_owned).unwrap_or_default()
}

/// Loads a step's image and pairs it with the text.
fn load_pair(dir: &Path, seq_id: &str, step: usize, text: String, image_path: &str) -> Result<TextVisualPair> {
    let path = dir.join(image_path);
    let bytes = fs::read(&path).map_err(|e| ingestion(&path, format!("{seq_id} step {step}: {e}")))?;
    let visual =
        VisualAsset::from_dataset(bytes).map_err(|e| ingestion(&path, format!("{seq_id} step {step}: {e}")))?;
    TextVisualPair::new(text, visual).map_err(|e| ingestion(&path, format!("{seq_id} step {step}: {e}")))
}

#[derive(Deserialize)]
struct VistStory {
    story_id: String,
    steps: Vec<VistStep>,
}

#[derive(Deserialize)]
struct VistStep {
    text: String,
    image_path: String,
}

/// Stories of text-image steps. Image paths resolve against the file's
/// directory.
pub fn parse_vist(path: &Path) -> Result<Vec<Sequence>> {
    let stories: Vec<VistStory> = read_json(path)?;
    let dir = base_dir(path);
    let mut out = Vec::with_capacity(stories.len());
    for story in stories {
        if story.steps.is_empty() {
            warn!("story {} has no steps; skipped", story.story_id);
            continue;
        }
        if story.steps.len() != 5 {
            warn!("story {} has {} steps, expected 5", story.story_id, story.steps.len());
        }
        let elements = story
            .steps
            .into_iter()
            .enumerate()
            .map(|(k, s)| load_pair(&dir, &story.story_id, k, s.text, &s.image_path))
            .collect::<Result<Vec<_>>>()?;
        out.push(Sequence::new(story.story_id, TaskKind::Storytelling, elements, None)?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct Article {
    id: Option<String>,
    title: Option<String>,
    steps: Vec<String>,
}

/// Text-only articles; each becomes a summarization sequence that still
/// needs visuals. Articles without an `id` are numbered by position.
pub fn parse_wikihow(path: &Path) -> Result<Vec<TextSequence>> {
    let articles: Vec<Article> = read_json(path)?;
    let mut out = Vec::with_capacity(articles.len());
    for (i, article) in articles.into_iter().enumerate() {
        let id = article.id.unwrap_or_else(|| format!("article-{i:04}"));
        let title = article
            .title
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| ingestion(path, format!("{id} has no title")))?;
        if article.steps.is_empty() {
            warn!("article {id} ({title}) has no steps; skipped");
            continue;
        }
        if let Some(k) = article.steps.iter().position(|s| s.trim().is_empty()) {
            return Err(ingestion(path, format!("{id} step {k} is empty")));
        }
        out.push(TextSequence {
            id,
            task: TaskKind::Summarization,
            title: Some(title),
            texts: article.steps,
        });
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenericEntry {
    id: String,
    #[serde(default = "generic_task")]
    task: TaskKind,
    title: Option<String>,
    steps: Vec<GenericStep>,
}

fn generic_task() -> TaskKind {
    TaskKind::Generic
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenericStep {
    text: String,
    image_path: Option<String>,
}

/// `[{"id", "task"?, "title"?, "steps": [{"text", "image_path"?}]}]`. A
/// sequence either has an image on every step or on none.
pub fn parse_generic(path: &Path) -> Result<Vec<Ingested>> {
    let entries: Vec<GenericEntry> = read_json(path)?;
    let dir = base_dir(path);
    let mut out = Vec::with_capacity(entries.len());
    for entry in entries {
        if entry.steps.is_empty() {
            warn!("sequence {} has no steps; skipped", entry.id);
            continue;
        }
        let with_images = entry.steps.iter().filter(|s| s.image_path.is_some()).count();
        if with_images == 0 {
            if let Some(k) = entry.steps.iter().position(|s| s.text.trim().is_empty()) {
                return Err(ingestion(path, format!("{} step {k} is empty", entry.id)));
            }
            out.push(Ingested::TextOnly(TextSequence {
                id: entry.id,
                task: entry.task,
                title: entry.title,
                texts: entry.steps.into_iter().map(|s| s.text).collect(),
            }));
        } else if with_images == entry.steps.len() {
            let elements = entry
                .steps
                .into_iter()
                .enumerate()
                .map(|(k, s)| load_pair(&dir, &entry.id, k, s.text, s.image_path.as_deref().expect("counted")))
                .collect::<Result<Vec<_>>>()?;
            out.push(Ingested::Paired(Sequence::new(
                entry.id,
                entry.task,
                elements,
                entry.title,
            )?));
        } else {
            return Err(ingestion(
                path,
                format!("{} mixes steps with and without images", entry.id),
            ));
        }
    }
    Ok(out)
}
