//! Domain types shared by every pipeline stage.
//!
//! Values are immutable once constructed. Transformations return new values,
//! and an [`AugmentedSequence`] never reorders the original elements it wraps.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetSource {
    Dataset,
    Generated,
}

/// A PNG image identified by the SHA-256 of its bytes.
#[derive(Clone, PartialEq, Eq)]
pub struct VisualAsset {
    id: String,
    png_bytes: Arc<[u8]>,
    source: AssetSource,
    prompt: Option<String>,
}

impl VisualAsset {
    /// Wraps PNG bytes loaded from a dataset.
    pub fn from_dataset(png_bytes: Vec<u8>) -> Result<Self> {
        Self::build(png_bytes, AssetSource::Dataset, None)
    }

    /// Wraps PNG bytes produced by an image backend for `prompt`.
    pub fn generated(png_bytes: Vec<u8>, prompt: impl Into<String>) -> Result<Self> {
        Self::build(png_bytes, AssetSource::Generated, Some(prompt.into()))
    }

    fn build(png_bytes: Vec<u8>, source: AssetSource, prompt: Option<String>) -> Result<Self> {
        validate_png(&png_bytes)?;
        Ok(Self {
            id: sha256_hex(&png_bytes),
            png_bytes: png_bytes.into(),
            source,
            prompt,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn png_bytes(&self) -> &[u8] {
        &self.png_bytes
    }

    pub fn source(&self) -> AssetSource {
        self.source
    }

    pub fn prompt(&self) -> Option<&str> {
        self.prompt.as_deref()
    }

    /// First eight hex characters of the id.
    pub fn short_id(&self) -> &str {
        &self.id[..8]
    }
}

impl fmt::Debug for VisualAsset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VisualAsset")
            .field("id", &self.id)
            .field("bytes", &self.png_bytes.len())
            .field("source", &self.source)
            .field("prompt", &self.prompt)
            .finish()
    }
}

/// Decodes the full image stream; any decoder complaint is a PNG error.
pub fn validate_png(bytes: &[u8]) -> Result<()> {
    if bytes.is_empty() {
        return Err(Error::Png("zero-byte payload".into()));
    }
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| Error::Png(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    reader.next_frame(&mut buf).map_err(|e| Error::Png(e.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextVisualPair {
    text: String,
    visual: VisualAsset,
    caption: Option<String>,
}

impl TextVisualPair {
    pub fn new(text: impl Into<String>, visual: VisualAsset) -> Result<Self> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Input("pair text is empty".into()));
        }
        Ok(Self {
            text,
            visual,
            caption: None,
        })
    }

    pub fn with_caption(mut self, caption: impl Into<String>) -> Self {
        self.caption = Some(caption.into());
        self
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn visual(&self) -> &VisualAsset {
        &self.visual
    }

    pub fn caption(&self) -> Option<&str> {
        self.caption.as_deref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Storytelling,
    Summarization,
    Generic,
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Storytelling => "storytelling",
            TaskKind::Summarization => "summarization",
            TaskKind::Generic => "generic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    id: String,
    task: TaskKind,
    elements: Vec<TextVisualPair>,
    title: Option<String>,
}

impl Sequence {
    pub fn new(
        id: impl Into<String>,
        task: TaskKind,
        elements: Vec<TextVisualPair>,
        title: Option<String>,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Precondition("a sequence needs at least one element".into()));
        }
        Ok(Self {
            id: id.into(),
            task,
            elements,
            title,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn elements(&self) -> &[TextVisualPair] {
        &self.elements
    }

    pub fn title(&self) -> Option<&str> {
        self.title.as_deref()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn gap_count(&self) -> usize {
        self.elements.len().saturating_sub(1)
    }

    /// Same sequence with its elements replaced; the count must not change.
    pub fn with_elements(&self, elements: Vec<TextVisualPair>) -> Result<Self> {
        if elements.len() != self.elements.len() {
            return Err(Error::Structural(format!(
                "element count changed from {} to {}",
                self.elements.len(),
                elements.len()
            )));
        }
        Ok(Self {
            elements,
            ..self.clone()
        })
    }
}

/// A text-only sequence awaiting task unification.
#[derive(Debug, Clone, PartialEq)]
pub struct TextSequence {
    pub id: String,
    pub task: TaskKind,
    pub title: Option<String>,
    pub texts: Vec<String>,
}

/// Audit trail kept on every selected infilling.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAudit {
    pub candidate_texts: Vec<String>,
    /// `None` marks a candidate that came back empty and was not scored.
    pub text_scores: Vec<Option<f64>>,
    pub visual_scores: Vec<f64>,
    pub novelty: f64,
    pub prompt_sha256: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InfillingNode {
    pub pair: TextVisualPair,
    pub depth: u32,
    pub gap_index: usize,
    pub text_score: f64,
    pub visual_score: f64,
    pub candidate_index_text: usize,
    pub candidate_index_visual: usize,
    pub audit: NodeAudit,
}

/// What every kind of generated node exposes: its place in the recursion and
/// whichever of the two modalities it carries.
pub trait GapNode {
    fn depth(&self) -> u32;
    fn gap_index(&self) -> usize;
    fn text(&self) -> Option<&str>;
    fn visual(&self) -> Option<&VisualAsset>;
    fn caption(&self) -> Option<&str> {
        None
    }
}

impl GapNode for InfillingNode {
    fn depth(&self) -> u32 {
        self.depth
    }

    fn gap_index(&self) -> usize {
        self.gap_index
    }

    fn text(&self) -> Option<&str> {
        Some(self.pair.text())
    }

    fn visual(&self) -> Option<&VisualAsset> {
        Some(self.pair.visual())
    }

    fn caption(&self) -> Option<&str> {
        self.pair.caption()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "tag", content = "index")]
pub enum MergedEntry {
    /// Index into `original.elements()`.
    Original(usize),
    /// Index into `infillings`.
    Infilled(usize),
}

impl MergedEntry {
    pub fn is_original(&self) -> bool {
        matches!(self, MergedEntry::Original(_))
    }
}

/// Original elements interleaved with the nodes generated for each gap.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSequence<N = InfillingNode> {
    pub original: Sequence,
    pub infillings: Vec<N>,
    pub merged: Vec<MergedEntry>,
    gap_ranges: Vec<Range<usize>>,
}

impl<N> AugmentedSequence<N> {
    /// The nodes generated between original `gap` and `gap + 1`.
    pub fn gap_nodes(&self, gap: usize) -> &[N] {
        self.gap_ranges
            .get(gap)
            .map(|r| &self.infillings[r.clone()])
            .unwrap_or(&[])
    }

    pub fn gap_count(&self) -> usize {
        self.gap_ranges.len()
    }

    /// Original elements recovered from the merged order.
    pub fn originals_in_merged_order(&self) -> Vec<&TextVisualPair> {
        self.merged
            .iter()
            .filter_map(|e| match e {
                MergedEntry::Original(i) => Some(&self.original.elements()[*i]),
                MergedEntry::Infilled(_) => None,
            })
            .collect()
    }

    /// Tag and depth of every merged entry; originals report depth 0.
    pub fn shape(&self) -> Vec<(bool, u32)>
    where
        N: GapNode,
    {
        self.merged
            .iter()
            .map(|e| match e {
                MergedEntry::Original(_) => (true, 0),
                MergedEntry::Infilled(i) => (false, self.infillings[*i].depth()),
            })
            .collect()
    }
}

/// Splices per-gap node lists between the originals.
pub fn merge_gap_results<N>(original: Sequence, per_gap: Vec<Vec<N>>) -> Result<AugmentedSequence<N>> {
    let gaps = original.gap_count();
    if per_gap.len() != gaps {
        return Err(Error::Structural(format!(
            "{} gap result lists for {} gaps",
            per_gap.len(),
            gaps
        )));
    }
    let total: usize = per_gap.iter().map(Vec::len).sum();
    let mut merged = Vec::with_capacity(original.len() + total);
    let mut infillings = Vec::with_capacity(total);
    let mut gap_ranges = Vec::with_capacity(gaps);
    merged.push(MergedEntry::Original(0));
    for (gap, nodes) in per_gap.into_iter().enumerate() {
        let start = infillings.len();
        for node in nodes {
            merged.push(MergedEntry::Infilled(infillings.len()));
            infillings.push(node);
        }
        gap_ranges.push(start..infillings.len());
        merged.push(MergedEntry::Original(gap + 1));
    }
    Ok(AugmentedSequence {
        original,
        infillings,
        merged,
        gap_ranges,
    })
}

/// An augmented sequence with nothing inserted.
pub fn passthrough<N>(original: Sequence) -> AugmentedSequence<N> {
    let per_gap = (0..original.gap_count()).map(|_| Vec::new()).collect();
    merge_gap_results(original, per_gap).expect("gap count matches by construction")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Foveation {
    pub focus: String,
    pub summary: String,
    pub summary_loglik: f64,
}

impl Foveation {
    pub fn new(focus: impl Into<String>, summary: impl Into<String>, summary_loglik: f64) -> Result<Self> {
        let focus = focus.into();
        if focus.trim().is_empty() {
            return Err(Error::DegenerateFoveation);
        }
        if !summary_loglik.is_finite() || summary_loglik > 0.0 {
            return Err(Error::Input(format!(
                "summary log-likelihood {summary_loglik} out of range"
            )));
        }
        Ok(Self {
            focus,
            summary: summary.into(),
            summary_loglik,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Halting {
    #[default]
    FixedDepth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecursionPolicy {
    depth_limit: u32,
    halting: Halting,
}

impl RecursionPolicy {
    pub fn new(depth_limit: u32) -> Result<Self> {
        if depth_limit == 0 {
            return Err(Error::Precondition("depth limit must be at least 1".into()));
        }
        Ok(Self {
            depth_limit,
            halting: Halting::FixedDepth,
        })
    }

    pub fn depth_limit(&self) -> u32 {
        self.depth_limit
    }

    pub fn halting(&self) -> Halting {
        self.halting
    }

    /// Whether a node generated at `depth` gets children.
    pub fn descends_from(&self, depth: u32) -> bool {
        match self.halting {
            Halting::FixedDepth => depth < self.depth_limit,
        }
    }

    /// Number of nodes a single gap receives.
    pub fn nodes_per_gap(&self) -> usize {
        (1usize << self.depth_limit) - 1
    }
}

impl Default for RecursionPolicy {
    fn default() -> Self {
        Self {
            depth_limit: 2,
            halting: Halting::FixedDepth,
        }
    }
}
