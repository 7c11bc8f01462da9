use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, TextGeneration, TextRequest};
use crate::error::Result;
use crate::model::{sha256_hex, TextVisualPair};
use crate::prompts::PromptKit;

/// What text candidates are compared against when picking an infilling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextScoring {
    /// Embeddings of the neighbors' texts.
    #[default]
    NeighborText,
    /// Embeddings of the neighbors' visuals.
    NeighborVisual,
}

/// How per-neighbor similarities collapse into one unification score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    #[default]
    Mean,
    Min,
}

impl Aggregate {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregate::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregate::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSettings {
    pub seed: u64,
    /// Temperature for every candidate past the first.
    pub candidate_temperature: f64,
    pub text_candidates: usize,
    pub image_candidates: usize,
    pub unify_candidates: usize,
    pub summary_candidates: usize,
    pub max_tokens_infill: u32,
    pub max_tokens_long: u32,
    pub text_scoring: TextScoring,
    pub unify_aggregate: Aggregate,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            candidate_temperature: 0.5,
            text_candidates: 5,
            image_candidates: 4,
            unify_candidates: 4,
            summary_candidates: 3,
            max_tokens_infill: 256,
            max_tokens_long: 512,
            text_scoring: TextScoring::NeighborText,
            unify_aggregate: Aggregate::Mean,
        }
    }
}

/// Backend and settings shared by every stage of a run.
#[derive(Clone)]
pub struct Engine {
    pub backend: Arc<dyn Backend>,
    pub settings: EngineSettings,
    pub prompts: Arc<PromptKit>,
}

impl Engine {
    pub fn new(backend: Arc<dyn Backend>, settings: EngineSettings) -> Self {
        Self {
            backend,
            settings,
            prompts: Arc::new(PromptKit::builtin()),
        }
    }

    pub fn with_prompts(mut self, prompts: PromptKit) -> Self {
        self.prompts = Arc::new(prompts);
        self
    }

    pub fn base_temperature(&self) -> f64 {
        self.backend.profile().default_temperature
    }

    /// The pair's stored caption, or a fresh one from the captioner.
    pub fn caption_of(&self, pair: &TextVisualPair) -> Result<String> {
        match pair.caption() {
            Some(c) => Ok(c.to_owned()),
            None => self.backend.caption_image(pair.visual()),
        }
    }

    pub fn captioned(&self, pair: &TextVisualPair) -> Result<TextVisualPair> {
        if pair.caption().is_some() {
            return Ok(pair.clone());
        }
        let caption = self.backend.caption_image(pair.visual())?;
        Ok(pair.clone().with_caption(caption))
    }

    /// One completion at the base temperature.
    pub fn complete(&self, prompt: &str, max_tokens: u32) -> Result<String> {
        let out = self.backend.generate_text(&TextRequest {
            prompt: prompt.to_owned(),
            temperature: self.base_temperature(),
            n: 1,
            max_tokens,
            want_logprobs: false,
            seed: self.settings.seed,
        })?;
        Ok(out.into_iter().next().map(|g| g.text).unwrap_or_default())
    }

    /// `n` candidates: index 0 at the base temperature, the rest in one batch
    /// at the candidate temperature.
    pub fn candidates(&self, prompt: &str, n: usize, max_tokens: u32) -> Result<Vec<TextGeneration>> {
        let request = |temperature, n| TextRequest {
            prompt: prompt.to_owned(),
            temperature,
            n,
            max_tokens,
            want_logprobs: false,
            seed: self.settings.seed,
        };
        let mut all = self.backend.generate_text(&request(self.base_temperature(), 1))?;
        if n > 1 {
            all.extend(
                self.backend
                    .generate_text(&request(self.settings.candidate_temperature, n - 1))?,
            );
        }
        for (i, g) in all.iter_mut().enumerate() {
            g.candidate_index = i;
        }
        Ok(all)
    }
}

/// Index of the largest score; ties go to the lowest index and `None` entries
/// are skipped.
pub fn argmax_lowest<I>(scores: I) -> Option<usize>
where
    I: IntoIterator<Item = Option<f64>>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.into_iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, _)| i)
}

/// Identity of a pair used to link nodes to their neighbors in audit records.
pub fn pair_fingerprint(pair: &TextVisualPair) -> String {
    let mut buf = Vec::with_capacity(pair.text().len() + 65);
    buf.extend_from_slice(pair.text().as_bytes());
    buf.push(0);
    buf.extend_from_slice(pair.visual().id().as_bytes());
    sha256_hex(&buf)
}
