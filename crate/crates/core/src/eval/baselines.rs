//! Comparison runs that share the infilling recursion shape.
//!
//! Every baseline produces the same node positions as the full method at the
//! same depth limit, so outputs can be compared slot by slot.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::infill::{in_order_depths, recurse_gap};
use crate::model::{
    merge_gap_results, passthrough, sha256_hex, AugmentedSequence, GapNode, RecursionPolicy, Sequence, TextVisualPair,
    VisualAsset,
};
use crate::prompts::Template;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Cot,
    Coi,
    CotPlusCoi,
    Random,
    NoInfilling,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Cot,
        BaselineKind::Coi,
        BaselineKind::CotPlusCoi,
        BaselineKind::Random,
        BaselineKind::NoInfilling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Cot => "cot",
            BaselineKind::Coi => "coi",
            BaselineKind::CotPlusCoi => "cot_plus_coi",
            BaselineKind::Random => "random",
            BaselineKind::NoInfilling => "no_infilling",
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown baseline {s:?}")))
    }
}

/// A baseline slot. Either modality may be missing: text-only and image-only
/// chains fill just one.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineNode {
    pub depth: u32,
    pub gap_index: usize,
    pub text: Option<String>,
    pub visual: Option<VisualAsset>,
    /// Hashes of the prompts that produced the text and the visual.
    pub text_prompt_sha256: Option<String>,
    pub visual_prompt_sha256: Option<String>,
    /// Position in the pool for random draws.
    pub pool_index: Option<usize>,
}

impl BaselineNode {
    fn empty(depth: u32, gap_index: usize) -> Self {
        Self {
            depth,
            gap_index,
            text: None,
            visual: None,
            text_prompt_sha256: None,
            visual_prompt_sha256: None,
            pool_index: None,
        }
    }
}

impl GapNode for BaselineNode {
    fn depth(&self) -> u32 {
        self.depth
    }

    fn gap_index(&self) -> usize {
        self.gap_index
    }

    fn text(&self) -> Option<&str> {
        self.text.as_deref()
    }

    fn visual(&self) -> Option<&VisualAsset> {
        self.visual.as_ref()
    }
}

/// Runs one baseline over `seq`. `pool` is only read by
/// [`BaselineKind::Random`].
pub fn run_baseline(
    engine: &Engine,
    seq: &Sequence,
    policy: &RecursionPolicy,
    kind: BaselineKind,
    pool: &[TextVisualPair],
) -> Result<AugmentedSequence<BaselineNode>> {
    let per_gap = match kind {
        BaselineKind::NoInfilling => return Ok(passthrough(seq.clone())),
        BaselineKind::Cot => per_gap(seq, |g| cot_gap(engine, seq, g, policy))?,
        BaselineKind::Coi => per_gap(seq, |g| coi_gap(engine, seq, g, policy))?,
        BaselineKind::CotPlusCoi => per_gap(seq, |g| {
            let (text, image) = rayon::join(|| cot_gap(engine, seq, g, policy), || coi_gap(engine, seq, g, policy));
            Ok(text?
                .into_iter()
                .zip(image?)
                .map(|(t, v)| BaselineNode {
                    visual: v.visual,
                    visual_prompt_sha256: v.visual_prompt_sha256,
                    ..t
                })
                .collect())
        })?,
        BaselineKind::Random => random_fill(engine, seq, policy, pool)?,
    };
    merge_gap_results(seq.clone(), per_gap)
}

fn per_gap<F>(seq: &Sequence, gap: F) -> Result<Vec<Vec<BaselineNode>>>
where
    F: Fn(usize) -> Result<Vec<BaselineNode>> + Sync,
{
    (0..seq.gap_count())
        .into_par_iter()
        .map(|g| {
            gap(g).map_err(|e| Error::Gap {
                gap_index: g,
                source: Box::new(e),
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Text-only chain: neighbors' texts in, one base-temperature completion out.
fn cot_gap(engine: &Engine, seq: &Sequence, gap: usize, policy: &RecursionPolicy) -> Result<Vec<BaselineNode>> {
    let elements = seq.elements();
    let generate = |prev: &String, next: &String, depth: u32, _descends: bool| {
        let prompt = engine
            .prompts
            .render(Template::CotInfill, &[("prev_text", prev), ("next_text", next)])?;
        let text = engine.complete(&prompt, engine.settings.max_tokens_infill)?;
        let text = text.trim().to_owned();
        if text.is_empty() {
            return Err(Error::Generation("text-only chain produced an empty step".into()));
        }
        let node = BaselineNode {
            text: Some(text.clone()),
            text_prompt_sha256: Some(sha256_hex(prompt.as_bytes())),
            ..BaselineNode::empty(depth, gap)
        };
        Ok((node, text))
    };
    let prev = elements[gap].text().to_owned();
    let next = elements[gap + 1].text().to_owned();
    recurse_gap(&prev, &next, 1, policy, &generate)
}

/// Image-only chain: one image drawn from the neighbors' captions.
fn coi_gap(engine: &Engine, seq: &Sequence, gap: usize, policy: &RecursionPolicy) -> Result<Vec<BaselineNode>> {
    let elements = seq.elements();
    let generate = |prev: &String, next: &String, depth: u32, descends: bool| {
        let prompt = format!("{prev} {next}");
        let visual = engine
            .backend
            .generate_image(&prompt, 1, engine.settings.seed)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::Generation("no image returned".into()))?;
        let caption = match descends {
            true => engine.backend.caption_image(&visual)?,
            false => String::new(),
        };
        let node = BaselineNode {
            visual: Some(visual),
            visual_prompt_sha256: Some(sha256_hex(prompt.as_bytes())),
            ..BaselineNode::empty(depth, gap)
        };
        Ok((node, caption))
    };
    let prev = engine.caption_of(&elements[gap])?;
    let next = engine.caption_of(&elements[gap + 1])?;
    recurse_gap(&prev, &next, 1, policy, &generate)
}

/// Stream seed for a sequence's random draws.
fn random_seed(seed: u64, sequence_id: &str) -> [u8; 32] {
    let mut material = seed.to_le_bytes().to_vec();
    material.extend_from_slice(sequence_id.as_bytes());
    let digest = sha256_hex(&material);
    let mut out = [0u8; 32];
    hex::decode_to_slice(digest, &mut out).expect("sha256 hex is 32 bytes");
    out
}

/// Fills every slot with a uniform draw from previously generated pairs.
/// Draws run gap by gap in merged order, so the result does not depend on
/// scheduling.
fn random_fill(
    engine: &Engine,
    seq: &Sequence,
    policy: &RecursionPolicy,
    pool: &[TextVisualPair],
) -> Result<Vec<Vec<BaselineNode>>> {
    if pool.is_empty() {
        return Err(Error::Input(
            "random baseline needs a non-empty pool of generated pairs".into(),
        ));
    }
    let mut rng = ChaCha8Rng::from_seed(random_seed(engine.settings.seed, seq.id()));
    let depths = in_order_depths(policy);
    Ok((0..seq.gap_count())
        .map(|gap| {
            depths
                .iter()
                .map(|&depth| {
                    let i = rng.random_range(0..pool.len());
                    BaselineNode {
                        text: Some(pool[i].text().to_owned()),
                        visual: Some(pool[i].visual().clone()),
                        pool_index: Some(i),
                        ..BaselineNode::empty(depth, gap)
                    }
                })
                .collect()
        })
        .collect())
}
