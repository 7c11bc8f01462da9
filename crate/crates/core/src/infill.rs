//! Recursive multimodal infilling.
//!
//! [`gen_infilling`] produces one text-visual pair between two neighbors:
//! several text candidates are generated from a prompt carrying both neighbors
//! and the sequence focus, the candidate most similar to the neighbors is kept,
//! several images are drawn from it, and the image closest to the kept text
//! wins. [`rec_gen`] applies it to a gap, then to the two halves on either
//! side of the new node, until the depth limit is reached. The output of a gap
//! is the in-order flattening of that binary tree.

use rayon::prelude::*;

use crate::backend::{cosine, EmbedInput, Embedding, TextGeneration};
use crate::engine::{argmax_lowest, pair_fingerprint, Engine, TextScoring};
use crate::error::{Error, Result};
use crate::model::{
    merge_gap_results, sha256_hex, AugmentedSequence, Foveation, InfillingNode, NodeAudit, RecursionPolicy, Sequence,
    TaskKind, TextVisualPair, VisualAsset,
};
use crate::prompts::Template;

/// Mean similarity of a candidate to its two neighbors.
pub fn score_consistency(candidate: &Embedding, prev: &Embedding, next: &Embedding) -> Result<f64> {
    Ok((cosine(candidate, prev)? + cosine(candidate, next)?) / 2.0)
}

/// One minus the candidate's similarity to its closest neighbor. Reported
/// for auditing only; selection never looks at it.
pub fn novelty_proxy(candidate: &Embedding, prev: &Embedding, next: &Embedding) -> Result<f64> {
    Ok(1.0 - cosine(candidate, prev)?.max(cosine(candidate, next)?))
}

#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub texts: Vec<TextGeneration>,
    pub visuals: Vec<VisualAsset>,
    pub text_scores: Vec<Option<f64>>,
    pub visual_scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct GapTask<'a> {
    pub prev: &'a TextVisualPair,
    pub next: &'a TextVisualPair,
    pub depth: u32,
    pub gap_index: usize,
    pub foveation: &'a Foveation,
    pub task: TaskKind,
}

#[derive(Debug, Clone)]
pub struct GeneratedInfilling {
    pub node: InfillingNode,
    pub candidates: CandidateSet,
    pub prev_fingerprint: String,
    pub next_fingerprint: String,
}

pub fn infill_prompt(engine: &Engine, task: &GapTask<'_>, prev_caption: &str, next_caption: &str) -> Result<String> {
    engine.prompts.render(
        Template::Infill,
        &[
            ("exemplars", engine.prompts.exemplars(task.task).infill.trim()),
            ("focus", task.foveation.focus.trim()),
            ("prev_caption", prev_caption),
            ("prev_text", task.prev.text()),
            ("next_caption", next_caption),
            ("next_text", task.next.text()),
        ],
    )
}

pub fn gen_infilling(engine: &Engine, task: &GapTask<'_>) -> Result<GeneratedInfilling> {
    let settings = &engine.settings;
    if settings.text_candidates == 0 || settings.image_candidates == 0 {
        return Err(Error::Precondition("candidate counts must be at least 1".into()));
    }
    let backend = &engine.backend;

    let prev_caption = engine.caption_of(task.prev)?;
    let next_caption = engine.caption_of(task.next)?;
    let prompt = infill_prompt(engine, task, &prev_caption, &next_caption)?;
    let texts = engine.candidates(&prompt, settings.text_candidates, settings.max_tokens_infill)?;

    let live: Vec<usize> = (0..texts.len()).filter(|&i| !texts[i].text.trim().is_empty()).collect();
    if live.is_empty() {
        return Err(Error::Generation("every text candidate was empty".into()));
    }

    let mut inputs: Vec<EmbedInput<'_>> = live.iter().map(|&i| EmbedInput::Text(&texts[i].text)).collect();
    match settings.text_scoring {
        TextScoring::NeighborText => {
            inputs.push(EmbedInput::Text(task.prev.text()));
            inputs.push(EmbedInput::Text(task.next.text()));
        }
        TextScoring::NeighborVisual => {
            inputs.push(EmbedInput::Image(task.prev.visual()));
            inputs.push(EmbedInput::Image(task.next.visual()));
        }
    }
    let embeddings = backend.embed(&inputs)?;
    let (cand_emb, neighbors) = embeddings.split_at(live.len());
    let (prev_emb, next_emb) = (&neighbors[0], &neighbors[1]);

    let mut text_scores = vec![None; texts.len()];
    for (slot, &i) in live.iter().enumerate() {
        text_scores[i] = Some(score_consistency(&cand_emb[slot], prev_emb, next_emb)?);
    }
    let best_text = argmax_lowest(text_scores.iter().copied()).expect("at least one live candidate");
    let best_slot = live.iter().position(|&i| i == best_text).expect("best is live");
    let novelty = novelty_proxy(&cand_emb[best_slot], prev_emb, next_emb)?;
    let text = texts[best_text].text.trim().to_owned();

    let visuals = backend.generate_image(&text, settings.image_candidates, settings.seed)?;
    let mut inputs: Vec<EmbedInput<'_>> = visuals.iter().map(EmbedInput::Image).collect();
    inputs.push(EmbedInput::Text(&text));
    let embeddings = backend.embed(&inputs)?;
    let (img_emb, text_emb) = embeddings.split_at(visuals.len());
    let visual_scores = img_emb
        .iter()
        .map(|e| cosine(e, &text_emb[0]))
        .collect::<Result<Vec<_>>>()?;
    let best_visual = argmax_lowest(visual_scores.iter().copied().map(Some)).expect("n_visual ≥ 1");

    let node = InfillingNode {
        pair: TextVisualPair::new(text, visuals[best_visual].clone())?,
        depth: task.depth,
        gap_index: task.gap_index,
        text_score: text_scores[best_text].expect("best is scored"),
        visual_score: visual_scores[best_visual],
        candidate_index_text: best_text,
        candidate_index_visual: best_visual,
        audit: NodeAudit {
            candidate_texts: texts.iter().map(|g| g.text.clone()).collect(),
            text_scores: text_scores.clone(),
            visual_scores: visual_scores.clone(),
            novelty,
            prompt_sha256: sha256_hex(prompt.as_bytes()),
        },
    };
    Ok(GeneratedInfilling {
        node,
        candidates: CandidateSet {
            texts,
            visuals,
            text_scores,
            visual_scores,
        },
        prev_fingerprint: pair_fingerprint(task.prev),
        next_fingerprint: pair_fingerprint(task.next),
    })
}

/// Fixed-depth recursion over a gap.
///
/// `generate(prev, next, depth, descends)` produces the midpoint node and the
/// state that stands in for it as a neighbor of the two child calls.
/// `descends` tells the generator whether that state will be used. Children
/// run concurrently once their parent exists; output order follows the tree,
/// never completion time.
pub fn recurse_gap<S, T, F>(prev: &S, next: &S, depth: u32, policy: &RecursionPolicy, generate: &F) -> Result<Vec<T>>
where
    S: Sync,
    T: Send,
    F: Fn(&S, &S, u32, bool) -> Result<(T, S)> + Sync,
{
    if depth == 0 || depth > policy.depth_limit() {
        return Err(Error::Precondition(format!(
            "depth {depth} outside 1..={}",
            policy.depth_limit()
        )));
    }
    let descends = policy.descends_from(depth);
    let (node, mid) = generate(prev, next, depth, descends)?;
    if !descends {
        return Ok(vec![node]);
    }
    let (left, right) = rayon::join(
        || recurse_gap(prev, &mid, depth + 1, policy, generate),
        || recurse_gap(&mid, next, depth + 1, policy, generate),
    );
    let (left, right) = (left?, right?);
    let mut out = Vec::with_capacity(left.len() + 1 + right.len());
    out.extend(left);
    out.push(node);
    out.extend(right);
    Ok(out)
}

/// Depths of a gap's nodes in output order, e.g. `[2, 1, 2]` for limit 2.
pub fn in_order_depths(policy: &RecursionPolicy) -> Vec<u32> {
    fn walk(depth: u32, policy: &RecursionPolicy, out: &mut Vec<u32>) {
        let descends = policy.descends_from(depth);
        if descends {
            walk(depth + 1, policy, out);
        }
        out.push(depth);
        if descends {
            walk(depth + 1, policy, out);
        }
    }
    let mut out = Vec::with_capacity(policy.nodes_per_gap());
    walk(1, policy, &mut out);
    out
}

/// Infills one gap, returning each node with its neighbor fingerprints.
#[allow(clippy::too_many_arguments)]
pub fn rec_gen_detailed(
    engine: &Engine,
    prev: &TextVisualPair,
    next: &TextVisualPair,
    depth: u32,
    policy: &RecursionPolicy,
    foveation: &Foveation,
    gap_index: usize,
    task: TaskKind,
) -> Result<Vec<GeneratedInfilling>> {
    let generate = |prev: &TextVisualPair, next: &TextVisualPair, depth: u32, descends: bool| {
        let mut generated = gen_infilling(
            engine,
            &GapTask {
                prev,
                next,
                depth,
                gap_index,
                foveation,
                task,
            },
        )?;
        // Both children caption the midpoint; do it once up front.
        if descends {
            generated.node.pair = engine.captioned(&generated.node.pair)?;
        }
        let mid = generated.node.pair.clone();
        Ok((generated, mid))
    };
    recurse_gap(prev, next, depth, policy, &generate)
}

pub fn rec_gen(
    engine: &Engine,
    prev: &TextVisualPair,
    next: &TextVisualPair,
    depth: u32,
    policy: &RecursionPolicy,
    foveation: &Foveation,
    task: TaskKind,
) -> Result<Vec<InfillingNode>> {
    Ok(rec_gen_detailed(engine, prev, next, depth, policy, foveation, 0, task)?
        .into_iter()
        .map(|g| g.node)
        .collect())
}

#[derive(Debug, Clone)]
pub struct InfilledSequence {
    pub augmented: AugmentedSequence,
    /// `(prev, next)` neighbor fingerprints aligned with `augmented.infillings`.
    pub links: Vec<(String, String)>,
    /// Every candidate considered, aligned with `augmented.infillings`.
    pub candidates: Vec<CandidateSet>,
}

/// Runs the recursion on every adjacent pair; gaps run concurrently.
pub fn infill_sequence_detailed(
    engine: &Engine,
    seq: &Sequence,
    foveation: &Foveation,
    policy: &RecursionPolicy,
) -> Result<InfilledSequence> {
    let elements = seq.elements();
    let per_gap: Vec<Result<Vec<GeneratedInfilling>>> = (0..seq.gap_count())
        .into_par_iter()
        .map(|g| {
            rec_gen_detailed(
                engine,
                &elements[g],
                &elements[g + 1],
                1,
                policy,
                foveation,
                g,
                seq.task(),
            )
            .map_err(|e| Error::Gap {
                gap_index: g,
                source: Box::new(e),
            })
        })
        .collect();

    let mut nodes = Vec::with_capacity(per_gap.len());
    let mut links = Vec::new();
    let mut candidates = Vec::new();
    for gap in per_gap {
        let mut gap_nodes = Vec::new();
        for g in gap? {
            links.push((g.prev_fingerprint, g.next_fingerprint));
            candidates.push(g.candidates);
            gap_nodes.push(g.node);
        }
        nodes.push(gap_nodes);
    }
    Ok(InfilledSequence {
        augmented: merge_gap_results(seq.clone(), nodes)?,
        links,
        candidates,
    })
}

pub fn infill_sequence(
    engine: &Engine,
    seq: &Sequence,
    foveation: &Foveation,
    policy: &RecursionPolicy,
) -> Result<AugmentedSequence> {
    infill_sequence_detailed(engine, seq, foveation, policy).map(|s| s.augmented)
}
