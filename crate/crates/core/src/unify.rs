//! Task unification: give every step of a text-only sequence a visual.
//!
//! Step `i` gets `k` candidate images generated from its own text. Each
//! candidate is scored by its similarity to the texts of the neighboring steps
//! and the best one is kept.

use rayon::prelude::*;

use crate::backend::{cosine, EmbedInput};
use crate::engine::{argmax_lowest, Engine};
use crate::error::{Error, Result};
use crate::model::{Sequence, TextSequence, TextVisualPair, VisualAsset};

#[derive(Debug, Clone, PartialEq)]
pub struct UnifySelection {
    pub candidates: Vec<VisualAsset>,
    pub scores: Vec<f64>,
    pub chosen: usize,
}

#[derive(Debug, Clone)]
pub struct Unified {
    pub sequence: Sequence,
    pub selections: Vec<UnifySelection>,
}

/// Indices of the texts a step's candidates are compared against.
pub fn neighbor_indices(i: usize, n: usize) -> Vec<usize> {
    if n == 1 {
        return vec![0];
    }
    let mut out = Vec::with_capacity(2);
    if i > 0 {
        out.push(i - 1);
    }
    if i + 1 < n {
        out.push(i + 1);
    }
    out
}

pub fn unify_text_sequence(engine: &Engine, source: &TextSequence, k: usize) -> Result<Unified> {
    if source.texts.is_empty() {
        return Err(Error::Precondition(format!("sequence {} has no steps", source.id)));
    }
    if k == 0 {
        return Err(Error::Precondition("unification needs at least one candidate".into()));
    }
    if let Some(i) = source.texts.iter().position(|t| t.trim().is_empty()) {
        return Err(Error::Input(format!("step {i} of {} is empty", source.id)));
    }

    let n = source.texts.len();
    let steps: Vec<Result<(TextVisualPair, UnifySelection)>> = (0..n)
        .into_par_iter()
        .map(|i| unify_step(engine, &source.texts, i, k))
        .collect();

    let mut elements = Vec::with_capacity(n);
    let mut selections = Vec::with_capacity(n);
    for step in steps {
        let (pair, selection) = step?;
        elements.push(pair);
        selections.push(selection);
    }
    Ok(Unified {
        sequence: Sequence::new(source.id.clone(), source.task, elements, source.title.clone())?,
        selections,
    })
}

fn unify_step(engine: &Engine, texts: &[String], i: usize, k: usize) -> Result<(TextVisualPair, UnifySelection)> {
    let backend = &engine.backend;
    let candidates = backend.generate_image(&texts[i], k, engine.settings.seed)?;
    let neighbors = neighbor_indices(i, texts.len());

    let mut inputs: Vec<EmbedInput<'_>> = candidates.iter().map(EmbedInput::Image).collect();
    inputs.extend(neighbors.iter().map(|&j| EmbedInput::Text(&texts[j])));
    let embeddings = backend.embed(&inputs)?;
    let (cands, nbrs) = embeddings.split_at(k);

    let scores = cands
        .iter()
        .map(|c| {
            let sims = nbrs.iter().map(|nb| cosine(c, nb)).collect::<Result<Vec<_>>>()?;
            Ok(engine.settings.unify_aggregate.apply(&sims))
        })
        .collect::<Result<Vec<f64>>>()?;
    let chosen = argmax_lowest(scores.iter().copied().map(Some)).expect("k ≥ 1");
    Ok((
        TextVisualPair::new(texts[i].clone(), candidates[chosen].clone())?,
        UnifySelection {
            candidates,
            scores,
            chosen,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::mock_embedding;
    use crate::model::TaskKind;
    use crate::testing::mock_engine;

    fn text_seq(texts: &[&str]) -> TextSequence {
        TextSequence {
            id: "w".into(),
            task: TaskKind::Summarization,
            title: Some("t".into()),
            texts: texts.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn neighbors() {
        assert_eq!(neighbor_indices(0, 1), vec![0]);
        assert_eq!(neighbor_indices(0, 3), vec![1]);
        assert_eq!(neighbor_indices(1, 3), vec![0, 2]);
        assert_eq!(neighbor_indices(2, 3), vec![1]);
    }

    #[test]
    fn singleton_scores_against_its_own_text() {
        let (engine, _) = mock_engine();
        let out = unify_text_sequence(&engine, &text_seq(&["mix the batter"]), 4).unwrap();
        let sel = &out.selections[0];
        assert_eq!(sel.scores.len(), 4);
        for s in &sel.scores {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert_eq!(sel.chosen, 0);
        let visual = out.sequence.elements()[0].visual();
        assert_eq!(visual.prompt(), Some("mix the batter"));
    }

    #[test]
    fn output_preserves_texts_and_length() {
        let (engine, _) = mock_engine();
        let texts = ["crack the eggs", "whisk the eggs and milk", "pour into pan"];
        let out = unify_text_sequence(&engine, &text_seq(&texts), 1).unwrap();
        assert_eq!(out.sequence.len(), 3);
        for (pair, t) in out.sequence.elements().iter().zip(texts) {
            assert_eq!(pair.text(), t);
        }
        assert!(out.selections.iter().all(|s| s.chosen == 0));

        // Middle step: mean of cosines against both neighbors, recomputed by hand.
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let me = mock_embedding(texts[1]);
        let expected = (dot(&me, &mock_embedding(texts[0])) + dot(&me, &mock_embedding(texts[2]))) / 2.0;
        assert!((out.selections[1].scores[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_step_before_calling_backend() {
        let (engine, mock) = mock_engine();
        let err = unify_text_sequence(&engine, &text_seq(&["a", " "]), 4).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
        assert_eq!(mock.calls(), 0);
    }
}
