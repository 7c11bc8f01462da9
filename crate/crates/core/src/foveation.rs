//! Multipoint foveation: one focus string for a whole sequence.
//!
//! The sequence is projected to text by captioning every visual. A batch of
//! candidate summaries is generated over the projection, the candidate with the
//! highest joint token log-likelihood wins, and a second prompt extracts the
//! recurring entities from it.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::backend::TextRequest;
use crate::engine::{argmax_lowest, Engine};
use crate::error::{Error, Result};
use crate::model::{Foveation, Sequence};
use crate::prompts::Template;

#[derive(Debug, Clone)]
pub struct Projection {
    /// The input with every caption filled in.
    pub sequence: Sequence,
    /// `(caption, text)` per element, in order.
    pub pairs: Vec<(String, String)>,
}

pub fn project_to_text(engine: &Engine, seq: &Sequence) -> Result<Projection> {
    if seq.is_empty() {
        return Err(Error::Precondition("cannot project an empty sequence".into()));
    }
    let elements = seq
        .elements()
        .par_iter()
        .map(|p| engine.captioned(p))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let pairs = elements
        .iter()
        .map(|p| (p.caption().unwrap_or_default().to_owned(), p.text().to_owned()))
        .collect();
    Ok(Projection {
        sequence: seq.with_elements(elements)?,
        pairs,
    })
}

/// Sum of per-token log-probabilities.
pub fn joint_log_likelihood(token_logprobs: &[f64]) -> Result<f64> {
    if let Some(bad) = token_logprobs.iter().find(|x| !x.is_finite() || **x > 0.0) {
        return Err(Error::Input(format!("token log-prob {bad} is not a finite value ≤ 0")));
    }
    Ok(token_logprobs.iter().sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryCandidate {
    pub text: String,
    pub loglik: f64,
}

#[derive(Debug, Clone)]
pub struct FoveationOutcome {
    pub foveation: Foveation,
    pub candidates: Vec<SummaryCandidate>,
    pub selected: usize,
    /// The captioned input, ready for infilling.
    pub sequence: Sequence,
}

pub fn format_captions_and_texts(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (i, (caption, text)) in pairs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        write!(out, "{}. [image: {caption}] {text}", i + 1).expect("writing to a String");
    }
    out
}

pub fn multipoint_foveation(engine: &Engine, seq: &Sequence) -> Result<FoveationOutcome> {
    let n_summaries = engine.settings.summary_candidates;
    if n_summaries == 0 {
        return Err(Error::Precondition("need at least one summary candidate".into()));
    }
    let projection = project_to_text(engine, seq)?;
    let prompt = engine.prompts.render(
        Template::FoveationSummary,
        &[
            ("exemplars", engine.prompts.exemplars(seq.task()).foveation.trim()),
            ("captions_and_texts", &format_captions_and_texts(&projection.pairs)),
        ],
    )?;

    // Identical prompts at temperature 0 would repeat one summary, so a batch
    // of more than one is drawn at the candidate temperature.
    let temperature = if n_summaries == 1 {
        engine.base_temperature()
    } else {
        engine.settings.candidate_temperature
    };
    let generations = engine.backend.generate_text(&TextRequest {
        prompt,
        temperature,
        n: n_summaries,
        max_tokens: engine.settings.max_tokens_long,
        want_logprobs: true,
        seed: engine.settings.seed,
    })?;

    let candidates = generations
        .into_iter()
        .map(|g| {
            let logprobs = g.token_logprobs.unwrap_or_default();
            Ok(SummaryCandidate {
                loglik: joint_log_likelihood(&logprobs)?,
                text: g.text,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let selected = argmax_lowest(candidates.iter().map(|c| Some(c.loglik))).expect("n ≥ 1");
    let winner = &candidates[selected];

    let focus = extract_focus(engine, &winner.text)?;
    Ok(FoveationOutcome {
        foveation: Foveation::new(focus, winner.text.clone(), winner.loglik)?,
        selected,
        candidates,
        sequence: projection.sequence,
    })
}

/// Extracts at the base temperature and retries once at the candidate
/// temperature if the focus comes back blank.
fn extract_focus(engine: &Engine, summary: &str) -> Result<String> {
    let prompt = engine
        .prompts
        .render(Template::FocusExtract, &[("summary", summary.trim())])?;
    for temperature in [engine.base_temperature(), engine.settings.candidate_temperature] {
        let out = engine.backend.generate_text(&TextRequest {
            prompt: prompt.clone(),
            temperature,
            n: 1,
            max_tokens: engine.settings.max_tokens_infill,
            want_logprobs: false,
            seed: engine.settings.seed,
        })?;
        let focus = out
            .into_iter()
            .next()
            .map(|g| g.text.trim().to_owned())
            .unwrap_or_default();
        if !focus.is_empty() {
            return Ok(focus);
        }
    }
    Err(Error::DegenerateFoveation)
}
