//! A transport with random but reproducible answers, for oracle tests.
//!
//! Every answer is a pure function of the trial seed and the request, so a
//! test can rebuild any candidate list or embedding the engine saw without
//! looking at the engine's output.

use std::collections::HashMap;
use std::sync::Mutex;

use base64::Engine as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use vcot_core::backend::wire::{
    CaptionRequest, CaptionResponse, EmbedItem, EmbedRequest, EmbedResponse, GenerateChoice, GenerateRequest,
    GenerateResponse, ImagePayload, ImageRequest, ImageResponse,
};
use vcot_core::backend::{mock_png, Endpoint, Transport, TransportError};
use vcot_core::engine::{Engine, TextScoring};
use vcot_core::infill::{infill_prompt, GapTask};
use vcot_core::model::VisualAsset;

pub const DIM: usize = 12;

fn rng_for(seed: u64, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

pub fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct RandomTransport {
    pub seed: u64,
    /// Small-integer components drawn from a tiny palette.
    pub integer_vectors: bool,
    /// Chance that a text candidate comes back blank.
    pub blank_rate: f64,
    /// Multiplies every embedding.
    pub scale: f64,
    /// Answer the focus-extraction prompt with whitespace.
    pub blank_focus: bool,
    pub overrides: Mutex<HashMap<String, Vec<f64>>>,
}

impl RandomTransport {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            integer_vectors: seed.is_multiple_of(2),
            blank_rate: 0.15,
            scale: 1.0,
            blank_focus: false,
            overrides: Mutex::new(HashMap::new()),
        }
    }

    /// Candidate `i` of a request for `prompt` at `temperature`.
    pub fn text(&self, prompt: &str, temperature: f64, i: u32) -> String {
        let mut rng = rng_for(self.seed, &format!("gen|{prompt}|{temperature}|{i}"));
        if rng.random::<f64>() < self.blank_rate {
            return String::new();
        }
        let words = rng.random_range(1..=6);
        (0..words)
            .map(|_| format!("w{:x}", rng.random::<u32>()))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn image(&self, prompt: &str, seed: u64, k: u32) -> Vec<u8> {
        mock_png(&format!("{prompt}|{seed}|{}", self.seed), k as usize)
    }

    pub fn text_key(text: &str) -> String {
        format!("t:{text}")
    }

    pub fn image_key(png: &[u8]) -> String {
        format!("i:{}", sha_hex(png))
    }

    pub fn vector(&self, key: &str) -> Vec<f64> {
        if let Some(v) = self.overrides.lock().unwrap().get(key) {
            return v.iter().map(|x| x * self.scale).collect();
        }
        let mut rng = rng_for(self.seed, &format!("emb|{key}"));
        if self.integer_vectors {
            // A palette of four vectors per trial makes exact ties common.
            let slot = rng.random_range(0..4);
            rng = rng_for(self.seed, &format!("palette|{slot}"));
        }
        let mut v: Vec<f64> = (0..DIM)
            .map(|_| {
                if self.integer_vectors {
                    rng.random_range(-2i32..=2) as f64
                } else {
                    rng.random::<f64>() * 2.0 - 1.0
                }
            })
            .collect();
        if v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        v.iter().map(|x| x * self.scale).collect()
    }

    pub fn set(&self, key: String, v: Vec<f64>) {
        self.overrides.lock().unwrap().insert(key, v);
    }

    fn respond(&self, endpoint: Endpoint, body: &str) -> serde_json::Result<String> {
        let b64 = base64::engine::general_purpose::STANDARD;
        match endpoint {
            Endpoint::Generate => {
                let req: GenerateRequest = serde_json::from_str(body)?;
                let choices = (0..req.n)
                    .map(|i| {
                        let text = if self.blank_focus && req.prompt.contains("recurring characters") {
                            "  ".to_owned()
                        } else {
                            self.text(&req.prompt, req.temperature, i)
                        };
                        let tokens = text.split_whitespace().count();
                        GenerateChoice {
                            token_logprobs: req
                                .logprobs
                                .then(|| (0..tokens).map(|k| -0.1 * (k + 1) as f64).collect()),
                            text,
                        }
                    })
                    .collect();
                serde_json::to_string(&GenerateResponse { choices })
            }
            Endpoint::Image => {
                let req: ImageRequest = serde_json::from_str(body)?;
                let images = (0..req.n)
                    .map(|k| ImagePayload {
                        png_base64: b64.encode(self.image(&req.prompt, req.seed, k)),
                    })
                    .collect();
                serde_json::to_string(&ImageResponse { images })
            }
            Endpoint::Caption => {
                let req: CaptionRequest = serde_json::from_str(body)?;
                let png = b64.decode(req.png_base64).unwrap();
                serde_json::to_string(&CaptionResponse {
                    caption: format!("cap-{}", &sha_hex(&png)[..8]),
                })
            }
            Endpoint::Embed => {
                let req: EmbedRequest = serde_json::from_str(body)?;
                let embeddings = req
                    .inputs
                    .iter()
                    .map(|item| match item {
                        EmbedItem::Text { text } => self.vector(&Self::text_key(text)),
                        EmbedItem::Image { png_base64 } => {
                            self.vector(&Self::image_key(&b64.decode(png_base64).unwrap()))
                        }
                    })
                    .collect();
                serde_json::to_string(&EmbedResponse { dim: DIM, embeddings })
            }
        }
    }
}

impl Transport for RandomTransport {
    fn call(&self, endpoint: Endpoint, body: &str) -> Result<String, TransportError> {
        self.respond(endpoint, body)
            .map_err(|e| TransportError::Fatal(e.to_string()))
    }
}

/// Textbook cosine similarity. Identical vectors can land an ulp above 1,
/// so the result is clamped to the mathematical range.
pub fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// First index holding the maximum of the present scores.
pub fn brute_argmax(scores: &[Option<f64>]) -> Option<usize> {
    let max = scores.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.iter().position(|s| *s == Some(max))
}

pub fn caption(v: &VisualAsset) -> String {
    format!("cap-{}", &sha_hex(v.png_bytes())[..8])
}

/// Rebuilds the candidates of one gap from the transport's answer functions
/// and returns the brute-force `(text, visual)` picks, or `None` when every
/// text candidate is blank.
pub fn expected_selection(engine: &Engine, t: &RandomTransport, task: &GapTask<'_>) -> Option<(usize, usize)> {
    let s = &engine.settings;
    let prompt = infill_prompt(engine, task, &caption(task.prev.visual()), &caption(task.next.visual())).unwrap();
    let texts: Vec<String> = (0..s.text_candidates)
        .map(|i| match i {
            0 => t.text(&prompt, engine.base_temperature(), 0),
            _ => t.text(&prompt, s.candidate_temperature, i as u32 - 1),
        })
        .collect();

    let neighbor_keys = match s.text_scoring {
        TextScoring::NeighborText => [
            RandomTransport::text_key(task.prev.text()),
            RandomTransport::text_key(task.next.text()),
        ],
        TextScoring::NeighborVisual => [
            RandomTransport::image_key(task.prev.visual().png_bytes()),
            RandomTransport::image_key(task.next.visual().png_bytes()),
        ],
    };
    let prev = t.vector(&neighbor_keys[0]);
    let next = t.vector(&neighbor_keys[1]);
    let text_scores: Vec<Option<f64>> = texts
        .iter()
        .map(|c| {
            (!c.trim().is_empty()).then(|| {
                let v = t.vector(&RandomTransport::text_key(c));
                (cos(&v, &prev) + cos(&v, &next)) / 2.0
            })
        })
        .collect();
    let best_text = brute_argmax(&text_scores)?;
    let chosen = texts[best_text].trim();

    let target = t.vector(&RandomTransport::text_key(chosen));
    let visual_scores: Vec<Option<f64>> = (0..s.image_candidates)
        .map(|k| {
            let png = t.image(chosen, s.seed, k as u32);
            Some(cos(&t.vector(&RandomTransport::image_key(&png)), &target))
        })
        .collect();
    Some((best_text, brute_argmax(&visual_scores).unwrap()))
}
