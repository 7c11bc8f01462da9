//! Deterministic stand-ins for the four model endpoints.
//!
//! Every behavior is a pure function of the request body:
//!
//! - generate: choice `i` is `GEN(<h8>,<temperature:.2>,<i>)` where `h8` is the
//!   first 8 hex chars of SHA-256(prompt). Token log-probs, when requested, are
//!   `-0.1·(k+1)` for whitespace token `k`.
//! - image: candidate `k` is a 16×16 RGB PNG filled with the first three bytes
//!   of SHA-256(prompt ∥ decimal(k)); the prompt rides along in an iTXt chunk
//!   keyed `prompt`. The seed is accepted and ignored.
//! - caption: `"a picture of "` followed by the embedded prompt, or by the
//!   first 8 hex chars of the image's SHA-256 when there is none.
//! - embed: 64-dim bag of words. Lowercase, split on non-alphanumerics, add 1.0
//!   at FNV-1a-64(token) mod 64, L2-normalize. Images embed their prompt (or
//!   hex id).

use std::io::Cursor;
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use super::transport::{Transport, TransportError};
use super::wire::{
    self, CaptionRequest, CaptionResponse, EmbedItem, EmbedRequest, EmbedResponse, Endpoint, GenerateChoice,
    GenerateRequest, GenerateResponse, ImagePayload, ImageRequest, ImageResponse,
};
use crate::model::sha256_hex;

pub const MOCK_EMBED_DIM: usize = 64;

const PROMPT_KEY: &str = "prompt";

#[derive(Debug, Default)]
pub struct MockTransport {
    calls: [AtomicU64; 4],
}

impl MockTransport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Total invocations across all endpoints.
    pub fn calls(&self) -> u64 {
        self.calls.iter().map(|c| c.load(Ordering::SeqCst)).sum()
    }

    pub fn calls_to(&self, endpoint: Endpoint) -> u64 {
        self.calls[slot(endpoint)].load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        for c in &self.calls {
            c.store(0, Ordering::SeqCst);
        }
    }

    fn respond(&self, endpoint: Endpoint, body: &str) -> Result<String, String> {
        let out = match endpoint {
            Endpoint::Generate => {
                let req: GenerateRequest = parse(body)?;
                if req.n == 0 {
                    return Err("n must be at least 1".into());
                }
                let choices = (0..req.n as usize)
                    .map(|i| {
                        let text = mock_text(&req.prompt, req.temperature, i);
                        let token_logprobs = req.logprobs.then(|| mock_logprobs(&text));
                        GenerateChoice { text, token_logprobs }
                    })
                    .collect();
                serde_json::to_string(&GenerateResponse { choices })
            }
            Endpoint::Image => {
                let req: ImageRequest = parse(body)?;
                if req.n == 0 {
                    return Err("n must be at least 1".into());
                }
                let images = (0..req.n as usize)
                    .map(|k| ImagePayload {
                        png_base64: wire::encode_png(&mock_png(&req.prompt, k)),
                    })
                    .collect();
                serde_json::to_string(&ImageResponse { images })
            }
            Endpoint::Caption => {
                let req: CaptionRequest = parse(body)?;
                let bytes = wire::decode_png(endpoint, &req.png_base64).map_err(|e| e.to_string())?;
                if bytes.is_empty() {
                    return Err("empty image".into());
                }
                let subject = png_prompt(&bytes).unwrap_or_else(|| sha256_hex(&bytes)[..8].to_owned());
                serde_json::to_string(&CaptionResponse {
                    caption: format!("a picture of {subject}"),
                })
            }
            Endpoint::Embed => {
                let req: EmbedRequest = parse(body)?;
                let embeddings = req
                    .inputs
                    .iter()
                    .map(|item| match item {
                        EmbedItem::Text { text } => Ok(mock_embedding(text)),
                        EmbedItem::Image { png_base64 } => {
                            let bytes = wire::decode_png(endpoint, png_base64).map_err(|e| e.to_string())?;
                            let source = png_prompt(&bytes).unwrap_or_else(|| sha256_hex(&bytes));
                            Ok(mock_embedding(&source))
                        }
                    })
                    .collect::<Result<Vec<_>, String>>()?;
                serde_json::to_string(&EmbedResponse {
                    dim: MOCK_EMBED_DIM,
                    embeddings,
                })
            }
        };
        out.map_err(|e| e.to_string())
    }
}

impl Transport for MockTransport {
    fn call(&self, endpoint: Endpoint, body: &str) -> Result<String, TransportError> {
        self.calls[slot(endpoint)].fetch_add(1, Ordering::SeqCst);
        self.respond(endpoint, body).map_err(TransportError::Fatal)
    }
}

fn slot(endpoint: Endpoint) -> usize {
    match endpoint {
        Endpoint::Generate => 0,
        Endpoint::Image => 1,
        Endpoint::Caption => 2,
        Endpoint::Embed => 3,
    }
}

fn parse<T: for<'de> serde::Deserialize<'de>>(body: &str) -> Result<T, String> {
    serde_json::from_str(body).map_err(|e| format!("bad request: {e}"))
}

pub fn mock_text(prompt: &str, temperature: f64, index: usize) -> String {
    let h8 = &sha256_hex(prompt.as_bytes())[..8];
    format!("GEN({h8},{temperature:.2},{index})")
}

fn mock_logprobs(text: &str) -> Vec<f64> {
    (0..text.split_whitespace().count())
        .map(|k| -0.1 * (k as f64 + 1.0))
        .collect()
}

pub fn mock_png(prompt: &str, k: usize) -> Vec<u8> {
    let mut hasher = Sha256::new();
    hasher.update(prompt.as_bytes());
    hasher.update(k.to_string().as_bytes());
    let digest = hasher.finalize();
    let rgb = [digest[0], digest[1], digest[2]];

    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, 16, 16);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        enc.add_itxt_chunk(PROMPT_KEY.into(), prompt.into())
            .expect("iTXt keyword is valid");
        let mut writer = enc.write_header().expect("in-memory PNG header");
        let pixels: Vec<u8> = rgb.iter().copied().cycle().take(16 * 16 * 3).collect();
        writer.write_image_data(&pixels).expect("in-memory PNG body");
    }
    out
}

/// The prompt a mock image was generated from, if the PNG carries one.
pub fn png_prompt(bytes: &[u8]) -> Option<String> {
    let reader = png::Decoder::new(Cursor::new(bytes)).read_info().ok()?;
    reader
        .info()
        .utf8_text
        .iter()
        .find(|chunk| chunk.keyword == PROMPT_KEY)
        .and_then(|chunk| chunk.get_text().ok())
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Bag-of-words vector; all zeros when `text` has no alphanumeric token.
pub fn mock_embedding(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; MOCK_EMBED_DIM];
    let lower = text.to_lowercase();
    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        v[(fnv1a64(token.as_bytes()) % MOCK_EMBED_DIM as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}
