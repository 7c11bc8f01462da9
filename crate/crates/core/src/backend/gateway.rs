use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::Serialize;

use super::cache::ResponseCache;
use super::http::HttpTransport;
use super::mock::MockTransport;
use super::transport::{EndpointRouter, Transport, TransportError};
use super::wire::{
    self, canonical_json, parse_response, CaptionRequest, CaptionResponse, EmbedItem, EmbedRequest, EmbedResponse,
    Endpoint, GenerateRequest, GenerateResponse, ImageRequest, ImageResponse,
};
use super::{Backend, BackendProfile, EmbedInput, Embedding, EndpointTarget, TextGeneration, TextRequest};
use crate::error::{Error, Result};
use crate::model::VisualAsset;

/// Exponential backoff between retries: `base · 2^attempt`, capped at `max`.
#[derive(Debug, Clone, Copy)]
pub struct Backoff {
    pub base: Duration,
    pub max: Duration,
}

impl Backoff {
    pub const NONE: Backoff = Backoff {
        base: Duration::ZERO,
        max: Duration::ZERO,
    };

    fn delay(&self, attempt: u32) -> Duration {
        self.base
            .checked_mul(1u32 << attempt.min(16))
            .unwrap_or(self.max)
            .min(self.max)
    }
}

impl Default for Backoff {
    fn default() -> Self {
        Self {
            base: Duration::from_millis(250),
            max: Duration::from_secs(8),
        }
    }
}

pub struct Gateway {
    profile: BackendProfile,
    transport: Arc<dyn Transport>,
    cache: Option<Arc<ResponseCache>>,
    backoff: Backoff,
}

impl Gateway {
    pub fn new(profile: BackendProfile, transport: Arc<dyn Transport>) -> Self {
        Self {
            profile,
            transport,
            cache: None,
            backoff: Backoff::default(),
        }
    }

    /// Routes mock-designated endpoints to `mock` and the rest over HTTP.
    pub fn for_profile(profile: BackendProfile, mock: Arc<MockTransport>, bearer: Option<String>) -> Result<Self> {
        profile.validate()?;
        let any_http = super::wire::Endpoint::ALL
            .iter()
            .any(|e| matches!(profile.target(*e), EndpointTarget::Http(_)));
        let transport: Arc<dyn Transport> = if any_http {
            let http: Arc<dyn Transport> = Arc::new(HttpTransport::new(&profile, bearer)?);
            let mock: Arc<dyn Transport> = mock;
            Arc::new(EndpointRouter::new(|e| match profile.target(e) {
                EndpointTarget::Mock => mock.clone(),
                EndpointTarget::Http(_) => http.clone(),
            }))
        } else {
            mock
        };
        Ok(Self::new(profile, transport))
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    pub fn cache(&self) -> Option<&Arc<ResponseCache>> {
        self.cache.as_ref()
    }

    fn request<R: Serialize, T>(
        &self,
        endpoint: Endpoint,
        request: &R,
        decode: impl Fn(&str) -> Result<T>,
    ) -> Result<T> {
        let canonical = canonical_json(request)?;
        let fetch = || self.call_with_retry(endpoint, &canonical);
        match &self.cache {
            Some(cache) => {
                let key = ResponseCache::key(&self.profile.id, endpoint.name(), &canonical);
                cache.get_or_fetch(&key, fetch, decode)
            }
            None => decode(&fetch()?),
        }
    }

    fn call_with_retry(&self, endpoint: Endpoint, body: &str) -> Result<String> {
        let mut attempt = 0u32;
        loop {
            match self.transport.call(endpoint, body) {
                Ok(response) => return Ok(response),
                Err(TransportError::Retryable(msg)) if attempt < self.profile.retry_limit => {
                    log::debug!("{} attempt {} failed: {msg}", endpoint.name(), attempt + 1);
                    thread::sleep(self.backoff.delay(attempt));
                    attempt += 1;
                }
                Err(TransportError::Retryable(last)) | Err(TransportError::Fatal(last)) => {
                    return Err(Error::BackendUnavailable {
                        endpoint: endpoint.name(),
                        attempts: attempt + 1,
                        last,
                    })
                }
            }
        }
    }
}

fn protocol(endpoint: Endpoint, message: impl Into<String>) -> Error {
    Error::Protocol {
        endpoint: endpoint.name(),
        message: message.into(),
    }
}

fn count(n: usize) -> Result<u32> {
    if n == 0 {
        return Err(Error::Precondition("candidate count must be at least 1".into()));
    }
    u32::try_from(n).map_err(|_| Error::Precondition(format!("candidate count {n} too large")))
}

impl Backend for Gateway {
    fn profile(&self) -> &BackendProfile {
        &self.profile
    }

    fn generate_text(&self, req: &TextRequest) -> Result<Vec<TextGeneration>> {
        let n = count(req.n)?;
        if !(req.temperature >= 0.0 && req.temperature.is_finite()) {
            return Err(Error::Precondition(format!(
                "temperature {} is invalid",
                req.temperature
            )));
        }
        let wire_req = GenerateRequest {
            prompt: req.prompt.clone(),
            temperature: req.temperature,
            n,
            max_tokens: req.max_tokens,
            logprobs: req.want_logprobs,
            seed: req.seed,
        };
        let ep = Endpoint::Generate;
        self.request(ep, &wire_req, |body| {
            let resp: GenerateResponse = parse_response(ep, body)?;
            if resp.choices.len() != req.n {
                return Err(protocol(ep, format!("{} choices for n={}", resp.choices.len(), req.n)));
            }
            resp.choices
                .into_iter()
                .enumerate()
                .map(|(i, choice)| {
                    if let Some(lp) = &choice.token_logprobs {
                        if lp.iter().any(|x| !x.is_finite() || *x > 0.0) {
                            return Err(protocol(ep, "token log-probs must be finite and ≤ 0"));
                        }
                    } else if req.want_logprobs {
                        return Err(protocol(ep, "log-probs requested but missing"));
                    }
                    Ok(TextGeneration {
                        text: choice.text,
                        token_logprobs: choice.token_logprobs,
                        temperature: req.temperature,
                        candidate_index: i,
                    })
                })
                .collect()
        })
    }

    fn generate_image(&self, prompt: &str, n: usize, seed: u64) -> Result<Vec<VisualAsset>> {
        let wire_req = ImageRequest {
            prompt: prompt.to_owned(),
            n: count(n)?,
            seed,
        };
        let ep = Endpoint::Image;
        self.request(ep, &wire_req, |body| {
            let resp: ImageResponse = parse_response(ep, body)?;
            if resp.images.len() != n {
                return Err(protocol(ep, format!("{} images for n={n}", resp.images.len())));
            }
            resp.images
                .iter()
                .map(|img| {
                    let bytes = wire::decode_png(ep, &img.png_base64)?;
                    VisualAsset::generated(bytes, prompt).map_err(|e| protocol(ep, e.to_string()))
                })
                .collect()
        })
    }

    fn caption_image(&self, asset: &VisualAsset) -> Result<String> {
        let wire_req = CaptionRequest {
            png_base64: wire::encode_png(asset.png_bytes()),
        };
        let ep = Endpoint::Caption;
        self.request(ep, &wire_req, |body| {
            let resp: CaptionResponse = parse_response(ep, body)?;
            if resp.caption.trim().is_empty() {
                return Err(protocol(ep, "empty caption"));
            }
            Ok(resp.caption)
        })
    }

    fn embed(&self, items: &[EmbedInput<'_>]) -> Result<Vec<Embedding>> {
        if items.is_empty() {
            return Err(Error::Precondition("nothing to embed".into()));
        }
        let wire_req = EmbedRequest {
            inputs: items
                .iter()
                .map(|item| match item {
                    EmbedInput::Text(text) => EmbedItem::Text {
                        text: (*text).to_owned(),
                    },
                    EmbedInput::Image(asset) => EmbedItem::Image {
                        png_base64: wire::encode_png(asset.png_bytes()),
                    },
                })
                .collect(),
        };
        let ep = Endpoint::Embed;
        let declared = self.profile.embed_dim;
        self.request(ep, &wire_req, |body| {
            let resp: EmbedResponse = parse_response(ep, body)?;
            if resp.embeddings.len() != items.len() {
                return Err(protocol(
                    ep,
                    format!("{} embeddings for {} inputs", resp.embeddings.len(), items.len()),
                ));
            }
            if let Some(d) = declared {
                if resp.dim != d {
                    return Err(protocol(ep, format!("dimension {} but profile declares {d}", resp.dim)));
                }
            }
            resp.embeddings
                .into_iter()
                .zip(items)
                .map(|(vector, item)| {
                    if vector.len() != resp.dim {
                        return Err(protocol(
                            ep,
                            format!("vector of length {} in a dim-{} response", vector.len(), resp.dim),
                        ));
                    }
                    Embedding::new(vector, item.kind()).map_err(|e| protocol(ep, e.to_string()))
                })
                .collect()
        })
    }
}
