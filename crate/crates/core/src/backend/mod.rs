//! Model capabilities behind one contract.
//!
//! [`Backend`] is what the engine calls. [`Gateway`] is the production
//! implementation: it turns each call into a canonical JSON request, consults
//! the [`ResponseCache`], and sends misses through a [`Transport`] (HTTP or the
//! bit-exact [`MockTransport`]) with retries.

mod cache;
mod gateway;
mod http;
mod mock;
mod similarity;
mod transport;
pub mod wire;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cache::{CacheStats, ResponseCache};
pub use gateway::{Backoff, Gateway};
pub use http::HttpTransport;
pub use mock::{mock_embedding, mock_png, mock_text, png_prompt, MockTransport, MOCK_EMBED_DIM};
pub use similarity::{cosine, cosine_slices};
pub use transport::{EndpointRouter, Transport, TransportError};
pub use wire::Endpoint;

use crate::error::{Error, Result};
use crate::model::VisualAsset;

/// Where one capability is served from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EndpointTarget {
    Mock,
    Http(String),
}

impl FromStr for EndpointTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "mock" {
            Ok(EndpointTarget::Mock)
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(EndpointTarget::Http(s.trim_end_matches('/').to_owned()))
        } else {
            Err(Error::Config(format!(
                "endpoint `{s}` is neither `mock` nor an http(s) URL"
            )))
        }
    }
}

impl TryFrom<String> for EndpointTarget {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EndpointTarget> for String {
    fn from(t: EndpointTarget) -> String {
        t.to_string()
    }
}

impl fmt::Display for EndpointTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EndpointTarget::Mock => f.write_str("mock"),
            EndpointTarget::Http(url) => f.write_str(url),
        }
    }
}

fn default_retry_limit() -> u32 {
    3
}

fn default_timeout() -> f64 {
    60.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendProfile {
    #[serde(default)]
    pub id: String,
    pub text_endpoint: EndpointTarget,
    pub image_endpoint: EndpointTarget,
    pub caption_endpoint: EndpointTarget,
    pub embed_endpoint: EndpointTarget,
    #[serde(default)]
    pub default_temperature: f64,
    #[serde(default = "default_retry_limit")]
    pub retry_limit: u32,
    /// Per-request timeout in seconds.
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Expected embedding dimension; checked against every embed response.
    #[serde(default)]
    pub embed_dim: Option<usize>,
}

impl BackendProfile {
    pub fn mock() -> Self {
        Self {
            id: "mock".into(),
            text_endpoint: EndpointTarget::Mock,
            image_endpoint: EndpointTarget::Mock,
            caption_endpoint: EndpointTarget::Mock,
            embed_endpoint: EndpointTarget::Mock,
            default_temperature: 0.0,
            retry_limit: default_retry_limit(),
            timeout_secs: default_timeout(),
            embed_dim: Some(MOCK_EMBED_DIM),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() {
            return Err(Error::Config("backend profile id is empty".into()));
        }
        if !(self.default_temperature >= 0.0 && self.default_temperature.is_finite()) {
            return Err(Error::Config("default_temperature must be finite and ≥ 0".into()));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(Error::Config("timeout_secs must be positive".into()));
        }
        Ok(())
    }

    pub fn target(&self, endpoint: Endpoint) -> &EndpointTarget {
        match endpoint {
            Endpoint::Generate => &self.text_endpoint,
            Endpoint::Image => &self.image_endpoint,
            Endpoint::Caption => &self.caption_endpoint,
            Endpoint::Embed => &self.embed_endpoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextRequest {
    pub prompt: String,
    pub temperature: f64,
    pub n: usize,
    pub max_tokens: u32,
    pub want_logprobs: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGeneration {
    pub text: String,
    pub token_logprobs: Option<Vec<f64>>,
    pub temperature: f64,
    pub candidate_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    vector: Vec<f64>,
    kind: EmbeddingKind,
}

impl Embedding {
    pub fn new(vector: Vec<f64>, kind: EmbeddingKind) -> Result<Self> {
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("embedding has non-finite entries".into()));
        }
        if vector.iter().all(|x| *x == 0.0) {
            return Err(Error::UndefinedSimilarity);
        }
        Ok(Self { vector, kind })
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.vector.iter().map(|x| x * factor).collect(), self.kind)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum EmbedInput<'a> {
    Text(&'a str),
    Image(&'a VisualAsset),
}

impl EmbedInput<'_> {
    pub fn kind(&self) -> EmbeddingKind {
        match self {
            EmbedInput::Text(_) => EmbeddingKind::Text,
            EmbedInput::Image(_) => EmbeddingKind::Image,
        }
    }
}

/// The four model capabilities the engine depends on.
pub trait Backend: Send + Sync {
    fn profile(&self) -> &BackendProfile;

    fn generate_text(&self, request: &TextRequest) -> Result<Vec<TextGeneration>>;

    fn generate_image(&self, prompt: &str, n: usize, seed: u64) -> Result<Vec<VisualAsset>>;

    fn caption_image(&self, asset: &VisualAsset) -> Result<String>;

    fn embed(&self, items: &[EmbedInput<'_>]) -> Result<Vec<Embedding>>;
}
