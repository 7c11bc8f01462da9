//! JSON bodies exchanged with the four model endpoints.
//!
//! Requests are serialized as canonical JSON: object keys sorted bytewise,
//! no insignificant whitespace, UTF-8. The same bytes feed the response cache
//! key, so two semantically equal requests always share one cache entry.

use std::fmt::Write as _;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Generate,
    Image,
    Caption,
    Embed,
}

impl Endpoint {
    pub const ALL: [Endpoint; 4] = [Endpoint::Generate, Endpoint::Image, Endpoint::Caption, Endpoint::Embed];

    pub fn name(self) -> &'static str {
        match self {
            Endpoint::Generate => "generate",
            Endpoint::Image => "image",
            Endpoint::Caption => "caption",
            Endpoint::Embed => "embed",
        }
    }

    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Generate => "/v1/generate",
            Endpoint::Image => "/v1/image",
            Endpoint::Caption => "/v1/caption",
            Endpoint::Embed => "/v1/embed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub temperature: f64,
    pub n: u32,
    pub max_tokens: u32,
    pub logprobs: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateChoice {
    pub text: String,
    #[serde(default)]
    pub token_logprobs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub choices: Vec<GenerateChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRequest {
    pub prompt: String,
    pub n: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePayload {
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResponse {
    pub images: Vec<ImagePayload>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub png_base64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionResponse {
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedItem {
    Text { text: String },
    Image { png_base64: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub inputs: Vec<EmbedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub dim: usize,
    pub embeddings: Vec<Vec<f64>>,
}

pub fn encode_png(bytes: &[u8]) -> String {
    STANDARD.encode(bytes)
}

pub fn decode_png(endpoint: Endpoint, encoded: &str) -> Result<Vec<u8>> {
    STANDARD.decode(encoded).map_err(|e| Error::Protocol {
        endpoint: endpoint.name(),
        message: format!("bad base64 payload: {e}"),
    })
}

/// Serializes `value` as canonical JSON.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_canonical(&value, &mut out)?;
    Ok(out)
}

fn write_canonical(value: &Value, out: &mut String) -> Result<()> {
    match value {
        Value::Null | Value::Bool(_) | Value::Number(_) | Value::String(_) => {
            out.push_str(&serde_json::to_string(value)?);
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut entries: Vec<(&String, &Value)> = map.iter().collect();
            entries.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
            out.push('{');
            for (i, (key, item)) in entries.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{}:", serde_json::to_string(key)?).expect("writing to a String");
                write_canonical(item, out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

pub fn parse_response<T: for<'de> Deserialize<'de>>(endpoint: Endpoint, body: &str) -> Result<T> {
    serde_json::from_str(body).map_err(|e| Error::Protocol {
        endpoint: endpoint.name(),
        message: format!("malformed response: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_sorts_keys_and_strips_whitespace() {
        let v: Value = serde_json::from_str(r#"{ "b": 1, "a": {"z": [1, 2], "y": "é\n"} }"#).unwrap();
        assert_eq!(canonical_json(&v).unwrap(), r#"{"a":{"y":"é\n","z":[1,2]},"b":1}"#);
    }

    #[test]
    fn embed_items_are_tagged_by_kind() {
        let req = EmbedRequest {
            inputs: vec![
                EmbedItem::Text { text: "hi".into() },
                EmbedItem::Image {
                    png_base64: "AAAA".into(),
                },
            ],
        };
        assert_eq!(
            canonical_json(&req).unwrap(),
            r#"{"inputs":[{"kind":"text","text":"hi"},{"kind":"image","png_base64":"AAAA"}]}"#
        );
    }

    #[test]
    fn null_logprobs_parse() {
        let r: GenerateResponse = parse_response(
            Endpoint::Generate,
            r#"{"choices":[{"text":"x","token_logprobs":null}]}"#,
        )
        .unwrap();
        assert_eq!(r.choices[0].token_logprobs, None);
        assert!(parse_response::<GenerateResponse>(Endpoint::Generate, "{").is_err());
    }
}
