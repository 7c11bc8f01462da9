//! Request bodies checked byte for byte against golden files, and response
//! handling checked against well-formed and malformed replies.
//!
//! The golden files were written by an independent JSON serializer with
//! sorted keys and compact separators.

use std::fs;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use vcot_core::backend::wire::{EmbedResponse, GenerateResponse, ImageResponse};
use vcot_core::backend::{
    Backend, BackendProfile, EmbedInput, Endpoint, Gateway, MockTransport, TextRequest, Transport, TransportError,
    MOCK_EMBED_DIM,
};
use vcot_core::model::VisualAsset;
use vcot_core::Error;

fn fixture(name: &str) -> Vec<u8> {
    fs::read(
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("tests/fixtures/wire")
            .join(name),
    )
    .unwrap()
}

/// Passes calls through to the mock and keeps every exchange.
#[derive(Default)]
struct Recorder {
    inner: MockTransport,
    log: Mutex<Vec<(Endpoint, String, String)>>,
}

impl Transport for Recorder {
    fn call(&self, endpoint: Endpoint, body: &str) -> Result<String, TransportError> {
        let out = self.inner.call(endpoint, body)?;
        self.log.lock().unwrap().push((endpoint, body.to_owned(), out.clone()));
        Ok(out)
    }
}

fn recorded() -> (Gateway, Arc<Recorder>) {
    let rec = Arc::new(Recorder::default());
    (Gateway::new(BackendProfile::mock(), rec.clone()), rec)
}

fn last(rec: &Recorder) -> (Endpoint, String, String) {
    rec.log.lock().unwrap().last().cloned().unwrap()
}

fn pixel() -> VisualAsset {
    VisualAsset::from_dataset(fixture("pixel.png")).unwrap()
}

#[test]
fn generate_body_matches_golden() {
    let (gw, rec) = recorded();
    let out = gw
        .generate_text(&TextRequest {
            prompt: "Write the step between \"leave\" and \"arrive\".\nStep:".into(),
            temperature: 0.5,
            n: 4,
            max_tokens: 256,
            want_logprobs: false,
            seed: 7,
        })
        .unwrap();
    let (ep, body, response) = last(&rec);
    assert_eq!(ep, Endpoint::Generate);
    assert_eq!(body.as_bytes(), &fixture("generate.json")[..]);
    let parsed: GenerateResponse = serde_json::from_str(&response).unwrap();
    assert_eq!(parsed.choices.len(), 4);
    assert_eq!(out.len(), 4);
    assert!(out
        .iter()
        .enumerate()
        .all(|(i, g)| g.candidate_index == i && g.temperature == 0.5));
}

#[test]
fn generate_with_logprobs_matches_golden() {
    let (gw, rec) = recorded();
    let out = gw
        .generate_text(&TextRequest {
            prompt: "Summarize: café ☕".into(),
            temperature: 0.0,
            n: 3,
            max_tokens: 512,
            want_logprobs: true,
            seed: 0,
        })
        .unwrap();
    assert_eq!(last(&rec).1.as_bytes(), &fixture("generate_logprobs.json")[..]);
    for g in out {
        let lp = g.token_logprobs.unwrap();
        assert!(!lp.is_empty() && lp.iter().all(|x| x.is_finite() && *x <= 0.0));
    }
}

#[test]
fn image_body_matches_golden() {
    let (gw, rec) = recorded();
    let images = gw.generate_image("a red kite over the beach", 4, 7).unwrap();
    let (ep, body, response) = last(&rec);
    assert_eq!(ep, Endpoint::Image);
    assert_eq!(body.as_bytes(), &fixture("image.json")[..]);
    let parsed: ImageResponse = serde_json::from_str(&response).unwrap();
    assert_eq!(parsed.images.len(), 4);
    assert_eq!(images.len(), 4);
    for img in &images {
        assert_eq!(&img.png_bytes()[..8], b"\x89PNG\r\n\x1a\n");
        assert_eq!(img.prompt(), Some("a red kite over the beach"));
    }
}

#[test]
fn caption_body_matches_golden() {
    let (gw, rec) = recorded();
    let caption = gw.caption_image(&pixel()).unwrap();
    assert_eq!(last(&rec).1.as_bytes(), &fixture("caption.json")[..]);
    assert!(!caption.trim().is_empty());
}

#[test]
fn embed_body_matches_golden() {
    let (gw, rec) = recorded();
    let px = pixel();
    let out = gw
        .embed(&[EmbedInput::Text("a red kite"), EmbedInput::Image(&px)])
        .unwrap();
    let (_, body, response) = last(&rec);
    assert_eq!(body.as_bytes(), &fixture("embed.json")[..]);
    let parsed: EmbedResponse = serde_json::from_str(&response).unwrap();
    assert_eq!(parsed.dim, MOCK_EMBED_DIM);
    assert_eq!(out.len(), 2);
    assert!(out.iter().all(|e| e.dim() == MOCK_EMBED_DIM));
}

/// Replies with one fixed body.
struct Canned(&'static str);

impl Transport for Canned {
    fn call(&self, _: Endpoint, _: &str) -> Result<String, TransportError> {
        Ok(self.0.to_owned())
    }
}

fn canned(body: &'static str) -> Gateway {
    Gateway::new(
        BackendProfile {
            embed_dim: Some(3),
            ..BackendProfile::mock()
        },
        Arc::new(Canned(body)),
    )
}

fn text(n: usize, logprobs: bool) -> TextRequest {
    TextRequest {
        prompt: "p".into(),
        temperature: 0.0,
        n,
        max_tokens: 16,
        want_logprobs: logprobs,
        seed: 0,
    }
}

fn assert_protocol<T: std::fmt::Debug>(r: vcot_core::Result<T>) {
    match r {
        Err(Error::Protocol { .. }) => {}
        other => panic!("expected a protocol error, got {other:?}"),
    }
}

#[test]
fn malformed_generate_replies_are_protocol_errors() {
    assert_protocol(canned("not json").generate_text(&text(1, false)));
    assert_protocol(canned(r#"{"choices":[]}"#).generate_text(&text(1, false)));
    assert_protocol(canned(r#"{"choices":[{"text":"a"}]}"#).generate_text(&text(1, true)));
    assert_protocol(canned(r#"{"choices":[{"text":"a","token_logprobs":[0.5]}]}"#).generate_text(&text(1, true)));
    let ok = canned(r#"{"choices":[{"text":"a","token_logprobs":[-0.5,-1.0]}]}"#)
        .generate_text(&text(1, true))
        .unwrap();
    assert_eq!(ok[0].token_logprobs.as_deref(), Some(&[-0.5, -1.0][..]));
}

#[test]
fn malformed_image_replies_are_protocol_errors() {
    assert_protocol(canned(r#"{"images":[{"png_base64":"aGVsbG8="}]}"#).generate_image("p", 1, 0));
    assert_protocol(canned(r#"{"images":[{"png_base64":"%%%"}]}"#).generate_image("p", 1, 0));
    assert_protocol(canned(r#"{"images":[]}"#).generate_image("p", 1, 0));
}

#[test]
fn malformed_caption_and_embed_replies_are_protocol_errors() {
    let px = pixel();
    assert_protocol(canned(r#"{"caption":"  "}"#).caption_image(&px));
    assert_protocol(canned(r#"{"dim":2,"embeddings":[[1.0,0.0]]}"#).embed(&[EmbedInput::Text("a")]));
    assert_protocol(canned(r#"{"dim":3,"embeddings":[[1.0,0.0]]}"#).embed(&[EmbedInput::Text("a")]));
    assert_protocol(canned(r#"{"dim":3,"embeddings":[[0.0,0.0,0.0]]}"#).embed(&[EmbedInput::Text("a")]));
    assert_protocol(canned(r#"{"dim":3,"embeddings":[]}"#).embed(&[EmbedInput::Text("a")]));
    let ok = canned(r#"{"dim":3,"embeddings":[[1.0,2.0,2.0]]}"#)
        .embed(&[EmbedInput::Text("a")])
        .unwrap();
    assert_eq!(ok[0].vector(), &[1.0, 2.0, 2.0]);
}

#[test]
fn fatal_transport_errors_are_not_retried() {
    struct Fatal(Mutex<u32>);
    impl Transport for Fatal {
        fn call(&self, _: Endpoint, _: &str) -> Result<String, TransportError> {
            *self.0.lock().unwrap() += 1;
            Err(TransportError::Fatal("bad request".into()))
        }
    }
    let t = Arc::new(Fatal(Mutex::new(0)));
    let gw = Gateway::new(BackendProfile::mock(), t.clone());
    match gw.generate_text(&text(1, false)) {
        Err(Error::BackendUnavailable { attempts: 1, .. }) => {}
        other => panic!("{other:?}"),
    }
    assert_eq!(*t.0.lock().unwrap(), 1);
}
