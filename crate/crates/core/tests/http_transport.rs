//! The HTTP transport against a scripted local server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use vcot_core::backend::{
    Backend, BackendProfile, Backoff, EmbedInput, EndpointTarget, Gateway, MockTransport, TextRequest,
};
use vcot_core::Error;

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    headers: Vec<(String, String)>,
    body: String,
}

impl Seen {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

/// Serves the scripted `(status, body)` replies in order, one per connection,
/// and returns its base URL.
fn serve(script: Vec<(u16, &'static str)>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, reply) in script {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or_default().to_owned();
            let mut headers = Vec::new();
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                let (k, v) = h.split_once(':').unwrap();
                headers.push((k.trim().to_owned(), v.trim().to_owned()));
            }
            let len = headers
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
                .map(|(_, v)| v.parse::<usize>().unwrap())
                .unwrap_or(0);
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Seen {
                path,
                headers,
                body: String::from_utf8(body).unwrap(),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (base, seen)
}

const GENERATED: &str = r#"{"choices":[{"text":"hello"}]}"#;

fn request() -> TextRequest {
    TextRequest {
        prompt: "say hello".into(),
        temperature: 0.0,
        n: 1,
        max_tokens: 8,
        want_logprobs: false,
        seed: 3,
    }
}

fn gateway(profile: BackendProfile, mock: Arc<MockTransport>, bearer: Option<&str>) -> Gateway {
    Gateway::for_profile(profile, mock, bearer.map(str::to_owned))
        .unwrap()
        .with_backoff(Backoff::NONE)
}

fn text_profile(url: String, retry_limit: u32) -> BackendProfile {
    BackendProfile {
        id: "remote".into(),
        text_endpoint: EndpointTarget::Http(url),
        retry_limit,
        timeout_secs: 5.0,
        ..BackendProfile::mock()
    }
}

#[test]
fn server_error_is_retried_then_succeeds() {
    let (base, seen) = serve(vec![(500, "boom"), (200, GENERATED)]);
    let gw = gateway(text_profile(base, 2), Arc::default(), Some("s3cret"));
    let out = gw.generate_text(&request()).unwrap();
    assert_eq!(out[0].text, "hello");

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    for s in seen.iter() {
        assert_eq!(s.path, "/v1/generate");
        assert_eq!(s.header("authorization"), Some("Bearer s3cret"));
        assert_eq!(s.header("content-type"), Some("application/json"));
        assert_eq!(
            s.body,
            r#"{"logprobs":false,"max_tokens":8,"n":1,"prompt":"say hello","seed":3,"temperature":0.0}"#
        );
    }
}

#[test]
fn retries_are_bounded() {
    let (base, seen) = serve(vec![(503, "busy"); 3]);
    let gw = gateway(text_profile(base, 2), Arc::default(), None);
    match gw.generate_text(&request()) {
        Err(Error::BackendUnavailable {
            endpoint,
            attempts,
            last,
        }) => {
            assert_eq!(endpoint, "generate");
            assert_eq!(attempts, 3);
            assert!(last.contains("503"), "{last}");
        }
        other => panic!("{other:?}"),
    }
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 3);
    assert!(seen.iter().all(|s| s.header("authorization").is_none()));
}

#[test]
fn unreachable_host_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let gw = gateway(
        text_profile(format!("http://127.0.0.1:{port}"), 1),
        Arc::default(),
        None,
    );
    assert!(matches!(
        gw.generate_text(&request()),
        Err(Error::BackendUnavailable { attempts: 2, .. })
    ));
}

#[test]
fn full_endpoint_url_is_used_as_is() {
    let (base, seen) = serve(vec![(200, GENERATED)]);
    let gw = gateway(text_profile(format!("{base}/v1/generate"), 0), Arc::default(), None);
    gw.generate_text(&request()).unwrap();
    assert_eq!(seen.lock().unwrap()[0].path, "/v1/generate");
}

#[test]
fn endpoints_route_independently() {
    let (base, seen) = serve(vec![(200, r#"{"dim":2,"embeddings":[[0.6,0.8]]}"#)]);
    let mock = Arc::new(MockTransport::new());
    let profile = BackendProfile {
        embed_endpoint: EndpointTarget::Http(base),
        embed_dim: Some(2),
        ..BackendProfile::mock()
    };
    let gw = gateway(profile, mock.clone(), None);
    let e = gw.embed(&[EmbedInput::Text("x")]).unwrap();
    assert_eq!(e[0].vector(), &[0.6, 0.8]);
    gw.generate_text(&request()).unwrap();
    assert_eq!(seen.lock().unwrap()[0].path, "/v1/embed");
    assert_eq!(
        seen.lock().unwrap()[0].body,
        r#"{"inputs":[{"kind":"text","text":"x"}]}"#
    );
    assert_eq!(mock.calls(), 1);
}
