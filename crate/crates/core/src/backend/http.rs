use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::header::CONTENT_TYPE;

use super::transport::{Transport, TransportError};
use super::wire::Endpoint;
use super::{BackendProfile, EndpointTarget};
use crate::error::{Error, Result};

/// Blocking JSON-over-HTTP transport for the four `/v1/*` endpoints.
pub struct HttpTransport {
    client: Client,
    urls: [Option<String>; 4],
    bearer: Option<String>,
}

impl HttpTransport {
    pub fn new(profile: &BackendProfile, bearer: Option<String>) -> Result<Self> {
        let client = Client::builder()
            .timeout(Duration::from_secs_f64(profile.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        let urls = Endpoint::ALL.map(|ep| match profile.target(ep) {
            EndpointTarget::Http(base) => Some(endpoint_url(base, ep)),
            EndpointTarget::Mock => None,
        });
        Ok(Self { client, urls, bearer })
    }

    pub fn url(&self, endpoint: Endpoint) -> Option<&str> {
        self.urls[index(endpoint)].as_deref()
    }
}

fn index(endpoint: Endpoint) -> usize {
    Endpoint::ALL
        .iter()
        .position(|e| *e == endpoint)
        .expect("endpoint listed")
}

/// Appends the endpoint path unless the configured URL already ends with it.
fn endpoint_url(base: &str, endpoint: Endpoint) -> String {
    if base.ends_with(endpoint.path()) {
        base.to_owned()
    } else {
        format!("{base}{}", endpoint.path())
    }
}

impl Transport for HttpTransport {
    fn call(&self, endpoint: Endpoint, body: &str) -> std::result::Result<String, TransportError> {
        let url = self
            .url(endpoint)
            .ok_or_else(|| TransportError::Fatal(format!("no URL configured for {}", endpoint.name())))?;
        let mut request = self
            .client
            .post(url)
            .header(CONTENT_TYPE, "application/json")
            .body(body.to_owned());
        if let Some(token) = &self.bearer {
            request = request.bearer_auth(token);
        }
        let response = request.send().map_err(|e| TransportError::Retryable(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| TransportError::Retryable(e.to_string()))?;
        if status.is_success() {
            Ok(text)
        } else {
            Err(TransportError::Retryable(format!("HTTP {status}: {text}")))
        }
    }
}
