use std::fmt;
use std::sync::Arc;

use super::wire::Endpoint;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    /// Connection failure or a non-2xx status, timeouts included.
    Retryable(String),
    /// The request cannot succeed as sent.
    Fatal(String),
}

impl fmt::Display for TransportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransportError::Retryable(m) => write!(f, "retryable: {m}"),
            TransportError::Fatal(m) => write!(f, "fatal: {m}"),
        }
    }
}

/// Moves one canonical JSON request body to an endpoint and returns the raw
/// response body.
pub trait Transport: Send + Sync {
    fn call(&self, endpoint: Endpoint, body: &str) -> Result<String, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn call(&self, endpoint: Endpoint, body: &str) -> Result<String, TransportError> {
        (**self).call(endpoint, body)
    }
}

/// Dispatches each endpoint to its own transport.
pub struct EndpointRouter {
    generate: Arc<dyn Transport>,
    image: Arc<dyn Transport>,
    caption: Arc<dyn Transport>,
    embed: Arc<dyn Transport>,
}

impl EndpointRouter {
    pub fn new(route: impl Fn(Endpoint) -> Arc<dyn Transport>) -> Self {
        Self {
            generate: route(Endpoint::Generate),
            image: route(Endpoint::Image),
            caption: route(Endpoint::Caption),
            embed: route(Endpoint::Embed),
        }
    }
}

impl Transport for EndpointRouter {
    fn call(&self, endpoint: Endpoint, body: &str) -> Result<String, TransportError> {
        let target = match endpoint {
            Endpoint::Generate => &self.generate,
            Endpoint::Image => &self.image,
            Endpoint::Caption => &self.caption,
            Endpoint::Embed => &self.embed,
        };
        target.call(endpoint, body)
    }
}
