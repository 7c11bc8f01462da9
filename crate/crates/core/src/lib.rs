//! Recursive multimodal infilling for sequential text-visual data.
//!
//! The pipeline unifies text-only input into text-visual pairs, computes a
//! sequence-wide focus, recursively inserts generated text-visual pairs into
//! every gap between adjacent steps, and assembles downstream prompts from the
//! augmented result.

pub mod backend;
pub mod downstream;
pub mod engine;
pub mod error;
pub mod eval;
pub mod foveation;
pub mod infill;
pub mod model;
pub mod prompts;
pub mod run;
pub mod unify;

use std::sync::Arc;

pub use error::{Error, Result};

use backend::{BackendProfile, Gateway, MockTransport, ResponseCache};
use engine::{Engine, EngineSettings};

/// An engine backed by the deterministic mocks and an in-memory cache.
pub fn mock_engine(settings: EngineSettings) -> (Engine, Arc<MockTransport>) {
    let mock = Arc::new(MockTransport::new());
    let gateway = Gateway::new(BackendProfile::mock(), mock.clone()).with_cache(Arc::new(ResponseCache::in_memory()));
    (Engine::new(Arc::new(gateway), settings), mock)
}
