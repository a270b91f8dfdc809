//! Model invocation behind one async contract.
//!
//! [`HttpBackend`] speaks a chat-completions style wire format to an upstream
//! endpoint. [`SimulatedBackend`] is an offline, deterministic instruction
//! follower. [`DispatchBackend`] picks between them per request, based on the
//! model spec's endpoint.

mod directives;
mod http;
mod simulator;

use async_trait::async_trait;
use thiserror::Error;

pub use crate::event::Label;
use crate::ontology::{AttributeSet, ModelSpec};
use crate::text::tokens;

pub use directives::{extract_directives, Directive, DirectiveRuleSet, ErrorCondition};
pub use http::{HttpBackend, HttpBackendConfig, API_KEY_ENV};
pub use simulator::{extract_event, simulate_complete, simulated_label, SimulatedBackend};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    pub system: String,
    pub user: String,
    pub model: ModelSpec,
    pub attributes: AttributeSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelResponse {
    pub text: String,
}

impl ModelResponse {
    pub fn new(text: impl Into<String>) -> Self {
        ModelResponse { text: text.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("upstream timed out or was unreachable: {0}")]
    Timeout(String),
    #[error("upstream returned status {0}")]
    UpstreamStatus(u16),
    #[error("malformed upstream body: {0}")]
    MalformedUpstreamBody(String),
    #[error("invalid model request: {0}")]
    InvalidRequest(String),
}

#[async_trait]
pub trait ModelBackend: Send + Sync {
    async fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, BackendError>;
}

/// Sends `simulated` endpoints to the simulator and everything else over HTTP.
pub struct DispatchBackend {
    http: HttpBackend,
    simulator: SimulatedBackend,
}

impl DispatchBackend {
    pub fn new(http: HttpBackend) -> Self {
        DispatchBackend { http, simulator: SimulatedBackend }
    }
}

#[async_trait]
impl ModelBackend for DispatchBackend {
    async fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, BackendError> {
        if req.model.is_simulated() {
            self.simulator.complete(req).await
        } else {
            self.http.complete(req).await
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("response is not a single classification label: {0:?}")]
pub struct UnparseableResponse(pub String);

/// Reads a bare classification out of a model response. Case and
/// punctuation are ignored; exactly one of the two label words must appear.
pub fn parse_label(response: &ModelResponse) -> Result<Label, UnparseableResponse> {
    let words = tokens(&response.text);
    let malicious = words.iter().any(|w| w == "malicious");
    let legit = words.iter().any(|w| w == "legit");
    match (malicious, legit) {
        (true, false) => Ok(Label::Malicious),
        (false, true) => Ok(Label::Legit),
        _ => Err(UnparseableResponse(response.text.clone())),
    }
}
