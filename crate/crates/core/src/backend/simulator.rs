use async_trait::async_trait;

use super::directives::extract_directives;
use super::{BackendError, ModelBackend, ModelRequest, ModelResponse};
use crate::event::{CloudEvent, Label};

/// Deterministic stand-in for a temperature-zero model.
///
/// It obeys the directive sentences found in the system prompt, first match
/// wins. When none applies it falls back to "an error means Malicious".
/// The reply is the bare label.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulatedBackend;

#[async_trait]
impl ModelBackend for SimulatedBackend {
    async fn complete(&self, req: &ModelRequest) -> Result<ModelResponse, BackendError> {
        if req.user.trim().is_empty() {
            return Err(BackendError::InvalidRequest("user prompt is empty".into()));
        }
        let event = extract_event(&req.user);
        Ok(ModelResponse::new(simulated_label(&req.system, event.as_ref()).as_str()))
    }
}

pub fn simulate_complete(req: &ModelRequest, event: &CloudEvent) -> ModelResponse {
    ModelResponse::new(simulated_label(&req.system, Some(event)).as_str())
}

pub fn simulated_label(system_prompt: &str, event: Option<&CloudEvent>) -> Label {
    if let Some(directive) = extract_directives(system_prompt).first_match(event) {
        return directive.label;
    }
    match event.and_then(|e| e.error_code.as_ref()) {
        Some(_) => Label::Malicious,
        None => Label::Legit,
    }
}

/// First JSON object in `text` that parses as a [`CloudEvent`].
pub fn extract_event(text: &str) -> Option<CloudEvent> {
    text.match_indices('{').find_map(|(i, _)| {
        serde_json::Deserializer::from_str(&text[i..])
            .into_iter::<CloudEvent>()
            .next()
            .and_then(Result::ok)
    })
}
