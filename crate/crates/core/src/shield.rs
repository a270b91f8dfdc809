//! The prompt gate. A user prompt is admitted only if it matches a rule in
//! the standard-prompt registry. Admitted pairs are classified into a prompt
//! type, and both prompts are replaced by that type's expert templates.
//! Everything else is rejected with [`REJECTION_REASON`].

use std::collections::HashSet;

use futures::stream::{self, StreamExt};
use serde::Serialize;
use thiserror::Error;

use crate::backend::{BackendError, ModelBackend, ModelRequest, ModelResponse};
use crate::ontology::{
    lookup_templates, Ontology, PromptType, StandardPromptRule, UnknownPromptType, EVENT_PLACEHOLDER,
};
use crate::text::tokens;

pub use crate::text::normalize;

/// Literal reason carried by every rejection.
pub const REJECTION_REASON: &str = "prompt not allowed";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptPair {
    pub user: String,
    pub system: String,
}

impl PromptPair {
    pub fn new(user: impl Into<String>, system: impl Into<String>) -> Self {
        PromptPair { user: user.into(), system: system.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ShieldDecision {
    Allowed { rewritten: PromptPair, prompt_type: PromptType },
    Rejected { reason: String },
}

impl ShieldDecision {
    pub fn rejected() -> Self {
        ShieldDecision::Rejected { reason: REJECTION_REASON.to_owned() }
    }

    pub fn is_allowed(&self) -> bool {
        matches!(self, ShieldDecision::Allowed { .. })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShieldError {
    #[error(transparent)]
    UnknownPromptType(#[from] UnknownPromptType),
    #[error("no standard-prompt rule fires for this user prompt")]
    NoRuleFires,
}

fn match_count(rule: &StandardPromptRule, words: &HashSet<String>) -> usize {
    rule.required_keywords.iter().filter(|k| words.contains(*k)).count()
}

/// Rules that fire on `user`, with their keyword-match counts.
fn firing_rules<'o>(o: &'o Ontology, user: &str) -> Vec<(&'o StandardPromptRule, usize)> {
    let words: HashSet<String> = tokens(user).into_iter().collect();
    o.standard_registry
        .iter()
        .map(|rule| (rule, match_count(rule, &words)))
        .filter(|(rule, count)| *count >= rule.min_matches)
        .collect()
}

pub fn matches_standard(o: &Ontology, user: &str) -> bool {
    !firing_rules(o, user).is_empty()
}

/// Type of the firing rule with the most keyword matches; ties go to the
/// lexicographically smallest type id.
pub fn classify_prompt(o: &Ontology, user: &str) -> Result<PromptType, ShieldError> {
    firing_rules(o, user)
        .into_iter()
        .min_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| a.prompt_type.cmp(&b.prompt_type)))
        .map(|(rule, _)| rule.prompt_type.clone())
        .ok_or(ShieldError::NoRuleFires)
}

/// Replaces `{{event}}` with `context`. Any `{{` inside the context is broken
/// up first so the output can never carry a placeholder token.
pub fn substitute(template: &str, context: &str) -> String {
    let mut safe = context.to_owned();
    while safe.contains("{{") {
        safe = safe.replace("{{", "{ {");
    }
    template.replace(EVENT_PLACEHOLDER, &safe)
}

/// Both prompts come from the ontology; the incoming pair is discarded.
pub fn apply_ontology(
    o: &Ontology,
    _pair: &PromptPair,
    prompt_type: &PromptType,
    context: &str,
) -> Result<PromptPair, ShieldError> {
    let templates = lookup_templates(o, prompt_type.as_str())?;
    Ok(PromptPair {
        user: substitute(&templates.user_template, context),
        system: substitute(&templates.system_template, context),
    })
}

pub fn shield(o: &Ontology, pair: &PromptPair, context: &str) -> ShieldDecision {
    let Ok(prompt_type) = classify_prompt(o, &pair.user) else {
        return ShieldDecision::rejected();
    };
    match apply_ontology(o, pair, &prompt_type, context) {
        Ok(rewritten) => ShieldDecision::Allowed { rewritten, prompt_type },
        // unreachable for a validated ontology: every rule's type resolves
        Err(_) => ShieldDecision::rejected(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Response { response: ModelResponse, prompt_type: PromptType },
    Rejected { reason: String },
    Failed(BackendError),
}

pub const DEFAULT_PIPELINE_CONCURRENCY: usize = 8;

/// Runs every (pair, context) through the gate and sends admitted ones to
/// the backend. Rejected pairs never reach the backend. A backend error only
/// affects its own item. Output order matches input order.
pub async fn run_pipeline<B>(o: &Ontology, backend: &B, items: Vec<(PromptPair, String)>) -> Vec<Outcome>
where
    B: ModelBackend + ?Sized,
{
    run_pipeline_with(o, backend, items, DEFAULT_PIPELINE_CONCURRENCY).await
}

pub async fn run_pipeline_with<B>(
    o: &Ontology,
    backend: &B,
    items: Vec<(PromptPair, String)>,
    concurrency: usize,
) -> Vec<Outcome>
where
    B: ModelBackend + ?Sized,
{
    let model = o.default_model();
    stream::iter(items)
        .map(|(pair, context)| async move {
            match shield(o, &pair, &context) {
                ShieldDecision::Rejected { reason } => Outcome::Rejected { reason },
                ShieldDecision::Allowed { rewritten, prompt_type } => {
                    let req = ModelRequest {
                        system: rewritten.system,
                        user: rewritten.user,
                        model: model.clone(),
                        attributes: o.attributes.clone(),
                    };
                    match backend.complete(&req).await {
                        Ok(response) => Outcome::Response { response, prompt_type },
                        Err(e) => Outcome::Failed(e),
                    }
                }
            }
        })
        .buffered(concurrency.max(1))
        .collect()
        .await
}
