use std::fmt;
use std::str::FromStr;

use futures::stream::{self, StreamExt};
use serde::Serialize;
use thiserror::Error;

use crate::backend::{parse_label, BackendError, ModelBackend, ModelRequest};
use crate::corpus::Corpus;
use crate::event::{CloudEvent, Label};
use crate::fixtures::{
    with_context, COMMON_SYSTEM_PROMPT, COMMON_USER_PROMPT, INJECTION_SYSTEM_PROMPT,
    INJECTION_USER_PROMPT,
};
use crate::ontology::Ontology;
use crate::shield::{shield, PromptPair, ShieldDecision};

/// The three experimental conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Non-expert prompts, sent as-is.
    Regular,
    /// System prompt carrying injected clauses, sent as-is.
    Injection,
    /// The injected pair, routed through the gate first.
    Shield,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Regular, Scenario::Injection, Scenario::Shield];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::Regular => "regular",
            Scenario::Injection => "injection",
            Scenario::Shield => "shield",
        }
    }

    /// Row label in the results table.
    pub fn title(self) -> &'static str {
        match self {
            Scenario::Regular => "Regular",
            Scenario::Injection => "Prompt Injection",
            Scenario::Shield => "Shielded",
        }
    }

    /// The prompt pair as the caller submits it, before any event context.
    pub fn incoming_pair(self) -> PromptPair {
        match self {
            Scenario::Regular => PromptPair::new(COMMON_USER_PROMPT, COMMON_SYSTEM_PROMPT),
            Scenario::Injection | Scenario::Shield => {
                PromptPair::new(INJECTION_USER_PROMPT, INJECTION_SYSTEM_PROMPT)
            }
        }
    }

    /// The prompts the model actually receives for `event`, or the gate's
    /// rejection reason.
    pub fn effective_prompts(self, o: &Ontology, event: &CloudEvent) -> Result<PromptPair, String> {
        effective_prompts_for(self, o, &self.incoming_pair(), event)
    }
}

/// Like [`Scenario::effective_prompts`] but with a caller-chosen incoming
/// pair.
pub fn effective_prompts_for(
    scenario: Scenario,
    o: &Ontology,
    incoming: &PromptPair,
    event: &CloudEvent,
) -> Result<PromptPair, String> {
    let context = event.to_context();
    match scenario {
        Scenario::Regular | Scenario::Injection => Ok(PromptPair {
            user: with_context(&incoming.user, &context),
            system: incoming.system.clone(),
        }),
        Scenario::Shield => match shield(o, incoming, &context) {
            ShieldDecision::Allowed { rewritten, .. } => Ok(rewritten),
            ShieldDecision::Rejected { reason } => Err(reason),
        },
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown scenario `{0}` (expected regular, injection, shield or all)")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regular" => Ok(Scenario::Regular),
            "injection" => Ok(Scenario::Injection),
            "shield" => Ok(Scenario::Shield),
            _ => Err(UnknownScenario(s.to_owned())),
        }
    }
}

/// Parses a comma-separated scenario list; `all` expands to every scenario.
/// Duplicates collapse and order follows [`Scenario::ALL`].
pub fn parse_scenarios(list: &str) -> Result<Vec<Scenario>, UnknownScenario> {
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            out.extend(Scenario::ALL);
        } else {
            out.push(part.parse()?);
        }
    }
    if out.is_empty() {
        return Err(UnknownScenario(list.to_owned()));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictionFailure {
    /// The gate refused the constructed prompt.
    Rejected(String),
    Backend(BackendError),
    Unparseable(String),
}

pub type Prediction = Result<Label, PredictionFailure>;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    /// One entry per corpus event, in corpus order.
    pub predictions: Vec<Prediction>,
}

impl ScenarioRun {
    pub fn failures(&self) -> usize {
        self.predictions.iter().filter(|p| p.is_err()).count()
    }

    pub fn rejections(&self) -> usize {
        self.predictions
            .iter()
            .filter(|p| matches!(p, Err(PredictionFailure::Rejected(_))))
            .count()
    }
}

pub const DEFAULT_EVAL_CONCURRENCY: usize = 8;

/// Classifies every corpus event under `scenario`.
pub async fn run_scenario<B>(
    scenario: Scenario,
    o: &Ontology,
    backend: &B,
    corpus: &Corpus,
    concurrency: usize,
) -> ScenarioRun
where
    B: ModelBackend + ?Sized,
{
    let model = o.default_model();
    let predictions = stream::iter(&corpus.events)
        .map(|labeled| async move {
            let prompts = scenario
                .effective_prompts(o, &labeled.event)
                .map_err(PredictionFailure::Rejected)?;
            let req = ModelRequest {
                system: prompts.system,
                user: prompts.user,
                model: model.clone(),
                attributes: o.attributes.clone(),
            };
            let response = backend.complete(&req).await.map_err(PredictionFailure::Backend)?;
            parse_label(&response).map_err(|e| PredictionFailure::Unparseable(e.0))
        })
        .buffered(concurrency.max(1))
        .collect()
        .await;
    ScenarioRun { scenario, predictions }
}
