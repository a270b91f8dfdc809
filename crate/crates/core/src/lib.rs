//! Ontology-driven prompt gate for LLM log classification.
//!
//! A caller's prompt pair is admitted only when the user prompt matches a
//! registered standard prompt; admitted prompts are then replaced wholesale
//! by expert templates from the ontology. The crate also ships a synthetic
//! cloud audit-log corpus, a deterministic simulated model and an
//! evaluation harness that compares plain, injected and gated prompting.

pub mod backend;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod event;
pub mod fixtures;
pub mod gateway;
pub mod ontology;
pub mod shield;
pub mod text;

pub use ontology::{load_ontology, Ontology, OntologyError};
pub use shield::{shield, PromptPair, ShieldDecision};
