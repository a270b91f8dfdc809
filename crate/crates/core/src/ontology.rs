//! The prompt ontology: model specs, attributes, functions, expert prompt
//! templates per prompt type, and the standard-prompt registry that decides
//! which user inputs are admitted.
//!
//! The on-disk form is a single JSON document. [`serialize_ontology`] emits a
//! canonical form (sorted keys, two-space indentation, trailing newline) so
//! that `serialize(load(bytes)) == bytes` for canonical input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;

/// The only placeholder templates may contain.
pub const EVENT_PLACEHOLDER: &str = "{{event}}";

/// Endpoint token that routes requests to the in-process simulator.
pub const SIMULATED_ENDPOINT: &str = "simulated";

const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 256;

#[derive(Debug, Error, PartialEq)]
pub enum OntologyError {
    #[error("malformed ontology document: {0}")]
    MalformedDocument(String),
    #[error("schema violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },
}

impl OntologyError {
    fn violation(path: impl Into<String>, message: impl Into<String>) -> Self {
        OntologyError::SchemaViolation { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown prompt type `{0}`")]
pub struct UnknownPromptType(pub String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid prompt type id `{0}`: expected a lowercase kebab-case token")]
pub struct InvalidPromptType(pub String);

/// Lowercase kebab-case identifier of a prompt class, e.g.
/// `connection-classification`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct PromptType(String);

impl PromptType {
    pub fn new(id: impl Into<String>) -> Result<Self, InvalidPromptType> {
        let id = id.into();
        let valid = !id.is_empty()
            && id.split('-').all(|part| {
                !part.is_empty()
                    && part.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
            });
        if valid {
            Ok(PromptType(id))
        } else {
            Err(InvalidPromptType(id))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PromptType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    /// Absolute http(s) URL, or [`SIMULATED_ENDPOINT`].
    pub endpoint: String,
    #[serde(default)]
    pub default: bool,
}

impl ModelSpec {
    pub fn is_simulated(&self) -> bool {
        self.endpoint == SIMULATED_ENDPOINT
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSet {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

fn default_max_output_tokens() -> u32 {
    DEFAULT_MAX_OUTPUT_TOKENS
}

impl Default for AttributeSet {
    fn default() -> Self {
        AttributeSet {
            temperature: 0.0,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
}

/// Expert-made system and user prompts for one prompt type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatePair {
    pub system_template: String,
    pub user_template: String,
    /// Names of [`FunctionSpec`]s this prompt class makes use of.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub functions: BTreeSet<String>,
}

impl TemplatePair {
    pub fn uses_context(&self) -> bool {
        self.system_template.contains(EVENT_PLACEHOLDER)
            || self.user_template.contains(EVENT_PLACEHOLDER)
    }
}

/// A registry entry: a user prompt is "standard" for `prompt_type` when at
/// least `min_matches` of the keywords occur as whole normalized tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StandardPromptRule {
    pub prompt_type: PromptType,
    pub required_keywords: BTreeSet<String>,
    pub min_matches: usize,
}

impl StandardPromptRule {
    /// `ceil(0.75 * |keywords|)`, the threshold used when a document omits it.
    pub fn default_min_matches(keyword_count: usize) -> usize {
        (keyword_count * 3).div_ceil(4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ontology {
    pub version: String,
    pub models: Vec<ModelSpec>,
    pub attributes: AttributeSet,
    pub functions: Vec<FunctionSpec>,
    pub prompt_classes: BTreeMap<PromptType, TemplatePair>,
    pub standard_registry: Vec<StandardPromptRule>,
}

impl Ontology {
    /// The model marked `default`. Validated ontologies always have one.
    pub fn default_model(&self) -> &ModelSpec {
        self.models
            .iter()
            .find(|m| m.default)
            .or_else(|| self.models.first())
            .expect("ontology has at least one model")
    }

    /// Checks every structural invariant. `load_ontology` calls this; callers
    /// that assemble an ontology by hand can use it too.
    pub fn validate(&self) -> Result<(), OntologyError> {
        if self.version.trim().is_empty() {
            return Err(OntologyError::violation("version", "must not be empty"));
        }

        if self.models.is_empty() {
            return Err(OntologyError::violation("models", "at least one model is required"));
        }
        for (i, model) in self.models.iter().enumerate() {
            if model.name.trim().is_empty() {
                return Err(OntologyError::violation(format!("models[{i}].name"), "must not be empty"));
            }
            if !model.is_simulated() {
                check_endpoint(&model.endpoint)
                    .map_err(|m| OntologyError::violation(format!("models[{i}].endpoint"), m))?;
            }
        }
        let defaults = self.models.iter().filter(|m| m.default).count();
        if defaults != 1 {
            return Err(OntologyError::violation(
                "models",
                format!("exactly one model must be marked default, found {defaults}"),
            ));
        }

        let t = self.attributes.temperature;
        if !t.is_finite() || !(0.0..=2.0).contains(&t) {
            return Err(OntologyError::violation(
                "attributes.temperature",
                format!("{t} is outside [0, 2]"),
            ));
        }

        let mut function_names = BTreeSet::new();
        for (i, f) in self.functions.iter().enumerate() {
            if f.name.trim().is_empty() {
                return Err(OntologyError::violation(format!("functions[{i}].name"), "must not be empty"));
            }
            if !function_names.insert(f.name.as_str()) {
                return Err(OntologyError::violation(
                    format!("functions[{i}].name"),
                    format!("duplicate function name `{}`", f.name),
                ));
            }
        }

        for (id, pair) in &self.prompt_classes {
            for (field, template) in
                [("system_template", &pair.system_template), ("user_template", &pair.user_template)]
            {
                let path = format!("prompt_classes.{id}.{field}");
                if template.trim().is_empty() {
                    return Err(OntologyError::violation(path, "template must not be empty"));
                }
                check_placeholders(template).map_err(|m| OntologyError::violation(path, m))?;
            }
            for name in &pair.functions {
                if !function_names.contains(name.as_str()) {
                    return Err(OntologyError::violation(
                        format!("prompt_classes.{id}.functions"),
                        format!("references undeclared function `{name}`"),
                    ));
                }
            }
        }

        for (i, rule) in self.standard_registry.iter().enumerate() {
            if !self.prompt_classes.contains_key(&rule.prompt_type) {
                return Err(OntologyError::violation(
                    format!("standard_registry[{i}].prompt_type"),
                    format!("prompt type `{}` has no entry in prompt_classes", rule.prompt_type),
                ));
            }
            let kw_path = format!("standard_registry[{i}].required_keywords");
            if rule.required_keywords.is_empty() {
                return Err(OntologyError::violation(kw_path, "keyword set must not be empty"));
            }
            for kw in &rule.required_keywords {
                if kw.is_empty() || kw.contains(' ') || normalize(kw) != *kw {
                    return Err(OntologyError::violation(
                        kw_path,
                        format!("`{kw}` is not a single normalized token"),
                    ));
                }
            }
            if rule.min_matches == 0 || rule.min_matches > rule.required_keywords.len() {
                return Err(OntologyError::violation(
                    format!("standard_registry[{i}].min_matches"),
                    format!(
                        "{} is outside 1..={}",
                        rule.min_matches,
                        rule.required_keywords.len()
                    ),
                ));
            }
        }
        Ok(())
    }
}

fn check_endpoint(endpoint: &str) -> Result<(), String> {
    let parsed = url::Url::parse(endpoint)
        .map_err(|e| format!("`{endpoint}` is neither an absolute URL nor `{SIMULATED_ENDPOINT}`: {e}"))?;
    match parsed.scheme() {
        "http" | "https" if parsed.has_host() => Ok(()),
        _ => Err(format!("`{endpoint}` must be an http(s) URL")),
    }
}

/// Every `{{...}}` token in a template must be exactly `{{event}}`.
fn check_placeholders(template: &str) -> Result<(), String> {
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start..];
        if !after.starts_with(EVENT_PLACEHOLDER) {
            let end = after.find("}}").map(|e| e + 2).unwrap_or(after.len());
            return Err(format!(
                "unsupported placeholder `{}`; only {EVENT_PLACEHOLDER} is allowed",
                &after[..end]
            ));
        }
        rest = &after[EVENT_PLACEHOLDER.len()..];
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Loading

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOntology {
    version: String,
    models: Vec<RawModel>,
    #[serde(default)]
    attributes: AttributeSet,
    #[serde(default)]
    functions: Vec<FunctionSpec>,
    prompt_classes: UniqueKeyMap<TemplatePair>,
    standard_registry: Vec<RawRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    endpoint: String,
    #[serde(default)]
    default: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    prompt_type: String,
    required_keywords: Vec<String>,
    #[serde(default)]
    min_matches: Option<usize>,
}

/// JSON object that rejects duplicate keys instead of keeping the last one.
struct UniqueKeyMap<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for UniqueKeyMap<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct UniqueVisitor<V>(std::marker::PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for UniqueVisitor<V> {
            type Value = UniqueKeyMap<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map of prompt type ids to template pairs")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut seen = BTreeSet::new();
                let mut entries = Vec::new();
                while let Some(key) = map.next_key::<String>()? {
                    if !seen.insert(key.clone()) {
                        return Err(de::Error::custom(format!("duplicate prompt type id `{key}`")));
                    }
                    let value = map.next_value::<V>()?;
                    entries.push((key, value));
                }
                Ok(UniqueKeyMap(entries))
            }
        }

        deserializer.deserialize_map(UniqueVisitor(std::marker::PhantomData))
    }
}

/// Parses and validates an ontology document. Pure: no I/O, no globals.
pub fn load_ontology(document: &[u8]) -> Result<Ontology, OntologyError> {
    let text = std::str::from_utf8(document)
        .map_err(|e| OntologyError::MalformedDocument(format!("not UTF-8: {e}")))?;

    // Syntax first, so a truncated file is reported as malformed rather
    // than as a missing field.
    serde_json::from_str::<de::IgnoredAny>(text)
        .map_err(|e| OntologyError::MalformedDocument(e.to_string()))?;

    let mut de = serde_json::Deserializer::from_str(text);
    let raw: RawOntology = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        OntologyError::violation(path, e.into_inner().to_string())
    })?;

    let mut prompt_classes = BTreeMap::new();
    for (id, pair) in raw.prompt_classes.0 {
        let prompt_type = PromptType::new(id)
            .map_err(|e| OntologyError::violation(format!("prompt_classes.{}", e.0), e.to_string()))?;
        prompt_classes.insert(prompt_type, pair);
    }

    let mut standard_registry = Vec::with_capacity(raw.standard_registry.len());
    for (i, rule) in raw.standard_registry.into_iter().enumerate() {
        let prompt_type = PromptType::new(rule.prompt_type).map_err(|e| {
            OntologyError::violation(format!("standard_registry[{i}].prompt_type"), e.to_string())
        })?;
        let required_keywords: BTreeSet<String> =
            rule.required_keywords.iter().map(|k| normalize(k)).collect();
        let min_matches = rule
            .min_matches
            .unwrap_or_else(|| StandardPromptRule::default_min_matches(required_keywords.len()));
        standard_registry.push(StandardPromptRule { prompt_type, required_keywords, min_matches });
    }

    let ontology = Ontology {
        version: raw.version,
        models: raw
            .models
            .into_iter()
            .map(|m| ModelSpec { name: m.name, endpoint: m.endpoint, default: m.default })
            .collect(),
        attributes: raw.attributes,
        functions: raw.functions,
        prompt_classes,
        standard_registry,
    };
    ontology.validate()?;
    Ok(ontology)
}

/// Canonical bytes: keys sorted lexicographically, two-space indentation,
/// one trailing newline.
pub fn serialize_ontology(o: &Ontology) -> Vec<u8> {
    // Going through `Value` sorts every object's keys.
    let value = serde_json::to_value(o).expect("ontology serializes to JSON");
    let mut out = serde_json::to_vec_pretty(&value).expect("JSON value serializes");
    out.push(b'\n');
    out
}

/// Returns the template pair registered for `prompt_type`.
pub fn lookup_templates<'o>(o: &'o Ontology, prompt_type: &str) -> Result<&'o TemplatePair, UnknownPromptType> {
    PromptType::new(prompt_type)
        .ok()
        .and_then(|t| o.prompt_classes.get(&t))
        .ok_or_else(|| UnknownPromptType(prompt_type.to_owned()))
}

// ---------------------------------------------------------------------------
// Lint

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    OverlappingKeywords,
    TemplateWithoutContext,
    UnusedFunction,
}

/// A warning about a loadable but questionable ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "warning[{}] {}: {}", self.kind.as_str(), self.path, self.message)
    }
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::OverlappingKeywords => "overlapping-keywords",
            FindingKind::TemplateWithoutContext => "template-without-context",
            FindingKind::UnusedFunction => "unused-function",
        }
    }
}

pub fn lint_ontology(o: &Ontology) -> Vec<Finding> {
    let mut findings = Vec::new();

    let rules = &o.standard_registry;
    for i in 0..rules.len() {
        for j in (i + 1)..rules.len() {
            if rules[i].required_keywords == rules[j].required_keywords {
                findings.push(Finding {
                    kind: FindingKind::OverlappingKeywords,
                    path: format!("standard_registry[{j}]"),
                    message: format!(
                        "keyword set is identical to standard_registry[{i}] ({} vs {})",
                        rules[j].prompt_type, rules[i].prompt_type
                    ),
                });
            }
        }
    }

    for (id, pair) in &o.prompt_classes {
        if !pair.uses_context() {
            findings.push(Finding {
                kind: FindingKind::TemplateWithoutContext,
                path: format!("prompt_classes.{id}"),
                message: format!("neither template references {EVENT_PLACEHOLDER}"),
            });
        }
    }

    for (i, f) in o.functions.iter().enumerate() {
        let used = o.prompt_classes.values().any(|p| p.functions.contains(&f.name));
        if !used {
            findings.push(Finding {
                kind: FindingKind::UnusedFunction,
                path: format!("functions[{i}]"),
                message: format!("function `{}` is not used by any prompt class", f.name),
            });
        }
    }

    findings
}
