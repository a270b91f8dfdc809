//! Synthetic CloudTrail-like event corpus with ground-truth labels.

mod generate;
mod io;
mod prune;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::{
    is_anomalous_event_name, is_exception_denied, is_invalid_input, is_unauthorized, CloudEvent,
    Label,
};

pub use generate::{generate_corpus, REFERENCE_SEED, REFERENCE_SIZE};
pub use io::{parse_corpus, read_corpus, render_corpus, write_corpus};
pub use prune::{prune_features, prune_report, PruneReport};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid mix: {0}")]
    InvalidMix(String),
    #[error("malformed record on line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ground truth for an event.
///
/// Unauthorized and denied-exception errors are Malicious. Otherwise an
/// event name from the anomaly list is Malicious, even when the call failed
/// on invalid input. Remaining invalid-input errors and error-free events
/// are Legit. Any other error code is Malicious.
pub fn label_event(e: &CloudEvent) -> Label {
    match e.error_code.as_deref() {
        Some(code) if is_unauthorized(code) || is_exception_denied(code) => Label::Malicious,
        _ if is_anomalous_event_name(&e.event_name) => Label::Malicious,
        Some(code) if is_invalid_input(code) => Label::Legit,
        None => Label::Legit,
        Some(_) => Label::Malicious,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledEvent {
    #[serde(flatten)]
    pub event: CloudEvent,
    pub label: Label,
}

impl LabeledEvent {
    pub fn from_event(event: CloudEvent) -> Self {
        let label = label_event(&event);
        LabeledEvent { event, label }
    }
}

/// Category proportions for the generator. The six ratios must sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mix {
    /// No error, ordinary API call. Legit.
    pub benign: f64,
    /// `ValidationException` / `InvalidParameterValue`. Legit unless on an
    /// anomalous event name.
    pub invalid_input: f64,
    /// `AccessDenied` / `UnauthorizedOperation`. Malicious.
    pub unauthorized: f64,
    /// Denied-type exceptions such as `AccessDeniedException`. Malicious.
    pub exception_denied: f64,
    /// Other failures (bad signatures, unknown tokens). Malicious.
    pub other_error: f64,
    /// No error, but an audit-tampering or credential event. Malicious.
    pub anomaly: f64,
    /// Share of invalid-input events placed on anomalous event names,
    /// which makes them Malicious.
    pub invalid_input_malicious_rate: f64,
}

impl Default for Mix {
    fn default() -> Self {
        Mix {
            benign: 0.20,
            invalid_input: 0.14,
            unauthorized: 0.02,
            exception_denied: 0.60,
            other_error: 0.02,
            anomaly: 0.02,
            invalid_input_malicious_rate: 0.10,
        }
    }
}

impl Mix {
    pub(crate) fn ratios(&self) -> [f64; 6] {
        [
            self.benign,
            self.invalid_input,
            self.unauthorized,
            self.exception_denied,
            self.other_error,
            self.anomaly,
        ]
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let ratios = self.ratios();
        if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(CorpusError::InvalidMix("ratios must be finite and non-negative".into()));
        }
        let sum: f64 = ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CorpusError::InvalidMix(format!("ratios sum to {sum}, expected 1")));
        }
        let rate = self.invalid_input_malicious_rate;
        if !rate.is_finite() || !(0.0..=1.0).contains(&rate) {
            return Err(CorpusError::InvalidMix(format!(
                "invalid_input_malicious_rate {rate} is outside [0, 1]"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "benign={},invalid_input={},unauthorized={},exception_denied={},other_error={},anomaly={},invalid_input_malicious_rate={}",
            self.benign,
            self.invalid_input,
            self.unauthorized,
            self.exception_denied,
            self.other_error,
            self.anomaly,
            self.invalid_input_malicious_rate
        )
    }
}

/// Parses `key=value` pairs separated by commas. Keys not given start from
/// the default mix. The result is validated.
impl FromStr for Mix {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut mix = Mix::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| CorpusError::InvalidMix(format!("expected key=value, got `{part}`")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| CorpusError::InvalidMix(format!("`{value}` is not a number")))?;
            let slot = match key.trim() {
                "benign" => &mut mix.benign,
                "invalid_input" => &mut mix.invalid_input,
                "unauthorized" => &mut mix.unauthorized,
                "exception_denied" => &mut mix.exception_denied,
                "other_error" => &mut mix.other_error,
                "anomaly" => &mut mix.anomaly,
                "invalid_input_malicious_rate" => &mut mix.invalid_input_malicious_rate,
                other => return Err(CorpusError::InvalidMix(format!("unknown key `{other}`"))),
            };
            *slot = value;
        }
        mix.validate()?;
        Ok(mix)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub events: Vec<LabeledEvent>,
    /// Generator seed; `None` for corpora read from disk.
    pub seed: Option<u64>,
    pub mix: Option<Mix>,
}

impl Corpus {
    pub fn from_events(events: Vec<LabeledEvent>) -> Self {
        Corpus { events, seed: None, mix: None }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.events.iter().map(|e| e.label).collect()
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn event(name: &str, code: Option<&str>) -> CloudEvent {
        CloudEvent {
            event_name: name.into(),
            error_code: code.map(Into::into),
            error_message: None,
            source_ip: "10.0.0.1".into(),
            user_identity_type: "IAMUser".into(),
            event_time: "2024-03-01T00:00:00Z".into(),
            extra: BTreeMap::new(),
        }
    }

    #[test]
    fn label_examples() {
        assert_eq!(label_event(&event("GetObject", Some("AccessDenied"))), Label::Malicious);
        assert_eq!(label_event(&event("CreateBucket", Some("ValidationException"))), Label::Legit);
        assert_eq!(label_event(&event("DescribeInstances", None)), Label::Legit);
        assert_eq!(label_event(&event("Invoke", Some("AccessDeniedException"))), Label::Malicious);
        assert_eq!(label_event(&event("StopLogging", None)), Label::Malicious);
        assert_eq!(label_event(&event("PutBucketPolicy", Some("ValidationException"))), Label::Malicious);
        assert_eq!(label_event(&event("GetCallerIdentity", Some("InvalidClientTokenId"))), Label::Malicious);
    }

    #[test]
    fn default_mix_is_valid() {
        Mix::default().validate().unwrap();
        assert_eq!(Mix::default().to_string().parse::<Mix>().unwrap(), Mix::default());
    }

    #[test]
    fn bad_mixes() {
        assert!(matches!("benign=0.5".parse::<Mix>(), Err(CorpusError::InvalidMix(_))));
        assert!(matches!("bogus=1".parse::<Mix>(), Err(CorpusError::InvalidMix(_))));
        let negative = Mix { benign: -0.2, exception_denied: 1.0, ..Mix::default() };
        assert!(negative.validate().is_err());
        let rate = Mix { invalid_input_malicious_rate: 1.5, ..Mix::default() };
        assert!(rate.validate().is_err());
    }
}
