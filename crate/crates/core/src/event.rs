//! CloudTrail-style event records, classification labels, and the error-code
//! categories shared by the labeler and the simulated model.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Malicious,
    Legit,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Malicious, Label::Legit];

    pub fn other(self) -> Label {
        match self {
            Label::Malicious => Label::Legit,
            Label::Legit => Label::Malicious,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Malicious => "Malicious",
            Label::Legit => "Legit",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "malicious" => Ok(Label::Malicious),
            "legit" => Ok(Label::Legit),
            _ => Err(format!("unknown label `{s}`")),
        }
    }
}

/// One audit-log record. Serialized field names follow CloudTrail.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CloudEvent {
    #[serde(rename = "eventName")]
    pub event_name: String,
    #[serde(rename = "errorCode", default)]
    pub error_code: Option<String>,
    #[serde(rename = "errorMessage", default)]
    pub error_message: Option<String>,
    #[serde(rename = "sourceIPAddress")]
    pub source_ip: String,
    #[serde(rename = "userIdentityType")]
    pub user_identity_type: String,
    #[serde(rename = "eventTime")]
    pub event_time: String,
    #[serde(default)]
    pub extra: BTreeMap<String, String>,
}

impl CloudEvent {
    /// Compact JSON, as embedded into prompts. Carries no label.
    pub fn to_context(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }

    pub fn has_error(&self) -> bool {
        self.error_code.is_some()
    }

    /// Checks the record-level invariants; returns the offending field.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.event_name.trim().is_empty() {
            return Err("eventName");
        }
        if self.error_message.is_some() && self.error_code.is_none() {
            return Err("errorMessage");
        }
        Ok(())
    }
}

/// Error codes that mean the caller lacked permission.
pub const UNAUTHORIZED_CODES: [&str; 2] = ["AccessDenied", "UnauthorizedOperation"];

/// Error codes caused by a malformed request.
pub const INVALID_INPUT_CODES: [&str; 2] = ["ValidationException", "InvalidParameterValue"];

/// Event names treated as suspicious regardless of outcome: audit tampering,
/// credential minting, and policy changes.
pub const ANOMALY_EVENT_NAMES: [&str; 8] = [
    "StopLogging",
    "DeleteTrail",
    "UpdateTrail",
    "DeleteFlowLogs",
    "PutBucketPolicy",
    "CreateAccessKey",
    "AttachUserPolicy",
    "DisableKey",
];

pub fn is_unauthorized(code: &str) -> bool {
    UNAUTHORIZED_CODES.contains(&code)
}

/// Any code containing "Exception", including the invalid-input ones.
pub fn is_exception(code: &str) -> bool {
    code.contains("Exception")
}

pub fn is_invalid_input(code: &str) -> bool {
    INVALID_INPUT_CODES.contains(&code)
}

/// Exception codes that are not input mistakes, e.g. `AccessDeniedException`.
pub fn is_exception_denied(code: &str) -> bool {
    is_exception(code) && !is_invalid_input(code)
}

pub fn is_anomalous_event_name(name: &str) -> bool {
    ANOMALY_EVENT_NAMES.contains(&name)
}
