use crate::event::{is_exception, is_invalid_input, is_unauthorized, CloudEvent, Label};
use crate::text::normalize;

/// Event predicate a directive sentence conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCondition {
    /// errorCode in the unauthorized set.
    Unauthorized,
    /// Any error on a `Describe*` call.
    DescribeError,
    /// errorCode in the invalid-input set.
    InvalidInput,
    /// errorCode containing "Exception".
    Exception,
    NoError,
}

impl ErrorCondition {
    /// `None` stands for "no event available", which reads as no error.
    pub fn holds(self, event: Option<&CloudEvent>) -> bool {
        let code = event.and_then(|e| e.error_code.as_deref());
        match self {
            ErrorCondition::Unauthorized => code.is_some_and(is_unauthorized),
            ErrorCondition::DescribeError => {
                code.is_some() && event.is_some_and(|e| e.event_name.starts_with("Describe"))
            }
            ErrorCondition::InvalidInput => code.is_some_and(is_invalid_input),
            ErrorCondition::Exception => code.is_some_and(is_exception),
            ErrorCondition::NoError => code.is_none(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Directive {
    pub condition: ErrorCondition,
    pub label: Label,
}

// Sentences are matched after normalization, so commas and semicolons in
// the source prompt do not matter.
const CATALOG: [(&str, ErrorCondition, Label); 5] = [
    ("unauthorized access is malicious", ErrorCondition::Unauthorized, Label::Malicious),
    (
        "if an error exists when describing events then it is malicious",
        ErrorCondition::DescribeError,
        Label::Malicious,
    ),
    (
        "if there is an error because of an invalid input it is not malicious",
        ErrorCondition::InvalidInput,
        Label::Legit,
    ),
    ("if the system allows exceptions it is not malicious", ErrorCondition::Exception, Label::Legit),
    ("most of the events with no errors are legit", ErrorCondition::NoError, Label::Legit),
];

/// Directives in the order they appear in the prompt. The first one whose
/// condition holds decides.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectiveRuleSet(pub Vec<Directive>);

impl DirectiveRuleSet {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn first_match(&self, event: Option<&CloudEvent>) -> Option<&Directive> {
        self.0.iter().find(|d| d.condition.holds(event))
    }
}

pub fn extract_directives(system_prompt: &str) -> DirectiveRuleSet {
    let haystack = format!(" {} ", normalize(system_prompt));
    let mut found: Vec<(usize, Directive)> = CATALOG
        .iter()
        .filter_map(|(phrase, condition, label)| {
            haystack
                .find(&format!(" {phrase} "))
                .map(|pos| (pos, Directive { condition: *condition, label: *label }))
        })
        .collect();
    found.sort_by_key(|(pos, _)| *pos);
    DirectiveRuleSet(found.into_iter().map(|(_, d)| d).collect())
}
