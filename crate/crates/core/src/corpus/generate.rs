use std::collections::{BTreeMap, HashSet};

use chrono::{DateTime, Duration, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, CorpusError, LabeledEvent, Mix};
use crate::event::{CloudEvent, ANOMALY_EVENT_NAMES};

pub const REFERENCE_SEED: u64 = 1;
pub const REFERENCE_SIZE: usize = 493;

const ACCOUNT_ID: &str = "123456789012";
const REGIONS: [&str; 3] = ["us-east-1", "us-west-2", "eu-west-1"];
const IDENTITY_TYPES: [&str; 4] = ["IAMUser", "AssumedRole", "Root", "AWSService"];
const USER_AGENTS: [&str; 5] = [
    "aws-cli/2.15.30 Python/3.11.8 Linux/6.1",
    "console.amazonaws.com",
    "Boto3/1.34.69 Python/3.12.2",
    "aws-sdk-go-v2/1.25.3",
    "Terraform/1.7.5",
];

// (eventName, eventSource)
const BENIGN_CALLS: [(&str, &str); 14] = [
    ("DescribeInstances", "ec2"),
    ("DescribeSecurityGroups", "ec2"),
    ("DescribeVolumes", "ec2"),
    ("DescribeDBInstances", "rds"),
    ("ListBuckets", "s3"),
    ("GetObject", "s3"),
    ("PutObject", "s3"),
    ("GetBucketLocation", "s3"),
    ("ListUsers", "iam"),
    ("GetCallerIdentity", "sts"),
    ("AssumeRole", "sts"),
    ("ListFunctions", "lambda"),
    ("CreateTags", "ec2"),
    ("RunInstances", "ec2"),
];

// Calls that take user-supplied parameters; never Describe*.
const MUTATING_CALLS: [(&str, &str); 7] = [
    ("RunInstances", "ec2"),
    ("CreateBucket", "s3"),
    ("PutObject", "s3"),
    ("CreateFunction", "lambda"),
    ("CreateSecurityGroup", "ec2"),
    ("AuthorizeSecurityGroupIngress", "ec2"),
    ("UpdateFunctionConfiguration", "lambda"),
];

const SENSITIVE_CALLS: [(&str, &str); 8] = [
    ("GetSecretValue", "secretsmanager"),
    ("ListSecrets", "secretsmanager"),
    ("Decrypt", "kms"),
    ("Invoke", "lambda"),
    ("DescribeInstances", "ec2"),
    ("GetObject", "s3"),
    ("ListRoles", "iam"),
    ("DescribeTable", "dynamodb"),
];

const INVALID_INPUT_ERRORS: [(&str, &str); 2] = [
    ("ValidationException", "1 validation error detected: value failed to satisfy constraint"),
    ("InvalidParameterValue", "Value for parameter is invalid"),
];

const UNAUTHORIZED_ERRORS: [(&str, &str); 2] = [
    ("AccessDenied", "Access Denied"),
    ("UnauthorizedOperation", "You are not authorized to perform this operation."),
];

const DENIED_EXCEPTIONS: [(&str, &str); 4] = [
    ("AccessDeniedException", "User is not authorized to perform this action"),
    ("UnrecognizedClientException", "The security token included in the request is invalid."),
    ("NotAuthorizedException", "Incorrect username or password."),
    ("InvalidSignatureException", "Signature expired"),
];

const OTHER_ERRORS: [(&str, &str); 4] = [
    ("AuthFailure", "AWS was not able to validate the provided access credentials"),
    ("InvalidClientTokenId", "The security token included in the request is invalid."),
    ("SignatureDoesNotMatch", "The request signature we calculated does not match the signature you provided."),
    ("IncompleteSignature", "Request must contain a signature that conforms to AWS standards"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Benign,
    InvalidInput,
    InvalidInputMalicious,
    Unauthorized,
    ExceptionDenied,
    OtherError,
    Anomaly,
}

/// Splits `n` into integer counts proportional to `ratios` (largest
/// remainder, ties to the earlier category).
fn quotas(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut short = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in order {
        if short == 0 {
            break;
        }
        if ratios[i] > 0.0 {
            counts[i] += 1;
            short -= 1;
        }
    }
    counts
}

fn category_plan(n: usize, mix: &Mix) -> Vec<Category> {
    let counts = quotas(n, &mix.ratios());
    let invalid_malicious =
        ((counts[1] as f64) * mix.invalid_input_malicious_rate).round() as usize;
    let mut plan = Vec::with_capacity(n);
    plan.extend(std::iter::repeat_n(Category::Benign, counts[0]));
    plan.extend(std::iter::repeat_n(Category::InvalidInput, counts[1] - invalid_malicious));
    plan.extend(std::iter::repeat_n(Category::InvalidInputMalicious, invalid_malicious));
    plan.extend(std::iter::repeat_n(Category::Unauthorized, counts[2]));
    plan.extend(std::iter::repeat_n(Category::ExceptionDenied, counts[3]));
    plan.extend(std::iter::repeat_n(Category::OtherError, counts[4]));
    plan.extend(std::iter::repeat_n(Category::Anomaly, counts[5]));
    plan
}

fn anomaly_source(name: &str) -> &'static str {
    match name {
        "StopLogging" | "DeleteTrail" | "UpdateTrail" => "cloudtrail",
        "DeleteFlowLogs" => "ec2",
        "PutBucketPolicy" => "s3",
        "DisableKey" => "kms",
        _ => "iam",
    }
}

struct EventFactory {
    rng: ChaCha8Rng,
    epoch: DateTime<Utc>,
}

impl EventFactory {
    fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        items.choose(&mut self.rng).expect("non-empty table")
    }

    fn hex_id(&mut self) -> String {
        let hi: u64 = self.rng.random();
        let lo: u32 = self.rng.random();
        format!("{hi:016x}-{lo:08x}")
    }

    fn ip(&mut self, external: bool) -> String {
        if external {
            let prefix = *self.pick(&["198.51.100", "203.0.113", "185.220.101"]);
            format!("{prefix}.{}", self.rng.random_range(1..255))
        } else {
            format!("10.{}.{}.{}", self.rng.random_range(0..4), self.rng.random_range(0..255), self.rng.random_range(1..255))
        }
    }

    fn build(&mut self, category: Category) -> CloudEvent {
        let (name, source, error, external) = match category {
            Category::Benign => {
                let (n, s) = *self.pick(&BENIGN_CALLS);
                (n, s, None, false)
            }
            Category::InvalidInput => {
                let (n, s) = *self.pick(&MUTATING_CALLS);
                (n, s, Some(*self.pick(&INVALID_INPUT_ERRORS)), false)
            }
            Category::InvalidInputMalicious => {
                let n = *self.pick(&ANOMALY_EVENT_NAMES);
                (n, anomaly_source(n), Some(*self.pick(&INVALID_INPUT_ERRORS)), true)
            }
            Category::Unauthorized => {
                let (n, s) = *self.pick(&SENSITIVE_CALLS);
                (n, s, Some(*self.pick(&UNAUTHORIZED_ERRORS)), true)
            }
            Category::ExceptionDenied => {
                let (n, s) = *self.pick(&SENSITIVE_CALLS);
                (n, s, Some(*self.pick(&DENIED_EXCEPTIONS)), true)
            }
            Category::OtherError => {
                let (n, s) = *self.pick(&SENSITIVE_CALLS);
                (n, s, Some(*self.pick(&OTHER_ERRORS)), true)
            }
            Category::Anomaly => {
                let n = *self.pick(&ANOMALY_EVENT_NAMES);
                (n, anomaly_source(n), None, true)
            }
        };

        let region = *self.pick(&REGIONS);
        let read_only = ["Describe", "List", "Get"].iter().any(|p| name.starts_with(p));
        let offset = Duration::seconds(self.rng.random_range(0..30 * 24 * 3600));
        let mut extra = BTreeMap::new();
        extra.insert("awsRegion".to_owned(), region.to_owned());
        extra.insert("region".to_owned(), region.to_owned());
        extra.insert("recipientAccountId".to_owned(), ACCOUNT_ID.to_owned());
        extra.insert("eventVersion".to_owned(), "1.08".to_owned());
        extra.insert("eventType".to_owned(), "AwsApiCall".to_owned());
        extra.insert("eventSource".to_owned(), format!("{source}.amazonaws.com"));
        extra.insert("readOnly".to_owned(), read_only.to_string());
        extra.insert("userAgent".to_owned(), (*self.pick(&USER_AGENTS)).to_owned());
        extra.insert("eventID".to_owned(), self.hex_id());
        extra.insert("requestID".to_owned(), self.hex_id());

        CloudEvent {
            event_name: name.to_owned(),
            error_code: error.map(|(code, _)| code.to_owned()),
            error_message: error.map(|(_, msg)| msg.to_owned()),
            source_ip: self.ip(external),
            user_identity_type: (*self.pick(&IDENTITY_TYPES)).to_owned(),
            event_time: (self.epoch + offset).format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            extra,
        }
    }
}

/// Deterministic corpus of `n` distinct events. Category counts follow `mix`
/// exactly (largest-remainder rounding); order and field values come from
/// a ChaCha stream seeded with `seed`.
pub fn generate_corpus(seed: u64, n: usize, mix: &Mix) -> Result<Corpus, CorpusError> {
    mix.validate()?;
    let mut factory = EventFactory {
        rng: ChaCha8Rng::seed_from_u64(seed),
        epoch: DateTime::parse_from_rfc3339("2024-03-01T00:00:00Z")
            .expect("valid epoch")
            .with_timezone(&Utc),
    };

    let mut plan = category_plan(n, mix);
    plan.shuffle(&mut factory.rng);

    let mut seen = HashSet::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for category in plan {
        let event = loop {
            let candidate = factory.build(category);
            if seen.insert(candidate.clone()) {
                break candidate;
            }
        };
        events.push(LabeledEvent::from_event(event));
    }

    Ok(Corpus { events, seed: Some(seed), mix: Some(*mix) })
}
