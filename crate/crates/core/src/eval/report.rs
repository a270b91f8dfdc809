use serde::Serialize;
use sha2::{Digest, Sha256};

use super::metrics::{confusion, macro_average, ConfusionMatrix, MetricsRow};
use super::scenario::{PredictionFailure, Scenario, ScenarioRun};
use crate::corpus::{Corpus, Mix};
use crate::event::Label;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub label: Label,
    pub matrix: ConfusionMatrix,
    pub metrics: MetricsRow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixtureDigest {
    pub system_sha256: String,
    pub user_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub title: String,
    pub events: usize,
    /// Events without a usable prediction; each is scored as the wrong class.
    pub failures: usize,
    /// Subset of `failures` refused by the gate.
    pub rejections: usize,
    pub per_class: Vec<ClassReport>,
    #[serde(rename = "macro")]
    pub macro_avg: MetricsRow,
    pub fixtures: FixtureDigest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusMeta {
    pub seed: Option<u64>,
    pub size: usize,
    pub mix: Option<Mix>,
    pub pruned_keys: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub corpus: CorpusMeta,
    pub scenarios: Vec<ScenarioReport>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Scores one scenario run against the corpus labels.
pub fn score_run(run: &ScenarioRun, corpus: &Corpus) -> ScenarioReport {
    let truth = corpus.labels();
    let predicted: Vec<Label> = run
        .predictions
        .iter()
        .zip(&truth)
        .map(|(p, t)| match p {
            Ok(label) => *label,
            Err(_) => t.other(),
        })
        .collect();

    let per_class: Vec<ClassReport> = Label::ALL
        .iter()
        .map(|&label| {
            let matrix = confusion(&truth, &predicted, label).expect("one prediction per event");
            ClassReport { label, matrix, metrics: MetricsRow::from_matrix(&matrix) }
        })
        .collect();
    let rows: Vec<MetricsRow> = per_class.iter().map(|c| c.metrics).collect();

    let incoming = run.scenario.incoming_pair();
    ScenarioReport {
        scenario: run.scenario,
        title: run.scenario.title().to_owned(),
        events: truth.len(),
        failures: run.failures(),
        rejections: run
            .predictions
            .iter()
            .filter(|p| matches!(p, Err(PredictionFailure::Rejected(_))))
            .count(),
        per_class,
        macro_avg: macro_average(&rows),
        fixtures: FixtureDigest {
            system_sha256: sha256_hex(&incoming.system),
            user_sha256: sha256_hex(&incoming.user),
        },
    }
}

const NAME_WIDTH: usize = 18;

/// One table row: name, then precision, recall, F1, accuracy to two decimals.
pub fn format_row(name: &str, row: &MetricsRow) -> String {
    format!(
        "{name:<NAME_WIDTH$}{:>10.2}{:>8.2}{:>10.2}{:>10.2}",
        row.precision, row.recall, row.f1, row.accuracy
    )
}

pub fn render_table(report: &EvalReport) -> String {
    let mut out = format!(
        "{:<NAME_WIDTH$}{:>10}{:>8}{:>10}{:>10}\n",
        "Scenario", "Precision", "Recall", "F1 Score", "Accuracy"
    );
    for s in &report.scenarios {
        out.push_str(&format_row(&s.title, &s.macro_avg));
        out.push('\n');
    }
    out
}

/// Full-precision machine-readable form.
pub fn render_json(report: &EvalReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}
