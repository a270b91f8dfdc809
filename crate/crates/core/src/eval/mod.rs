//! Scenario runs over a labeled corpus, confusion matrices, and
//! precision / recall / F1 / accuracy with macro averaging.

mod metrics;
mod report;
mod scenario;

pub use metrics::{
    accuracy, confusion, f1, macro_average, precision, recall, ConfusionMatrix, LengthMismatch,
    MetricsRow,
};
pub use report::{
    format_row, render_json, render_table, score_run, sha256_hex, ClassReport, CorpusMeta,
    EvalReport, FixtureDigest, ScenarioReport,
};
pub use scenario::{
    effective_prompts_for, parse_scenarios, run_scenario, Prediction, PredictionFailure, Scenario,
    ScenarioRun, UnknownScenario, DEFAULT_EVAL_CONCURRENCY,
};

use crate::backend::ModelBackend;
use crate::corpus::Corpus;
use crate::ontology::Ontology;

/// Runs each scenario in turn and scores it. `pruned_keys` is recorded as
/// corpus metadata only.
pub async fn evaluate<B>(
    o: &Ontology,
    backend: &B,
    corpus: &Corpus,
    scenarios: &[Scenario],
    pruned_keys: Vec<String>,
    concurrency: usize,
) -> (EvalReport, Vec<ScenarioRun>)
where
    B: ModelBackend + ?Sized,
{
    let mut runs = Vec::with_capacity(scenarios.len());
    let mut reports = Vec::with_capacity(scenarios.len());
    for &scenario in scenarios {
        let run = run_scenario(scenario, o, backend, corpus, concurrency).await;
        reports.push(score_run(&run, corpus));
        runs.push(run);
    }
    let report = EvalReport {
        corpus: CorpusMeta {
            seed: corpus.seed,
            size: corpus.len(),
            mix: corpus.mix,
            pruned_keys,
        },
        scenarios: reports,
    };
    (report, runs)
}
