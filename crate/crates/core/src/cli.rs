//! Command-line entry points.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error, 3 prompt rejected by the gate, 4 too many failed predictions.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::backend::{DispatchBackend, HttpBackend, HttpBackendConfig, API_KEY_ENV};
use crate::corpus::{
    generate_corpus, prune_features, prune_report, read_corpus, render_corpus, Corpus, Mix,
    REFERENCE_SEED, REFERENCE_SIZE,
};
use crate::eval::{evaluate, parse_scenarios, render_json, render_table, DEFAULT_EVAL_CONCURRENCY};
use crate::gateway::{self, GatewayConfig, GatewayError, UPSTREAM_URL_ENV};
use crate::ontology::{lint_ontology, load_ontology, Ontology, SIMULATED_ENDPOINT};
use crate::shield::{shield, PromptPair, ShieldDecision};

pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_REJECTED: u8 = 3;
pub const EXIT_FAILURES: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "shieldgate", version, about = "Ontology-driven prompt gate and evaluation harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one prompt pair through the gate and print the decision.
    Validate(ValidateArgs),
    /// Score the three prompting scenarios over a labeled corpus.
    Eval(EvalArgs),
    /// Run the HTTP gateway.
    Serve(ServeArgs),
    /// Report questionable but loadable ontology content.
    OntologyLint(LintArgs),
    /// Write a synthetic labeled corpus as JSON lines.
    CorpusGen(CorpusGenArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Ontology document; the bundled reference ontology when omitted.
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    #[arg(long)]
    pub user: String,
    #[arg(long, default_value = "")]
    pub system: String,
    /// Text substituted for the event placeholder.
    #[arg(long, default_value = "")]
    pub context: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// JSON-lines corpus; generated from --seed/--n when omitted.
    #[arg(long, conflicts_with_all = ["seed", "n", "mix"])]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = REFERENCE_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = REFERENCE_SIZE)]
    pub n: usize,
    /// Comma-separated key=value overrides of the default category mix.
    #[arg(long)]
    pub mix: Option<Mix>,
    /// Keep constant and redundant fields in the event context.
    #[arg(long)]
    pub no_prune: bool,
    /// `simulated`, `ontology` (the ontology's default model) or an http(s) URL.
    #[arg(long, default_value = "ontology")]
    pub backend: String,
    /// Comma-separated scenario ids, or `all`.
    #[arg(long, default_value = "all")]
    pub scenarios: String,
    /// Also write the full JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Largest tolerated share of events without a usable prediction.
    #[arg(long, default_value_t = 0.05)]
    pub max_failure_rate: f64,
    #[arg(long, default_value_t = DEFAULT_EVAL_CONCURRENCY)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TOML file with any of: listen, ontology, upstream, concurrency,
    /// timeout_secs, passthrough. Flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    #[arg(long)]
    pub ontology: Option<PathBuf>,
    /// Upstream chat-completions URL; overrides the ontology's default model.
    #[arg(long)]
    pub upstream: Option<String>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Forward prompts unmodified. For baseline measurements only.
    #[arg(long)]
    pub passthrough: bool,
}

#[derive(Debug, Args)]
pub struct LintArgs {
    #[arg(long)]
    pub ontology: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorpusGenArgs {
    #[arg(long, default_value_t = REFERENCE_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = REFERENCE_SIZE)]
    pub n: usize,
    #[arg(long)]
    pub mix: Option<Mix>,
    /// Drop constant and redundant fields.
    #[arg(long)]
    pub prune: bool,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServeFile {
    listen: Option<SocketAddr>,
    ontology: Option<PathBuf>,
    upstream: Option<String>,
    concurrency: Option<usize>,
    timeout_secs: Option<u64>,
    passthrough: Option<bool>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure { code: EXIT_RUNTIME, message: message.into() }
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let _ = tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .try_init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::Eval(a) => runtime()?.block_on(eval(a)),
        Command::Serve(a) => runtime()?.block_on(serve(a)),
        Command::OntologyLint(a) => lint(a),
        Command::CorpusGen(a) => corpus_gen(a),
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Runtime::new().map_err(|e| Failure::runtime(format!("starting runtime: {e}")))
}

fn read_ontology(path: Option<&Path>) -> Result<Ontology, Failure> {
    let Some(path) = path else {
        return Ok(crate::fixtures::reference_ontology());
    };
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::config(format!("reading ontology {}: {e}", path.display())))?;
    load_ontology(&bytes).map_err(|e| Failure::config(format!("ontology {}: {e}", path.display())))
}

fn validate(a: ValidateArgs) -> Result<u8, Failure> {
    let o = read_ontology(a.ontology.as_deref())?;
    let pair = PromptPair::new(a.user, a.system);
    let (body, code) = match shield(&o, &pair, &a.context) {
        ShieldDecision::Allowed { rewritten, prompt_type } => (
            json!({
                "status": "allowed",
                "prompt_type": prompt_type.as_str(),
                "system": rewritten.system,
                "user": rewritten.user,
            }),
            0,
        ),
        ShieldDecision::Rejected { reason } => (json!({"status": "rejected", "reason": reason}), EXIT_REJECTED),
    };
    println!("{}", serde_json::to_string_pretty(&body).expect("json value serializes"));
    Ok(code)
}

/// Points the ontology's default model at the chosen backend.
fn select_backend(o: &mut Ontology, backend: &str) -> Result<(), Failure> {
    let endpoint = match backend {
        "ontology" => return Ok(()),
        "simulated" => SIMULATED_ENDPOINT.to_owned(),
        url => {
            let parsed = url::Url::parse(url)
                .map_err(|e| Failure::config(format!("--backend `{url}`: {e}")))?;
            if !matches!(parsed.scheme(), "http" | "https") {
                return Err(Failure::config(format!(
                    "--backend must be simulated, ontology or an http(s) URL, got `{url}`"
                )));
            }
            url.to_owned()
        }
    };
    let idx = o.models.iter().position(|m| m.default).unwrap_or(0);
    o.models[idx].endpoint = endpoint;
    Ok(())
}

fn load_eval_corpus(a: &EvalArgs) -> Result<Corpus, Failure> {
    match &a.corpus {
        Some(path) => read_corpus(path)
            .map_err(|e| Failure::config(format!("corpus {}: {e}", path.display()))),
        None => generate_corpus(a.seed, a.n, &a.mix.unwrap_or_default())
            .map_err(|e| Failure::config(e.to_string())),
    }
}

async fn eval(a: EvalArgs) -> Result<u8, Failure> {
    let scenarios = parse_scenarios(&a.scenarios).map_err(|e| Failure::config(e.to_string()))?;
    if !(0.0..=1.0).contains(&a.max_failure_rate) {
        return Err(Failure::config("--max-failure-rate must be within [0, 1]"));
    }
    let mut o = read_ontology(a.ontology.as_deref())?;
    select_backend(&mut o, &a.backend)?;

    let raw = load_eval_corpus(&a)?;
    let (corpus, pruned_keys) = if a.no_prune {
        (raw, Vec::new())
    } else {
        let keys = prune_report(&raw).removed().into_iter().map(str::to_owned).collect();
        (prune_features(&raw), keys)
    };

    let http = HttpBackend::new(HttpBackendConfig {
        timeout: Duration::from_secs(a.timeout_secs),
        max_in_flight: a.concurrency.max(1),
        ..HttpBackendConfig::from_env()
    })
    .map_err(|e| Failure::runtime(e.to_string()))?;
    let backend = DispatchBackend::new(http);

    let (report, runs) = evaluate(&o, &backend, &corpus, &scenarios, pruned_keys, a.concurrency).await;
    print!("{}", render_table(&report));

    if let Some(out) = &a.out {
        std::fs::write(out, render_json(&report))
            .map_err(|e| Failure::runtime(format!("writing {}: {e}", out.display())))?;
    }

    let total: usize = runs.iter().map(|r| r.predictions.len()).sum();
    let failed: usize = runs.iter().map(|r| r.failures()).sum();
    for run in &runs {
        if let Some(Err(first)) = run.predictions.iter().find(|p| p.is_err()) {
            tracing::warn!(scenario = %run.scenario, failures = run.failures(), "first failure: {first:?}");
        }
    }
    if total > 0 && failed as f64 / total as f64 > a.max_failure_rate {
        eprintln!(
            "error: {failed} of {total} predictions failed, above the {} threshold",
            a.max_failure_rate
        );
        return Ok(EXIT_FAILURES);
    }
    Ok(0)
}

fn serve_config(a: &ServeArgs) -> Result<GatewayConfig, Failure> {
    let file: ServeFile = match &a.config {
        None => ServeFile::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("reading {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
    };
    let defaults = GatewayConfig::default();
    let env_upstream = std::env::var(UPSTREAM_URL_ENV).ok().filter(|u| !u.is_empty());
    Ok(GatewayConfig {
        listen: a.listen.or(file.listen).unwrap_or(defaults.listen),
        ontology_path: a.ontology.clone().or(file.ontology),
        upstream: a.upstream.clone().or(env_upstream).or(file.upstream),
        concurrency: a.concurrency.or(file.concurrency).unwrap_or(defaults.concurrency).max(1),
        timeout: a
            .timeout_secs
            .or(file.timeout_secs)
            .map(Duration::from_secs)
            .unwrap_or(defaults.timeout),
        passthrough: a.passthrough || file.passthrough.unwrap_or(false),
        api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
    })
}

async fn shutdown_signal() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => {
                tokio::select! {
                    _ = tokio::signal::ctrl_c() => {}
                    _ = term.recv() => {}
                }
            }
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
    tracing::info!("shutdown requested");
}

async fn serve(a: ServeArgs) -> Result<u8, Failure> {
    let config = serve_config(&a)?;
    if config.passthrough {
        tracing::warn!("passthrough mode: prompts are forwarded without validation");
    }
    gateway::serve(config, shutdown_signal()).await.map_err(|e| match e {
        GatewayError::Io(e) => Failure::runtime(e.to_string()),
        other => Failure::config(other.to_string()),
    })?;
    Ok(0)
}

fn lint(a: LintArgs) -> Result<u8, Failure> {
    let o = read_ontology(a.ontology.as_deref())?;
    let findings = lint_ontology(&o);
    if findings.is_empty() {
        println!("no findings");
    }
    for f in findings {
        println!("{f}");
    }
    Ok(0)
}

fn corpus_gen(a: CorpusGenArgs) -> Result<u8, Failure> {
    let mut corpus = generate_corpus(a.seed, a.n, &a.mix.unwrap_or_default())
        .map_err(|e| Failure::config(e.to_string()))?;
    if a.prune {
        corpus = prune_features(&corpus);
    }
    let text = render_corpus(&corpus);
    match &a.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::runtime(format!("writing {}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(0)
}
