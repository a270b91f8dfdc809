//! HTTP service that puts the prompt gate in front of an upstream model.
//!
//! `POST /v1/shield` takes `{"system"?, "user", "context"?}`. Admitted
//! prompts are rewritten from the ontology and forwarded; rejected prompts
//! get a 403 and never leave the process. `GET /healthz` answers `ok`.

mod audit;

use std::future::{Future, IntoFuture};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::Notify;

pub use audit::{AuditRecord, AuditSink, MemoryAudit, StderrAudit};

use crate::backend::{DispatchBackend, HttpBackend, HttpBackendConfig, ModelBackend, ModelRequest};
use crate::fixtures::with_context;
use crate::ontology::{load_ontology, ModelSpec, Ontology, OntologyError};
use crate::shield::{shield, PromptPair, ShieldDecision, REJECTION_REASON};

/// Environment variable overriding the upstream endpoint.
pub const UPSTREAM_URL_ENV: &str = "SHIELD_UPSTREAM_URL";

/// How long in-flight requests may run after a shutdown signal.
pub const SHUTDOWN_DEADLINE: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("loading ontology {path}: {source}")]
    Ontology { path: PathBuf, source: OntologyError },
    #[error("invalid gateway configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub listen: SocketAddr,
    /// `None` serves the bundled reference ontology.
    pub ontology_path: Option<PathBuf>,
    /// Replaces the ontology's default model endpoint.
    pub upstream: Option<String>,
    pub concurrency: usize,
    pub timeout: Duration,
    pub passthrough: bool,
    pub api_key: Option<String>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            ontology_path: None,
            upstream: None,
            concurrency: 8,
            timeout: Duration::from_secs(30),
            passthrough: false,
            api_key: None,
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct ShieldRequest {
    #[serde(default)]
    pub system: Option<String>,
    pub user: String,
    #[serde(default)]
    pub context: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ShieldResponse {
    Allowed {
        #[serde(skip_serializing_if = "Option::is_none", default)]
        prompt_type: Option<String>,
        response: String,
    },
    Rejected { reason: String },
    Error { error: String },
}

#[derive(Clone)]
pub struct GatewayState {
    ontology: Arc<Ontology>,
    backend: Arc<dyn ModelBackend>,
    model: ModelSpec,
    passthrough: bool,
    audit: Arc<dyn AuditSink>,
}

impl GatewayState {
    pub fn new(
        ontology: Arc<Ontology>,
        backend: Arc<dyn ModelBackend>,
        upstream: Option<String>,
        passthrough: bool,
        audit: Arc<dyn AuditSink>,
    ) -> Self {
        let mut model = ontology.default_model().clone();
        if let Some(endpoint) = upstream {
            model.endpoint = endpoint;
        }
        GatewayState { ontology, backend, model, passthrough, audit }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }
}

pub fn router(state: GatewayState) -> Router {
    Router::new()
        .route("/healthz", get(|| async { "ok" }))
        .route("/v1/shield", post(shield_handler))
        .with_state(state)
}

fn reply(status: StatusCode, body: ShieldResponse) -> Response {
    (status, Json(body)).into_response()
}

async fn shield_handler(State(state): State<GatewayState>, body: Bytes) -> Response {
    let mut record = AuditRecord {
        timestamp: chrono::Utc::now().to_rfc3339(),
        decision: "malformed",
        status: 0,
        prompt_type: None,
        upstream_latency_ms: None,
    };
    let response = handle(&state, &body, &mut record).await;
    record.status = response.status().as_u16();
    state.audit.record(&record);
    response
}

async fn handle(state: &GatewayState, body: &[u8], record: &mut AuditRecord) -> Response {
    let request: ShieldRequest = match serde_json::from_slice(body) {
        Ok(r) => r,
        Err(e) => {
            return reply(StatusCode::BAD_REQUEST, ShieldResponse::Error { error: e.to_string() });
        }
    };
    let pair = PromptPair::new(request.user, request.system.unwrap_or_default());
    let context = request.context.unwrap_or_default();

    let (prompts, prompt_type) = if state.passthrough {
        record.decision = "passthrough";
        let user = if context.is_empty() { pair.user } else { with_context(&pair.user, &context) };
        (PromptPair { user, system: pair.system }, None)
    } else {
        match shield(&state.ontology, &pair, &context) {
            ShieldDecision::Rejected { .. } => {
                record.decision = "rejected";
                return reply(
                    StatusCode::FORBIDDEN,
                    ShieldResponse::Rejected { reason: REJECTION_REASON.to_owned() },
                );
            }
            ShieldDecision::Allowed { rewritten, prompt_type } => {
                record.decision = "allowed";
                record.prompt_type = Some(prompt_type.to_string());
                (rewritten, Some(prompt_type.to_string()))
            }
        }
    };

    let req = ModelRequest {
        system: prompts.system,
        user: prompts.user,
        model: state.model.clone(),
        attributes: state.ontology.attributes.clone(),
    };
    let started = Instant::now();
    let result = state.backend.complete(&req).await;
    record.upstream_latency_ms = Some(started.elapsed().as_secs_f64() * 1000.0);
    match result {
        Ok(r) => reply(StatusCode::OK, ShieldResponse::Allowed { prompt_type, response: r.text }),
        Err(e) => {
            record.decision = "upstream_error";
            reply(StatusCode::BAD_GATEWAY, ShieldResponse::Error { error: e.to_string() })
        }
    }
}

/// Loads the configured ontology; the bundled reference when no path is set.
pub fn load_config_ontology(path: Option<&PathBuf>) -> Result<Ontology, GatewayError> {
    match path {
        None => Ok(crate::fixtures::reference_ontology()),
        Some(p) => {
            let bytes = std::fs::read(p).map_err(|e| GatewayError::Ontology {
                path: p.clone(),
                source: OntologyError::MalformedDocument(e.to_string()),
            })?;
            load_ontology(&bytes).map_err(|source| GatewayError::Ontology { path: p.clone(), source })
        }
    }
}

/// Builds the service state from a config. Fails before any socket is bound.
pub fn state_from_config(config: &GatewayConfig, audit: Arc<dyn AuditSink>) -> Result<GatewayState, GatewayError> {
    let ontology = load_config_ontology(config.ontology_path.as_ref())?;
    if let Some(upstream) = &config.upstream {
        let parsed = url::Url::parse(upstream)
            .map_err(|e| GatewayError::Config(format!("upstream `{upstream}`: {e}")))?;
        if !matches!(parsed.scheme(), "http" | "https") {
            return Err(GatewayError::Config(format!("upstream `{upstream}` must be http(s)")));
        }
    }
    let http = HttpBackend::new(HttpBackendConfig {
        timeout: config.timeout,
        max_in_flight: config.concurrency,
        api_key: config.api_key.clone(),
        endpoint_override: None,
    })
    .map_err(|e| GatewayError::Config(e.to_string()))?;
    Ok(GatewayState::new(
        Arc::new(ontology),
        Arc::new(DispatchBackend::new(http)),
        config.upstream.clone(),
        config.passthrough,
        audit,
    ))
}

/// Serves until `shutdown` resolves, then drains in-flight requests for at
/// most [`SHUTDOWN_DEADLINE`].
pub async fn serve_on<F>(listener: TcpListener, state: GatewayState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    let signalled = Arc::new(Notify::new());
    let notify = signalled.clone();
    let server = axum::serve(listener, router(state)).with_graceful_shutdown(async move {
        shutdown.await;
        notify.notify_one();
    });
    let server = server.into_future();
    tokio::pin!(server);
    tokio::select! {
        res = &mut server => res,
        _ = async { signalled.notified().await; tokio::time::sleep(SHUTDOWN_DEADLINE).await } => {
            tracing::warn!("shutdown deadline elapsed with requests still in flight");
            Ok(())
        }
    }
}

pub async fn serve<F>(config: GatewayConfig, shutdown: F) -> Result<(), GatewayError>
where
    F: Future<Output = ()> + Send + 'static,
{
    let state = state_from_config(&config, Arc::new(StderrAudit))?;
    let listener = TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, endpoint = %state.model().endpoint, "gateway listening");
    serve_on(listener, state, shutdown).await?;
    Ok(())
}
